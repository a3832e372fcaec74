__version__ = '0.1.0'

import os
import logging.config
import yaml
import logging


def setup_logging(path=None):
    """
    Configure the ecorec loggers from a YAML dictConfig file.

    The file is, in order of preference, `path`, the file named by the ECOREC_LOGGING environment variable, or the
    logging.yml shipped next to this module. Relative paths resolve against the package directory.
    """
    path = path or os.environ.get('ECOREC_LOGGING') or 'logging.yml'
    path = os.path.join(os.path.dirname(__file__), path)
    if os.path.exists(path):
        with open(path, 'rt') as f:
            config = yaml.safe_load(f.read())
        logging.config.dictConfig(config)
    else:
        logging.basicConfig(level=logging.INFO)
    return path


setup_logging()
logger = logging.getLogger('ecorec')
