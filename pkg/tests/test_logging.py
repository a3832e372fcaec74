import os
import logging
import tempfile
from unittest import TestCase

from ecorec import setup_logging


QUIET = """version: 1
disable_existing_loggers: false
handlers:
    quiet:
        class: logging.NullHandler
loggers:
    ecorec:
        level: WARNING
        handlers: [quiet]
        propagate: false
"""


class LoggingTestCase(TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.tmp.name, 'quiet.yml')
        with open(self.path, 'w') as f:
            f.write(QUIET)
        self.saved = os.environ.pop('ECOREC_LOGGING', None)

    def tearDown(self):
        if self.saved is None:
            os.environ.pop('ECOREC_LOGGING', None)
        else:
            os.environ['ECOREC_LOGGING'] = self.saved
        setup_logging()
        self.tmp.cleanup()

    def test_packaged_config(self):
        path = setup_logging()
        self.assertEqual(os.path.basename(path), 'logging.yml')
        self.assertEqual(logging.getLogger('ecorec').level, logging.DEBUG)

    def test_environment_override(self):
        os.environ['ECOREC_LOGGING'] = self.path
        self.assertEqual(setup_logging(), self.path)
        self.assertEqual(logging.getLogger('ecorec').level, logging.WARNING)

    def test_explicit_path_wins(self):
        os.environ['ECOREC_LOGGING'] = os.path.join(self.tmp.name, 'missing.yml')
        self.assertEqual(setup_logging(self.path), self.path)
        self.assertEqual(logging.getLogger('ecorec').level, logging.WARNING)
