#!/usr/bin/env python3
# -*- coding: utf-8 -*-
#
# ecorec documentation build configuration file.
#
# This file is execfile()d with the current directory set to its
# containing dir.

import os
import sys
sys.path.insert(0, os.path.abspath('../..'))
import ecorec

# -- General configuration ------------------------------------------------

extensions = ['sphinx.ext.autodoc', 'sphinx.ext.mathjax', 'numpydoc']

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = 'ecorec'
copyright = '2026, ecorec developers'
author = 'ecorec developers'

version = ecorec.__version__
release = version

language = None
exclude_patterns = []
pygments_style = 'sphinx'
todo_include_todos = False

# -- Options for HTML output ----------------------------------------------

html_theme = 'sphinx_rtd_theme'
html_static_path = []
htmlhelp_basename = 'ecorecdoc'

# -- Options for manual page output ---------------------------------------

man_pages = [
    (master_doc, 'ecorec', 'ecorec Documentation',
     [author], 1)
]

# numpydoc generates a table of class members that autodoc already lists
numpydoc_show_class_members = False
autoclass_content = 'both'
