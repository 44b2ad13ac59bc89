# Sphinx configuration for the qrlfolio documentation.

import os
import sys

# project root, two levels above docs/source/conf.py
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))

# -- Project information -----------------------------------------------------

project = 'qrlfolio'
copyright = '2026, qrlfolio contributors'  # pylint: disable=redefined-builtin
author = 'qrlfolio contributors'

# kept in sync by scripts/setup_versions.py
release = '0.1.0.dev0'

# -- General configuration ---------------------------------------------------

extensions = [
    'sphinx.ext.viewcode',
    'sphinx.ext.intersphinx',
    'sphinx.ext.napoleon',
    'sphinx.ext.autodoc',
    'sphinx_autodoc_typehints',
    'sphinxemoji.sphinxemoji',
]

intersphinx_mapping = {
    'python': ('https://docs.python.org/3', None),
    'bpc_utils': ('https://bpc-utils.readthedocs.io/en/latest/', None),
    'numpy': ('https://numpy.org/doc/stable/', None),
    'pandas': ('https://pandas.pydata.org/docs/', None),
}

autodoc_typehints = 'description'
autodoc_member_order = 'bysource'
autoclass_content = 'class'

# docstrings are Google style throughout
napoleon_google_docstring = True
napoleon_numpy_docstring = False
napoleon_include_init_with_doc = True
napoleon_include_private_with_doc = False
napoleon_use_ivar = True
napoleon_use_param = True
napoleon_use_rtype = True

templates_path = ['_templates']
exclude_patterns = []  # type: ignore[var-annotated]

# -- Options for HTML output -------------------------------------------------

html_theme = 'alabaster'
html_static_path = ['_static']
html_theme_options = {
    'description': 'Quantum and classical reinforcement learning for portfolio rebalancing',
    'show_powered_by': False,
}
