# CMDP Dual Toolkit documentation build configuration file.
#
# This file is execfile()d with the current directory set to its containing dir.

import os
import sys

import django

import cmdp_toolkit


here = os.path.abspath(os.path.dirname(__file__))
sys.path.insert(0, here)
sys.path.insert(0, os.path.dirname(here))

os.environ["DJANGO_SETTINGS_MODULE"] = "tests.settings"

django.setup()


# -- General configuration -----------------------------------------------------

extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.todo",
    "sphinx.ext.coverage",
    "sphinx.ext.intersphinx",
    "m2r",
    "sphinx_rtd_theme",
]

templates_path = ["_templates"]
source_suffix = ".rst"
master_doc = "index"

project = "CMDP Dual Toolkit"
copyright = "2026, the CMDP Dual Toolkit developers"

version = cmdp_toolkit.__version__
release = version

exclude_patterns = ["_build"]
pygments_style = "sphinx"

intersphinx_mapping = {
    "python3": ("https://docs.python.org/3.8", None),
    "django": ("http://django.readthedocs.org/en/latest/", None),
    "numpy": ("https://numpy.org/doc/stable/", None),
    "scipy": ("https://docs.scipy.org/doc/scipy/", None),
}


# -- Options for HTML output ---------------------------------------------------

html_theme = "sphinx_rtd_theme"
htmlhelp_basename = "CMDPDualToolkitdoc"


# -- Options for LaTeX output --------------------------------------------------

latex_documents = [
    ("index", "CMDPDualToolkit.tex", "CMDP Dual Toolkit Documentation", "CMDP Dual Toolkit developers", "manual"),
]

man_pages = [("index", "cmdpdualtoolkit", "CMDP Dual Toolkit Documentation", ["CMDP Dual Toolkit developers"], 1)]
