#
# Sphinx configuration of the clickbait-rnn documents.
#
from datetime import datetime
from importlib.metadata import version

# -- General configuration ------------------------------------------------
extensions = [
    "sphinx.ext.autodoc",
    "sphinx.ext.intersphinx",
    "sphinx.ext.mathjax",
    "sphinx.ext.viewcode",
    "sphinx.ext.napoleon",
    "sphinx_rtd_theme",
]
templates_path = ["_templates"]
source_suffix = ".rst"
master_doc = "index"

project = "clickbait-rnn"
copyright = f"2024-{datetime.now().year}, The clickbait-rnn Authors"
author = "The clickbait-rnn Authors"

# The full version, including alpha/beta/rc tags.
release = version("clickbait-rnn")
# The short X.Y version.
version = ".".join(release.split(".")[:2])

language = "en"
exclude_patterns = []
pygments_style = "sphinx"
todo_include_todos = False

# -- Options for HTML output ----------------------------------------------
html_theme = "sphinx_rtd_theme"
html_static_path = ["_static"]
htmlhelp_basename = "ClickbaitRNN"

# -- Options for LaTeX output ---------------------------------------------
latex_elements = {}
latex_documents = [
    (master_doc, "ClickbaitRNN.tex", "clickbait-rnn Documentation", author, "manual"),
]

# -- Options for manual page output ---------------------------------------
man_pages = [(master_doc, "clickbait-rnn", "clickbait-rnn Documentation", [author], 1)]

intersphinx_mapping = {
    "python": ("https://docs.python.org/3", None),
    "numpy": ("https://numpy.org/doc/stable/", None),
}

# -- Options for autodoc output -------------------------------------------
autodoc_member_order = "groupwise"
autodoc_typehints_format = "short"
