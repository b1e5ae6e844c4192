"""Transform prediction on abstract syntax trees with a tree-structured CRF."""

__version__ = "0.1.0"
