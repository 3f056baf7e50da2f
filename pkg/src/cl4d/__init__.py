"""Contrastive pre-training of decoder-only code retrievers, built on a small numpy autograd engine."""

__version__ = "0.1.0"
