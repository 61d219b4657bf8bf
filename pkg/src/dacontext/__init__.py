"""Context representation learning for dialog act classification."""

__version__ = "0.1.0"
