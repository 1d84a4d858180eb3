"""Annotation and analysis toolkit for discourse relations in two-party dialogue."""

__version__ = "0.1.0"
