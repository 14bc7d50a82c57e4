"""Bi-parental Moran model of genetic-element counts."""

__version__ = "0.1.0"
