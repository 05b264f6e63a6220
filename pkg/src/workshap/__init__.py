"""Boosted-tree classifiers for weighted survey data, explained with exact TreeSHAP."""

__version__ = "0.1.0"
