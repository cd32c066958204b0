# This file makes 'airsindy' a Python package.

__version__ = "0.3.0"
