"""Torch-backed scoring server and attribution exporter.

Talks to the core benchmark only through its external interfaces: the
newline-delimited JSON scoring protocol and the directory container format.
"""

__version__ = "0.1.0"
