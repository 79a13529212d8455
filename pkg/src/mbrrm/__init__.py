"""Radio resource management toolkit for multibeam satellite downlinks."""

__version__ = "0.1.0"
