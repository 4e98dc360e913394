"""Random frequency synthesis with a frequency ratio detector in a frequency-locked loop."""

__version__ = "0.1.0"
