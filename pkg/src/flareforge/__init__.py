"""Physics-informed dynamic lens-flare synthesis for paired video datasets."""

__version__ = "0.1.0"
