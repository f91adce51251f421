"""Electronic prescribing service for tropical-disease care."""

__version__ = "0.1.0"
