"""Human-in-the-loop review pipeline for machine-transcribed code images."""

__version__ = "0.1.0"
