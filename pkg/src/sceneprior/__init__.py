"""Knowledge-driven scene priors for semantic audio-visual navigation on synthetic grid houses."""

__version__ = "0.1.0"
