"""Reference scorer service for the score/rank-chunk wire protocol."""

__version__ = "0.1.0"
