"""Joint interaction, relationship and character-pair models for movie clips."""

__version__ = "0.1.0"
