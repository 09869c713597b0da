"""Stem separation, piano-roll transcription, and MIDI/score export."""

__version__ = "0.1.0"
