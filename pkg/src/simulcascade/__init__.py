"""Deterministic cascaded simultaneous speech translation.

Segmenter, transcript stabilizer and translation agent run on the source
audio clock with pluggable ASR and translation engines.
"""

__version__ = "0.1.0"
