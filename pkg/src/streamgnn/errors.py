"""Exception types shared across the package."""

from __future__ import annotations


class StreamGNNError(Exception):
    """Base class for all package errors."""


class InvalidVertex(StreamGNNError):
    """Vertex id outside the graph's id range."""


class ShapeError(StreamGNNError):
    """Operand dimensions do not agree."""


class NumericError(StreamGNNError):
    """A kernel produced or received a non-finite value."""


class SingularContext(StreamGNNError):
    """Message combination cannot be inverted for this context value."""


class UnsupportedModel(StreamGNNError):
    """Unknown model name or a model outside the shipped zoo."""


class ConfigError(StreamGNNError):
    """Malformed run configuration or input file."""


class StaleState(StreamGNNError):
    """State read outside its validity window (e.g. delta log after commit)."""
