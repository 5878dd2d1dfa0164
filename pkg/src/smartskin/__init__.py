"""Static passive smart-skin synthesis: current synthesis, surrogate-based layout design."""

__version__ = "0.1.0"
