"""XDD WCET - static pipeline timing analysis with event-driven diagrams."""

__version__ = "0.1.0"
