"""cloudburst: deterministic multi-agent cloudburst prediction and response."""

__version__ = "0.1.0"
