"""Logging configuration for causal-geometry."""

import logging

# Package logger; handlers are left to the application (the CLI sets them up)
logger = logging.getLogger("causal_geometry")
logger.addHandler(logging.NullHandler())

__all__ = ["logger"]
