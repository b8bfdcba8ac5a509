"""HTTP service wrapping the generator; see sern.service.app."""

from .app import create_app

__all__ = ["create_app"]
