"""HTTP service wrapping the lab; see powlab.service.app."""

from .app import app, create_app

__all__ = ["app", "create_app"]
