"""HTTP service hosting instances, sessions, the knowledge-base, and models."""

from nirhub.server.app import create_app
from nirhub.server.service import NirhubService

__all__ = ["NirhubService", "create_app"]
