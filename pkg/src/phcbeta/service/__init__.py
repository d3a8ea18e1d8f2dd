"""HTTP service exposing the toolkit; the CLI drives it in-process."""

from .app import create_app
from .client import ServiceClient, ServiceError

__all__ = ["create_app", "ServiceClient", "ServiceError"]
