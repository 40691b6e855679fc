from .app import create_app, frame_to_png_b64, png_b64
from .config import ServiceConfig
from .sessions import PlaySession, SessionError, SessionStore

__all__ = [
    "create_app",
    "frame_to_png_b64",
    "png_b64",
    "ServiceConfig",
    "PlaySession",
    "SessionError",
    "SessionStore",
]
