"""Stateless embedding microservice for joint text/image encoders."""

from .app import create_app
from .config import ModelLoadFailure, ServiceConfig
from .encoders import HashedNgramEncoder, build_encoder

__version__ = "0.1.0"
