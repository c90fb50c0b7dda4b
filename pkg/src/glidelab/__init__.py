"""Optimal adaptive versus glide-path allocation for defined-contribution savings."""
from ._accel import backend
from .errors import GlidelabError, InputError
from .jump_model import KouParams, fit_mle
from .strategy import Adaptive, Constant, Glide, Scenario

__all__ = ["backend", "GlidelabError", "InputError", "KouParams", "fit_mle", "Scenario", "Constant", "Glide", "Adaptive"]
__version__ = "0.1.0"
