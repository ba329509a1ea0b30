"""Sim-to-real reaching: image translation, a kinematic arm world and an actor-critic agent."""
from .a3c import A3CAgent
from .sicgan import SICGAN

__version__ = "0.1.0"

__all__ = ["A3CAgent", "SICGAN", "__version__"]
