"""Kinematic arm world: profiles, reach MDP and the two-style renderer."""
from .env import EpisodeDone, EpisodeState, ReachEnv, sample_corpus
from .kinematics import (
    N_ACTIONS,
    PROFILE_NAMES,
    ArmModel,
    CameraSpec,
    MdpConfig,
    WorkspaceSpec,
    forward_kinematics,
    load_profile,
    mpi,
)
from .render import StyleSpec, render_scene, target_colored, target_layer

__all__ = [
    "ArmModel", "CameraSpec", "EpisodeDone", "EpisodeState", "MdpConfig", "N_ACTIONS",
    "PROFILE_NAMES", "ReachEnv", "StyleSpec", "WorkspaceSpec", "forward_kinematics",
    "load_profile", "mpi", "render_scene", "sample_corpus", "target_colored", "target_layer",
]
