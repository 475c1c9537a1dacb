"""Gait retargeting: human site trajectories + ground reaction forces in,
dynamically feasible humanoid joint trajectories out.

Pipeline stages: contact scheduling from vertical GRF, velocity-level
differential IK onto the robot, and a multi-contact direct-transcription
trajectory optimization that enforces the robot dynamics.
"""

from importlib import resources

__version__ = "0.1.0"


def builtin_path(name: str):
    """Filesystem path of a packaged model/pairs file, e.g. 'biped_planar.model'."""
    ref = resources.files(__name__) / "models" / name
    with resources.as_file(ref) as p:
        return p
