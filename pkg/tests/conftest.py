import numpy as np
import pytest

from kinoretarget import builtin_path
from kinoretarget.model import load_model, load_model_string

PENDULUM = """
body {
  name: mount
  parent: world
  joint { type: fixed }
  inertia { mass: 0 }
}
body {
  name: arm
  parent: mount
  joint { type: revolute  axis: 0 -1 0  pos: 0 0 0  limits: -6.3 6.3  vel_limits: -50 50  torque_limit: 100 }
  inertia { mass: 1.0  com: 1 0 0 }
}
site { name: tip  body: arm  pos: 1 0 0  kind: tracking }
"""

# same chain but hanging along -z (com aligned with gravity at zero angle)
PENDULUM_HANGING = """
body {
  name: mount
  parent: world
  joint { type: fixed }
  inertia { mass: 0 }
}
body {
  name: arm
  parent: mount
  joint { type: revolute  axis: 0 -1 0  pos: 0 0 0  limits: -6.3 6.3  vel_limits: -50 50  torque_limit: 100 }
  inertia { mass: 1.0  com: 0 0 -1 }
}
site { name: tip  body: arm  pos: 0 0 -1  kind: tracking }
"""

DOUBLE_PENDULUM = """
body {
  name: mount
  parent: world
  joint { type: fixed }
  inertia { mass: 0 }
}
body {
  name: link1
  parent: mount
  joint { type: revolute  axis: 0 -1 0  pos: 0 0 0  limits: -6.3 6.3  vel_limits: -50 50  torque_limit: 100 }
  inertia { mass: 1.0  com: 1 0 0 }
}
body {
  name: link2
  parent: link1
  joint { type: revolute  axis: 0 -1 0  pos: 1 0 0  limits: -6.3 6.3  vel_limits: -50 50  torque_limit: 100 }
  inertia { mass: 1.0  com: 1 0 0 }
}
site { name: elbow  body: link1  pos: 1 0 0  kind: tracking }
site { name: tip  body: link2  pos: 1 0 0  kind: tracking }
"""


@pytest.fixture(scope="session")
def pendulum():
    return load_model_string(PENDULUM)


@pytest.fixture(scope="session")
def pendulum_hanging():
    return load_model_string(PENDULUM_HANGING)


@pytest.fixture(scope="session")
def double_pendulum():
    return load_model_string(DOUBLE_PENDULUM)


@pytest.fixture(scope="session")
def biped5():
    return load_model(builtin_path("biped5.model"))


@pytest.fixture(scope="session")
def walker():
    return load_model(builtin_path("biped_planar.model"), biped=True)


@pytest.fixture(scope="session")
def biped12():
    return load_model(builtin_path("biped12.model"), biped=True)


def random_state(model, rng, joint_scale=0.8, vel_scale=2.0):
    """Random in-limit configuration and velocity for a model."""
    joints = model.q_min + (model.q_max - model.q_min) * rng.uniform(
        0.5 - 0.5 * joint_scale, 0.5 + 0.5 * joint_scale, size=model.nl
    )
    v = rng.uniform(-vel_scale, vel_scale, size=model.nv)
    if not model.floating:
        return joints, v
    quat = rng.normal(size=4)
    quat /= np.linalg.norm(quat)
    q = np.concatenate([rng.uniform(-1, 1, size=3), quat, joints])
    return q, v


WALKER_STAND_JOINTS = np.array([-0.4404, 0.8808, -0.4404, -0.4404, 0.8808, -0.4404])


@pytest.fixture(scope="session")
def walker_standing_q(walker):
    q = walker.neutral_q()
    q[2] = 0.84 * np.cos(0.4404) + 0.05
    q[7:] = WALKER_STAND_JOINTS
    return q
