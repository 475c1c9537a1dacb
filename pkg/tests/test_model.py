import numpy as np
import pytest

from kinoretarget.model import ModelError, load_model_string
from tests.conftest import PENDULUM


def test_pendulum_loads_with_one_dof(pendulum):
    assert pendulum.nl == 1
    assert pendulum.nv == 1
    assert not pendulum.floating
    assert pendulum.total_mass == 1.0


def test_biped5_dof_and_site_table(biped5):
    assert biped5.nl == 4
    assert biped5.nv == 10
    assert biped5.floating
    assert len(biped5.contact_site_names) == 4
    # hand-checked bookkeeping: bodies in topological order, joints follow body order
    assert [b.name for b in biped5.bodies] == ["torso", "l_thigh", "l_shank", "r_thigh", "r_shank"]
    assert biped5.joint_names == ["l_thigh", "l_shank", "r_thigh", "r_shank"]
    assert biped5.sites["left_heel"].kind == "contact"
    assert biped5.sites["left_heel"].body == biped5.body_index["l_shank"]
    assert np.all(biped5.u_max > 0)
    assert np.all(biped5.q_min <= biped5.q_max)


def test_cyclic_parent_graph_rejected():
    text = """
body { name: a  parent: b  joint { type: revolute axis: 0 1 0 } inertia { mass: 1 } }
body { name: b  parent: a  joint { type: revolute axis: 0 1 0 } inertia { mass: 1 } }
"""
    with pytest.raises(ModelError, match="cyclic parent graph|exactly one root"):
        load_model_string(text)


def test_self_parent_rejected():
    text = """
body { name: root parent: world joint { type: fixed } inertia { mass: 1 } }
body { name: a  parent: a  joint { type: revolute axis: 0 1 0 } inertia { mass: 1 } }
"""
    with pytest.raises(ModelError, match="cyclic parent graph"):
        load_model_string(text)


def test_non_pd_inertia_rejected():
    text = PENDULUM.replace("inertia { mass: 1.0  com: 1 0 0 }",
                            "inertia { mass: 1.0  com: 1 0 0 ixx: -0.1 }")
    with pytest.raises(ModelError, match="positive definite"):
        load_model_string(text)


def test_missing_contact_sites_in_biped_mode():
    with pytest.raises(ModelError, match="missing required contact sites"):
        load_model_string(PENDULUM, biped=True)


def test_parse_error_reports_line():
    with pytest.raises(ModelError, match="parse error"):
        load_model_string("body {\n  name torso\n}")


def test_bodies_reordered_topologically():
    # child listed before its parent still loads (no false cycle)
    text = """
body { name: arm  parent: base  joint { type: revolute axis: 0 1 0 } inertia { mass: 1 com: 1 0 0 } }
body { name: base parent: world joint { type: fixed } inertia { mass: 0 } }
"""
    m = load_model_string(text)
    assert [b.name for b in m.bodies] == ["base", "arm"]


def test_unknown_site_lookup(pendulum):
    with pytest.raises(ModelError, match="unknown site"):
        pendulum.site("nope")


def test_bad_quaternion_rejected(biped5):
    q = biped5.neutral_q()
    q[3:7] = [1.0, 1.0, 0.0, 0.0]
    with pytest.raises(ModelError, match="quaternion"):
        biped5.check_q(q)


def test_summary_mentions_bodies(biped5):
    s = biped5.summary()
    assert "torso" in s and "left_heel" in s and "actuated dofs: 4" in s
