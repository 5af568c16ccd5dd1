import numpy as np
import pytest

from diffnea import model as mod
from diffnea.fixtures import arm7_path, pendulum_urdf
from diffnea.model import UrdfError, model_to_urdf, parse_urdf, parse_urdf_file


MINIMAL = """
<robot name="two">
  <link name="base">
    <inertial><mass value="1"/><inertia ixx="0.1" iyy="0.1" izz="0.1"/></inertial>
  </link>
  <link name="arm">
    <inertial>
      <origin xyz="0.2 0 0"/>
      <mass value="2"/>
      <inertia ixx="0.01" iyy="0.02" izz="0.02"/>
    </inertial>
  </link>
  <joint name="j1" type="revolute">
    <parent link="base"/><child link="arm"/>
    <origin xyz="0 0 0.5"/><axis xyz="0 0 1"/>
    <limit lower="-1.5" upper="1.5" velocity="2"/>
  </joint>
</robot>
"""


def test_parse_minimal_chain():
    m = parse_urdf(MINIMAL)
    assert m.n_dof == 1
    assert [l.name for l in m.links] == ["base", "arm"]
    arm = m.links[1]
    assert arm.joint_kind == "revolute"
    assert arm.joint_limits == (-1.5, 1.5, 2.0)
    np.testing.assert_allclose(arm.axis, [0, 0, 1])
    np.testing.assert_allclose(arm.origin.translation, [0, 0, 0.5])
    # h = m * com
    np.testing.assert_allclose(arm.inertia.h, [0.4, 0, 0])
    np.testing.assert_allclose(arm.inertia.com, [0.2, 0, 0])


def test_arm7_fixture_parses(arm7):
    assert arm7.n_dof == 7
    assert len(arm7.joint_limits) == 7
    assert all(lim is not None for lim in arm7.joint_limits)
    assert arm7.links[0].joint_kind == "fixed"


def test_urdf_round_trip(arm7):
    again = parse_urdf(model_to_urdf(arm7))
    assert again.n_dof == arm7.n_dof
    for a, b in zip(arm7.links, again.links):
        assert a.name == b.name and a.joint_kind == b.joint_kind
        np.testing.assert_allclose(a.origin.rotation, b.origin.rotation, atol=1e-12)
        np.testing.assert_allclose(a.origin.translation, b.origin.translation, atol=1e-12)
        np.testing.assert_allclose(a.axis, b.axis, atol=1e-12)
        assert a.inertia.mass == pytest.approx(b.inertia.mass, rel=1e-12)
        np.testing.assert_allclose(a.inertia.h, b.inertia.h, atol=1e-12)
        np.testing.assert_allclose(a.inertia.I_C, b.inertia.I_C, atol=1e-12)
        assert a.inertia.damping == pytest.approx(b.inertia.damping)


def test_inertial_origin_rotation_rotates_inertia():
    # inertia given in a frame yawed by 90 deg: x and y moments swap
    text = MINIMAL.replace('<origin xyz="0.2 0 0"/>',
                           '<origin xyz="0 0 0" rpy="0 0 1.5707963267948966"/>')
    m = parse_urdf(text)
    I = m.links[1].inertia.I_C
    assert I[0, 0] == pytest.approx(0.02, abs=1e-12)
    assert I[1, 1] == pytest.approx(0.01, abs=1e-12)


def test_continuous_joint_has_no_limits():
    text = MINIMAL.replace('type="revolute"', 'type="continuous"')
    m = parse_urdf(text)
    assert m.links[1].joint_kind == "revolute"
    assert m.links[1].joint_limits is None


@pytest.mark.parametrize("mangle, match", [
    (lambda t: t.replace('type="revolute"', 'type="prismatic"'), "prismatic"),
    (lambda t: t.replace("<inertial>", "<not_inertial>", 1)
              .replace("</inertial>", "</not_inertial>", 1), "inertial"),
    (lambda t: t.replace('<robot name="two">', "<chicken>")
              .replace("</robot>", "</chicken>"), "robot"),
    (lambda t: t.replace('<axis xyz="0 0 1"/>', '<axis xyz="0 0 0"/>'), "axis"),
], ids=["prismatic", "missing-inertial", "not-a-robot", "zero-axis"])
def test_rejected_documents(mangle, match):
    with pytest.raises(UrdfError, match=match):
        parse_urdf(mangle(MINIMAL))


def test_branching_chain_rejected():
    text = MINIMAL.replace("</robot>", """
  <link name="extra">
    <inertial><mass value="1"/><inertia ixx="0.1" iyy="0.1" izz="0.1"/></inertial>
  </link>
  <joint name="j2" type="fixed">
    <parent link="base"/><child link="extra"/>
  </joint>
</robot>""")
    with pytest.raises(UrdfError, match="branching"):
        parse_urdf(text)


def test_orphan_link_rejected():
    text = MINIMAL.replace("</robot>", """
  <link name="island">
    <inertial><mass value="1"/><inertia ixx="0.1" iyy="0.1" izz="0.1"/></inertial>
  </link>
</robot>""")
    with pytest.raises(UrdfError, match="root"):
        parse_urdf(text)


def test_link_poses_forward_kinematics():
    m = parse_urdf(MINIMAL)
    poses = m.link_poses([0.0])
    np.testing.assert_allclose(poses[1].translation, [0, 0, 0.5], atol=1e-15)
    # rotating the z joint by 90 deg turns the arm x axis into world y
    poses = m.link_poses([np.pi / 2])
    np.testing.assert_allclose(poses[1].rotation @ [1, 0, 0], [0, 1, 0], atol=1e-12)


def test_pendulum_fixture_shape():
    m = parse_urdf(pendulum_urdf(mass=1.0, length=0.5, damping=0.1))
    assert m.n_dof == 1
    assert m.links[1].inertia.damping == 0.1
    np.testing.assert_allclose(m.links[1].inertia.com, [-0.5, 0, 0], atol=1e-15)


def test_validate_model_flags_impossible_inertia():
    bad = MINIMAL.replace('ixx="0.01" iyy="0.02" izz="0.02"',
                          'ixx="0.01" iyy="0.01" izz="0.03"')
    report = mod.validate_model(parse_urdf(bad))
    assert not report["arm"].fully_consistent
    assert report["base"].fully_consistent
