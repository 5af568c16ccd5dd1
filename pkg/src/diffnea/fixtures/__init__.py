"""Bundled robot description fixtures."""

from pathlib import Path

_HERE = Path(__file__).parent


def arm7_path():
    """7-DOF serial arm with iiwa-like joint limits."""
    return str(_HERE / "arm7.urdf")


def planar2_path():
    """Small 2-link arm for fast tests."""
    return str(_HERE / "planar2.urdf")


def pendulum_urdf(mass=1.0, length=0.5, damping=0.0, inertia=0.0):
    """URDF text for a 1-link pendulum: mass at distance `length` from a
    horizontal revolute axis, optional extra rotational inertia about the CoM.

    Static holding torque is mass * g * length * cos(q).
    """
    return f"""<robot name="pendulum">
  <link name="base">
    <inertial>
      <origin xyz="0 0 0"/>
      <mass value="1.0"/>
      <inertia ixx="0.01" ixy="0" ixz="0" iyy="0.01" iyz="0" izz="0.01"/>
    </inertial>
  </link>
  <joint name="hinge" type="revolute">
    <parent link="base"/>
    <child link="bob"/>
    <origin xyz="0 0 0.2" rpy="0 0 0"/>
    <axis xyz="0 1 0"/>
    <limit lower="-3.1" upper="3.1" velocity="20.0" effort="100"/>
    <dynamics damping="{damping}"/>
  </joint>
  <link name="bob">
    <inertial>
      <origin xyz="-{length} 0 0"/>
      <mass value="{mass}"/>
      <inertia ixx="{inertia}" ixy="0" ixz="0" iyy="{inertia}" iyz="0" izz="{inertia}"/>
    </inertial>
  </link>
</robot>
"""
