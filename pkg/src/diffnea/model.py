"""URDF-subset parsing into a serial-chain robot model.

Supported: a single unbranched chain of links connected by fixed, revolute or
continuous joints, with `<inertial>` blocks on every link. Meshes, collision
geometry, transmissions and Xacro are out of scope.
"""

from __future__ import annotations

import io
import json
import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field

import numpy as np

from .spatial import SpatialTransform

DEFAULT_GRAVITY = (0.0, 0.0, -9.81)


class UrdfError(ValueError):
    """The XML is not a parseable serial-chain URDF."""


@dataclass(frozen=True)
class LinkInertia:
    """Inertial triple of one link plus the viscous damping of its joint.

    `h = mass * com` is the first moment; `I_C` is the rotational inertia
    about the CoM, expressed in link-frame axes.
    """

    mass: float
    h: np.ndarray
    I_C: np.ndarray
    damping: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "h", np.asarray(self.h, dtype=float).reshape(3))
        I = np.asarray(self.I_C, dtype=float).reshape(3, 3)
        if np.max(np.abs(I - I.T)) > 1e-12:
            raise ValueError("I_C must be symmetric")
        object.__setattr__(self, "I_C", I)

    @property
    def com(self):
        return self.h / self.mass


@dataclass(frozen=True)
class LinkSpec:
    name: str
    joint_kind: str                      # "fixed" | "revolute"
    origin: SpatialTransform             # pose of this link in its parent
    axis: np.ndarray                     # unit joint axis in link frame
    inertia: LinkInertia
    joint_name: str = ""
    joint_limits: tuple | None = None    # (lower, upper, velocity), radians

    def __post_init__(self):
        a = np.asarray(self.axis, dtype=float).reshape(3)
        if self.joint_kind == "revolute" and abs(np.linalg.norm(a) - 1.0) > 1e-9:
            raise ValueError(f"joint axis of {self.name} is not unit norm")
        object.__setattr__(self, "axis", a)


@dataclass(frozen=True)
class RobotModel:
    """Immutable serial kinematic chain, root first."""

    links: tuple
    gravity: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_GRAVITY))

    def __post_init__(self):
        object.__setattr__(self, "links", tuple(self.links))
        object.__setattr__(self, "gravity", np.asarray(self.gravity, dtype=float).reshape(3))

    @property
    def n_dof(self):
        return sum(1 for l in self.links if l.joint_kind == "revolute")

    @property
    def inertias(self):
        return [l.inertia for l in self.links]

    @property
    def joint_limits(self):
        return [l.joint_limits for l in self.links if l.joint_kind == "revolute"]

    def with_gravity(self, gravity):
        return RobotModel(self.links, gravity)

    def link_poses(self, q):
        """World pose of every link frame at configuration q (length n_dof)."""
        q = np.asarray(q, dtype=float)
        poses = []
        cur = SpatialTransform(np.eye(3), np.zeros(3))
        j = 0
        for link in self.links:
            cur = cur.compose(link.origin)
            if link.joint_kind == "revolute":
                from scipy.spatial.transform import Rotation

                Rj = Rotation.from_rotvec(link.axis * q[j]).as_matrix()
                cur = SpatialTransform(cur.rotation @ Rj, cur.translation)
                j += 1
            poses.append(cur)
        return poses


def _rpy_matrix(roll, pitch, yaw):
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    Rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1.0]])
    Ry = np.array([[cp, 0, sp], [0, 1.0, 0], [-sp, 0, cp]])
    Rx = np.array([[1.0, 0, 0], [0, cr, -sr], [0, sr, cr]])
    return Rz @ Ry @ Rx


def _parse_floats(text, n, what):
    try:
        vals = [float(x) for x in text.split()]
    except ValueError as e:
        raise UrdfError(f"bad numeric list in {what}: {text!r}") from e
    if len(vals) != n:
        raise UrdfError(f"{what} needs {n} numbers, got {len(vals)}")
    return vals


def _origin_of(elem):
    origin = elem.find("origin")
    xyz = [0.0, 0.0, 0.0]
    rpy = [0.0, 0.0, 0.0]
    if origin is not None:
        if origin.get("xyz"):
            xyz = _parse_floats(origin.get("xyz"), 3, "origin xyz")
        if origin.get("rpy"):
            rpy = _parse_floats(origin.get("rpy"), 3, "origin rpy")
    return SpatialTransform(_rpy_matrix(*rpy), np.array(xyz))


def _inertia_of(link_elem, damping):
    inertial = link_elem.find("inertial")
    name = link_elem.get("name")
    if inertial is None:
        raise UrdfError(f"link {name!r} has no <inertial> block")
    mass_elem = inertial.find("mass")
    inertia_elem = inertial.find("inertia")
    if mass_elem is None or inertia_elem is None:
        raise UrdfError(f"link {name!r} inertial block is missing mass or inertia")
    m = float(mass_elem.get("value"))
    vals = {k: float(inertia_elem.get(k, "0")) for k in ("ixx", "ixy", "ixz", "iyy", "iyz", "izz")}
    I = np.array([
        [vals["ixx"], vals["ixy"], vals["ixz"]],
        [vals["ixy"], vals["iyy"], vals["iyz"]],
        [vals["ixz"], vals["iyz"], vals["izz"]],
    ])
    frame = _origin_of(inertial)
    # rotate the inertia from the inertial frame into link axes; the CoM
    # offset becomes the first moment h = m * c
    I_link = frame.rotation @ I @ frame.rotation.T
    h = m * frame.translation
    return LinkInertia(mass=m, h=h, I_C=I_link, damping=damping)


def parse_urdf(text, gravity=DEFAULT_GRAVITY):
    """Parse URDF XML text into a RobotModel (serial chains only)."""
    try:
        root = ET.parse(io.StringIO(text)).getroot()
    except ET.ParseError as e:
        raise UrdfError(f"malformed XML: {e}") from e
    if root.tag != "robot":
        raise UrdfError(f"expected <robot> document, got <{root.tag}>")

    links = {l.get("name"): l for l in root.findall("link")}
    if not links:
        raise UrdfError("no links found")
    joints = root.findall("joint")

    children = {}
    parent_of = {}
    for j in joints:
        parent = j.find("parent").get("link")
        child = j.find("child").get("link")
        if parent not in links or child not in links:
            raise UrdfError(f"joint {j.get('name')!r} references unknown link")
        if parent in children:
            raise UrdfError(f"branching chain at link {parent!r}")
        if child in parent_of:
            raise UrdfError(f"link {child!r} has two parent joints")
        children[parent] = (j, child)
        parent_of[child] = parent

    roots = [name for name in links if name not in parent_of]
    if len(roots) != 1:
        raise UrdfError(f"expected one root link, found {sorted(roots)}")

    specs = []
    name = roots[0]
    joint_elem = None
    while True:
        if joint_elem is None:
            kind, origin, axis, jname, limits, damping = (
                "fixed", SpatialTransform(np.eye(3), np.zeros(3)),
                np.array([1.0, 0.0, 0.0]), "", None, 0.0)
        else:
            jtype = joint_elem.get("type")
            jname = joint_elem.get("name")
            if jtype in ("planar", "floating", "prismatic"):
                raise UrdfError(f"unsupported joint type {jtype!r} ({jname!r})")
            if jtype not in ("fixed", "revolute", "continuous"):
                raise UrdfError(f"unknown joint type {jtype!r} ({jname!r})")
            kind = "fixed" if jtype == "fixed" else "revolute"
            origin = _origin_of(joint_elem)
            axis = np.array([1.0, 0.0, 0.0])
            axis_elem = joint_elem.find("axis")
            if axis_elem is not None:
                axis = np.array(_parse_floats(axis_elem.get("xyz"), 3, "axis"))
                norm = np.linalg.norm(axis)
                if norm == 0:
                    raise UrdfError(f"zero joint axis on {jname!r}")
                axis = axis / norm
            limits = None
            limit_elem = joint_elem.find("limit")
            if jtype == "revolute" and limit_elem is not None:
                limits = (
                    float(limit_elem.get("lower", "0")),
                    float(limit_elem.get("upper", "0")),
                    float(limit_elem.get("velocity", "inf")),
                )
            damping = 0.0
            dyn = joint_elem.find("dynamics")
            if dyn is not None and dyn.get("damping") is not None:
                damping = float(dyn.get("damping"))
        specs.append(LinkSpec(
            name=name, joint_kind=kind, origin=origin, axis=axis,
            inertia=_inertia_of(links[name], damping),
            joint_name=jname, joint_limits=limits,
        ))
        nxt = children.get(name)
        if nxt is None:
            break
        joint_elem, name = nxt

    if len(specs) != len(links):
        orphans = sorted(set(links) - {s.name for s in specs})
        raise UrdfError(f"links not on the serial chain: {orphans}")
    return RobotModel(tuple(specs), np.asarray(gravity, dtype=float))


def parse_urdf_file(path, gravity=DEFAULT_GRAVITY):
    with open(path, "r", encoding="utf-8") as f:
        return parse_urdf(f.read(), gravity)


def _fmt(x):
    return f"{x:.17g}"


def _rpy_of(R):
    # inverse of _rpy_matrix (ZYX Euler angles)
    from scipy.spatial.transform import Rotation

    yaw, pitch, roll = Rotation.from_matrix(R).as_euler("ZYX")
    return roll, pitch, yaw


def model_to_urdf(model, name="robot"):
    """Emit the parsed chain back as URDF XML (debug round-trip aid)."""
    out = [f'<robot name="{name}">']
    prev = None
    for link in model.links:
        inertia = link.inertia
        if inertia.mass != 0.0:
            com = inertia.com
        else:
            com = np.zeros(3)
        I = inertia.I_C
        out.append(f'  <link name="{link.name}">')
        out.append("    <inertial>")
        out.append(f'      <origin xyz="{_fmt(com[0])} {_fmt(com[1])} {_fmt(com[2])}" rpy="0 0 0"/>')
        out.append(f'      <mass value="{_fmt(inertia.mass)}"/>')
        out.append(
            f'      <inertia ixx="{_fmt(I[0, 0])}" ixy="{_fmt(I[0, 1])}" ixz="{_fmt(I[0, 2])}"'
            f' iyy="{_fmt(I[1, 1])}" iyz="{_fmt(I[1, 2])}" izz="{_fmt(I[2, 2])}"/>')
        out.append("    </inertial>")
        out.append("  </link>")
        if prev is not None:
            jtype = "revolute" if link.joint_kind == "revolute" else "fixed"
            if link.joint_kind == "revolute" and link.joint_limits is None:
                jtype = "continuous"
            jname = link.joint_name or f"{prev}_to_{link.name}"
            out.append(f'  <joint name="{jname}" type="{jtype}">')
            out.append(f'    <parent link="{prev}"/>')
            out.append(f'    <child link="{link.name}"/>')
            p = link.origin.translation
            roll, pitch, yaw = _rpy_of(link.origin.rotation)
            out.append(
                f'    <origin xyz="{_fmt(p[0])} {_fmt(p[1])} {_fmt(p[2])}"'
                f' rpy="{_fmt(roll)} {_fmt(pitch)} {_fmt(yaw)}"/>')
            a = link.axis
            out.append(f'    <axis xyz="{_fmt(a[0])} {_fmt(a[1])} {_fmt(a[2])}"/>')
            if link.joint_limits is not None:
                lo, hi, vel = link.joint_limits
                out.append(f'    <limit lower="{_fmt(lo)}" upper="{_fmt(hi)}" velocity="{_fmt(vel)}" effort="1000"/>')
            if link.inertia.damping != 0.0:
                out.append(f'    <dynamics damping="{_fmt(link.inertia.damping)}"/>')
            out.append("  </joint>")
        prev = link.name
    out.append("</robot>")
    return "\n".join(out) + "\n"


def model_to_json(model):
    """JSON dump of the parsed chain for fixture diffing."""
    return json.dumps({
        "gravity": list(model.gravity),
        "n_dof": model.n_dof,
        "links": [{
            "name": l.name,
            "joint_kind": l.joint_kind,
            "joint_name": l.joint_name,
            "origin": {
                "rotation": l.origin.rotation.tolist(),
                "translation": l.origin.translation.tolist(),
            },
            "axis": l.axis.tolist(),
            "joint_limits": list(l.joint_limits) if l.joint_limits else None,
            "inertia": {
                "mass": l.inertia.mass,
                "h": l.inertia.h.tolist(),
                "I_C": l.inertia.I_C.tolist(),
                "damping": l.inertia.damping,
            },
        } for l in model.links],
    }, indent=2)


def validate_model(model, b=None):
    """Physical-consistency report per link (delegates to params.consistency_check)."""
    from .params import consistency_check

    return {l.name: consistency_check(l.inertia) for l in model.links}
