"""Learnable inertial-parameter representations and the consistency checker.

Five per-link representations map an unconstrained vector to
(mass, first moment h, rotational inertia I_C):

  nostr  raw mass and full 3x3 inertia, no structure (baseline)
  symm   squared mass, symmetric inertia from 6 entries
  spd    symmetric inertia built as L L^T + b I (positive definite)
  tri    principal moments as triangle sides (law of cosines) rotated by an
         axis-angle rotation: positivity and the triangle inequality hold
         for every input
  cov    Cholesky-parameterized density-weighted covariance
         Sigma = L L^T + b I, with I_C = Tr(Sigma) I - Sigma: likewise fully
         consistent for every input

All materializations are differentiable; with tape Vars as inputs the whole
inverse-dynamics loss can be backpropagated into the raw slots.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .model import LinkInertia
from .spatial import exp_so3, log_so3, matmul, transpose

POSITIVITY_BIAS = 1e-4  # kg / kg m^2; keeps masses and inertias away from zero

KINDS = ("nostr", "symm", "spd", "tri", "cov")
KIND_LABELS = {"nostr": "NoStr", "symm": "Symm", "spd": "SPD", "tri": "Tri", "cov": "Cov"}

SLOT_NAMES = {
    "nostr": ["theta_m", "theta_h_x", "theta_h_y", "theta_h_z"]
             + [f"theta_I_{i}" for i in range(1, 10)],
    "symm": ["theta_sqrt_m", "theta_h_x", "theta_h_y", "theta_h_z",
             "theta_I_1", "theta_I_2", "theta_I_3", "theta_I_4", "theta_I_5", "theta_I_6"],
    "spd": ["theta_sqrt_m", "theta_h_x", "theta_h_y", "theta_h_z"]
           + [f"theta_LI_{i}" for i in range(1, 7)],
    "tri": ["theta_sqrt_m", "theta_h_x", "theta_h_y", "theta_h_z",
            "theta_RAA_1", "theta_RAA_2", "theta_RAA_3",
            "theta_sqrt_J1", "theta_sqrt_J2", "theta_a"],
    "cov": ["theta_sqrt_m", "theta_h_x", "theta_h_y", "theta_h_z"]
           + [f"theta_LSigma_{i}" for i in range(1, 7)],
}


def n_slots(kind):
    return len(SLOT_NAMES[kind])


@dataclass
class MaterializedInertia:
    """Physical triple produced from one link's raw slots; fields may be
    floats or tape Vars."""

    mass: object
    h: list
    I_C: list
    damping: object = 0.0

    def numeric(self):
        """Plain-float LinkInertia snapshot (symmetrized for nostr)."""
        I = np.array([[float(ad.value(x)) for x in row] for row in self.I_C])
        return LinkInertia(
            mass=float(ad.value(self.mass)),
            h=[float(ad.value(x)) for x in self.h],
            I_C=0.5 * (I + I.T),
            damping=float(ad.value(self.damping)),
        )


def _lower_triangular(t):
    """L from 6 slots laid out (diag 1..3 then below-diagonal 4..6)."""
    t1, t2, t3, t4, t5, t6 = t
    return [[t1, 0.0, 0.0], [t4, t2, 0.0], [t5, t6, t3]]


def materialize_no_str(theta, b=POSITIVITY_BIAS):
    """Raw passthrough: 13 slots, no constraints (possibly asymmetric I_C)."""
    if len(theta) != 13:
        raise ValueError(f"nostr expects 13 slots, got {len(theta)}")
    m = theta[0]
    h = list(theta[1:4])
    I = [list(theta[4:7]), list(theta[7:10]), list(theta[10:13])]
    return MaterializedInertia(mass=m, h=h, I_C=I)


def materialize_symm(theta, b=POSITIVITY_BIAS):
    """Squared mass plus bias; symmetric I_C from (xx, yy, zz, xy, xz, yz)."""
    if len(theta) != 10:
        raise ValueError(f"symm expects 10 slots, got {len(theta)}")
    m = ad.square(theta[0]) + b
    xx, yy, zz, xy, xz, yz = theta[4:10]
    I = [[xx, xy, xz], [xy, yy, yz], [xz, yz, zz]]
    return MaterializedInertia(mass=m, h=list(theta[1:4]), I_C=I)


def materialize_spd(theta, b=POSITIVITY_BIAS):
    """I_C = L L^T + b I: positive definite but not necessarily realizable."""
    if len(theta) != 10:
        raise ValueError(f"spd expects 10 slots, got {len(theta)}")
    m = ad.square(theta[0]) + b
    L = _lower_triangular(theta[4:10])
    I = matmul(L, transpose(L))
    for i in range(3):
        I[i][i] = I[i][i] + b
    return MaterializedInertia(mass=m, h=list(theta[1:4]), I_C=I)


def materialize_tri(theta, b=POSITIVITY_BIAS):
    """Principal moments as triangle sides, rotated by an axis-angle rotation.

    J1 and J2 are squared slots plus bias; the third side comes from the law
    of cosines with opening angle pi * sigmoid(theta_a), so the triangle
    inequality holds for every input.
    """
    if len(theta) != 10:
        raise ValueError(f"tri expects 10 slots, got {len(theta)}")
    m = ad.square(theta[0]) + b
    R = exp_so3(list(theta[4:7]))
    J1 = ad.square(theta[7]) + b
    J2 = ad.square(theta[8]) + b
    alpha = math.pi * ad.sigmoid(theta[9])
    # law of cosines, rearranged so the radicand is a sum of non-negative
    # terms and cannot go negative through roundoff
    J3 = ad.sqrt(ad.square(J1 - J2) + 2.0 * J1 * J2 * (1.0 - ad.cos(alpha)))
    # R diag(J1,J2,J3) R^T
    RJ = [[R[i][0] * J1, R[i][1] * J2, R[i][2] * J3] for i in range(3)]
    I = matmul(RJ, transpose(R))
    return MaterializedInertia(mass=m, h=list(theta[1:4]), I_C=I)


def materialize_cov(theta, b=POSITIVITY_BIAS):
    """Sigma = L L^T + b I, then I_C = Tr(Sigma) I - Sigma (fully consistent)."""
    if len(theta) != 10:
        raise ValueError(f"cov expects 10 slots, got {len(theta)}")
    m = ad.square(theta[0]) + b
    L = _lower_triangular(theta[4:10])
    S = matmul(L, transpose(L))
    for i in range(3):
        S[i][i] = S[i][i] + b
    tr = S[0][0] + S[1][1] + S[2][2]
    I = [[(tr - S[i][i]) if i == j else -S[i][j] for j in range(3)] for i in range(3)]
    return MaterializedInertia(mass=m, h=list(theta[1:4]), I_C=I)


_MATERIALIZERS = {
    "nostr": materialize_no_str,
    "symm": materialize_symm,
    "spd": materialize_spd,
    "tri": materialize_tri,
    "cov": materialize_cov,
}


def materialize_link(kind, theta, b=POSITIVITY_BIAS):
    return _MATERIALIZERS[kind](theta, b)


def materialize_damping(theta_d):
    """Non-negative per-joint damping: d = theta_d^2 (no bias, 0 is allowed)."""
    return ad.square(theta_d)


@dataclass(frozen=True)
class ConsistencyReport:
    mass_positive: bool
    inertia_spd: bool
    triangle_ineq: bool
    fully_consistent: bool
    principal_moments: np.ndarray

    def as_dict(self):
        return {
            "mass_positive": self.mass_positive,
            "inertia_spd": self.inertia_spd,
            "triangle_ineq": self.triangle_ineq,
            "fully_consistent": self.fully_consistent,
            "principal_moments": list(self.principal_moments),
        }


def consistency_check(inertia, tol=1e-9):
    """Full physical-consistency report for one link.

    Checks positive mass, positive definite (and symmetric) I_C, and the
    triangle inequality on the principal moments. The latter is evaluated
    both on the eigenvalues and through positive semidefiniteness of
    Sigma = Tr(I_C)/2 * I - I_C; the two routes must agree.
    """
    m = float(ad.value(inertia.mass))
    I = np.array([[float(ad.value(x)) for x in row] for row in inertia.I_C]) \
        if not isinstance(inertia.I_C, np.ndarray) else inertia.I_C
    scale = max(1.0, float(np.max(np.abs(I))))
    asym = float(np.max(np.abs(I - I.T)))
    I_sym = 0.5 * (I + I.T)
    moments = np.linalg.eigvalsh(I_sym)  # ascending

    mass_positive = m > 0.0
    inertia_spd = bool(moments[0] > 0.0) and asym <= 1e-9
    gap = moments[0] + moments[1] - moments[2]
    triangle_ineq = gap >= -tol * scale

    sigma = 0.5 * np.trace(I_sym) * np.eye(3) - I_sym
    sigma_min = float(np.linalg.eigvalsh(sigma)[0])
    if abs(sigma_min - 0.5 * gap) > 1e-8 * scale:
        raise RuntimeError("triangle-inequality routes disagree; numerical fault")

    return ConsistencyReport(
        mass_positive=mass_positive,
        inertia_spd=inertia_spd,
        triangle_ineq=triangle_ineq,
        fully_consistent=mass_positive and inertia_spd and triangle_ineq,
        principal_moments=moments,
    )


@dataclass
class ParamVector:
    """Unconstrained learnable state: one row of slots per link, plus an
    optional damping slot per revolute joint."""

    kind: str
    per_link: np.ndarray                    # (n_links, n_slots)
    damping: np.ndarray | None = None       # (n_dof,) or None
    b: float = POSITIVITY_BIAS

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kind {self.kind!r}; valid: {KINDS}")
        self.per_link = np.asarray(self.per_link, dtype=float)
        if self.per_link.ndim != 2 or self.per_link.shape[1] != n_slots(self.kind):
            raise ValueError(
                f"{self.kind} needs (n_links, {n_slots(self.kind)}) slots, "
                f"got {self.per_link.shape}")
        if self.damping is not None:
            self.damping = np.asarray(self.damping, dtype=float)

    # -- flat view for optimizers ---------------------------------------
    def flatten(self):
        parts = [self.per_link.ravel()]
        if self.damping is not None:
            parts.append(self.damping)
        return np.concatenate(parts)

    def with_flat(self, flat):
        nl = self.per_link.size
        per_link = np.asarray(flat[:nl], dtype=float).reshape(self.per_link.shape)
        damping = None
        if self.damping is not None:
            damping = np.asarray(flat[nl:], dtype=float).copy()
        return ParamVector(self.kind, per_link, damping, self.b)

    def copy(self):
        return ParamVector(self.kind, self.per_link.copy(),
                           None if self.damping is None else self.damping.copy(), self.b)

    # -- materialization ------------------------------------------------
    def materialize(self, model, tape=None):
        """Per-link physical triples for `model`.

        With a tape, every slot becomes a leaf Var and (inertias, leaves) is
        returned with leaves in flatten() order; otherwise plain floats are
        used and only the inertia list is returned.
        """
        if len(model.links) != self.per_link.shape[0]:
            raise ValueError("link count mismatch between model and params")
        leaves = []
        rows = []
        for row in self.per_link:
            if tape is None:
                rows.append([float(x) for x in row])
            else:
                vs = [tape.var(x) for x in row]
                leaves.extend(vs)
                rows.append(vs)
        damp_by_dof = None
        if self.damping is not None:
            damp_by_dof = []
            for x in self.damping:
                v = tape.var(x) if tape is not None else float(x)
                if tape is not None:
                    leaves.append(v)
                damp_by_dof.append(materialize_damping(v))
        inertias = []
        j = 0
        for link, row in zip(model.links, rows):
            mi = materialize_link(self.kind, row, self.b)
            if link.joint_kind == "revolute":
                if damp_by_dof is not None:
                    mi.damping = damp_by_dof[j]
                else:
                    mi.damping = link.inertia.damping
                j += 1
            inertias.append(mi)
        if tape is None:
            return inertias
        return inertias, leaves

    def numeric_inertias(self, model):
        """Plain LinkInertia list (numeric snapshot) for metrics and control."""
        return [mi.numeric() for mi in self.materialize(model)]

    # -- serialization --------------------------------------------------
    def to_json(self):
        names = SLOT_NAMES[self.kind]
        return json.dumps({
            "kind": self.kind,
            "b": self.b,
            "per_link": [
                {name: float(v) for name, v in zip(names, row)}
                for row in self.per_link
            ],
            "damping": None if self.damping is None else [float(x) for x in self.damping],
        }, indent=2)

    @classmethod
    def from_json(cls, text):
        obj = json.loads(text)
        names = SLOT_NAMES[obj["kind"]]
        per_link = np.array([[row[name] for name in names] for row in obj["per_link"]])
        damping = obj.get("damping")
        return cls(obj["kind"], per_link,
                   None if damping is None else np.asarray(damping, dtype=float),
                   obj.get("b", POSITIVITY_BIAS))


# -- initialization ----------------------------------------------------------

class InversionError(ValueError):
    """Physical inertia cannot be mapped back into a representation's slots."""


def _logit(p):
    return math.log(p / (1.0 - p))


def invert_link(kind, inertia, b=POSITIVITY_BIAS):
    """Slots that materialize to the given (consistent) physical inertia."""
    m = inertia.mass
    h = list(np.asarray(inertia.h, dtype=float))
    I = np.asarray(inertia.I_C, dtype=float)

    if kind == "nostr":
        return [m] + h + list(I.ravel())

    if m <= b:
        raise InversionError(f"mass {m} not above bias {b}")
    sqrt_m = math.sqrt(m - b)

    if kind == "symm":
        return [sqrt_m] + h + [I[0, 0], I[1, 1], I[2, 2], I[0, 1], I[0, 2], I[1, 2]]

    if kind == "spd":
        A = I - b * np.eye(3)
        try:
            L = np.linalg.cholesky(A)
        except np.linalg.LinAlgError as e:
            raise InversionError("I_C - b I is not positive definite") from e
        return [sqrt_m] + h + [L[0, 0], L[1, 1], L[2, 2], L[1, 0], L[2, 0], L[2, 1]]

    if kind == "tri":
        J, V = np.linalg.eigh(0.5 * (I + I.T))  # ascending
        J1, J2, J3 = J
        if J1 <= b or J2 <= b:
            raise InversionError("principal moments not above bias")
        cos_alpha = (J1 * J1 + J2 * J2 - J3 * J3) / (2.0 * J1 * J2)
        if not (-1.0 < cos_alpha < 1.0):
            raise InversionError("triangle inequality not strictly satisfied")
        alpha = math.acos(cos_alpha)
        if np.linalg.det(V) < 0:
            V = V.copy()
            V[:, 2] = -V[:, 2]
        raa = log_so3(V)
        return ([sqrt_m] + h + list(raa)
                + [math.sqrt(J1 - b), math.sqrt(J2 - b), _logit(alpha / math.pi)])

    if kind == "cov":
        I_sym = 0.5 * (I + I.T)
        sigma = 0.5 * np.trace(I_sym) * np.eye(3) - I_sym
        A = sigma - b * np.eye(3)
        try:
            L = np.linalg.cholesky(A)
        except np.linalg.LinAlgError as e:
            raise InversionError("Sigma - b I is not positive definite") from e
        return [sqrt_m] + h + [L[0, 0], L[1, 1], L[2, 2], L[1, 0], L[2, 0], L[2, 1]]

    raise ValueError(f"unknown kind {kind!r}")


def random_consistent_inertia(rng):
    """A random fully consistent link inertia: a solid ellipsoid of random
    mass, semi-axes and orientation with an offset center of mass. Ellipsoid
    principal moments satisfy the triangle inequality strictly, so the result
    inverts into every representation."""
    from scipy.spatial.transform import Rotation

    m = rng.uniform(0.3, 4.0)
    a, bb, c = rng.uniform(0.05, 0.35, 3)
    J = m / 5.0 * np.array([bb * bb + c * c, a * a + c * c, a * a + bb * bb])
    R = Rotation.random(random_state=rng).as_matrix()
    com = rng.uniform(-0.1, 0.1, 3)
    return LinkInertia(mass=m, h=m * com, I_C=R @ np.diag(J) @ R.T)


def init_params(kind, model, mode="from_urdf_perturbed", sigma=0.1, seed=0,
                learn_damping=False, b=POSITIVITY_BIAS):
    """Starting slots for training.

    `from_urdf_perturbed` inverts each link's URDF inertia into slot space and
    adds N(0, sigma^2) noise; links whose URDF values cannot be inverted for
    the chosen kind fall back to random slots. `random` draws all slots from
    N(0, sigma^2). `random_model` draws one random consistent physical model
    and inverts it into slot space, so different kinds with the same seed
    start from the identical physical model (sigma is unused).
    """
    rng = np.random.default_rng(seed)
    ns = n_slots(kind)
    rows = []
    for link in model.links:
        if mode == "from_urdf_perturbed":
            try:
                base = np.array(invert_link(kind, link.inertia, b))
            except InversionError:
                base = np.zeros(ns)
                rows.append(base + rng.normal(0.0, max(sigma, 0.1), ns))
                continue
            rows.append(base + rng.normal(0.0, sigma, ns))
        elif mode == "random":
            rows.append(rng.normal(0.0, sigma, ns))
        elif mode == "random_model":
            rows.append(np.array(invert_link(kind, random_consistent_inertia(rng), b)))
        else:
            raise ValueError(f"unknown init mode {mode!r}")
    damping = None
    if learn_damping:
        if mode == "from_urdf_perturbed":
            base = np.sqrt([l.inertia.damping for l in model.links if l.joint_kind == "revolute"])
            damping = base + rng.normal(0.0, sigma, model.n_dof)
        else:
            damping = rng.normal(0.0, sigma, model.n_dof)
    return ParamVector(kind, np.array(rows), damping, b)
