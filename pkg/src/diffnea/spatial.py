"""Small fixed-size 3D/6D algebra, generic over plain reals and autodiff Vars.

Vectors are length-3 lists and matrices are 3x3 nested lists of scalars, so
the same formulas run on floats, numpy arrays (one scalar per batch sample)
and tape Vars. The spatial-vector convention is body coordinates with the
angular block first.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad

TAYLOR_CUTOFF = 1e-6  # below this rotation angle use the series branch


def vec3(x, y, z):
    return [x, y, z]


def vadd(a, b):
    return [a[0] + b[0], a[1] + b[1], a[2] + b[2]]


def vsub(a, b):
    return [a[0] - b[0], a[1] - b[1], a[2] - b[2]]


def vscale(a, s):
    return [a[0] * s, a[1] * s, a[2] * s]


def dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def cross(a, b):
    return [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]


def eye3():
    return [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]


def zeros3():
    return [0.0, 0.0, 0.0]


def mat_add(A, B):
    return [[A[i][j] + B[i][j] for j in range(3)] for i in range(3)]


def mat_sub(A, B):
    return [[A[i][j] - B[i][j] for j in range(3)] for i in range(3)]


def mat_scale(A, s):
    return [[A[i][j] * s for j in range(3)] for i in range(3)]


def matvec(A, v):
    return [
        A[0][0] * v[0] + A[0][1] * v[1] + A[0][2] * v[2],
        A[1][0] * v[0] + A[1][1] * v[1] + A[1][2] * v[2],
        A[2][0] * v[0] + A[2][1] * v[1] + A[2][2] * v[2],
    ]


def matTvec(A, v):
    return [
        A[0][0] * v[0] + A[1][0] * v[1] + A[2][0] * v[2],
        A[0][1] * v[0] + A[1][1] * v[1] + A[2][1] * v[2],
        A[0][2] * v[0] + A[1][2] * v[1] + A[2][2] * v[2],
    ]


def matmul(A, B):
    return [
        [sum(A[i][k] * B[k][j] for k in range(3)) for j in range(3)]
        for i in range(3)
    ]


def transpose(A):
    return [[A[j][i] for j in range(3)] for i in range(3)]


def to_numpy(A):
    """Nested-list matrix or vector of numeric scalars -> numpy array."""
    return np.array([[ad.value(x) for x in row] for row in A]) if isinstance(A[0], list) \
        else np.array([ad.value(x) for x in A])


def skew(v):
    """Skew-symmetric matrix S with S @ w == v x w."""
    x, y, z = v
    return [
        [0.0, -z, y],
        [z, 0.0, -x],
        [-y, x, 0.0],
    ]


def rot_axis_angle(axis, angle):
    """Rotation about a constant unit axis by a (possibly Var) angle.

    Rodrigues with K = skew(axis): R = I + sin(angle) K + (1 - cos(angle)) K^2.
    """
    K = skew(axis)
    K2 = matmul(K, K)
    s = ad.sin(angle)
    one_minus_c = 1.0 - ad.cos(angle)
    R = eye3()
    for i in range(3):
        for j in range(3):
            R[i][j] = R[i][j] + K[i][j] * s + K2[i][j] * one_minus_c
    return R


def exp_so3(w):
    """SO(3) exponential map of a rotation vector.

    Uses the Rodrigues formula, switching to the second-order Taylor branch
    R = I + K + K^2/2 when the angle is below TAYLOR_CUTOFF so that both the
    value and its derivative stay smooth through zero.
    """
    sq = w[0] * w[0] + w[1] * w[1] + w[2] * w[2]
    if float(np.max(np.asarray(ad.value(sq)))) < TAYLOR_CUTOFF ** 2:
        K = skew(w)
        K2 = matmul(K, K)
        return mat_add(eye3(), mat_add(K, mat_scale(K2, 0.5)))
    theta = ad.sqrt(sq)
    K = skew([w[0] / theta, w[1] / theta, w[2] / theta])
    K2 = matmul(K, K)
    return mat_add(eye3(), mat_add(mat_scale(K, ad.sin(theta)),
                                   mat_scale(K2, 1.0 - ad.cos(theta))))


def log_so3(R):
    """Rotation vector of a numeric rotation matrix (inverse of exp_so3)."""
    from scipy.spatial.transform import Rotation

    return list(Rotation.from_matrix(np.asarray(R, dtype=float)).as_rotvec())


@dataclass(frozen=True)
class SpatialTransform:
    """Pose of a child frame in its parent: rotation (child axes in parent
    coordinates) and translation of the child origin, both numeric."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float)
        p = np.asarray(self.translation, dtype=float)
        if R.shape != (3, 3) or p.shape != (3,):
            raise ValueError("SpatialTransform needs a 3x3 rotation and 3-vector")
        if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-9 or abs(np.linalg.det(R) - 1.0) > 1e-9:
            raise ValueError("rotation is not in SO(3)")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", p)

    def compose(self, other):
        """Transform of `other` expressed through `self` (self then other)."""
        return SpatialTransform(
            self.rotation @ other.rotation,
            self.translation + self.rotation @ other.translation,
        )

    def apply(self, point):
        return self.rotation @ np.asarray(point, dtype=float) + self.translation


def spatial_inertia(m, h, I_C):
    """6x6 spatial inertia from mass, first moment h = m c, and CoM inertia.

    Angular-first blocks: [[I_C + skew(h) skew(h)^T / m, skew(h)],
                           [skew(h)^T,                   m I3   ]].
    """
    if float(ad.value(m)) == 0.0:
        raise ValueError("spatial_inertia undefined for m = 0")
    H = skew(h)
    HHt = matmul(H, transpose(H))
    top_left = mat_add(I_C, mat_scale(HHt, 1.0 / m))
    Ht = transpose(H)
    out = [[0.0] * 6 for _ in range(6)]
    for i in range(3):
        for j in range(3):
            out[i][j] = top_left[i][j]
            out[i][j + 3] = H[i][j]
            out[i + 3][j] = Ht[i][j]
        out[i + 3][i + 3] = m
    return out
