"""Training-data generation: closed-loop tracking of per-joint sine references
with the ground-truth model, logged as (t, q, qd, qdd, tau) records."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .dynamics import JointState, forward_dynamics, rnea
from .model import model_to_json

# per-joint sine time periods (s) and amplitude fractions of the joint range
DEFAULT_PERIODS = (23.0, 19.0, 17.0, 13.0, 11.0, 7.0, 5.0)
DEFAULT_AMPLITUDES = (0.7, 0.5, 0.5, 0.5, 0.65, 0.65, 0.7)
DEFAULT_RATE = 250.0
# PD gains: Kd is kept small because the feedback is integrated explicitly at
# 250 Hz and the distal links are light (dt * Kd must stay below twice the
# smallest mass-matrix eigenvalue for the discrete loop to be stable)
DEFAULT_GAINS = (50.0, 0.2)

DIVERGENCE_SPEED = 100.0  # rad/s; beyond this the simulation is declared lost


class SimulationDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class SineSpec:
    periods: tuple
    amplitude_fractions: tuple
    duration: float
    rate: float = DEFAULT_RATE

    def __post_init__(self):
        object.__setattr__(self, "periods", tuple(float(p) for p in self.periods))
        object.__setattr__(self, "amplitude_fractions",
                           tuple(float(a) for a in self.amplitude_fractions))
        if any(p <= 0 for p in self.periods):
            raise ValueError("periods must be positive")
        if any(not (0 < a <= 1) for a in self.amplitude_fractions):
            raise ValueError("amplitude fractions must be in (0, 1]")
        if self.rate <= 0 or self.duration <= 0:
            raise ValueError("rate and duration must be positive")
        if len(self.periods) != len(self.amplitude_fractions):
            raise ValueError("periods and amplitudes must have equal length")

    @classmethod
    def default(cls, n_dof, duration, rate=DEFAULT_RATE):
        return cls(DEFAULT_PERIODS[:n_dof], DEFAULT_AMPLITUDES[:n_dof], duration, rate)

    def as_dict(self):
        return {
            "periods": list(self.periods),
            "amplitude_fractions": list(self.amplitude_fractions),
            "duration": self.duration,
            "rate": self.rate,
        }


@dataclass
class Trajectory:
    """Uniformly sampled joint-space records; `qdd[k]` is the acceleration the
    model produced from `(q[k], qd[k], tau[k])`, i.e. the next-step target."""

    t: np.ndarray
    q: np.ndarray
    qd: np.ndarray
    qdd: np.ndarray
    tau: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        for name in ("q", "qd", "qdd", "tau"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        if not (self.q.shape == self.qd.shape == self.qdd.shape == self.tau.shape):
            raise ValueError("q, qd, qdd, tau must share shape")
        if len(self.t) != self.q.shape[0]:
            raise ValueError("t length mismatch")

    def __len__(self):
        return len(self.t)

    @property
    def n_dof(self):
        return self.q.shape[1]

    def slice(self, idx):
        return Trajectory(self.t[idx], self.q[idx], self.qd[idx],
                          self.qdd[idx], self.tau[idx], self.meta)

    def save_csv(self, path):
        n = self.n_dof
        header = ",".join(
            ["t"] + [f"q{i}" for i in range(n)] + [f"qd{i}" for i in range(n)]
            + [f"qdd{i}" for i in range(n)] + [f"tau{i}" for i in range(n)])
        data = np.hstack([self.t[:, None], self.q, self.qd, self.qdd, self.tau])
        with open(path, "w", encoding="utf-8") as f:
            f.write(header + "\n")
            for row in data:
                f.write(",".join(f"{x:.17g}" for x in row) + "\n")

    @classmethod
    def load_csv(cls, path):
        with open(path, "r", encoding="utf-8") as f:
            header = f.readline().strip().split(",")
            data = np.loadtxt(f, delimiter=",", ndmin=2)
        n = (len(header) - 1) // 4
        expect = (["t"] + [f"q{i}" for i in range(n)] + [f"qd{i}" for i in range(n)]
                  + [f"qdd{i}" for i in range(n)] + [f"tau{i}" for i in range(n)])
        if header != expect:
            raise ValueError(f"unexpected CSV columns: {header}")
        return cls(data[:, 0], data[:, 1:1 + n], data[:, 1 + n:1 + 2 * n],
                   data[:, 1 + 2 * n:1 + 3 * n], data[:, 1 + 3 * n:])


def sine_reference(spec, limits, t):
    """Desired (q, qd, qdd) at time t for per-joint sines centred mid-range.

    Each joint j moves as mid_j + A_j sin(2 pi t / P_j) with amplitude
    A_j = fraction_j * (upper_j - lower_j) / 2. `t` may be scalar or array.
    """
    n = len(spec.periods)
    if len(limits) != n:
        raise ValueError("limits/spec length mismatch")
    t = np.asarray(t, dtype=float)
    q = []
    qd = []
    qdd = []
    for j in range(n):
        if limits[j] is None:
            raise ValueError(f"joint {j} has no position limits; amplitude undefined")
        lo, hi = limits[j][0], limits[j][1]
        mid = 0.5 * (lo + hi)
        amp = spec.amplitude_fractions[j] * 0.5 * (hi - lo)
        omega = 2.0 * np.pi / spec.periods[j]
        q.append(mid + amp * np.sin(omega * t))
        qd.append(amp * omega * np.cos(omega * t))
        qdd.append(-amp * omega * omega * np.sin(omega * t))
    return np.stack(q, -1), np.stack(qd, -1), np.stack(qdd, -1)


def reference_trajectory(spec, limits):
    """The reference itself as a Trajectory (zero torque column)."""
    steps = int(round(spec.duration * spec.rate))
    t = np.arange(steps) / spec.rate
    q, qd, qdd = sine_reference(spec, limits, t)
    return Trajectory(t, q, qd, qdd, np.zeros_like(q), {"spec": spec.as_dict()})


def generate_dataset(model, true_inertias, spec, pd_gains=DEFAULT_GAINS, seed=0):
    """Simulate the ground-truth plant tracking the sine reference.

    Control is inverse-dynamics feed-forward at the reference plus PD
    feedback; the logged torque is the torque actually applied and the logged
    acceleration is the forward-dynamics response to it.
    """
    n = model.n_dof
    if len(spec.periods) != n:
        raise ValueError(f"spec has {len(spec.periods)} joints, model has {n}")
    kp, kd = pd_gains
    limits = model.joint_limits
    dt = 1.0 / spec.rate
    steps = int(round(spec.duration * spec.rate))

    q0, qd0, _ = sine_reference(spec, limits, 0.0)
    state = JointState(q=q0, qd=qd0, qdd=np.zeros(n))

    t_log = np.arange(steps) / spec.rate
    q_log = np.empty((steps, n))
    qd_log = np.empty((steps, n))
    qdd_log = np.empty((steps, n))
    tau_log = np.empty((steps, n))

    for k in range(steps):
        t = t_log[k]
        q_d, qd_d, qdd_d = sine_reference(spec, limits, t)
        ff = rnea(model, true_inertias, list(q_d), list(qd_d), list(qdd_d))
        tau = np.array(ff) + kp * (q_d - state.q) + kd * (qd_d - state.qd)
        qdd = np.array(forward_dynamics(model, true_inertias,
                                        list(state.q), list(state.qd), list(tau)))
        q_log[k] = state.q
        qd_log[k] = state.qd
        qdd_log[k] = qdd
        tau_log[k] = tau
        qd_new = state.qd + dt * qdd
        if np.max(np.abs(qd_new)) > DIVERGENCE_SPEED:
            raise SimulationDiverged(f"joint speed exceeded {DIVERGENCE_SPEED} rad/s at t={t:.3f}")
        state = JointState(q=state.q + dt * qd_new, qd=qd_new, qdd=qdd)

    meta = {
        "spec": spec.as_dict(),
        "gains": {"kp": kp, "kd": kd},
        "seed": seed,
        "model_hash": hashlib.sha256(model_to_json(model).encode()).hexdigest(),
    }
    return Trajectory(t_log, q_log, qd_log, qdd_log, tau_log, meta)


def save_dataset(traj, csv_path, sidecar_path=None):
    traj.save_csv(csv_path)
    if sidecar_path is None:
        sidecar_path = str(csv_path) + ".json"
    with open(sidecar_path, "w", encoding="utf-8") as f:
        json.dump(traj.meta, f, indent=2, sort_keys=True)
        f.write("\n")
    return sidecar_path
