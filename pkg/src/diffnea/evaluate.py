"""Metrics and control-based evaluation of learned dynamics models."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .dynamics import (JointState, SingularMassMatrix, forward_dynamics,
                       mass_matrix, rnea)
from .simgen import DEFAULT_GAINS, DIVERGENCE_SPEED


def nmse(pred, target):
    """Mean squared error normalized by the (population) variance of the
    target; a zero-variance target falls back to the raw MSE with a warning."""
    pred = np.asarray(pred, dtype=float)
    target = np.asarray(target, dtype=float)
    if pred.shape != target.shape or pred.ndim != 1 or len(pred) < 2:
        raise ValueError("nmse needs two equal-length 1-D series of length >= 2")
    mse = float(np.mean((pred - target) ** 2))
    var = float(np.var(target))
    if var == 0.0:
        warnings.warn("zero-variance target: NMSE reported as raw MSE")
        return mse
    return mse / var


@dataclass
class TrackingResult:
    q_nmse: np.ndarray
    qd_nmse: np.ndarray
    torque_feedback_fraction: float
    unstable: bool

    @property
    def q_nmse_mean(self):
        return float(np.mean(self.q_nmse))

    @property
    def qd_nmse_mean(self):
        return float(np.mean(self.qd_nmse))


def tracking_gains(model, learned, q, omega=12.0, zeta=1.0):
    """Per-joint PD gains scaled by the learned model's inertia.

    Uniform scalar gains cannot damp every joint of an arm whose apparent
    inertias span three orders of magnitude: the heavy proximal joints end
    up nearly undamped and resonate with model-error torques. Scaling by
    the diagonal of the learned mass matrix at configuration `q` gives every
    joint the same error dynamics (natural frequency `omega`, damping ratio
    `zeta`) while using only the learned model.
    """
    from .params import ParamVector

    if isinstance(learned, ParamVector):
        learned = learned.numeric_inertias(model)
    diag = np.diag(np.asarray(mass_matrix(model, learned, list(q)), dtype=float))
    diag = np.maximum(diag, 1e-6)
    return omega ** 2 * diag, 2.0 * zeta * omega * diag


def track_trajectory(model, learned, reference, gains=DEFAULT_GAINS,
                     true_inertias=None):
    """Computed-torque tracking of `reference` with a learned model.

    Feed-forward torques come from the learned inverse dynamics evaluated at
    the reference; the plant integrates the ground-truth model. `learned` is
    a ParamVector or a list of inertias; `reference` a Trajectory whose
    (q, qd, qdd) columns are the desired motion. Returns per-joint NMSE of
    the realized motion and the mean share of feedback in the applied torque.
    """
    from .params import ParamVector

    if isinstance(learned, ParamVector):
        learned = learned.numeric_inertias(model)
    if true_inertias is None:
        true_inertias = model.inertias
    kp, kd = gains
    n = model.n_dof
    dt = float(reference.t[1] - reference.t[0])
    steps = len(reference)

    state = JointState(q=reference.q[0], qd=reference.qd[0], qdd=np.zeros(n))
    q_log = np.empty((steps, n))
    qd_log = np.empty((steps, n))
    fb_share = np.empty(steps)
    unstable = False

    for k in range(steps):
        q_d, qd_d, qdd_d = reference.q[k], reference.qd[k], reference.qdd[k]
        try:
            ff = np.array(rnea(model, learned, list(q_d), list(qd_d), list(qdd_d)))
        except (FloatingPointError, ValueError):
            unstable = True
            break
        fb = kp * (q_d - state.q) + kd * (qd_d - state.qd)
        tau = ff + fb
        denom = np.abs(tau)
        fb_share[k] = float(np.mean(np.abs(fb) / np.maximum(denom, 1e-9)))
        q_log[k] = state.q
        qd_log[k] = state.qd
        try:
            qdd = np.array(forward_dynamics(model, true_inertias,
                                            list(state.q), list(state.qd), list(tau)))
        except SingularMassMatrix:
            unstable = True
            break
        qd_new = state.qd + dt * qdd
        if not np.all(np.isfinite(qd_new)) or np.max(np.abs(qd_new)) > DIVERGENCE_SPEED:
            unstable = True
            break
        state = JointState(q=state.q + dt * qd_new, qd=qd_new, qdd=qdd)

    if unstable:
        return TrackingResult(np.full(n, np.inf), np.full(n, np.inf), 1.0, True)
    q_nmse = np.array([nmse(q_log[:, j], reference.q[:, j]) for j in range(n)])
    qd_nmse = np.array([nmse(qd_log[:, j], reference.qd[:, j]) for j in range(n)])
    return TrackingResult(q_nmse, qd_nmse, float(np.mean(fb_share)), False)


KIND_ORDER = ("nostr", "symm", "spd", "tri", "cov")

REPORT_COLUMNS = ("kind", "epochs_to_converge", "sine_q_nmse", "sine_qd_nmse",
                  "heldout_q_nmse", "heldout_qd_nmse", "consistent_fraction")


def compare_report(results):
    """Comparison table over parameterizations as (csv_text, markdown_text).

    `results` maps kind -> dict with the REPORT_COLUMNS values (epochs may be
    None; NMSE entries may be inf for unstable runs).
    """
    if not results:
        raise ValueError("no results to report")

    def fmt(v):
        if v is None:
            return "N/A"
        if isinstance(v, float):
            return "unstable" if not np.isfinite(v) else f"{v:.6g}"
        return str(v)

    rows = []
    for kind in KIND_ORDER:
        if kind in results:
            r = results[kind]
            rows.append([fmt(r.get(c)) if c != "kind" else kind for c in REPORT_COLUMNS])
    for kind in results:
        if kind not in KIND_ORDER:
            r = results[kind]
            rows.append([fmt(r.get(c)) if c != "kind" else kind for c in REPORT_COLUMNS])

    csv_text = ",".join(REPORT_COLUMNS) + "\n" + "\n".join(",".join(r) for r in rows) + "\n"
    widths = [max(len(c), max((len(r[i]) for r in rows), default=0))
              for i, c in enumerate(REPORT_COLUMNS)]
    header = "| " + " | ".join(c.ljust(w) for c, w in zip(REPORT_COLUMNS, widths)) + " |"
    sep = "|" + "|".join("-" * (w + 2) for w in widths) + "|"
    body = ["| " + " | ".join(v.ljust(w) for v, w in zip(r, widths)) + " |" for r in rows]
    md_text = "\n".join([header, sep] + body) + "\n"
    return csv_text, md_text
