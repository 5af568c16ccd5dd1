"""Loss functions and the gradient-descent trainer (batch and online)."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .dynamics import SingularMassMatrix, forward_dynamics, rnea
from .evaluate import nmse
from .params import ParamVector, consistency_check, init_params

DEFAULT_GRAD_CLIP_NOSTR = 1e3


@dataclass
class TrainConfig:
    kind: str = "cov"
    loss: str = "id"                     # "id" | "fd"
    optimizer: str = "adam"              # "adam" | "sgd"
    lr: float = 1e-2
    batch_size: int = 256
    max_epochs: int = 100
    convergence_nmse: float = 0.1
    shuffle: bool = True
    seed: int = 0
    friction_learnable: bool = False
    init_mode: str = "from_urdf_perturbed"
    init_sigma: float = 0.1
    grad_clip: float | str | None = "auto"   # "auto": 1e3 for nostr, off otherwise
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.convergence_nmse <= 0:
            raise ValueError("convergence_nmse must be positive")
        if self.loss not in ("id", "fd"):
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")

    def resolved_clip(self):
        if self.grad_clip == "auto":
            return DEFAULT_GRAD_CLIP_NOSTR if self.kind == "nostr" else None
        return self.grad_clip

    def as_dict(self):
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, obj):
        known = {k: v for k, v in obj.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class TrainReport:
    epochs_to_converge: int | None
    loss_history: list
    nmse_history: list                   # per epoch: per-joint torque NMSE
    consistency_history: list            # per epoch: fraction of links consistent
    final_params: ParamVector
    aborted: str | None = None
    rejected_batches: int = 0

    def to_json(self):
        return json.dumps({
            "epochs_to_converge": self.epochs_to_converge,
            "loss_history": self.loss_history,
            "nmse_history": self.nmse_history,
            "consistency_history": self.consistency_history,
            "aborted": self.aborted,
            "rejected_batches": self.rejected_batches,
            "final_params": json.loads(self.final_params.to_json()),
        }, indent=2)

    def history_csv(self):
        n = len(self.nmse_history[0]) if self.nmse_history else 0
        lines = ["epoch,loss," + ",".join(f"nmse{j}" for j in range(n)) + ",consistent_fraction"]
        for e, (l, nm, c) in enumerate(zip(self.loss_history, self.nmse_history,
                                           self.consistency_history)):
            lines.append(f"{e},{l:.17g}," + ",".join(f"{x:.17g}" for x in nm) + f",{c:.17g}")
        return "\n".join(lines) + "\n"


def _batch_columns(batch):
    """Per-joint column arrays (lists over joints of (B,) arrays)."""
    q = [batch.q[:, j] for j in range(batch.n_dof)]
    qd = [batch.qd[:, j] for j in range(batch.n_dof)]
    qdd = [batch.qdd[:, j] for j in range(batch.n_dof)]
    tau = [batch.tau[:, j] for j in range(batch.n_dof)]
    return q, qd, qdd, tau


def loss_id(model, params, batch, tape=None):
    """Summed squared torque residuals of the batch.

    `params` is a ParamVector; with a tape given, returns (loss Var, leaves),
    otherwise the plain float loss.
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    q, qd, qdd, tau = _batch_columns(batch)
    if tape is None:
        inertias = params.materialize(model)
        leaves = None
    else:
        inertias, leaves = params.materialize(model, tape)
    pred = rnea(model, inertias, q, qd, qdd)
    loss = 0.0
    for j in range(batch.n_dof):
        loss = loss + ad.vsum(ad.square(pred[j] - tau[j]))
    return loss if tape is None else (loss, leaves)


def loss_fd(model, params, batch, tape=None):
    """Summed squared acceleration residuals; gradient flows through the
    mass-matrix solve. Raises SingularMassMatrix for implausible parameters."""
    if len(batch) == 0:
        raise ValueError("empty batch")
    q, qd, qdd, tau = _batch_columns(batch)
    if tape is None:
        inertias = params.materialize(model)
        leaves = None
    else:
        inertias, leaves = params.materialize(model, tape)
    pred = forward_dynamics(model, inertias, q, qd, tau)
    loss = 0.0
    for j in range(batch.n_dof):
        loss = loss + ad.vsum(ad.square(pred[j] - qdd[j]))
    return loss if tape is None else (loss, leaves)


_LOSSES = {"id": loss_id, "fd": loss_fd}


def loss_and_grad(model, params, batch, loss_kind="id"):
    """(float loss, flat gradient) for one batch."""
    tape = ad.Tape()
    loss, leaves = _LOSSES[loss_kind](model, params, batch, tape)
    tape.backward(loss)
    return float(ad.value(loss)), tape.grad(leaves)


class Sgd:
    def __init__(self, lr):
        self.lr = lr

    def step(self, x, g):
        return x - self.lr * g


class Adam:
    def __init__(self, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = None
        self.v = None

    def step(self, x, g):
        if self.m is None:
            self.m = np.zeros_like(x)
            self.v = np.zeros_like(x)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * g
        self.v = self.beta2 * self.v + (1 - self.beta2) * g * g
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return x - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _make_optimizer(cfg):
    if cfg.optimizer == "sgd":
        return Sgd(cfg.lr)
    return Adam(cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps)


def predict_torques(model, params_or_inertias, traj):
    """Model torques over a whole trajectory, vectorized (numeric, no tape)."""
    inertias = params_or_inertias
    if isinstance(params_or_inertias, ParamVector):
        inertias = params_or_inertias.materialize(model)
    q, qd, qdd, _ = _batch_columns(traj)
    pred = rnea(model, inertias, q, qd, qdd)
    return np.stack([np.asarray(p) for p in pred], axis=-1)


def torque_nmse(model, params, traj):
    """Per-joint NMSE of predicted vs logged torques over `traj`."""
    pred = predict_torques(model, params, traj)
    return np.array([nmse(pred[:, j], traj.tau[:, j]) for j in range(traj.n_dof)])


def _consistency_fraction(model, params):
    inertias = params.numeric_inertias(model)
    ok = sum(1 for mi in inertias if consistency_check(mi).fully_consistent)
    return ok / len(inertias)


def _clip(g, limit):
    if limit is None:
        return g
    norm = float(np.linalg.norm(g))
    if norm > limit:
        return g * (limit / norm)
    return g


def _batches(n_records, batch_size, order):
    for start in range(0, n_records, batch_size):
        idx = order[start:start + batch_size]
        if len(idx):
            yield idx


def train(model, data, cfg, init=None):
    """Minibatch gradient descent until the per-joint torque NMSE on the full
    training set drops to cfg.convergence_nmse, or max_epochs."""
    if len(data) < cfg.batch_size:
        raise ValueError(f"dataset has {len(data)} records < batch size {cfg.batch_size}")
    rng = np.random.default_rng(cfg.seed)
    params = init.copy() if init is not None else init_params(
        cfg.kind, model, cfg.init_mode, cfg.init_sigma, cfg.seed, cfg.friction_learnable)
    opt = _make_optimizer(cfg)
    clip = cfg.resolved_clip()

    nm = torque_nmse(model, params, data)
    loss_history = []
    nmse_history = [list(nm)]
    consistency_history = [_consistency_fraction(model, params)]
    if float(np.max(nm)) <= cfg.convergence_nmse:
        return TrainReport(0, loss_history, nmse_history, consistency_history, params)

    x = params.flatten()
    last_good = params.copy()
    aborted = None
    rejected = 0
    epochs_to_converge = None
    for epoch in range(1, cfg.max_epochs + 1):
        order = np.arange(len(data))
        if cfg.shuffle:
            rng.shuffle(order)
        epoch_loss = 0.0
        try:
            for idx in _batches(len(data), cfg.batch_size, order):
                batch = data.slice(idx)
                try:
                    loss, g = loss_and_grad(model, params.with_flat(x), batch, cfg.loss)
                except SingularMassMatrix:
                    rejected += 1
                    continue
                epoch_loss += loss
                x = opt.step(x, _clip(g, clip))
        except ad.DomainError as e:
            aborted = f"non-finite loss at epoch {epoch}: {e}"
            params = last_good
            break
        params = params.with_flat(x)
        last_good = params.copy()
        nm = torque_nmse(model, params, data)
        loss_history.append(epoch_loss)
        nmse_history.append(list(nm))
        consistency_history.append(_consistency_fraction(model, params))
        if float(np.max(nm)) <= cfg.convergence_nmse:
            epochs_to_converge = epoch
            break

    return TrainReport(epochs_to_converge, loss_history, nmse_history,
                       consistency_history, params, aborted, rejected)


@dataclass
class OnlineReport:
    nmse_curve: np.ndarray               # (n_batches, n_dof) full-dataset NMSE
    final_params: ParamVector
    rejected_batches: int = 0

    @property
    def mean_curve(self):
        return self.nmse_curve.mean(axis=1)

    def curve_csv(self):
        n = self.nmse_curve.shape[1]
        lines = ["batch," + ",".join(f"nmse{j}" for j in range(n)) + ",nmse_mean"]
        for k, row in enumerate(self.nmse_curve):
            lines.append(f"{k}," + ",".join(f"{x:.17g}" for x in row)
                         + f",{row.mean():.17g}")
        return "\n".join(lines) + "\n"


def train_online(model, data, cfg, init=None):
    """Single sequential pass over temporally ordered batches; after each
    update, the full-dataset per-joint torque NMSE is recorded."""
    params = init.copy() if init is not None else init_params(
        cfg.kind, model, cfg.init_mode, cfg.init_sigma, cfg.seed, cfg.friction_learnable)
    opt = _make_optimizer(cfg)
    clip = cfg.resolved_clip()

    x = params.flatten()
    curve = []
    rejected = 0
    order = np.arange(len(data))
    for idx in _batches(len(data), cfg.batch_size, order):
        batch = data.slice(idx)
        try:
            _, g = loss_and_grad(model, params.with_flat(x), batch, cfg.loss)
            x = opt.step(x, _clip(g, clip))
        except (SingularMassMatrix, ad.DomainError):
            rejected += 1
        curve.append(torque_nmse(model, params.with_flat(x), data))
    return OnlineReport(np.array(curve), params.with_flat(x), rejected)
