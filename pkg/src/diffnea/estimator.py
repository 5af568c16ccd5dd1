"""Scikit-learn style front end: torque regression on stacked joint states.

Samples are rows ``[q | qd | qdd]`` of width ``3 * n_dof`` and targets are
joint torques, so the estimator plugs into sklearn model selection and
scoring while the heavy lifting stays in :mod:`diffnea.learn`.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .learn import TrainConfig, predict_torques, train
from .model import RobotModel, parse_urdf_file
from .simgen import Trajectory


class InverseDynamicsRegressor(RegressorMixin, BaseEstimator):
    """Learns inertial parameters of a known kinematic structure from data.

    Parameters
    ----------
    model : RobotModel or str
        The robot whose inertial parameters are to be learned; a path is
        parsed as a URDF file at fit time.
    kind : str
        Parameterization: "nostr", "symm", "spd", "tri" or "cov".
    loss : str
        "id" fits predicted torques, "fd" fits predicted accelerations.

    The remaining keyword arguments mirror TrainConfig. After ``fit`` the
    learned parameters are in ``params_`` and the training history in
    ``report_``.
    """

    def __init__(self, model, kind="cov", loss="id", optimizer="adam",
                 lr=1e-2, batch_size=256, max_epochs=100,
                 convergence_nmse=0.1, shuffle=True, seed=0,
                 friction_learnable=False, init_mode="from_urdf_perturbed",
                 init_sigma=0.1):
        self.model = model
        self.kind = kind
        self.loss = loss
        self.optimizer = optimizer
        self.lr = lr
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.convergence_nmse = convergence_nmse
        self.shuffle = shuffle
        self.seed = seed
        self.friction_learnable = friction_learnable
        self.init_mode = init_mode
        self.init_sigma = init_sigma

    def _resolve_model(self):
        if isinstance(self.model, RobotModel):
            return self.model
        return parse_urdf_file(self.model)

    def _split_columns(self, X, robot):
        n = robot.n_dof
        if X.shape[1] != 3 * n:
            raise ValueError(
                f"X has {X.shape[1]} columns; the {n}-DOF model needs {3 * n} "
                "(q, qd, qdd stacked)")
        return X[:, :n], X[:, n:2 * n], X[:, 2 * n:]

    def fit(self, X, y):
        """Fit inertial parameters to (states, torques) samples."""
        X, y = check_X_y(X, y, multi_output=True, y_numeric=True)
        robot = self._resolve_model()
        if y.ndim != 2 or y.shape[1] != robot.n_dof:
            raise ValueError(f"y must be (n_samples, {robot.n_dof}) torques")
        q, qd, qdd = self._split_columns(X, robot)
        t = np.arange(len(X), dtype=float)
        data = Trajectory(t, q, qd, qdd, y)
        cfg = TrainConfig(
            kind=self.kind, loss=self.loss, optimizer=self.optimizer,
            lr=self.lr, batch_size=min(self.batch_size, len(X)),
            max_epochs=self.max_epochs,
            convergence_nmse=self.convergence_nmse, shuffle=self.shuffle,
            seed=self.seed, friction_learnable=self.friction_learnable,
            init_mode=self.init_mode, init_sigma=self.init_sigma)
        self.report_ = train(robot, data, cfg)
        self.params_ = self.report_.final_params
        self.model_ = robot
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        """Torques of the learned model at the given stacked joint states."""
        check_is_fitted(self, "params_")
        X = check_array(X)
        q, qd, qdd = self._split_columns(X, self.model_)
        data = Trajectory(np.arange(len(X), dtype=float), q, qd, qdd,
                          np.zeros_like(q))
        return predict_torques(self.model_, self.params_, data)
