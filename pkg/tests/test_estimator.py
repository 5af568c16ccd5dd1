import numpy as np
import pytest
from sklearn.base import clone

from diffnea.estimator import InverseDynamicsRegressor
from diffnea.fixtures import planar2_path


def stacked(traj):
    X = np.hstack([traj.q, traj.qd, traj.qdd])
    return X, traj.tau


def test_fit_predict_recovers_torques(planar2, planar2_data):
    X, y = stacked(planar2_data)
    est = InverseDynamicsRegressor(planar2, kind="cov", max_epochs=40,
                                   batch_size=128, init_sigma=0.05, seed=0)
    est.fit(X, y)
    pred = est.predict(X)
    assert pred.shape == y.shape
    assert est.score(X, y) > 0.9
    assert est.report_.epochs_to_converge is not None


def test_model_path_is_accepted(planar2_data):
    X, y = stacked(planar2_data)
    est = InverseDynamicsRegressor(planar2_path(), kind="cov", max_epochs=1,
                                   batch_size=128, seed=0)
    est.fit(X, y)
    assert est.model_.n_dof == 2


def test_sklearn_clone_compatible(planar2):
    est = InverseDynamicsRegressor(planar2, kind="tri", lr=0.5)
    again = clone(est)
    assert again.kind == "tri" and again.lr == 0.5
    assert again.get_params()["model"].n_dof == planar2.n_dof


def test_predict_before_fit_fails(planar2):
    est = InverseDynamicsRegressor(planar2)
    with pytest.raises(Exception):
        est.predict(np.zeros((4, 6)))


def test_wrong_feature_width_rejected(planar2, planar2_data):
    X, y = stacked(planar2_data)
    est = InverseDynamicsRegressor(planar2, max_epochs=1, batch_size=128)
    with pytest.raises(ValueError, match="columns"):
        est.fit(X[:, :5], y)


def test_wrong_target_width_rejected(planar2, planar2_data):
    X, y = stacked(planar2_data)
    est = InverseDynamicsRegressor(planar2, max_epochs=1, batch_size=128)
    with pytest.raises(ValueError, match="torques"):
        est.fit(X, np.hstack([y, y]))
