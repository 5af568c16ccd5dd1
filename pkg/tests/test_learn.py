import numpy as np
import pytest

from diffnea import learn
from diffnea import params as par


def test_train_config_validation():
    with pytest.raises(ValueError):
        learn.TrainConfig(lr=0.0)
    with pytest.raises(ValueError):
        learn.TrainConfig(loss="huber")
    with pytest.raises(ValueError):
        learn.TrainConfig(optimizer="lbfgs")
    with pytest.raises(ValueError):
        learn.TrainConfig(batch_size=0)


def test_train_config_round_trip():
    cfg = learn.TrainConfig(kind="tri", lr=0.5, max_epochs=3)
    again = learn.TrainConfig.from_dict({**cfg.as_dict(), "unknown_key": 1})
    assert again == cfg


def test_grad_clip_auto_only_for_nostr():
    assert learn.TrainConfig(kind="nostr").resolved_clip() == learn.DEFAULT_GRAD_CLIP_NOSTR
    assert learn.TrainConfig(kind="cov").resolved_clip() is None
    assert learn.TrainConfig(kind="cov", grad_clip=5.0).resolved_clip() == 5.0


def test_loss_id_zero_at_ground_truth(planar2, planar2_data):
    pv = par.init_params("cov", planar2, sigma=0.0, seed=0)
    batch = planar2_data.slice(np.arange(64))
    assert learn.loss_id(planar2, pv, batch) < 1e-12


def test_loss_fd_zero_at_ground_truth(planar2, planar2_data):
    pv = par.init_params("cov", planar2, sigma=0.0, seed=0)
    batch = planar2_data.slice(np.arange(64))
    assert learn.loss_fd(planar2, pv, batch) < 1e-10


def test_loss_is_a_sum_over_samples(planar2, planar2_data):
    pv = par.init_params("symm", planar2, sigma=0.2, seed=1)
    a = learn.loss_id(planar2, pv, planar2_data.slice(np.arange(0, 32)))
    b = learn.loss_id(planar2, pv, planar2_data.slice(np.arange(32, 64)))
    both = learn.loss_id(planar2, pv, planar2_data.slice(np.arange(64)))
    assert a + b == pytest.approx(both, rel=1e-12)


@pytest.mark.parametrize("kind", par.KINDS)
def test_loss_gradient_matches_finite_differences(kind, planar2, planar2_data):
    pv = par.init_params(kind, planar2, sigma=0.05, seed=2)
    batch = planar2_data.slice(np.arange(8))
    loss0, g = learn.loss_and_grad(planar2, pv, batch)
    flat = pv.flatten()
    eps = 1e-6
    for i in np.linspace(0, flat.size - 1, 7, dtype=int):
        probe = flat.copy()
        probe[i] += eps
        hi = learn.loss_id(planar2, pv.with_flat(probe), batch)
        probe[i] -= 2 * eps
        lo = learn.loss_id(planar2, pv.with_flat(probe), batch)
        numeric = (hi - lo) / (2 * eps)
        assert g[i] == pytest.approx(numeric, rel=1e-4, abs=1e-6)


def test_sgd_step():
    opt = learn.Sgd(lr=0.5)
    x = np.array([1.0, -2.0])
    g = np.array([2.0, 2.0])
    np.testing.assert_allclose(opt.step(x, g), [0.0, -3.0])


def test_adam_first_step_is_lr_in_gradient_sign():
    opt = learn.Adam(lr=0.1)
    x = np.zeros(3)
    g = np.array([5.0, -0.01, 0.0])
    out = opt.step(x, g)
    np.testing.assert_allclose(out[:2], [-0.1, 0.1], rtol=1e-5)
    assert out[2] == 0.0


def test_clip_rescales_large_gradients():
    g = np.array([3.0, 4.0])
    np.testing.assert_allclose(learn._clip(g, 1.0), g / 5.0)
    np.testing.assert_allclose(learn._clip(g, 100.0), g)
    assert learn._clip(g, None) is g


def test_predict_torques_matches_log_at_truth(planar2, planar2_data):
    pred = learn.predict_torques(planar2, planar2.inertias, planar2_data)
    np.testing.assert_allclose(pred, planar2_data.tau, atol=1e-10)


def test_torque_nmse_at_truth_is_zero(planar2, planar2_data):
    pv = par.init_params("nostr", planar2, sigma=0.0, seed=0)
    nm = learn.torque_nmse(planar2, pv, planar2_data)
    assert nm.shape == (2,)
    assert np.max(nm) < 1e-15


def test_train_zero_epochs_when_already_converged(planar2, planar2_data):
    init = par.init_params("cov", planar2, sigma=0.0, seed=0)
    cfg = learn.TrainConfig(kind="cov", batch_size=128, max_epochs=5)
    report = learn.train(planar2, planar2_data, cfg, init=init)
    assert report.epochs_to_converge == 0
    assert report.consistency_history == [1.0]


@pytest.mark.parametrize("kind", ["cov", "nostr"])
def test_train_converges_on_small_fixture(kind, planar2, planar2_data):
    cfg = learn.TrainConfig(kind=kind, batch_size=128, max_epochs=40,
                            init_sigma=0.05, seed=0)
    report = learn.train(planar2, planar2_data, cfg)
    assert report.epochs_to_converge is not None
    assert report.aborted is None
    nm = np.array(report.nmse_history[-1])
    assert np.max(nm) <= cfg.convergence_nmse


def test_structured_training_stays_consistent(planar2, planar2_data):
    cfg = learn.TrainConfig(kind="tri", batch_size=128, max_epochs=5,
                            init_sigma=0.2, seed=4)
    report = learn.train(planar2, planar2_data, cfg)
    assert all(c == 1.0 for c in report.consistency_history)


def test_train_is_deterministic(planar2, planar2_data):
    cfg = learn.TrainConfig(kind="spd", batch_size=128, max_epochs=3, seed=7)
    a = learn.train(planar2, planar2_data, cfg)
    b = learn.train(planar2, planar2_data, cfg)
    np.testing.assert_array_equal(a.final_params.per_link, b.final_params.per_link)
    assert a.loss_history == b.loss_history


def test_train_seed_changes_outcome(planar2, planar2_data):
    base = learn.TrainConfig(kind="spd", batch_size=128, max_epochs=2, seed=1)
    other = learn.TrainConfig(kind="spd", batch_size=128, max_epochs=2, seed=2)
    a = learn.train(planar2, planar2_data, base)
    b = learn.train(planar2, planar2_data, other)
    assert np.any(a.final_params.per_link != b.final_params.per_link)


def test_train_rejects_small_dataset(planar2, planar2_data):
    cfg = learn.TrainConfig(batch_size=10_000)
    with pytest.raises(ValueError, match="batch"):
        learn.train(planar2, planar2_data, cfg)


def test_full_batch_gradient_descent_decreases_loss(planar2, planar2_data):
    """Plain SGD with a tiny step on the full set must descend monotonically."""
    data = planar2_data.slice(np.arange(256))
    cfg = learn.TrainConfig(kind="symm", optimizer="sgd", lr=1e-7,
                            batch_size=256, max_epochs=5, shuffle=False,
                            init_sigma=0.2, seed=0)
    report = learn.train(planar2, data, cfg)
    losses = report.loss_history
    assert all(b < a for a, b in zip(losses, losses[1:]))


def test_train_report_serialization(planar2, planar2_data):
    cfg = learn.TrainConfig(kind="cov", batch_size=128, max_epochs=2, seed=0)
    report = learn.train(planar2, planar2_data, cfg)
    blob = report.to_json()
    assert '"final_params"' in blob
    csv = report.history_csv()
    assert csv.splitlines()[0].startswith("epoch,loss,nmse0")


def test_online_training_curve(planar2, planar2_data):
    cfg = learn.TrainConfig(kind="cov", batch_size=128, init_sigma=0.05, seed=0)
    report = learn.train_online(planar2, planar2_data, cfg)
    n_batches = int(np.ceil(len(planar2_data) / 128))
    assert report.nmse_curve.shape == (n_batches, 2)
    assert report.mean_curve[-1] < report.mean_curve[0]
    csv = report.curve_csv()
    assert csv.splitlines()[0] == "batch,nmse0,nmse1,nmse_mean"


def test_online_training_is_deterministic(planar2, planar2_data):
    cfg = learn.TrainConfig(kind="nostr", batch_size=128, seed=3)
    a = learn.train_online(planar2, planar2_data, cfg)
    b = learn.train_online(planar2, planar2_data, cfg)
    np.testing.assert_array_equal(a.nmse_curve, b.nmse_curve)
