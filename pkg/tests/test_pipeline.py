import math

import numpy as np
import pytest

from odece.cop_core import CopInstance, Family
from odece.datagen import MdkpGenConfig, gen_mdkp_weights
from odece.dataset import Dataset
from odece.model import LinearPredictor
from odece.pipeline import (
    TrainConfig,
    aggregate,
    alpha_sweep,
    evaluate,
    instance_regret,
    train,
)


def toy(weight, capacity=4.0, copies=1):
    x_star = np.array([0.0 if weight > capacity else 1.0])
    inst = [CopInstance(np.ones(1), np.array([weight]), np.array([-1.0]), x_star) for _ in range(copies + 1)]
    return Dataset(
        problem="toy",
        family=Family.KNAPSACK_WEIGHTS,
        num_vars=1,
        num_constraints=1,
        instances=inst,
        fixed_params=[np.array([capacity])] * (copies + 1),
        splits={"train": list(range(copies)), "val": [copies], "test": []},
    )


def _toy_model(start):
    m = LinearPredictor(1, 1)
    m.params["W"][:] = start
    return m


def _sigmoid(t):
    return 1 / (1 + math.exp(-t))


def test_alpha_one_toy_dynamics():
    ds = toy(5.0)
    lr, margin = 0.1, 0.1
    cfg = TrainConfig(alpha=1.0, margin=margin, epochs=40, learning_rate=lr, optimizer="sgd",
                      model_selection="final_epoch")
    model, _ = train(ds, _toy_model(2.0), cfg)
    pred = model.predict(np.ones(1))[0]
    # Independent 1-D simulation: W and b each receive -sigma(margin - (w - 4)) while the item is picked.
    w = 2.0
    for _ in range(40):
        if w <= 4.0:
            w += 2 * lr * _sigmoid(margin - (w - 4.0))
    assert pred == pytest.approx(w, abs=1e-12)
    assert pred > 4.0
    again, _ = train(ds, model.copy(), cfg)
    assert np.array_equal(again.flat(), model.flat())


def test_alpha_zero_toy_dynamics():
    ds = toy(3.0)
    lr, margin = 0.1, 0.1
    cfg = TrainConfig(alpha=0.0, margin=margin, epochs=60, learning_rate=lr, optimizer="sgd",
                      model_selection="final_epoch")
    model, _ = train(ds, _toy_model(4.5), cfg)
    w = 4.5
    for _ in range(60):
        w -= 2 * lr * _sigmoid(margin + w - 4.0)
    pred = model.predict(np.ones(1))[0]
    assert pred == pytest.approx(w, abs=1e-12)
    assert pred < 4.0 - margin


def test_mse_training_matches_closed_form(rng):
    ds = gen_mdkp_weights(MdkpGenConfig(num_items=5, num_dims=2, num_instances=20, split=(12, 4, 4), seed=1))
    m0 = LinearPredictor(10, 10, seed=3)
    lr = 0.01
    cfg = TrainConfig(loss_kind="mse", epochs=1, batch_size=12, learning_rate=lr, optimizer="sgd",
                      model_selection="final_epoch")
    trained, hist = train(ds, m0.copy(), cfg)
    idx = ds.splits["train"]
    X = ds.features(idx)
    Y = np.stack([ds.instances[k].rho_true for k in idx])
    P = X @ m0.params["W"].T + m0.params["b"]
    G = 2 * (P - Y) / (Y.shape[1] * len(idx))
    assert np.allclose(trained.params["W"], m0.params["W"] - lr * G.T @ X, atol=1e-12)
    assert np.allclose(trained.params["b"], m0.params["b"] - lr * G.sum(0), atol=1e-12)
    naive = np.mean([np.mean((p - y) ** 2) for p, y in zip(P, Y)])
    assert hist[0].train_loss == pytest.approx(naive)


def test_regret_convention():
    assert instance_regret(12.0, 10.0) == pytest.approx(0.2)
    assert instance_regret(-90.0, -100.0) == pytest.approx(0.1)


class Oracle:
    """Predicts the true parameters of whatever instance it is shown."""

    in_dim = out_dim = 0

    def __init__(self, ds, scale=1.0):
        self.lookup = {tuple(i.features): i.rho_true * scale for i in ds.instances}

    def predict(self, X):
        return np.stack([self.lookup[tuple(x)] for x in X])


@pytest.fixture(scope="module")
def small_ds():
    return gen_mdkp_weights(MdkpGenConfig(num_items=10, num_instances=60, split=(30, 10, 20), seed=2))


def test_perfect_predictions_give_zero_metrics(small_ds):
    rep = evaluate(small_ds, Oracle(small_ds))
    assert rep.infeasibility_ratio == 0.0 and rep.normalized_regret == 0.0
    assert rep.num_feasible == rep.num_instances == 20


def test_report_consistency(small_ds):
    rep = evaluate(small_ds, Oracle(small_ds, scale=0.7))
    assert rep.infeasibility_ratio * rep.num_instances + rep.num_feasible == rep.num_instances
    assert all(r.regret >= -1e-9 for r in rep.records if r.feasible)
    assert rep.infeasibility_ratio > 0


def test_predicted_infeasible_counts_as_infeasible(small_ds):
    class Ones:
        def predict(self, X):
            return np.full((len(X), 30), 1.0)

    ds = small_ds
    # Negative capacities leave no feasible assignment, not even x = 0.
    bad = Dataset(ds.problem, ds.family, ds.num_vars, ds.num_constraints, ds.instances,
                  [-np.ones(3)] * len(ds), ds.splits)
    rep = evaluate(bad, Ones())
    assert rep.infeasibility_ratio == 1.0 and rep.normalized_regret is None
    assert rep.num_predicted_infeasible == 20


def test_training_is_reproducible(small_ds):
    cfg = TrainConfig(alpha=0.5, epochs=3, seed=4)
    a, ha = train(small_ds, LinearPredictor(10, 30, seed=4), cfg)
    b, hb = train(small_ds, LinearPredictor(10, 30, seed=4), cfg)
    assert np.array_equal(a.flat(), b.flat())
    assert [h.val_loss for h in ha] == [h.val_loss for h in hb]
    assert evaluate(small_ds, a).to_json() == evaluate(small_ds, b).to_json()
    c, _ = train(small_ds, LinearPredictor(10, 30, seed=4), TrainConfig(alpha=0.5, epochs=3, seed=4, workers=2))
    assert np.array_equal(a.flat(), c.flat())


def test_best_validation_selection(small_ds):
    cfg = TrainConfig(alpha=0.8, epochs=4, seed=1)
    model, hist = train(small_ds, LinearPredictor(10, 30, seed=1), cfg)
    best = min(h.val_loss for h in hist)
    from odece.pipeline import _validate

    assert _validate(small_ds, model, cfg, cfg.loss_config())[0] == pytest.approx(best)


def test_sweep_rows_and_aggregates(small_ds):
    rows, agg = alpha_sweep(small_ds, [0.2, 0.8], [0, 1], TrainConfig(epochs=1))
    assert len(rows) == 2 * 2 + 2
    for a in agg:
        mine = [r for r in rows if r["method"] == a["method"] and r["alpha"] == a["alpha"]]
        assert a["infeasibility_mean"] == pytest.approx(np.mean([r["infeasibility"] for r in mine]))
    rows2, _ = alpha_sweep(small_ds, [0.2, 0.8], [0, 1], TrainConfig(epochs=1), workers=2)
    strip = lambda rs: [{k: v for k, v in r.items() if k != "wall_time_s"} for r in rs]
    assert strip(rows) == strip(rows2)


def test_aggregate_skips_failed_runs():
    rows = [
        {"method": "odece", "alpha": 0.5, "infeasibility": 0.2, "regret": 0.1},
        {"method": "odece", "alpha": 0.5, "infeasibility": None, "regret": None},
        {"method": "odece", "alpha": 0.5, "infeasibility": 0.4, "regret": 0.3},
    ]
    (a,) = aggregate(rows)
    assert a["n_runs"] == 2 and a["infeasibility_mean"] == pytest.approx(0.3)


def test_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(alpha=2.0)
