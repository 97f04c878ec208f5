import math
import os
import pathlib

import numpy as np
import pytest

import gbsample as gb

DATA = pathlib.Path(os.environ.get("GBS_TEST_DATA_DIR", pathlib.Path(__file__).parents[2] / "tests" / "data"))

TINY = dict(
    task={"n_majority": 4, "n_minority": 2, "unlabeled_images": 80, "labeled_per_majority": 40, "eval_per_class": 20},
    training={"generations": 2, "steps_per_generation": 20, "burn_in_steps": 20},
)


@pytest.mark.parametrize("kind", ["softmax-cross-entropy", "softmax-focal"])
def test_gradient_matches_central_difference(kind):
    rng = np.random.default_rng(3)
    x = rng.uniform(-3, 3, size=7)
    loss, g = gb.loss_and_grad(x, 2, kind=kind)
    assert math.isfinite(loss)
    h = 1e-5
    fd = np.array(
        [(gb.loss_and_grad(x + h * e, 2, kind=kind)[0] - gb.loss_and_grad(x - h * e, 2, kind=kind)[0]) / (2 * h)
         for e in np.eye(7)]
    )
    np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-9)
    assert abs(g.sum()) < 1e-12


def test_ledger_and_solvers():
    ledger = gb.GradientLedger(3, eta_g=0.0)
    ledger.accumulate([0, 1, 2], np.array([[-1.0, 0.5, 0.5], [0.5, -1.0, 0.5], [0.5, 0.5, -1.0]]))
    ledger.ema_update()
    assert np.allclose(ledger.ema, ledger.ema.T)
    np.testing.assert_allclose(gb.solve_direct(ledger.ema), np.ones(3))
    sol = gb.solve_iterative(ledger.ema, max_steps=100)
    np.testing.assert_allclose(sol["w"], np.ones(3))
    with pytest.raises(gb.SolverError):
        gb.solve_direct(np.zeros((3, 3)))
    with pytest.raises(ValueError):
        gb.loss_and_grad(np.zeros(3), 5)


def test_thresholds_and_sampler():
    th = gb.gbt_thresholds(np.array([0.25, 1.0, 2.0, 100.0]))
    np.testing.assert_allclose(th, [0.9, 0.9, 0.45, 0.05])
    assert gb.epsilon_schedule(0.5, 3, 10) == 0.5 * 3 / 10
    assert gb.class_repeat_rates([100, 400], 0.25, 1600) == [2.0, 1.0]
    draws = gb.realize_repeats(2.5, 20000, seed=1)
    assert set(draws) == {2, 3}
    assert abs(np.mean(draws) - 2.5) < 0.03


def test_simulate_is_deterministic():
    cfg = gb.config("full", seed=4, **TINY)
    a = gb.simulate(cfg)
    b = gb.simulate(cfg)
    assert a == b
    assert [r["generation"] for r in a] == [0, 1, 2]
    for r in a:
        assert abs(sum(r["weights"]) - 7) < 1e-9


def test_config_errors():
    assert "full" in gb.preset_names()
    assert gb.default_config()["task"]["n_minority"] == 5
    assert gb.config_schema()["additionalProperties"] is False
    with pytest.raises(ValueError):
        gb.config("full", task={"wings": 2})
    with pytest.raises(ValueError):
        gb.config("mystery")


def test_split_and_report(tmp_path):
    s = gb.split_dataset(DATA / "coco_200.json", [1, 2, 3, 4, 5, 6], [7, 8, 9, 10], seed=7, out_dir=tmp_path)
    assert sorted(s["labeled"] + s["unlabeled"]) == list(range(1000, 1200))
    for name in ["labeled.json", "unlabeled.json", "audit.csv", "split_summary.json"]:
        assert (tmp_path / name).read_bytes() == (DATA / "split_golden" / name).read_bytes()
    gb.render_report(DATA / "report_fixture.jsonl", tmp_path)
    assert (tmp_path / "pr_table.csv").read_text() == (DATA / "report_golden" / "pr_table.csv").read_text()
