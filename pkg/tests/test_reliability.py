import json
import math

import numpy as np
import pytest

from f2narx.data import Trajectory, TimeGrid
from f2narx.gpr import GPConfig
from f2narx.model import F2NarxConfig, predict_mean_batch, train
from f2narx.reliability import (
    ReliabilityConfig,
    ReliabilityResult,
    estimate_pf,
    first_passage_indicator,
    pf_cov,
    reference_pf,
    run_active_learning,
    select_next,
    u_min_double_sided,
)

FAST = F2NarxConfig(gp=GPConfig(n_restarts=2), sgp=GPConfig(sgp_maxiter=40, init_subset=200), n_inducing=16)


def test_indicator_examples():
    g = TimeGrid(0.0, 0.1, 5)
    assert first_passage_indicator(Trajectory(g, np.zeros(5)), 0.14) == 0
    assert first_passage_indicator(np.array([0.0, 0.1, -0.15, 0.0]), 0.14) == 1
    assert first_passage_indicator(np.array([0.0, 0.14]), 0.14) == 1
    assert first_passage_indicator(np.array([[0.0, 0.1], [0.2, 0.0]]), 0.14).tolist() == [0, 1]


def test_pf_and_cov():
    assert pf_cov(0.01, 10_000) == pytest.approx(math.sqrt(0.99 / (9999 * 0.01)), abs=1e-15)
    assert abs(pf_cov(0.01, 10_000) - 0.0995) < 1e-4
    assert estimate_pf(np.full((4, 3), 1.0), 0.14) == (1.0, 0.0)
    pf, cov = estimate_pf(np.zeros((4, 3)), 0.14)
    assert pf == 0.0 and math.isinf(cov)
    with pytest.raises(ValueError):
        estimate_pf(np.zeros((0, 3)), 0.14)


def test_u_min_hand_examples():
    mu = np.array([0.1, 0.0, 0.0])
    var = np.array([0.02**2, 1e-12, 1e-12])
    assert u_min_double_sided(mu, var, 0.14) == pytest.approx(2.0)
    # Confident failure on the upper side saturates it at u_e.
    mu = np.array([0.2, 0.0])
    var = np.array([0.01**2, 1e-12])
    assert u_min_double_sided(mu, var, 0.14, u_e=10.0) == pytest.approx(min(10.0, 0.14 / 1e-6))
    # Zero variance everywhere: infinitely confident.
    assert math.isinf(u_min_double_sided(np.array([0.1, 0.05]), np.zeros(2), 0.14))
    with pytest.raises(ValueError):
        u_min_double_sided(np.zeros(2), np.array([1.0, -1.0]), 0.14)


def test_u_min_sign_symmetry(rng):
    mu = 0.1 * rng.standard_normal((20, 50))
    var = rng.uniform(1e-5, 1e-3, (20, 50))
    assert np.array_equal(u_min_double_sided(mu, var, 0.14), u_min_double_sided(-mu, var, 0.14))


def test_synthetic_pool_selects_straddling_sample():
    # Ten members, 4 instants each. Member 6 sits 0.5 sigma from the lower
    # threshold; every other member is at least 3 sigma away from both.
    n, t = 10, 4
    mu = np.full((n, t), 0.02)
    var = np.full((n, t), 0.01**2)
    mu[3, 2] = 0.11  # U = 3 to the upper side
    mu[6, 1] = -0.135  # U = 0.5 to the lower side
    scores = u_min_double_sided(mu, var, 0.14)
    assert scores[6] == pytest.approx(0.5)
    assert scores[3] == pytest.approx(3.0)
    assert select_next(scores, set()) == 6
    assert select_next(scores, {6}) == 3


def test_select_next_ties_and_exhaustion():
    s = np.array([1.0, 0.5, 0.5, 2.0])
    assert select_next(s, set()) == 1
    assert select_next(np.full(3, np.inf), {0}) == 1
    with pytest.raises(ValueError):
        select_next(s, {0, 1, 2, 3})


def test_config_validation():
    with pytest.raises(ValueError):
        ReliabilityConfig(strategy="greedy")
    with pytest.raises(ValueError):
        ReliabilityConfig(n_target_new=-1)


@pytest.fixture(scope="module")
def small_setup(short_problem):
    rng = np.random.default_rng(21)
    initial = short_problem.generate(*short_problem.sample(rng, 6))
    pool = short_problem.sample(rng, 40)
    y_th = float(np.quantile(np.abs(initial.response).max(axis=1), 0.5))
    return initial, pool, y_th


def test_zero_budget_is_plain_surrogate_mcs(short_problem, small_setup, tmp_path):
    initial, pool, y_th = small_setup
    cfg = ReliabilityConfig(y_th=y_th, n_pool=40, n_target_new=0, cov_target=0.99, max_pool=40, pool_growth=10)
    res = run_active_learning(short_problem, cfg, FAST, initial=initial, pool=pool, log_path=tmp_path / "log.tsv")
    m = train(initial, cfg.T, cfg.eps_lambda, FAST)
    U = short_problem.excite(*pool)
    Y = predict_mean_batch(m, pool[0], U, short_problem.initial_value(pool[0]))
    assert res.pf_hat == estimate_pf(Y, y_th)[0]
    assert res.selected == [] and len(res.history) == 1
    lines = (tmp_path / "log.tsv").read_text().splitlines()
    assert lines[0] == "n_new\tpf_hat\tcov\tselected\twall_time" and len(lines) == 2


def test_active_learning_never_reselects(short_problem, small_setup, tmp_path):
    initial, pool, y_th = small_setup
    cfg = ReliabilityConfig(y_th=y_th, n_pool=40, n_target_new=3, cov_target=0.99, max_pool=40, pool_growth=10, seed=4)
    res = run_active_learning(short_problem, cfg, FAST, initial=initial, pool=pool, log_path=tmp_path / "log.tsv")
    assert len(res.selected) == 3 == len(set(res.selected))
    assert [h.n_new for h in res.history] == [0, 1, 2, 3]
    assert [h.selected for h in res.history][1:] == res.selected
    back = ReliabilityResult.from_json(res.to_json())
    assert back.pf_hat == res.pf_hat and back.selected == res.selected
    json.loads(res.to_json())


def test_random_strategy_and_pool_growth(short_problem, small_setup):
    initial, pool, y_th = small_setup
    cfg = ReliabilityConfig(y_th=y_th, n_pool=40, n_target_new=2, strategy="random", eval_every=5, cov_target=1e-6,
                            pool_growth=10, max_pool=60)
    res = run_active_learning(short_problem, cfg, FAST, initial=initial, pool=pool)
    assert len(res.selected) == 2 and res.n_pool == 60
    # Trains once at the end of the budget, then two enrichment rounds.
    assert [h.n_new for h in res.history] == [0, 2, 2, 2]


def test_reference_pf_counts_true_failures(short_problem, small_setup):
    _, pool, y_th = small_setup
    ds = short_problem.generate(*pool)
    assert reference_pf(short_problem, *pool, y_th) == estimate_pf(ds.response, y_th)[0]
