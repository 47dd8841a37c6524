import numpy as np
import pytest

from graphpure import diffusion
from graphpure.diffusion import (
    Schedule,
    build_schedule,
    compute_state_vector,
    forward_marginal_sample,
    forward_step_sample,
    marginal_edge_prob,
    posterior_edge_prob,
    sample_state_vector,
    single_step_edge_prob,
    state_change_prob,
)


def random_adjacency(n, density, seed):
    rng = np.random.default_rng(seed)
    upper = np.triu(rng.random((n, n)) < density, k=1).astype(np.uint8)
    return upper + upper.T


# ---------------------------------------------------------------------------
# schedules


def test_schedule_t1_forced_by_decay_target():
    sched = build_schedule(1)
    assert sched.alpha_bar_at(1) == pytest.approx(1e-4, abs=1e-15)
    assert sched.beta_at(1) == pytest.approx(1 - 1e-4, abs=1e-15)


def test_schedule_shape_and_tail():
    sched = build_schedule(64, p=0.0)
    assert sched.T == 64
    assert (np.diff(sched.alpha_bar) < 0).all()
    assert sched.alpha_bar_at(64) <= 1e-4
    assert ((sched.beta > 0) & (sched.beta <= 1)).all()


@pytest.mark.parametrize("T", [1, 4, 64, 512])
def test_schedule_product_recomputation(T):
    # oracle: alpha_bar must equal the running product of alphas
    sched = build_schedule(T)
    prod = np.cumprod(1.0 - sched.beta)
    assert np.abs(prod - sched.alpha_bar).max() < 1e-12


def test_schedule_rejects_bad_inputs():
    with pytest.raises(ValueError):
        build_schedule(0)
    with pytest.raises(ValueError):
        Schedule(beta=np.array([0.5]), p=1.5)
    with pytest.raises(ValueError):
        Schedule(beta=np.array([0.0, 0.5]))


# ---------------------------------------------------------------------------
# forward sampling


def test_forward_step_beta_one_empties_graph():
    a = random_adjacency(10, 0.5, seed=0)
    sched = Schedule(beta=np.array([1.0]), p=0.0)
    out = forward_step_sample(a, 1, sched, np.random.default_rng(0))
    assert out.sum() == 0


def test_forward_step_beta_zero_is_identity():
    a = random_adjacency(10, 0.5, seed=1)
    sched = Schedule(beta=np.array([1e-12]), p=0.0)
    out = forward_step_sample(a, 1, sched, np.random.default_rng(0))
    assert np.array_equal(out, a)


def test_forward_step_survival_is_binomial():
    # 1000 edges, beta = 0.5: survivors within 3 sigma of Binomial(1000, .5)
    n = 200
    rng = np.random.default_rng(2)
    a = np.zeros((n, n), np.uint8)
    pairs = rng.choice(n * (n - 1) // 2, size=1000, replace=False)
    iu, ju = np.triu_indices(n, k=1)
    a[iu[pairs], ju[pairs]] = 1
    a = a + a.T
    assert a.sum() // 2 == 1000
    sched = Schedule(beta=np.array([0.5]), p=0.0)
    out = forward_step_sample(a, 1, sched, np.random.default_rng(3))
    survivors = out.sum() // 2
    sigma = np.sqrt(1000 * 0.5 * 0.5)
    assert abs(survivors - 500) <= 3 * sigma


def test_sampled_adjacency_symmetric_zero_diag():
    sched = build_schedule(16)
    rng = np.random.default_rng(4)
    for seed in range(10):
        a = random_adjacency(30, 0.3, seed=seed)
        t = int(rng.integers(1, 17))
        for sample in (
            forward_step_sample(a, t, sched, rng),
            forward_marginal_sample(a, t, sched, rng),
        ):
            assert np.array_equal(sample, sample.T)
            assert np.diag(sample).sum() == 0
            assert np.isin(sample, (0, 1)).all()


def test_trajectories_monotone_when_p_zero():
    sched = build_schedule(16, p=0.0)
    rng = np.random.default_rng(5)
    a = random_adjacency(25, 0.4, seed=6)
    for t in range(1, 17):
        nxt = forward_step_sample(a, t, sched, rng)
        assert (nxt <= a).all()
        a = nxt


# ---------------------------------------------------------------------------
# marginals


def test_marginal_identity_at_t0():
    sched = build_schedule(8)
    assert marginal_edge_prob(1, 0, sched) == 1.0
    assert marginal_edge_prob(0, 0, sched) == 0.0


def test_marginal_composes_two_steps():
    # oracle: surviving two independent keep probabilities 0.9 * 0.9
    sched = Schedule(beta=np.array([0.1, 0.1]), p=0.0)
    assert marginal_edge_prob(1, 2, sched) == pytest.approx(0.81, abs=1e-15)


def test_marginal_absent_edge_stays_absent_when_p_zero():
    sched = build_schedule(32, p=0.0)
    for t in (1, 7, 32):
        assert marginal_edge_prob(0, t, sched) == 0.0


@pytest.mark.parametrize("T", [4, 64])
def test_chapman_kolmogorov(T):
    # composing single-step survival probabilities reproduces the marginal
    for p in (0.0, 0.3):
        sched = build_schedule(T, p=p)
        for a0 in (0, 1):
            prob = float(a0)
            for t in range(1, T + 1):
                prob = prob * (1 - sched.beta_at(t)) + sched.beta_at(t) * p
                assert abs(prob - marginal_edge_prob(a0, t, sched)) < 1e-12


def test_marginal_sample_empty_at_T():
    # per draw P(any edge survives) <= |E| * 1e-4 ~ 0.9%, so 50 draws give
    # at most a couple of stragglers
    sched = build_schedule(64, p=0.0)
    a = random_adjacency(20, 0.5, seed=7)
    empties = sum(
        forward_marginal_sample(a, 64, sched, np.random.default_rng(s)).sum() == 0
        for s in range(50)
    )
    assert empties >= 48


def test_marginal_sample_frequency_matches_closed_form():
    sched = build_schedule(8, p=0.0)
    t = 4
    p_true = marginal_edge_prob(1, t, sched)
    a = np.array([[0, 1], [1, 0]], dtype=np.uint8)
    count = 0
    for s in range(2000):
        count += int(forward_marginal_sample(a, t, sched, np.random.default_rng(s))[0, 1])
    freq = count / 2000
    sigma = np.sqrt(p_true * (1 - p_true) / 2000)
    assert abs(freq - p_true) <= 3 * sigma


# ---------------------------------------------------------------------------
# posteriors


def brute_force_posterior(a_t, a0, t, sched):
    """Bayes by enumeration over a_{t-1} in {0, 1}."""
    weights = []
    for prev in (0, 1):
        p_prev = marginal_edge_prob(a0, t - 1, sched)
        prior = p_prev if prev else 1.0 - p_prev
        step = single_step_edge_prob(prev, t, sched)
        lik = step if a_t else 1.0 - step
        weights.append(prior * lik)
    total = sum(weights)
    if total == 0:
        return None
    return weights[1] / total


def test_posterior_absorbing_case():
    sched = build_schedule(8, p=0.0)
    for t in range(1, 9):
        assert posterior_edge_prob(1, 1, t, sched) == pytest.approx(1.0, abs=1e-12)


def test_posterior_hand_value():
    # beta = (0.1, 0.1): abar_1 = 0.9, abar_2 = 0.81; a_2 = 0, a_0 = 1
    # brute force: P(a1=1, a2=0) = 0.9 * 0.1 = 0.09, P(a2=0) = 0.19
    sched = Schedule(beta=np.array([0.1, 0.1]), p=0.0)
    assert posterior_edge_prob(0, 1, 2, sched) == pytest.approx(0.09 / 0.19, abs=1e-12)


@pytest.mark.parametrize("p", [0.0, 0.3])
def test_posterior_matches_brute_force_everywhere(p):
    sched = build_schedule(8, p=p)
    for t in range(1, 9):
        for a0 in (0, 1):
            for a_t in (0, 1):
                expected = brute_force_posterior(a_t, a0, t, sched)
                if expected is None:
                    with pytest.raises(ValueError, match="impossible"):
                        posterior_edge_prob(a_t, a0, t, sched)
                    continue
                got = posterior_edge_prob(a_t, a0, t, sched)
                assert got == pytest.approx(expected, abs=1e-12)
                # normalization over a_{t-1}
                assert 0.0 <= got <= 1.0 + 1e-12


def test_posterior_impossible_evidence_raises():
    sched = build_schedule(4, p=0.0)
    with pytest.raises(ValueError, match="impossible"):
        posterior_edge_prob(1, 0, 2, sched)


# ---------------------------------------------------------------------------
# state vectors


def test_state_change_zero_deficit():
    sched = build_schedule(16)
    assert state_change_prob(5, 5, 7, sched) == 0.0


def test_state_change_hand_value():
    # beta_2 = 0.1 with abar_1 = 0.5 -> ratio 0.1, deficit 2 -> 1 - 0.9^2
    sched = Schedule(beta=np.array([0.5, 0.1]), p=0.0)
    assert state_change_prob(5, 3, 2, sched) == pytest.approx(0.19, abs=1e-12)


def test_state_change_t1_limit_convention():
    sched = build_schedule(16)
    assert state_change_prob(4, 3, 1, sched) == 1.0
    assert state_change_prob(4, 4, 1, sched) == 0.0


def test_state_change_rejects_inconsistent_degrees():
    sched = build_schedule(16)
    with pytest.raises(ValueError, match="dt > d0"):
        state_change_prob(2, 5, 4, sched)


def test_state_change_stays_in_unit_interval():
    sched = build_schedule(64)
    for t in range(1, 65):
        for deficit in range(0, 12):
            prob = float(state_change_prob(deficit + 1, 1, t, sched))
            assert 0.0 <= prob <= 1.0


def test_sample_state_vector_degenerate_cases():
    sched = build_schedule(16)
    rng = np.random.default_rng(0)
    d0 = np.array([3, 2, 5])
    assert sample_state_vector(d0, d0, 7, sched, rng).sum() == 0
    dt = np.array([1, 0, 2])
    assert sample_state_vector(d0, dt, 1, sched, rng).sum() == 3


def test_sample_state_vector_frequency():
    sched = build_schedule(64)
    t, d0, dt = 20, 6, 3
    p_true = float(state_change_prob(d0, dt, t, sched))
    rng = np.random.default_rng(1)
    draws = sample_state_vector(
        np.full(100_000, d0), np.full(100_000, dt), t, sched, rng
    )
    sigma = np.sqrt(p_true * (1 - p_true) / 100_000)
    assert abs(draws.mean() - p_true) <= 3 * sigma


def test_state_change_matches_conditional_frequency_quick():
    # rejection-sampling oracle on one node of a 6-node complete graph;
    # small-sample version of the acceptance criterion. An edge is present at
    # time s iff its coupled uniform is <= alpha_bar_s, which reproduces the
    # exact joint law of the removal trajectory.
    sched = build_schedule(64)
    t, d_target = 48, 1
    rng = np.random.default_rng(2)
    trials = 32_000
    u = rng.random((trials, 5))  # node 0's incident edges, coupled uniforms
    abar_t = sched.alpha_bar_at(t)
    abar_prev = sched.alpha_bar_at(t - 1)
    dt = (u <= abar_t).sum(axis=1)
    accept = dt == d_target
    changed = ((u > abar_t) & (u <= abar_prev)).any(axis=1)[accept]
    assert changed.size >= 10_000
    freq = changed.mean()
    p_model = float(state_change_prob(5, d_target, t, sched))
    sigma = np.sqrt(max(freq * (1 - freq), 1e-12) / changed.size)
    assert abs(freq - p_model) <= 3 * sigma


def test_compute_state_vector():
    path = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]], dtype=np.uint8)
    assert compute_state_vector(path, path).sum() == 0
    removed = path.copy()
    removed[0, 1] = removed[1, 0] = 0
    assert np.array_equal(compute_state_vector(path, removed), [1, 1, 0])
    with pytest.raises(ValueError, match="mismatch"):
        compute_state_vector(path, np.zeros((4, 4)))


def test_compute_state_vector_matches_degree_difference():
    from graphpure.graphs import degree_vector

    rng = np.random.default_rng(3)
    for seed in range(10):
        a = random_adjacency(20, 0.3, seed=seed)
        b = random_adjacency(20, 0.3, seed=seed + 100)
        expected = (degree_vector(a) != degree_vector(b)).astype(np.uint8)
        assert np.array_equal(compute_state_vector(a, b), expected)
