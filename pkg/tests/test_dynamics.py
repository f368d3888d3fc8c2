import itertools

import numpy as np
import pytest

from backend.app.models import ModelConfig, Retention
from backend.app.services.dynamics_service import (
    AgentState,
    Population,
    StepKind,
    association_step,
    constraint_satisfaction,
    exhibit_pair,
    exhibit_single,
    init_population,
    preference_step,
    run,
    softmax_probabilities,
    step,
)
from backend.app.services.network_service import DirectedLayer, duplicate, generate_complete

DEFAULT = ModelConfig(k=6, steps=0)


def _agent(V, R=None):
    V = np.asarray(V, dtype=float)
    k = V.size
    return AgentState(V, np.ones((k, k)) if R is None else np.asarray(R, dtype=float))


def _brute_cs(V, R, include_diagonal=False, normalize=False):
    k = len(V)
    if normalize and R.max() > 0:
        R = R / R.max()
    total = 0.0
    for i in range(k):
        for j in range(k):
            if i == j and not include_diagonal:
                continue
            total += abs(R[i][j] - abs(V[i] - V[j]))
    return 2.0 * total / (k * (k - 1))


# ---------- initialization ----------

def test_init_population_matches_initial_conditions():
    pop = init_population(30, 6, np.random.default_rng(1))
    assert pop.n == 30 and pop.k == 6
    for agent in pop.agents:
        assert np.max(np.abs(agent.R - 1.0)) == 0.0
        assert np.all((agent.V >= -1.0) & (agent.V <= 1.0))


def test_init_population_is_seeded():
    a = init_population(10, 4, np.random.default_rng(9))
    b = init_population(10, 4, np.random.default_rng(9))
    for x, y in zip(a.agents, b.agents):
        assert np.array_equal(x.V, y.V) and np.array_equal(x.R, y.R)


def test_init_population_rejects_tiny_sizes():
    with pytest.raises(ValueError):
        init_population(1, 6, np.random.default_rng(0))
    with pytest.raises(ValueError):
        init_population(5, 1, np.random.default_rng(0))


# ---------- exhibition ----------

def test_softmax_uniform_and_analytic():
    assert np.allclose(softmax_probabilities(np.zeros(5)), 0.2)
    p = softmax_probabilities(np.array([1.0, 0.0]))
    assert p == pytest.approx([np.e / (np.e + 1), 1 / (np.e + 1)], abs=1e-12)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)


def test_softmax_shift_invariant():
    V = np.array([0.3, -1.2, 2.0, 0.0])
    assert np.allclose(softmax_probabilities(V), softmax_probabilities(V + 17.5), atol=1e-15)


def test_exhibit_pair_two_practices():
    rng = np.random.default_rng(0)
    agent = _agent([0.4, -0.4])
    draws = [exhibit_pair(agent, rng) for _ in range(2000)]
    assert all(sorted(d) == [0, 1] for d in draws)
    first_zero = np.mean([d[0] == 0 for d in draws])
    assert first_zero == pytest.approx(softmax_probabilities(agent.V)[0], abs=0.04)


def test_exhibit_pair_uniform_ordered_pairs():
    rng = np.random.default_rng(3)
    agent = _agent([0.0, 0.0, 0.0])
    counts = {pair: 0 for pair in itertools.permutations(range(3), 2)}
    draws = 60_000
    for _ in range(draws):
        counts[exhibit_pair(agent, rng)] += 1
    for c in counts.values():
        assert c / draws == pytest.approx(1 / 6, abs=0.01)


def test_exhibit_pair_first_draw_follows_softmax():
    rng = np.random.default_rng(5)
    agent = _agent([5.0, 0.0, 0.0])
    draws = 100_000
    first = sum(exhibit_pair(agent, rng)[0] == 0 for _ in range(draws)) / draws
    assert first == pytest.approx(np.exp(5) / (np.exp(5) + 2), abs=0.01)


def test_exhibit_pair_second_draw_with_dominant_preference():
    rng = np.random.default_rng(0)
    agent = _agent([1000.0, 0.0, -1000.0])
    # the remaining (0, -1000) still follow their own softmax
    assert all(exhibit_pair(agent, rng) == (0, 1) for _ in range(2000))

    agent = _agent([900.0, 1.0, 0.0])
    draws = 50_000
    second = [exhibit_pair(agent, rng)[1] for _ in range(draws)]
    assert sum(j == 1 for j in second) / draws == pytest.approx(np.e / (np.e + 1), abs=0.01)


def test_exhibit_single_frequencies():
    rng = np.random.default_rng(8)
    agent = _agent([0.0, 0.0])
    draws = 100_000
    freq = sum(exhibit_single(agent, rng) == 0 for _ in range(draws)) / draws
    assert freq == pytest.approx(0.5, abs=0.01)


def test_exhibit_single_dominant_and_forced():
    rng = np.random.default_rng(1)
    assert all(exhibit_single(_agent([10.0, -10.0]), rng) == 0 for _ in range(1000))
    assert exhibit_single(AgentState(np.array([0.7]), np.ones((1, 1))), rng) == 0


# ---------- constraint satisfaction ----------

def test_cs_hand_values():
    R = np.ones((2, 2))
    assert constraint_satisfaction(np.array([1.0, -1.0]), R, DEFAULT) == pytest.approx(2.0)
    assert constraint_satisfaction(np.array([0.0, 0.0]), R, DEFAULT) == pytest.approx(2.0)
    assert constraint_satisfaction(np.full(4, 0.3), np.zeros((4, 4)), DEFAULT) == 0.0


def test_cs_matches_brute_force_oracle():
    rng = np.random.default_rng(42)
    for _ in range(1000):
        k = int(rng.integers(2, 9))
        V = rng.normal(0, 2, size=k)
        R = rng.uniform(-3, 10, size=(k, k))
        assert constraint_satisfaction(V, R, DEFAULT) == pytest.approx(_brute_cs(V, R), abs=1e-12)


def test_cs_flags_change_the_sum():
    rng = np.random.default_rng(4)
    V = rng.normal(size=5)
    R = rng.uniform(0.5, 8, size=(5, 5))
    diag = ModelConfig(k=5, cs_include_diagonal=True)
    norm = ModelConfig(k=5, cs_normalize=True)
    assert constraint_satisfaction(V, R, diag) == pytest.approx(_brute_cs(V, R, include_diagonal=True), abs=1e-12)
    assert constraint_satisfaction(V, R, norm) == pytest.approx(_brute_cs(V, R, normalize=True), abs=1e-12)


def test_cs_normalize_falls_back_on_nonpositive_max():
    V = np.array([0.5, -0.5, 1.0])
    R = -np.ones((3, 3))
    norm = ModelConfig(k=3, cs_normalize=True)
    assert constraint_satisfaction(V, R, norm) == pytest.approx(_brute_cs(V, R), abs=1e-12)


def test_cs_invariant_under_relabeling():
    rng = np.random.default_rng(12)
    V = rng.normal(size=6)
    R = rng.uniform(0, 5, size=(6, 6))
    perm = rng.permutation(6)
    assert constraint_satisfaction(V[perm], R[np.ix_(perm, perm)], DEFAULT) == pytest.approx(
        constraint_satisfaction(V, R, DEFAULT), abs=1e-12
    )


# ---------- transmission steps ----------

def _pair_network():
    return duplicate(generate_complete(2))


def test_association_step_increments_observed_pair():
    rng = np.random.default_rng(0)
    net = _pair_network()
    hits = 0
    watched = 0
    for _ in range(400):
        sender = _agent([10.0, 9.0, -10.0, -10.0])
        observer = _agent([0.1, 0.2, 0.3, 0.4])
        pop = Population([sender, observer], 4)
        before = [a.R.copy() for a in pop.agents]
        outcome = association_step(pop, net, DEFAULT, rng)
        b, a = outcome.observer, outcome.sender
        i, j = outcome.practices
        diff = pop.agents[b].R - before[b]
        assert diff[i, j] == 1.0 and diff[j, i] == 1.0
        assert np.count_nonzero(diff) == 2
        assert np.array_equal(pop.agents[a].R, before[a])
        if b == 1:
            watched += 1
            hits += {i, j} == {0, 1}
    assert watched > 100
    assert hits / watched > 0.7


def test_association_step_rejection_keeps_preferences():
    rng = np.random.default_rng(7)
    net = duplicate(generate_complete(5))
    pop = init_population(5, 4, rng)
    for _ in range(500):
        before = [a.V.copy() for a in pop.agents]
        outcome = association_step(pop, net, DEFAULT, rng)
        if not outcome.proposal_retained:
            assert all(np.array_equal(a.V, v) for a, v in zip(pop.agents, before))
        else:
            assert outcome.cs_after > outcome.cs_before


def test_association_steps_keep_symmetry_and_integers():
    rng = np.random.default_rng(2)
    net = duplicate(generate_complete(6))
    pop = init_population(6, 5, rng)
    for _ in range(2000):
        association_step(pop, net, DEFAULT, rng)
    for agent in pop.agents:
        assert np.array_equal(agent.R, agent.R.T)
        assert np.all(agent.R >= 1.0)
        assert np.array_equal(agent.R, np.round(agent.R))


def test_asymmetric_association_updates():
    rng = np.random.default_rng(2)
    net = duplicate(generate_complete(4))
    pop = init_population(4, 4, rng)
    cfg = ModelConfig(k=4, symmetric_R=False)
    outcome = association_step(pop, net, cfg, rng)
    i, j = outcome.practices
    R = pop.agents[outcome.observer].R
    assert R[i, j] == 2.0 and R[j, i] == 1.0


def test_weaker_preference_gets_the_proposal():
    net = _pair_network()
    for seed in range(50):
        rng = np.random.default_rng(seed)
        pop = Population([_agent([0.5, -0.5, 2.0]), _agent([0.5, -0.5, 2.0])], 3)
        before = [a.V.copy() for a in pop.agents]
        outcome = association_step(pop, net, DEFAULT, rng)
        changed = np.flatnonzero(pop.agents[outcome.observer].V != before[outcome.observer])
        if outcome.proposal_retained:
            i, j = outcome.practices
            expected = min((i, j), key=lambda x: (abs(before[outcome.observer][x]), x))
            assert changed.tolist() == [expected]


def test_preference_step_increments_one_coordinate():
    rng = np.random.default_rng(11)
    net = duplicate(generate_complete(5))
    pop = init_population(5, 6, rng)
    for _ in range(300):
        before = [a.V.copy() for a in pop.agents]
        outcome = preference_step(pop, net, DEFAULT, rng)
        diff = pop.agents[outcome.observer].V - before[outcome.observer]
        assert np.count_nonzero(diff) == 1
        assert diff[outcome.practices[0]] == 1.0


def test_preference_step_retention_rule():
    rng = np.random.default_rng(13)
    net = duplicate(generate_complete(5))
    pop = init_population(5, 4, rng)
    for _ in range(500):
        before = [a.R.copy() for a in pop.agents]
        outcome = preference_step(pop, net, DEFAULT, rng)
        observer = pop.agents[outcome.observer]
        if outcome.proposal_retained:
            assert outcome.cs_after > outcome.cs_before
            assert constraint_satisfaction(observer.V, observer.R, DEFAULT) > constraint_satisfaction(
                observer.V, before[outcome.observer], DEFAULT
            )
        else:
            assert np.array_equal(observer.R, before[outcome.observer])


def test_preference_step_symmetric_perturbation():
    rng = np.random.default_rng(21)
    net = duplicate(generate_complete(3))
    pop = init_population(3, 5, rng)
    for _ in range(300):
        preference_step(pop, net, DEFAULT, rng)
    for agent in pop.agents:
        assert np.array_equal(agent.R, agent.R.T)


def test_preference_step_dominant_sender():
    rng = np.random.default_rng(0)
    net = _pair_network()
    for _ in range(500):
        pop = Population([_agent([10.0, -10.0]), _agent([10.0, -10.0])], 2)
        outcome = preference_step(pop, net, DEFAULT, rng)
        assert outcome.practices == (0,)


def test_less_retention_reverses_the_rule():
    rng = np.random.default_rng(5)
    net = duplicate(generate_complete(4))
    pop = init_population(4, 4, rng)
    cfg = ModelConfig(k=4, retention=Retention.LESS)
    for _ in range(300):
        outcome = association_step(pop, net, cfg, rng)
        if outcome.proposal_retained:
            assert outcome.cs_after < outcome.cs_before


@pytest.mark.parametrize("retention", list(Retention))
def test_retention_rejects_ties(retention):
    from backend.app.services.dynamics_service import _accept

    assert not _accept(0.5, 0.5, retention)
    assert _accept(0.6, 0.5, retention) == (retention == Retention.GREATER)
    assert _accept(0.4, 0.5, retention) == (retention == Retention.LESS)


def test_empty_neighborhood_skips_without_changes():
    rng = np.random.default_rng(0)
    net = duplicate(DirectedLayer.from_lists(3, [[], [], []]))
    pop = init_population(3, 3, rng)
    before = pop.snapshot()
    for fn in (association_step, preference_step):
        outcome = fn(pop, net, DEFAULT, rng)
        assert outcome.kind == StepKind.SKIPPED and outcome.sender is None
    for a, b in zip(pop.agents, before.agents):
        assert np.array_equal(a.V, b.V) and np.array_equal(a.R, b.R)


# ---------- mixing and runs ----------

@pytest.mark.parametrize("alpha, kind", [(0.0, StepKind.ASSOCIATION), (1.0, StepKind.PREFERENCE)])
def test_step_extremes(alpha, kind):
    rng = np.random.default_rng(1)
    net = duplicate(generate_complete(4))
    pop = init_population(4, 3, rng)
    cfg = ModelConfig(alpha=alpha, k=3)
    assert all(step(pop, net, cfg, rng).kind == kind for _ in range(500))


def test_step_mixture_fraction():
    rng = np.random.default_rng(17)
    net = duplicate(generate_complete(4))
    pop = init_population(4, 3, rng)
    cfg = ModelConfig(alpha=0.5, k=3)
    draws = 100_000
    association = sum(step(pop, net, cfg, rng).kind == StepKind.ASSOCIATION for _ in range(draws))
    assert association / draws == pytest.approx(0.5, abs=0.01)


def test_one_step_touches_at_most_one_agent():
    rng = np.random.default_rng(6)
    net = duplicate(generate_complete(6))
    pop = init_population(6, 4, rng)
    cfg = ModelConfig(alpha=0.5, k=4)
    for _ in range(300):
        before = pop.snapshot()
        step(pop, net, cfg, rng)
        touched = [
            idx for idx, (a, b) in enumerate(zip(pop.agents, before.agents))
            if not (np.array_equal(a.V, b.V) and np.array_equal(a.R, b.R))
        ]
        assert len(touched) <= 1


def test_run_with_zero_steps_samples_once():
    net = duplicate(generate_complete(4))
    pop = init_population(4, 3, np.random.default_rng(0))
    calls = []
    run(pop, net, ModelConfig(k=3, steps=0), 10, lambda t, p, s: calls.append(t))
    assert calls == [0]


def test_run_sampling_cadence_includes_final_step():
    net = duplicate(generate_complete(4))
    pop = init_population(4, 3, np.random.default_rng(0))
    calls = []
    run(pop, net, ModelConfig(k=3, steps=25, alpha=0.5), 10, lambda t, p, s: calls.append(t))
    assert calls == [0, 10, 20, 25]


def test_run_is_deterministic_from_seed():
    net = duplicate(generate_complete(5))
    cfg = ModelConfig(k=4, steps=2000, alpha=0.4, master_seed=99)

    def trajectory():
        pop = init_population(5, 4, np.random.default_rng(1))
        outcomes, samples = [], []
        run(pop, net, cfg, 250, lambda t, p, s: samples.append(p.preferences().tobytes()),
            on_step=lambda t, o: outcomes.append(o))
        return outcomes, samples

    assert trajectory() == trajectory()


def test_run_sink_receives_copies():
    net = duplicate(generate_complete(3))
    pop = init_population(3, 3, np.random.default_rng(0))
    seen = []
    run(pop, net, ModelConfig(k=3, steps=50, alpha=0.5), 50, lambda t, p, s: seen.append(p))
    assert seen[0] is not pop
    assert all(a is not b for a, b in zip(seen[-1].agents, pop.agents))
    assert np.array_equal(seen[-1].preferences(), pop.preferences())


def test_run_counts_skipped_rounds():
    net = duplicate(DirectedLayer.from_lists(3, [[1], [], []]))
    pop = init_population(3, 3, np.random.default_rng(0))
    skipped = []
    run(pop, net, ModelConfig(k=3, steps=300, alpha=0.5), 300, lambda t, p, s: skipped.append(s))
    assert skipped[0] == 0
    assert 150 < skipped[-1] < 250
