import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from anneal_co.energy import (
    Kind,
    PenaltyError,
    ProblemInstance,
    default_penalties,
    discrete_gap,
    energy,
    is_feasible,
    lipschitz_bound,
    make_instance,
    objective,
    repair,
)
from anneal_co.graph import Graph
from anneal_co.instances import random_instance

K3 = Graph(3, [(0, 1), (0, 2), (1, 2)])
STAR3 = Graph(4, [(0, 1), (0, 2), (0, 3)])
EDGE = Graph(2, [(0, 1)])
SINGLE = Graph(1)
KINDS = ["mis", "clique", "mds", "mincut"]


def all_assignments(n):
    return [np.array(b) for b in itertools.product((0, 1), repeat=n)]


def naive_energy(inst, x):
    """Term-by-term transcription of each energy, independent of the vectorised code."""
    g, w = inst.graph, inst.weights
    if inst.kind is Kind.MIS:
        return -sum(w[i] * x[i] for i in range(g.n)) + sum(
            b * x[i] * x[j] for (i, j), b in zip(g.edges, inst.penalties)
        )
    if inst.kind is Kind.CLIQUE:
        return -sum(w[i] * x[i] for i in range(g.n)) + sum(
            b * x[i] * x[j] for (i, j), b in zip(inst.complement_edges, inst.penalties)
        )
    if inst.kind is Kind.MDS:
        total = sum(w[i] * x[i] for i in range(g.n))
        for i in range(g.n):
            prod = 1 - x[i]
            for j in g.adjacency[i]:
                prod *= 1 - x[j]
            total += inst.penalties[i] * prod
        return total
    d0, d1 = inst.volume_bounds
    cut = sum(wij * (x[i] != x[j]) for (i, j), wij in zip(g.edges, g.edge_weights))
    vol = sum(g.degrees[i] * x[i] for i in range(g.n))
    beta = float(inst.penalties)
    return cut + beta * max(vol - d1, 0) + beta * max(d0 - vol, 0)


def test_default_penalties_examples():
    g = Graph(2, [(0, 1)], node_weights=[1, 2])
    assert default_penalties("mis", g).tolist() == [1.0]
    assert default_penalties("mis", g, rule="max").tolist() == [2.0]
    assert default_penalties("mds", STAR3).tolist() == [1.0] * 4
    assert float(default_penalties("mincut", STAR3)) == 3.0
    w = Graph(3, [(0, 1)], node_weights=[3, 1, 2])
    assert default_penalties("clique", w).tolist() == [2.0, 1.0]  # pairs (0,2), (1,2)
    assert default_penalties("mds", w).tolist() == [1.0, 1.0, 2.0]


def test_energy_examples():
    assert energy(make_instance("mis", K3), [1, 1, 0]) == -1.0
    mds = make_instance("mds", SINGLE)
    assert energy(mds, [0]) == 1.0 and energy(mds, [1]) == 1.0
    cut = ProblemInstance("mincut", EDGE, 2.0, (1, 1))
    assert energy(cut, [1, 0]) == 1.0


def test_mincut_counts_each_edge_once_in_either_direction():
    cut = ProblemInstance("mincut", EDGE, 0.0, (0, 2))
    assert energy(cut, [1, 0]) == energy(cut, [0, 1]) == 1.0


def test_feasibility_examples():
    assert not is_feasible(make_instance("mis", EDGE), [1, 1])
    assert is_feasible(make_instance("mds", STAR3), [1, 0, 0, 0])
    cut = ProblemInstance("mincut", EDGE, 1.0, (1, 2))
    assert not is_feasible(cut, [0, 0])


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        energy(make_instance("mis", K3), [1, 0])
    with pytest.raises(ValueError):
        ProblemInstance("mis", K3, [1.0, 1.0])
    with pytest.raises(ValueError):
        ProblemInstance("mincut", K3, 1.0, None)
    with pytest.raises(ValueError):
        ProblemInstance("mincut", K3, 1.0, (3, 2))


@pytest.mark.parametrize("kind", KINDS)
def test_energy_matches_naive_transcription(kind):
    rng = np.random.default_rng(11)
    for _ in range(20):
        inst = random_instance(kind, int(rng.integers(2, 8)), rng)
        for x in all_assignments(inst.n):
            assert energy(inst, x) == pytest.approx(naive_energy(inst, x), abs=1e-12)
        batch = np.array(all_assignments(inst.n))
        np.testing.assert_allclose(energy(inst, batch), [naive_energy(inst, x) for x in batch])


def test_repair_examples():
    inst = ProblemInstance("mis", Graph(2, [(0, 1)], node_weights=[1, 2]), [1.0])
    x = repair(inst, [1, 1])
    assert x.tolist() == [0, 1]
    assert energy(inst, x) == energy(inst, [1, 1]) == -2.0
    assert repair(make_instance("mds", SINGLE), [0]).tolist() == [1]
    feasible = np.array([0, 1, 1, 1])
    assert repair(make_instance("mis", STAR3), feasible).tolist() == feasible.tolist()


def test_repair_rejects_subthreshold_penalties():
    inst = make_instance("mis", K3, penalty_scale=0.5)
    with pytest.raises(PenaltyError):
        repair(inst, [1, 1, 1])


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("scale", [1.0, 1.7])
def test_repair_is_feasible_and_energy_nonincreasing(kind, scale):
    rng = np.random.default_rng(3)
    for _ in range(60):
        inst = random_instance(kind, int(rng.integers(2, 12)), rng, penalty_scale=scale)
        x = rng.integers(0, 2, inst.n)
        y = repair(inst, x)
        assert is_feasible(inst, y)
        assert energy(inst, y) <= energy(inst, x) + 1e-9


def test_discrete_gap_examples():
    iso = make_instance("mis", SINGLE)
    assert discrete_gap(iso, [0], 0) == -1.0 and discrete_gap(iso, [1], 0) == -1.0
    assert discrete_gap(make_instance("mis", EDGE), [0, 1], 0) == 0.0
    with pytest.raises(IndexError):
        discrete_gap(iso, [0], 1)


@pytest.mark.parametrize("kind", KINDS)
def test_discrete_gap_and_lipschitz_on_samples(kind):
    rng = np.random.default_rng(5)
    for _ in range(250):
        inst = random_instance(kind, int(rng.integers(1 if kind != "mincut" else 2, 10)), rng)
        x = rng.integers(0, 2, inst.n)
        i = int(rng.integers(inst.n))
        x1, x0 = x.copy(), x.copy()
        x1[i], x0[i] = 1, 0
        gap = discrete_gap(inst, x, i)
        assert gap == pytest.approx(naive_energy(inst, x1) - naive_energy(inst, x0), abs=1e-12)
        assert abs(gap) <= lipschitz_bound(inst) + 1e-12


def test_lipschitz_examples():
    assert lipschitz_bound(make_instance("mis", EDGE)) == 2.0
    assert lipschitz_bound(make_instance("mis", Graph(1, node_weights=[3.0]))) == 3.0


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), kind=st.sampled_from(["mis", "clique", "mds"]))
def test_multilinear_gap_does_not_depend_on_the_flipped_bit(seed, kind):
    rng = np.random.default_rng(seed)
    inst = random_instance(kind, int(rng.integers(2, 9)), rng)
    x = rng.integers(0, 2, inst.n)
    i = int(rng.integers(inst.n))
    y = x.copy()
    y[i] = 1 - y[i]
    assert discrete_gap(inst, x, i) == pytest.approx(discrete_gap(inst, y, i))


def test_objective_signs():
    g = Graph(2, [(0, 1)], node_weights=[2, 3])
    assert objective(make_instance("mis", g), [0, 1]) == -3.0
    assert objective(make_instance("mds", g), [0, 1]) == 3.0


def test_instance_json_round_trip():
    rng = np.random.default_rng(0)
    for kind in KINDS:
        inst = random_instance(kind, 6, rng)
        back = ProblemInstance.from_dict(inst.to_dict())
        assert back.kind is inst.kind and back.graph == inst.graph
        np.testing.assert_array_equal(back.penalties, inst.penalties)
        assert back.volume_bounds == inst.volume_bounds
