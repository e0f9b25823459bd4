import numpy as np
import pytest

from anneal_co.amortized import (
    ModelParams,
    default_training_schedule,
    forward,
    init_params,
    loss_and_grad,
    param_rel_change,
    predict_solution,
    train,
    zero_params,
)
from anneal_co.energy import is_feasible, make_instance
from anneal_co.graph import Graph, generate_ba
from anneal_co.instances import random_instance
from anneal_co.schedule import constant_schedule, make_schedule


def _ba_set(count, seed, n=(8, 14)):
    rng = np.random.default_rng(seed)
    return [
        make_instance("mds", generate_ba(int(rng.integers(*n)), 2, int(rng.integers(2**31))))
        for _ in range(count)
    ]


def test_zero_params_give_half():
    inst = random_instance("mis", 7, np.random.default_rng(0))
    np.testing.assert_array_equal(forward(zero_params(), inst), np.full(7, 0.5))


def test_permutation_equivariance():
    rng = np.random.default_rng(1)
    params = init_params(seed=3)
    for kind in ["mis", "mds", "clique"]:
        inst = random_instance(kind, 9, rng)
        perm = rng.permutation(9)
        other = make_instance(kind, inst.graph.relabel(perm))
        a, b = forward(params, inst), forward(params, other)
        np.testing.assert_allclose(b[perm], a, atol=1e-14)
        np.testing.assert_allclose(np.sort(a), np.sort(b), atol=1e-14)


@pytest.mark.parametrize("kind", ["mis", "clique", "mds", "mincut"])
def test_gradient_matches_finite_differences(kind):
    rng = np.random.default_rng(2)
    batch = [random_instance(kind, int(rng.integers(3, 9)), rng) for _ in range(2)]
    params = init_params(n_layers=2, hidden=5, seed=4, scale=1.0)
    tau = 0.3
    _, g = loss_and_grad(params, batch, tau)
    theta = params.flatten()
    h = 1e-4
    fd = np.empty_like(theta)
    for k in range(len(theta)):
        e = np.zeros_like(theta)
        e[k] = h
        up = loss_and_grad(params.unflatten(theta + e), batch, tau)[0]
        dn = loss_and_grad(params.unflatten(theta - e), batch, tau)[0]
        fd[k] = (up - dn) / (2 * h)
    assert np.linalg.norm(g - fd) / np.linalg.norm(fd) < 1e-4


def test_loss_examples():
    params = init_params(seed=5)
    singles = [make_instance("mis", Graph(1, node_weights=[w])) for w in (1.0, 1.0)]
    phis = [forward(params, i)[0] for i in singles]
    assert loss_and_grad(params, singles, 0.0)[0] == pytest.approx(-np.mean(phis))
    inst = random_instance("mds", 8, np.random.default_rng(6))
    other = random_instance("mds", 6, np.random.default_rng(7))
    one = loss_and_grad(params, [inst, other], 0.2)[0]
    two = loss_and_grad(params, [inst, inst, other, other], 0.2)[0]
    assert one == pytest.approx(two)
    with pytest.raises(ValueError):
        loss_and_grad(params, [], 0.1)


def test_param_rel_change():
    v = ModelParams([np.array([3.0, 4.0])])
    assert param_rel_change(v, v) == 0.0
    assert param_rel_change(v, ModelParams([np.array([3.0, 9.0])])) == 1.0
    with pytest.raises(ValueError):
        param_rel_change(ModelParams([np.zeros(2)]), v)
    with pytest.raises(ValueError):
        param_rel_change(v, ModelParams([np.zeros(3)]))


def test_params_json_round_trip_and_validation():
    p = init_params(n_layers=3, hidden=4, seed=1)
    back = ModelParams.from_json(p.to_json())
    assert back.shapes == p.shapes
    np.testing.assert_array_equal(back.flatten(), p.flatten())
    bad = p.copy()
    bad.arrays[0] = np.full_like(bad.arrays[0], np.nan)
    with pytest.raises(ValueError):
        bad.validate()
    with pytest.raises(ValueError):
        p.unflatten(np.zeros(3))


def test_zero_learning_rate_is_a_no_op():
    data = _ba_set(5, 0)
    params = init_params(seed=2)
    out = train(data, 1, constant_schedule(0.1, 1), lr=0.0, seed=0, init=params)
    for a, b in zip(out.params.arrays, params.arrays):
        assert np.array_equal(a, b)


def test_training_lowers_the_final_temperature_loss_and_is_deterministic():
    data = _ba_set(16, 1)
    sched = default_training_schedule(data, 30)
    val = [(i, None) for i in data[:4]]
    res = train(data, 30, sched, lr=0.1, seed=3, clip_norm=1.0)
    before = loss_and_grad(res.initial, data, sched.tauK)[0]
    after = loss_and_grad(res.params, data, sched.tauK)[0]
    assert after < before
    again = train(data, 30, sched, lr=0.1, seed=3, clip_norm=1.0)
    np.testing.assert_array_equal(again.params.flatten(), res.params.flatten())
    assert res.metrics_csv() == again.metrics_csv()
    assert res.metrics_csv().splitlines()[0] == "epoch,tau,loss,val_ratio"
    assert [m["tau"] for m in res.metrics] == [sched.temperature(e) for e in range(30)]
    for inst, _ in val:
        assert is_feasible(inst, predict_solution(res.params, inst))


def test_per_batch_annealing_advances_each_batch():
    data = _ba_set(8, 2)
    sched = make_schedule("linear", 2.0, 0.01, 10)
    res = train(data, 2, sched, lr=0.01, seed=0, batch_size=4, per_batch=True)
    # the recorded temperature is the one used by the last batch of each epoch
    assert [m["tau"] for m in res.metrics] == [sched.temperature(1), sched.temperature(3)]
