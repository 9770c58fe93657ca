import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import lasso_1d
from oracles import cvx_block_update, cvx_rlsd, materialize
from rlsd.bench import BenchSpec, generate
from rlsd.diagnostics import ReferenceSolution
from rlsd.errors import InvalidInputError
from rlsd.problem import (
    Block,
    BlockMap,
    RlsdProblem,
    augmented_lagrangian,
    kkt_residual,
    objective,
)
from rlsd.regularizers import Box, Regularizer, StronglyConvexSmooth, prox_l1
from rlsd.solver import (
    IterateState,
    SolverConfig,
    Status,
    Trace,
    dual_update,
    initial_state,
    solve,
    step,
    update_block,
    update_x3_closed_form,
    update_x3_general,
)


def random_spd(n, sigma, L, seed):
    rng = np.random.default_rng(seed)
    U, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eig = np.concatenate([[sigma, L], rng.uniform(sigma, L, n - 2)])
    return (U * eig) @ U.T


def quadratic_spcp(m=6, n=5, sigma=1.0, L=1.0, seed=0):
    base, _ = generate(BenchSpec("spcp", m=m, n=n, seed=seed))
    rng = np.random.default_rng(seed + 100)
    Q = np.eye(m * n) if sigma == L else random_spd(m * n, sigma, L, seed)
    f3 = StronglyConvexSmooth(Q, 0.1 * rng.standard_normal(m * n), sigma, L)
    return RlsdProblem(base.block1, base.block2, base.b, f3)


# --- x3 updates ---------------------------------------------------------------


def test_x3_closed_form_examples():
    v = np.array([1.0, -2.0, 4.0])
    np.testing.assert_array_equal(update_x3_closed_form(np.zeros(3), v, 1.0), -v / 2)
    assert np.array_equal(update_x3_closed_form(np.zeros(3), np.zeros(3), 5.0), np.zeros(3))
    with pytest.raises(InvalidInputError):
        update_x3_closed_form(np.zeros(3), v, 0.0)


def test_x3_closed_form_matches_linear_solve():
    rng = np.random.default_rng(0)
    for _ in range(20):
        lam, s = rng.standard_normal((2, 7))
        z = np.linalg.solve((1 + 2.0) * np.eye(7), lam - 2.0 * s)
        np.testing.assert_allclose(update_x3_closed_form(lam, s, 2.0), z, atol=1e-14)


def test_x3_general_embeds_canonical():
    f3 = StronglyConvexSmooth(np.eye(5), np.zeros(5), 1.0, 1.0)
    rng = np.random.default_rng(1)
    lam, s = rng.standard_normal((2, 5))
    np.testing.assert_allclose(update_x3_general(f3, lam, s, 0.7),
                               update_x3_closed_form(lam, s, 0.7), atol=1e-15)
    assert np.array_equal(update_x3_general(f3, np.zeros(5), np.zeros(5), 0.7), np.zeros(5))


@pytest.mark.parametrize("gamma", [0.1, 1.0, 30.0])
def test_x3_general_stationarity(gamma):
    for seed in range(5):
        Q = random_spd(6, 0.5, 4.0, seed)
        rng = np.random.default_rng(seed)
        f3 = StronglyConvexSmooth(Q, rng.standard_normal(6), 0.5, 4.0)
        lam, s = rng.standard_normal((2, 6))
        x = update_x3_general(f3, lam, s, gamma)
        assert np.linalg.norm(f3.grad(x) - lam + gamma * (s + x)) <= 1e-10


# --- block updates --------------------------------------------------------------


def test_update_empty_block():
    out = update_block(BlockMap.empty(4), None, np.ones(4), 1.0)
    assert out.shape == (0,)


@pytest.mark.parametrize("gamma,beta", [(1.0, 1.0), (0.3, 2.0), (5.0, 0.1)])
def test_update_identity_l1(gamma, beta):
    v = np.random.default_rng(2).standard_normal(10) * 3
    np.testing.assert_allclose(update_block(BlockMap.identity(10), Regularizer("l1", beta), v, gamma),
                               prox_l1(-v, beta / gamma), atol=1e-15)


def test_update_rank_one_with_box_is_clamped_row_mean():
    bmap = BlockMap.rank_one_column(4, 5)
    others = -np.random.default_rng(3).uniform(-50, 300, 20)
    x = update_block(bmap, Regularizer("zero", 0, Box(0, 255)), others, 0.7)
    np.testing.assert_allclose(x, np.clip((-others).reshape(4, 5).mean(axis=1), 0, 255),
                               atol=1e-12)


@pytest.mark.parametrize("kind", ["l1", "nuclear"])
def test_update_entry_mask_matches_conic_oracle(kind, backend):
    rng = np.random.default_rng(4)
    idx = [(i, j) for i in range(5) for j in range(5) if rng.random() < 0.5]
    bmap = BlockMap.entry_mask((5, 5), idx)
    reg = Regularizer(kind, 0.3, shape=(5, 5) if kind == "nuclear" else None)
    others = bmap.apply(rng.standard_normal(25))
    for gamma in (0.5, 2.0):
        x = update_block(bmap, reg, others, gamma)
        ref = cvx_block_update(materialize(bmap), kind, 0.3, others, gamma, shape=(5, 5))

        def phi(z):
            return reg.value(z) + 0.5 * gamma * np.sum((bmap.apply(z) + others) ** 2)

        # the image A x and the optimal value are unique; with the nuclear norm the
        # masked-out entries of x are not, so only l1 pins x itself
        assert np.linalg.norm(bmap.apply(x - ref)) <= 1e-5
        assert phi(x) <= phi(ref) + 1e-8
        if kind == "l1":
            assert np.linalg.norm(x - ref) <= 1e-5


def test_update_general_dense_matches_conic_oracle():
    rng = np.random.default_rng(5)
    A = rng.standard_normal((12, 6))
    bmap = BlockMap.dense(A)
    assert bmap.orthogonal_scale is None
    others = rng.standard_normal(12)
    x = update_block(bmap, Regularizer("l1", 0.5), others, 1.5)
    ref = cvx_block_update(A, "l1", 0.5, others, 1.5)
    assert np.linalg.norm(x - ref) <= 1e-5


# --- full solves -------------------------------------------------------------------


def test_lasso_1d_converges():
    res = solve(lasso_1d(), SolverConfig(gamma=2.0, tol_kkt=1e-10))
    assert res.status is Status.CONVERGED and res.iterations < 500
    st_ = res.state
    assert abs(st_.x1[0] - 2) <= 1e-8 and abs(st_.x3[0] - 1) <= 1e-8 and abs(st_.lam[0] - 1) <= 1e-8


def test_zero_data_converges_in_one_step():
    p = RlsdProblem(Block(BlockMap.identity(6), Regularizer("nuclear", 1.0, shape=(2, 3))),
                    Block(BlockMap.identity(6), Regularizer("l1", 1.0)), np.zeros(6))
    res = solve(p, SolverConfig(gamma=1.0, record_trace=True))
    assert res.status is Status.CONVERGED and res.iterations == 1
    assert res.trace.column("primal_residual")[1] == 0
    assert not np.any(res.state.x1) and not np.any(res.state.lam)


def test_spcp_cross_gamma_agreement(runs):
    ref = runs.reference("spcp")
    p = runs.problems["spcp"]
    ref_obj = objective(p, ref.x1, ref.x2, ref.x3)
    objs = []
    for gamma in (0.3, 0.8, 2.0):
        res = runs.run("spcp", gamma)
        assert res.converged and res.kkt.max <= 1e-8
        objs.append(res.summary(p)["objective"])
    assert max(objs) - min(objs) <= 1e-6 * abs(ref_obj)
    assert max(abs(o - ref_obj) for o in objs) <= 1e-6 * abs(ref_obj)


def test_spcp_matches_conic_solver():
    p, _ = generate(BenchSpec("spcp", m=8, n=6, seed=11))
    res = solve(p, SolverConfig(gamma=1.0, tol_kkt=1e-10))
    val, _, _ = cvx_rlsd(np.eye(48), "nuclear", 0.25, np.eye(48), "l1", 0.25 / np.sqrt(8),
                         p.b, shape=(8, 6))
    assert res.summary(p)["objective"] == pytest.approx(val, rel=1e-6)


def test_general_third_block_matches_conic_solver():
    p = quadratic_spcp(sigma=0.5, L=2.0, seed=3)
    res = solve(p, SolverConfig(gamma=3.0, tol_kkt=1e-10, max_iter=20000))
    assert res.converged
    val, _, _ = cvx_rlsd(np.eye(30), "nuclear", 0.25, np.eye(30), "l1", 0.25 / np.sqrt(6),
                         p.b, shape=(6, 5), Q=p.f3.Q, q=p.f3.q)
    assert res.summary(p)["objective"] == pytest.approx(val, rel=1e-6, abs=1e-8)


SMALL_FAMILIES = [
    BenchSpec("spcp", m=12, n=10, seed=1),
    BenchSpec("background", m=15, n=12, seed=2),
    BenchSpec("lasso", n=40, p=15, seed=3),
    BenchSpec("lasso", n=40, p=15, seed=4, orthonormal=False),
    BenchSpec("cpcp", m=8, n=8, density=0.6, seed=5),
]


@pytest.mark.parametrize("spec", SMALL_FAMILIES, ids=lambda s: f"{s.family}-{s.seed}")
def test_tight_solves_reach_kkt_on_generators(spec):
    p, _ = generate(spec)
    res = solve(p, SolverConfig(gamma=1.0, max_iter=20000, tol_kkt=1e-9))
    assert res.converged
    st_ = res.state
    assert kkt_residual(p, st_.x1, st_.x2, st_.x3, st_.lam).max <= 1e-8


def test_iteration_limit_and_inner_failure():
    p, _ = generate(BenchSpec("cpcp", m=8, n=8, density=0.6, seed=5))
    res = solve(p, SolverConfig(gamma=1.0, max_iter=1))
    assert res.status is Status.MAX_ITERATIONS and res.iterations == 1
    res = solve(p, SolverConfig(gamma=1.0, inner_tol=1e-15, inner_max_iter=1))
    assert res.status is Status.NUMERICAL_FAILURE and "inner solver" in res.message


def test_config_validation():
    for bad in (dict(gamma=0.0), dict(gamma=-1.0), dict(gamma=float("nan")),
                dict(gamma=1.0, max_iter=0), dict(gamma=1.0, tol_kkt=0.0),
                dict(gamma=1.0, inner_tol=[])):
        with pytest.raises(InvalidInputError):
            SolverConfig(**bad)
    cfg = SolverConfig(gamma=1.0, inner_tol=[1e-6, 1e-8])
    assert (cfg.inner_tol_at(0), cfg.inner_tol_at(1), cfg.inner_tol_at(9)) == (1e-6, 1e-8, 1e-8)


# --- single steps -------------------------------------------------------------------


def test_hand_executed_step():
    p = lasso_1d()
    new = step(p, SolverConfig(gamma=1.0), initial_state(p))
    assert new.k == 1
    assert new.x1[0] == 2.0 and new.x3[0] == 0.5 and new.lam[0] == 0.5


def test_step_near_fixed_point(runs):
    p = runs.problems["spcp"]
    ref = runs.reference("spcp")
    assert ref.kkt_max <= 1e-12
    a1, a2 = p.block1.map.apply(ref.x1), p.block2.map.apply(ref.x2)
    st0 = IterateState(0, ref.x1, ref.x2, ref.x3, ref.lam, a1, a2, a1 + a2 + ref.x3 - p.b)
    new = step(p, SolverConfig(gamma=2.0), st0)
    moves = [np.linalg.norm(new.x1 - ref.x1), np.linalg.norm(new.x2 - ref.x2),
             np.linalg.norm(new.x3 - ref.x3), np.linalg.norm(new.lam - ref.lam)]
    assert max(moves) <= 1e-10


def _compose(p, gamma, st_):
    """One sweep assembled from the public sub-updates."""
    shift = st_.x3 - p.b - st_.lam / gamma
    x1 = update_block(p.block1.map, p.block1.reg, st_.a2x2 + shift, gamma, warm=st_.x1)
    a1 = p.block1.map.apply(x1)
    x2 = update_block(p.block2.map, p.block2.reg, a1 + shift, gamma, warm=st_.x2)
    a2 = p.block2.map.apply(x2)
    s = a1 + a2 - p.b
    x3 = update_x3_closed_form(st_.lam, s, gamma)
    r = s + x3
    return x1, x2, x3, dual_update(st_.lam, r, gamma)


def test_step_is_composition_of_sub_updates(runs):
    p = runs.problems["background"]
    cfg = SolverConfig(gamma=0.8)
    st_ = initial_state(p)
    for _ in range(5):
        new = step(p, cfg, st_)
        for a, b in zip(_compose(p, 0.8, st_), (new.x1, new.x2, new.x3, new.lam)):
            assert np.array_equal(a, b)
        st_ = new


# --- invariants ------------------------------------------------------------------------


@settings(max_examples=15)
@given(seed=st.integers(0, 10_000), gamma=st.sampled_from([0.1, 0.45, 1.0, 3.0]),
       family=st.sampled_from(["spcp", "background", "lasso"]))
def test_canonical_identity_and_exact_dual_update(seed, gamma, family):
    spec = BenchSpec(family, m=6, n=5, p=4, seed=seed)
    p, _ = generate(spec)
    cfg = SolverConfig(gamma=gamma)
    st_ = initial_state(p)
    for _ in range(30):
        new = step(p, cfg, st_)
        assert np.array_equal(new.lam, st_.lam - gamma * new.r)
        assert np.linalg.norm(new.x3 - new.lam) <= 1e-10 * (1 + np.linalg.norm(new.lam))
        st_ = new


@settings(max_examples=10)
@given(seed=st.integers(0, 10_000), gamma=st.sampled_from([0.3, 1.0, 4.0]))
def test_general_path_gradient_identity(seed, gamma):
    p = quadratic_spcp(sigma=0.5, L=2.0, seed=seed % 50)
    cfg = SolverConfig(gamma=gamma)
    st_ = initial_state(p)
    for _ in range(20):
        new = step(p, cfg, st_)
        assert np.linalg.norm(p.f3.grad(new.x3) - new.lam) <= 1e-9 * (1 + np.linalg.norm(new.lam))
        assert (np.linalg.norm(new.lam - st_.lam)
                <= p.f3.L * np.linalg.norm(new.x3 - st_.x3) + 1e-9) or st_.k == 0
        st_ = new


@settings(max_examples=10)
@given(seed=st.integers(0, 10_000), gamma=st.sampled_from([0.2, 1.0, 5.0]),
       family=st.sampled_from(["spcp", "background"]))
def test_each_sub_update_decreases_lagrangian(seed, gamma, family):
    p, _ = generate(BenchSpec(family, m=6, n=5, seed=seed))
    cfg = SolverConfig(gamma=gamma)
    st_ = initial_state(p)

    def Lg(x1, x2, x3, lam):
        return augmented_lagrangian(p, x1, x2, x3, lam, gamma)

    for _ in range(15):
        new = step(p, cfg, st_)
        seq = [Lg(st_.x1, st_.x2, st_.x3, st_.lam), Lg(new.x1, st_.x2, st_.x3, st_.lam),
               Lg(new.x1, new.x2, st_.x3, st_.lam), Lg(new.x1, new.x2, new.x3, st_.lam)]
        for a, b in zip(seq, seq[1:]):
            assert b <= a + 1e-9 * (1 + abs(a))
        st_ = new


def test_determinism_bit_identical_traces(tmp_path):
    p, _ = generate(BenchSpec("cpcp", m=8, n=8, density=0.7, seed=9))
    cfg = SolverConfig(gamma=0.9, max_iter=200, record_trace=True)
    a, b = solve(p, cfg), solve(p, cfg)
    assert a.trace.rows == b.trace.rows
    assert np.array_equal(a.trace.iterate_array(), b.trace.iterate_array())
    a.trace.to_csv(tmp_path / "a.csv")
    b.trace.to_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_backends_give_matching_solves():
    from rlsd import kernels

    if len(kernels.available_backends()) < 2:
        pytest.skip("compiled backend not built")
    p, _ = generate(BenchSpec("cpcp", m=8, n=8, density=0.6, seed=5))
    cfg = SolverConfig(gamma=1.0, max_iter=5000, tol_kkt=1e-9)
    out = {}
    original = kernels.BACKEND
    try:
        for name in ("cython", "python"):
            kernels.set_backend(name)
            out[name] = solve(p, cfg)
    finally:
        kernels.set_backend(original)
    a, b = out["cython"].state, out["python"].state
    assert out["cython"].converged and out["python"].converged
    assert np.linalg.norm(a.x1 - b.x1) <= 1e-7 and np.linalg.norm(a.lam - b.lam) <= 1e-7


# --- trace I/O ------------------------------------------------------------------------------


def test_trace_csv_round_trip(tmp_path):
    p = lasso_1d()
    res = solve(p, SolverConfig(gamma=2.0, record_trace=True))
    res.trace.to_csv(tmp_path / "t.csv")
    res.trace.save_iterates(tmp_path / "t.npy")
    header = (tmp_path / "t.csv").read_text().splitlines()[0]
    assert header == "k,objective,lagrangian,primal_residual,kkt_max,d_x1,d_x2,d_x3,d_lambda"
    back = Trace.from_csv(tmp_path / "t.csv", 2.0, tmp_path / "t.npy")
    assert back.rows == res.trace.rows
    assert np.array_equal(back.iterate_array(), res.trace.iterate_array())
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    with pytest.raises(InvalidInputError):
        Trace.from_csv(tmp_path / "bad.csv", 2.0)


def test_summary_fields():
    p = lasso_1d()
    res = solve(p, SolverConfig(gamma=2.0))
    s = res.summary(p)
    assert set(s) == {"status", "iterations", "objective", "kkt_max", "gamma"}
    assert s["status"] == "Converged" and s["gamma"] == 2.0
    assert s["objective"] == pytest.approx(2.5, abs=1e-8)


def test_reference_point_round_trip(tmp_path, runs):
    p = runs.problems["lasso"]
    ref = runs.reference("lasso")
    ref.save(tmp_path / "ref.json")
    back = ReferenceSolution.load(tmp_path / "ref.json", p)
    assert back.identifier == ref.identifier and back.kkt_max == ref.kkt_max
