import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qconv.convolution import ConvolutionParams, QubitConvolution, find_params, find_triple_params
from qconv.entropy import relative_entropy, renyi_relative, max_relative, trace_distance, von_neumann
from qconv.magic import (
    MeanStateError,
    Unbounded,
    ZeroMeanError,
    clt_bound,
    clt_relative_entropy_trace,
    cssa_check,
    difference_constant,
    doubling_constant,
    is_zero_mean,
    magic_measure_direct,
    magic_measure_msps,
    mean_state,
    pinsker_trace_bound,
    qist_bound,
    renyi_clt_bound,
    ruzsa_divergence,
    subadditivity_counterexamples,
    symmetrized_ruzsa,
    to_zero_mean,
    triangle_check,
    tripling_constant,
)
from qconv.phase_space import PhasePoint, SystemShape, char_function, group_closed
from qconv.convolution import iterate_convolution
from qconv.stabilizers import build_catalog, enumerate_pure_stabilizers, random_clifford
from qconv.states import (
    DensityMatrix,
    diagonal_state,
    maximally_mixed,
    partial_trace,
    pure_state,
    random_density,
    random_pure,
    stabilizer_from_generators,
    t_state,
    tensor,
    z_eigenstate,
)

P7 = find_params(7)
Q3 = QubitConvolution(3)
S7 = SystemShape(7)
S2 = SystemShape(2)


def h(p):
    return -sum(x * math.log(x) for x in (p, 1 - p) if x > 0)


# ----------------------------------------------------------------- mean state


def test_mean_state_of_stabilizer():
    for rho in enumerate_pure_stabilizers(S7).pure_states[::7]:
        rep = mean_state(rho)
        assert np.abs(rep.mean.op - rho.op).max() < 1e-12
        assert rep.gap == 0 and rep.rank == 1


def test_mean_state_of_t_state():
    rep = mean_state(t_state())
    assert rep.rank == 2
    assert abs(rep.gap - (1 - 2 ** -0.5)) < 1e-12
    assert abs(rep.lam - 0.5) < 1e-12
    assert np.abs(rep.mean.op - np.eye(2) / 2).max() < 1e-12


def test_mean_state_of_flat():
    sh = SystemShape(3, 2)
    rep = mean_state(maximally_mixed(sh))
    assert list(rep.group_points) == [0] and rep.rank == 9 and rep.gap == 0


def test_mean_state_rejects_bad_tolerance():
    with pytest.raises(ValueError):
        mean_state(t_state(), 0.7)
    with pytest.raises(MeanStateError):
        # 1/sqrt2 values get kept, and {0, X, Y} is not a subgroup
        mean_state(t_state(), 0.4)


def _structured(seed):
    rng = np.random.default_rng(seed)
    stab = enumerate_pure_stabilizers(S7).pure_states[int(rng.integers(56))]
    return tensor(stab, random_density(S7, int(rng.integers(1, 8)), rng))


@given(st.integers(0, 10 ** 6))
@settings(max_examples=25, deadline=None)
def test_mean_state_invariants(seed):
    rho = _structured(seed) if seed % 2 else random_density(S7, 1 + seed % 7, seed)
    rep = mean_state(rho)
    mods = np.abs(char_function(rep.mean).flat)
    on = np.zeros(mods.size, bool)
    on[rep.group_points] = True
    assert np.abs(mods[on] - 1).max() < 1e-9 and (mods[~on].max() if (~on).any() else 0) < 1e-9
    assert rep.rank * len(rep.group_points) == rho.dim
    assert abs(von_neumann(rep.mean) - math.log(rep.rank)) < 1e-9
    assert group_closed(rho.shape, rep.group_points)
    assert von_neumann(rho) <= von_neumann(rep.mean) + 1e-9
    assert 0 <= rep.gap <= 1 and abs(rep.lam - (1 - rep.gap) ** 2) < 1e-15
    if rep.group.rank:
        rebuilt = stabilizer_from_generators(rho.shape, rep.group)
        assert np.abs(rebuilt.op - rep.mean.op).max() < 1e-9


# ----------------------------------------------------------------- zero mean


def test_zero_mean_examples():
    assert is_zero_mean(z_eigenstate(S7))
    one = pure_state([0, 1])
    assert not is_zero_mean(one)
    out, x = to_zero_mean(one)
    assert x == PhasePoint.of(S2, 0, 1)
    assert np.abs(out.op - np.diag([1, 0])).max() < 1e-12


@pytest.mark.parametrize("seed", range(5))
def test_to_zero_mean_random(seed):
    for rho in (random_pure(S7, seed), _structured(seed)):
        out, x = to_zero_mean(rho)
        assert is_zero_mean(out)
        assert abs(von_neumann(out) - von_neumann(rho)) < 1e-9


def test_two_qubit_sign_obstruction():
    # XX and ZZ at +1 force YY = -1: no displacement reaches Xi = 1 on the group
    bell = pure_state([1, 0, 0, 1])
    assert not is_zero_mean(bell)
    with pytest.raises(ZeroMeanError) as e:
        to_zero_mean(bell)
    assert e.value.deviation > 1


# ----------------------------------------------------------------- CLT


def test_clt_trace_stabilizer_is_zero():
    assert max(clt_relative_entropy_trace(z_eigenstate(S7), 5, P7)) < 1e-12
    assert max(clt_relative_entropy_trace(z_eigenstate(S2), 5, Q3)) < 1e-12


@pytest.mark.parametrize("seed", range(4))
def test_clt_trace_decreasing_and_bounded(seed):
    rho, _ = to_zero_mean(random_density(S7, seed=seed))
    tr = clt_relative_entropy_trace(rho, 6, P7)
    assert all(b < a for a, b in zip(tr, tr[1:]))
    rep = mean_state(rho)
    for N, D in enumerate(tr, start=1):
        assert D <= clt_bound(rep, rho.purity(), N).value + 1e-8
        assert D <= clt_bound(rep, rho.purity(), N).linear + 1e-8


def test_clt_trace_zero_means_input():
    rho = random_density(S7, seed=0).conjugate(np.roll(np.eye(7), 1, axis=0))
    assert clt_relative_entropy_trace(rho, 3, P7) == clt_relative_entropy_trace(to_zero_mean(rho)[0], 3, P7)


def test_clt_bound_closed_forms():
    rep = mean_state(t_state())
    assert abs(clt_bound(rep, 1.0, 3).value - math.log(1.25)) < 1e-12
    assert abs(clt_bound(rep, 1.0, 1).value - math.log(2)) < 1e-12
    stab = z_eigenstate(S7)
    srep = mean_state(stab)
    assert clt_bound(srep, 1.0, 4).value == 0 and pinsker_trace_bound(srep, 1.0, 4) == 0
    assert renyi_clt_bound(srep, 1.0, 4) == 0
    assert abs(renyi_clt_bound(rep, 1.0, 1) - math.log(1 + 2 * math.sqrt(0.5))) < 1e-12
    assert pinsker_trace_bound(rep, 1.0, 60) < 1e-8
    with pytest.raises(ValueError):
        clt_bound(rep, 1.0, 0)


def test_qubit_t_state_clt():
    T = t_state()
    traj = iterate_convolution(T, 7, Q3)
    rep = mean_state(T)
    M = rep.mean
    Ds = [relative_entropy(s, M) for s in traj]
    assert all(b < a for a, b in zip(Ds, Ds[1:]))
    # box_K T has Bloch length 2^{(1-K)/2}
    for K, D in zip((1, 3, 5, 7), Ds):
        r = 2 ** ((1 - K) / 2)
        assert abs(D - (math.log(2) - h((1 + r) / 2))) < 1e-12
        assert D <= clt_bound(rep, 1.0, K).value + 1e-8
        for a in (2, math.inf):
            assert renyi_relative(traj[(K - 1) // 2], M, a) <= renyi_clt_bound(rep, 1.0, K) + 1e-8


@given(st.integers(0, 10 ** 6))
@settings(max_examples=10, deadline=None)
def test_renyi_and_pinsker_bounds(seed):
    rho, _ = to_zero_mean(random_density(S7, 1 + seed % 7, seed))
    rep = mean_state(rho)
    M, pur = rep.mean, rho.purity()
    for N, s in enumerate(iterate_convolution(rho, 5, P7), start=1):
        rb = renyi_clt_bound(rep, pur, N)
        assert renyi_relative(s, M, 2) <= rb + 1e-8
        assert max_relative(s, M) <= rb + 1e-8
        assert trace_distance(s, M) <= pinsker_trace_bound(rep, pur, N) + 1e-8


# ----------------------------------------------------------------- doubling and friends


def test_doubling_on_msps_and_flat():
    for e in build_catalog(S7).msps[::5]:
        assert abs(doubling_constant(e.state, P7) - 1) < 1e-9
        assert abs(difference_constant(e.state, P7) - 1) < 1e-9
        assert abs(doubling_constant(e.state, P7, alpha=2.0) - 1) < 1e-9
    assert abs(doubling_constant(maximally_mixed(S7), P7) - 1) < 1e-12


def test_doubling_t_state_regression():
    # box_3 T has spectrum (3/4, 1/4), so delta = exp(h(3/4)) = 4 / 3^{3/4}
    assert abs(doubling_constant(t_state(), Q3) - 4 / 3 ** 0.75) < 1e-12
    with pytest.raises(TypeError):
        difference_constant(t_state(), Q3)


def test_tripling():
    tr = tripling_constant(z_eigenstate(S2))
    assert abs(tr.difference) < 1e-12 and abs(tr.exponential - 1) < 1e-12
    tr = tripling_constant(t_state())
    assert abs(tr.difference - h(0.75)) < 1e-12 and tr.exponential > 1
    assert abs(tripling_constant(t_state(), fast=False).difference - tr.difference) < 1e-12
    for seed in range(10):
        a, b = random_density(S2, seed=seed), random_density(S2, seed=seed + 50)
        ab = tensor(a, b)
        assert tripling_constant(partial_trace(ab, 1)).difference <= tripling_constant(ab).difference + 1e-8
    with pytest.raises(ValueError):
        tripling_constant(z_eigenstate(S7))


@given(st.integers(0, 10 ** 6))
@settings(max_examples=20, deadline=None)
def test_doubling_properties(seed):
    rng = np.random.default_rng(seed)
    a, b = random_density(S7, seed=rng), random_density(S7, seed=rng)
    da = doubling_constant(a, P7)
    assert da >= 1 - 1e-9
    assert abs(doubling_constant(tensor(a, b), P7) - da * doubling_constant(b, P7)) < 1e-8
    U = random_clifford(S7, 6, rng)
    assert abs(doubling_constant(a.conjugate(U), P7) - da) < 1e-8
    A = random_density(SystemShape(7, 2), seed=rng)
    assert doubling_constant(partial_trace(A, 0), P7) <= doubling_constant(A, P7) + 1e-8


# ----------------------------------------------------------------- inverse sumset


def test_qist_examples():
    stab = z_eigenstate(S7)
    assert qist_bound(stab, doubling_constant(stab, P7)) == 0
    psi = random_pure(S7, 0)
    rep = mean_state(psi)
    C = doubling_constant(psi, P7)
    assert abs(qist_bound(psi, C, dataclasses.replace(rep, lam=0.0)) - math.log(C)) < 1e-12
    with pytest.raises(Unbounded):
        qist_bound(psi, C, dataclasses.replace(rep, lam=1.0))
    with pytest.raises(ValueError):
        qist_bound(random_density(S7, seed=0), 2.0)
    assert qist_bound(psi, 1.0, rep) == 0


@pytest.mark.parametrize("seed", range(10))
def test_qist_holds(seed):
    psi = random_pure(S7, seed)
    rep = mean_state(psi)
    assert relative_entropy(psi, rep.mean) <= qist_bound(psi, doubling_constant(psi, P7), rep) + 1e-8


def test_qist_qubit_uses_lambda_squared():
    T = t_state()
    rep = mean_state(T)
    C = doubling_constant(T, Q3)
    expect = math.log(2) / (math.log(2) - math.log(1 + 0.25)) * math.log(C)
    assert abs(qist_bound(T, C, rep) - expect) < 1e-12
    assert relative_entropy(T, rep.mean) <= expect


# ----------------------------------------------------------------- Ruzsa


@pytest.mark.parametrize("params,shape", [(P7, S7), (Q3, S2)], ids=["d7", "qubit"])
def test_ruzsa_battery(params, shape):
    rng = np.random.default_rng(11)
    for _ in range(8):
        a, b, c = (random_density(shape, seed=rng) for _ in range(3))
        rz = ruzsa_divergence(a, b, params)
        assert rz >= -1e-9
        U = random_clifford(shape, 6, rng)
        assert abs(ruzsa_divergence(a.conjugate(U), b.conjugate(U), params) - rz) < 1e-9
        a2, b2 = random_density(shape, seed=rng), random_density(shape, seed=rng)
        add = ruzsa_divergence(tensor(a, a2), tensor(b, b2), params) - rz - ruzsa_divergence(a2, b2, params)
        assert abs(add) < 1e-8
        w = rng.dirichlet(np.ones(3))
        mix = DensityMatrix(w[0] * a.op + w[1] * b.op + w[2] * c.op, shape)
        parts = (a, b, c)
        assert ruzsa_divergence(mix, b, params) <= sum(x * ruzsa_divergence(p, b, params) for x, p in zip(w, parts)) + 1e-8
        assert ruzsa_divergence(a, mix, params) >= sum(x * ruzsa_divergence(a, p, params) for x, p in zip(w, parts)) - 1e-8
        A, B = random_density(SystemShape(shape.d, 2), seed=rng), random_density(SystemShape(shape.d, 2), seed=rng)
        for k in (0, 1):
            assert ruzsa_divergence(partial_trace(A, k), partial_trace(B, k), params) <= ruzsa_divergence(A, B, params) + 1e-8


def test_ruzsa_examples():
    flat = maximally_mixed(S7)
    for seed in range(3):
        assert abs(ruzsa_divergence(flat, random_pure(S7, seed), P7)) < 1e-9
    cat = enumerate_pure_stabilizers(S7)
    for e in build_catalog(S7).msps:
        assert abs(ruzsa_divergence(e.state, e.state, P7)) < 1e-9
    z, x = cat.pure_states[0], None
    for rho, g in zip(cat.pure_states, cat.groups):
        if g.generators[0][0] != cat.groups[0].generators[0][0]:
            x = rho
            break
    assert symmetrized_ruzsa(z, x, P7) > 0.1


def test_exact_case_pfr():
    cat = enumerate_pure_stabilizers(S7)
    by_group = {}
    for rho, g in zip(cat.pure_states, cat.groups):
        by_group.setdefault(g.points()[0], []).append(rho)
    for members in by_group.values():
        assert len(members) == 7
        for other in members[1:]:
            assert abs(symmetrized_ruzsa(members[0], other, P7)) < 1e-9


def test_subadditivity_counterexamples():
    rep = subadditivity_counterexamples(S7, P7)
    a, b = rep["not_subadditive"], rep["not_superadditive"]
    assert abs(a["S_conv"] - math.log(7)) < 1e-12 and abs(a["S_sum"]) < 1e-9
    assert abs(b["S_conv"] - math.log(7)) < 1e-12 and abs(b["S_sum"] - 2 * math.log(7)) < 1e-12
    assert a["dev_from_flat"] < 1e-12 and b["dev_from_flat"] < 1e-12


# ----------------------------------------------------------------- conjectures


def test_cssa_proved_cases():
    tp = find_triple_params(23)
    sh = SystemShape(23)
    cat = enumerate_pure_stabilizers(sh).pure_states
    rng = np.random.default_rng(0)
    for _ in range(20):
        i, j, k = rng.integers(len(cat), size=3)
        assert cssa_check(cat[i], cat[j], cat[k], tp).holds
        r, s, t = (diagonal_state(rng.dirichlet(np.ones(23)), sh) for _ in range(3))
        c = cssa_check(r, s, t, tp)
        assert c.holds and c.margin >= -1e-8


def test_triangle_checks():
    cat = enumerate_pure_stabilizers(S7).pure_states
    rng = np.random.default_rng(1)
    flat = maximally_mixed(S7)
    for _ in range(20):
        i, j, k = rng.integers(len(cat), size=3)
        assert triangle_check(cat[i], cat[j], cat[k], P7).holds
        r, t = random_density(S7, seed=rng), random_density(S7, seed=rng)
        assert triangle_check(r, flat, t, P7).margin >= -1e-9
    with pytest.raises(ValueError):
        triangle_check(flat, flat, flat, ConvolutionParams(13, 2, 6))


# ----------------------------------------------------------------- magic measure


def test_magic_measure_t_state():
    cat = build_catalog(S2)
    val, arg = magic_measure_direct(t_state(), Q3, cat.pure_states)
    # nearest are X/Y eigenstates; output Bloch length 1/sqrt2
    assert abs(val - h((1 + 2 ** -0.5) / 2)) < 1e-12
    assert arg == 2
    alt = magic_measure_msps(t_state(), Q3, [e.state for e in cat.msps])
    assert abs(val - alt) < 1e-8


def test_magic_measure_vanishes_on_msps():
    for sh, p in ((S7, P7), (S2, Q3)):
        cat = build_catalog(sh)
        msps = [e.state for e in cat.msps]
        for s in msps:
            assert abs(magic_measure_direct(s, p, cat.pure_states)[0]) < 1e-9
            assert abs(magic_measure_msps(s, p, msps)) < 1e-9
    with pytest.raises(ValueError):
        magic_measure_direct(t_state(), Q3, [])
    with pytest.raises(ValueError):
        magic_measure_msps(t_state(), Q3, [])


def test_magic_measure_clifford_invariant():
    cat = enumerate_pure_stabilizers(S7).pure_states
    rng = np.random.default_rng(4)
    for _ in range(4):
        rho = random_density(S7, seed=rng)
        U = random_clifford(S7, 6, rng)
        a = magic_measure_direct(rho, P7, cat)[0]
        b = magic_measure_direct(rho.conjugate(U), P7, cat)[0]
        assert abs(a - b) < 1e-9
