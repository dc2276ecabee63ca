import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import (
    random_gamma,
    random_hermitian,
    random_kraus,
    random_matrix,
    random_stochgen,
    random_structure_data,
    random_superop,
)
from qsgen.cp_analysis import is_completely_positive
from qsgen.errors import InputError
from qsgen.generators import (
    StochGen,
    StructureData,
    amplification,
    basis_gamma,
    chi,
    compress_truncation,
    delta_perp,
    flow_generator,
    forward_transform,
    from_structure_data,
    hat,
    homomorphism_defect,
    inner_flow_generator_check,
    inverse_transform,
    is_cp_cocycle_generator,
    ito_projection,
    lift_generator,
    matrix_generators,
    phi_xy,
    psi_R,
    quasicontractivity_grade,
    random_representation,
    structure_relation_defect,
    truncated_inverse,
    verify_structure_map,
    weyl_coefficient,
)
from qsgen.matrix_space import (
    SchurActionMap,
    SuperOperator,
    TruncationSet,
    ampliate,
    matrix_unit,
    truncation_operators,
)

seeds = st.integers(0, 2**32 - 1)


def brute_structure_defect(phi):
    """Relation defect over all pairs of matrix units, written out directly."""
    n, m = phi.n, phi.d + 1
    big_delta = np.kron(np.eye(n), ito_projection(phi.d))
    worst = 0.0
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for l in range(n):
                    a, b = matrix_unit(n, i, j), matrix_unit(n, k, l)
                    pa, pb = phi(a), phi(b)
                    r = phi(a @ b) - pa @ np.kron(b, np.eye(m)) - np.kron(a, np.eye(m)) @ pb - pa @ big_delta @ pb
                    worst = max(worst, np.abs(r).max())
    return worst


def component_sum_oracle(phi, x, y):
    """sum conj(xhat_a) yhat_b phi^a_b - chi(x, y) id, via explicit loops."""
    xh, yh = hat(x), hat(y)
    out = -chi(x, y) * SuperOperator.identity(phi.n)
    for a in range(phi.d + 1):
        for b in range(phi.d + 1):
            out = out + np.conj(xh[a]) * yh[b] * phi.component(a, b)
    return out


# --------------------------------------------------------------------------
# chi and phi_xy


def test_chi_examples(rng):
    assert chi([0.0], [0.0]) == 0
    x = random_matrix(rng, 3, 1)[:, 0]
    assert abs(chi(x, x)) <= 1e-15
    assert chi([1.0], [0.0]) == 0.5
    with pytest.raises(InputError):
        chi([1.0], [0.0, 1.0])


def test_chi_matches_minus_A_J():
    for d in (1, 2, 3):
        eta = basis_gamma(d)
        for J in TruncationSet.all_sets(d):
            ops = truncation_operators(J)
            idx = J.indices
            table = np.array([[chi(eta[a], eta[b]) for b in idx] for a in idx])
            assert np.max(np.abs(table + ops.A[np.ix_(idx, idx)])) <= 1e-14


def test_phi_xy_examples(rng):
    phi = random_stochgen(rng, 2, 2)
    zero = np.zeros(2)
    assert phi_xy(phi, zero, zero).distance(phi.component(0, 0)) == 0
    x, y = np.array([0.3, 1j]), np.array([-0.2, 0.5])
    expect = -chi(x, y) * SuperOperator.identity(2)
    assert phi_xy(StochGen.zero(2, 2), x, y).distance(expect) <= 1e-15
    e1 = np.array([1.0, 0.0])
    expect = phi.component(0, 0) + phi.component(1, 0) - 0.5 * SuperOperator.identity(2)
    assert phi_xy(phi, e1, zero).distance(expect) <= 1e-14


@settings(max_examples=20, deadline=None)
@given(seeds, st.integers(1, 3), st.integers(1, 3))
def test_phi_xy_matches_component_sum(seed, n, d):
    rng = np.random.default_rng(seed)
    phi = random_stochgen(rng, n, d)
    x, y = random_matrix(rng, d, 1)[:, 0], random_matrix(rng, d, 1)[:, 0]
    assert phi_xy(phi, x, y).distance(component_sum_oracle(phi, x, y)) <= 1e-12


# --------------------------------------------------------------------------
# component transforms


def test_forward_transform_of_zero():
    fw = forward_transform(StochGen.zero(2, 2))
    ident = SuperOperator.identity(2)
    assert fw.component(0, 0).distance(SuperOperator.zero(2)) == 0
    for i in (1, 2):
        assert fw.component(i, 0).distance(-0.5 * ident) == 0
        assert fw.component(0, i).distance(-0.5 * ident) == 0
        for j in (1, 2):
            assert fw.component(i, j).distance(((i == j) - 1) * ident) == 0


def test_forward_transform_single_noise_component(rng):
    pi = random_superop(rng, 2)
    ident = SuperOperator.identity(2)
    comps = [[SuperOperator.zero(2), SuperOperator.zero(2)], [SuperOperator.zero(2), pi - ident]]
    phi = StochGen.from_components(comps)
    fw = forward_transform(phi)
    expect = [[SuperOperator.zero(2), -0.5 * ident], [-0.5 * ident, pi - ident]]
    assert fw.distance(SchurActionMap.from_components(expect)) <= 1e-15
    assert inverse_transform(fw).distance(phi) <= 1e-15


def test_inverse_transform_of_zero():
    phi = inverse_transform(SchurActionMap.zero(2, 3))
    ident = SuperOperator.identity(2)
    assert phi.component(0, 0).distance(SuperOperator.zero(2)) == 0
    for i in (1, 2):
        assert phi.component(i, 0).distance(0.5 * ident) == 0
        assert phi.component(0, i).distance(0.5 * ident) == 0
        for j in (1, 2):
            assert phi.component(i, j).distance(-(i == j) * ident) == 0


@settings(max_examples=30, deadline=None)
@given(seeds, st.integers(1, 3), st.integers(1, 3))
def test_transforms_are_mutually_inverse(seed, n, d):
    rng = np.random.default_rng(seed)
    phi = random_stochgen(rng, n, d)
    assert inverse_transform(forward_transform(phi)).distance(phi) <= 1e-13
    varphi = SchurActionMap(n, d + 1, random_stochgen(rng, n, d).kernels)
    assert forward_transform(inverse_transform(varphi)).distance(varphi) <= 1e-13


def test_forward_transform_matches_phi_xy(rng):
    phi = random_stochgen(rng, 2, 3)
    eta = basis_gamma(3)
    fw = forward_transform(phi)
    for a in range(4):
        for b in range(4):
            assert fw.component(a, b).distance(phi_xy(phi, eta[a], eta[b])) <= 1e-14


# --------------------------------------------------------------------------
# truncations


def truncation_oracle(phi, J):
    """a -> Q_J assemble(phi)(a) Q_J as a superoperator."""
    q = np.kron(np.eye(phi.n), truncation_operators(J).Q)
    return SuperOperator.from_function(lambda a: q @ phi.assemble(a) @ q, phi.n, phi.n * (phi.d + 1))


@settings(max_examples=10, deadline=None)
@given(seeds, st.integers(1, 3))
def test_truncated_inverse_recovers_truncation(seed, d):
    rng = np.random.default_rng(seed)
    phi = random_stochgen(rng, 2, d)
    full = forward_transform(phi).to_superoperator()
    for J in TruncationSet.all_sets(d):
        expect = truncation_oracle(phi, J)
        assert truncated_inverse(full, J).distance(expect) <= 1e-12
        assert compress_truncation(phi, J).distance(expect) <= 1e-14
        # the Schur-action form is accepted as well
        assert truncated_inverse(forward_transform(phi), J).distance(expect) <= 1e-12


def test_truncated_inverse_zero_and_empty(rng):
    d, n = 2, 2
    J = TruncationSet.full(d)
    ops = truncation_operators(J)
    big_b = np.kron(np.eye(n), ops.B)
    zero = truncated_inverse(SuperOperator.zero(n * (d + 1)), J)
    a = random_matrix(rng, n)
    assert np.allclose(zero(a), -big_b.conj().T @ np.kron(a, ops.A) @ big_b, atol=1e-14)
    phi = random_stochgen(rng, n, d)
    empty = truncated_inverse(forward_transform(phi).to_superoperator(), TruncationSet(d, set()))
    e00 = np.zeros((d + 1, d + 1))
    e00[0, 0] = 1
    assert np.allclose(empty(a), np.kron(phi.component(0, 0)(a), e00), atol=1e-13)


def test_truncated_inverse_rejects_non_decomposable():
    swap = np.kron(np.eye(2), np.array([[0, 1], [1, 0]]))
    phi = SuperOperator.conjugation(swap) @ SuperOperator.transpose_map(4)
    with pytest.raises(InputError):
        truncated_inverse(phi, TruncationSet.full(1))


# --------------------------------------------------------------------------
# Weyl coefficients, flows and lifts


def test_weyl_coefficient_single_index():
    z = 0.3 + 0.2j
    f = weyl_coefficient(np.array([[z]]))
    assert np.allclose(f, [[-0.5 * abs(z) ** 2, -np.conj(z)], [z, 0]], atol=1e-16)
    assert np.array_equal(weyl_coefficient(np.zeros((3, 2))), np.zeros((9, 9)))


@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(1, 4), st.integers(1, 3))
def test_weyl_identity_and_flow_structure(seed, m, d):
    rng = np.random.default_rng(seed)
    gamma = random_gamma(rng, m, d)
    f = weyl_coefficient(gamma)
    big_delta = np.kron(np.eye(m), ito_projection(d))
    assert np.max(np.abs(f + f.conj().T + f.conj().T @ big_delta @ f)) <= 1e-13
    theta = flow_generator(gamma)
    assert np.max(np.abs(theta(np.eye(m)))) <= 1e-13
    assert verify_structure_map(theta, 1e-11).passed
    a, b = random_matrix(rng, m), random_matrix(rng, m)
    eye = np.eye(d + 1)
    lhs = theta(a @ b)
    rhs = theta(a) @ np.kron(b, eye) + np.kron(a, eye) @ theta(b) + theta(a) @ big_delta @ theta(b)
    assert np.max(np.abs(lhs - rhs)) <= 1e-11 * max(1.0, np.abs(lhs).max())


def test_flow_generator_of_zero():
    assert flow_generator(np.zeros((2, 2))).distance(StochGen.zero(2, 2)) == 0


@settings(max_examples=15, deadline=None)
@given(seeds, st.integers(1, 2))
def test_lift_compression_matches_forward_transform(seed, d):
    rng = np.random.default_rng(seed)
    phi = random_stochgen(rng, 2, d)
    lift = lift_generator(phi, basis_gamma(d))
    assert lift.component(0, 0).distance(forward_transform(phi).to_superoperator()) <= 1e-12


def test_lift_with_zero_gamma_is_ampliation(rng):
    phi = random_stochgen(rng, 2, 1)
    lift = lift_generator(phi, np.zeros((3, 1)))
    assert lift.component(0, 0).distance(ampliate(phi.component(0, 0), 3)) <= 1e-14


def test_lift_compression_is_injective(rng):
    phi, psi = random_stochgen(rng, 2, 2), random_stochgen(rng, 2, 2)
    eta = basis_gamma(2)
    c1 = lift_generator(phi, eta).component(0, 0)
    c2 = lift_generator(psi, eta).component(0, 0)
    assert c1.distance(c2) > 1e-3


# --------------------------------------------------------------------------
# psi_R and the cocycle-generator test


def test_psi_R_examples(rng):
    assert psi_R(np.zeros((6, 2))).distance(-_a_tensor_delta(2, 2)) == 0
    r0, r1 = 0.4 - 0.3j, 1.2 + 0.5j
    psi = psi_R(np.array([[r0], [r1]]))
    out = psi.assemble(np.eye(1))
    assert np.allclose(out, [[2 * r0.real, np.conj(r1)], [r1, -1]], atol=1e-15)
    big = psi_R(random_matrix(rng, 6, 2))
    so = big.as_superoperator()
    assert so.dagger().distance(so) <= 1e-14


def _a_tensor_delta(n, d):
    return StochGen.from_function(lambda a: np.kron(a, ito_projection(d)), n, d)


def test_cocycle_generator_examples(rng):
    s = random_structure_data(rng, 2, 2)
    phi, R, _ = from_structure_data(s)
    rep = is_cp_cocycle_generator(phi, R)
    assert rep.is_cp and rep.beta == 0 and rep.contractive_class
    R2 = random_matrix(rng, 6, 2)
    assert is_cp_cocycle_generator(psi_R(R2), R2).is_cp
    minus_cp = StochGen.from_superoperator(-1.0 * random_kraus(rng, 2), 0)
    assert not is_cp_cocycle_generator(minus_cp, np.zeros((2, 2))).is_cp


def test_quasicontractivity_grade(rng):
    s = random_structure_data(rng, 2, 1)
    phi, _, _ = from_structure_data(s)
    assert quasicontractivity_grade(phi) == 0
    assert quasicontractivity_grade(phi + 0.2 * delta_perp(2, 1)) == pytest.approx(0.2, abs=1e-12)
    assert quasicontractivity_grade(phi - 0.2 * delta_perp(2, 1)) == pytest.approx(-0.2, abs=1e-12)
    # a positive noise block in phi(1) cannot be dominated by a multiple of the vacuum projection
    bad = phi + _a_tensor_delta(2, 1)
    assert quasicontractivity_grade(bad) == np.inf


# --------------------------------------------------------------------------
# structure data


def test_homomorphism_defect(rng):
    assert homomorphism_defect(random_representation(3, 2, 2, rng)) <= 1e-14
    assert homomorphism_defect(random_representation(3, 2, 1, rng)) <= 1e-14
    assert homomorphism_defect(SuperOperator.transpose_map(3)) > 0.5
    assert homomorphism_defect(2.0 * SuperOperator.identity(2)) > 0.5
    assert len(matrix_generators(4)) == 7


def test_structure_data_validation(rng):
    with pytest.raises(InputError):
        StructureData(SuperOperator.transpose_map(2), np.zeros((2, 2)), np.eye(2)).validate()
    with pytest.raises(InputError):
        StructureData(amplification(2, 1), np.zeros((2, 2)), np.array([[0, 1], [0, 0.0]])).validate()


def test_from_structure_data_trivial(rng):
    s = StructureData(random_representation(2, 2, 2, rng), np.zeros((4, 2)), np.zeros((2, 2)))
    phi, _, _ = from_structure_data(s)
    for a in range(3):
        for b in range(3):
            if (a, b) != (0, 0) and a > 0 and b > 0:
                continue
            assert np.abs(phi.component(a, b).kernel).max() <= 1e-15
    assert np.abs(phi.assemble(np.eye(2))).max() <= 1e-14


def test_from_structure_data_blocks(rng):
    n, d = 2, 2
    s = random_structure_data(rng, n, d)
    phi, R, L = from_structure_data(s)
    chi_map = phi - psi_R(R, n)
    a = random_matrix(rng, n)
    m = d + 1
    out = chi_map.assemble(a)
    pa = s.pi(a)
    # rows/cols (u, kappa) -> u m + kappa; split the vacuum and noise parts
    vac = [u * m for u in range(n)]
    noise = [u * m + k for u in range(n) for k in range(1, m)]
    assert np.allclose(out[np.ix_(vac, vac)], s.l.conj().T @ pa @ s.l, atol=1e-12)
    assert np.allclose(out[np.ix_(noise, vac)], -pa @ s.l, atol=1e-12)
    assert np.allclose(out[np.ix_(noise, noise)], pa, atol=1e-12)
    assert verify_structure_map(phi).passed


def test_nonunital_identity_value(rng):
    """phi(1) = -L* pi(1)^perp L with L = [l, -I]; the sign of the identity block matters."""
    n, d = 2, 2
    s = random_structure_data(rng, n, d, unital=False)
    phi, _, L = from_structure_data(s)
    perp = np.eye(n * d) - s.pi(np.eye(n))
    assert np.allclose(phi.assemble(np.eye(n)), -L.conj().T @ perp @ L, atol=1e-12)
    e0 = np.kron(np.eye(n), np.eye(d + 1)[:, :1]).T
    ek = np.kron(np.eye(n), np.eye(d + 1)[:, 1:]).T
    T_plus = s.l @ e0 + ek
    assert not np.allclose(phi.assemble(np.eye(n)), -T_plus.conj().T @ perp @ T_plus, atol=1e-6)


def test_identity_representation_with_noise(rng):
    s = StructureData(amplification(2, 1), random_matrix(rng, 2, 2), random_hermitian(rng, 2))
    phi, _, _ = from_structure_data(s)
    assert np.abs(phi.assemble(np.eye(2))).max() <= 1e-13
    assert verify_structure_map(phi).passed


# --------------------------------------------------------------------------
# structure-map verification


@settings(max_examples=10, deadline=None)
@given(seeds, st.integers(1, 3), st.integers(1, 2))
def test_structure_relation_matches_brute_force(seed, n, d):
    rng = np.random.default_rng(seed)
    phi, R, _ = from_structure_data(random_structure_data(rng, n, d, unital=bool(rng.integers(2))))
    assert structure_relation_defect(phi) <= 1e-12 and brute_structure_defect(phi) <= 1e-12
    bad = phi + random_stochgen(rng, n, d, 0.1)
    fast, slow = structure_relation_defect(bad), brute_structure_defect(bad)
    assert fast > 1e-6 and slow > 1e-6


def test_psi_R_generic_is_not_structure_map(rng):
    rep = verify_structure_map(psi_R(random_matrix(rng, 6, 2)))
    assert rep.hermitian and not rep.multiplicative and not rep.passed


def test_perturbed_generator_fails_unit_check(rng):
    phi, _, _ = from_structure_data(random_structure_data(rng, 2, 1))
    rep = verify_structure_map(phi + 0.1 * delta_perp(2, 1))
    assert not rep.vanishes_at_identity


# --------------------------------------------------------------------------
# inner flow generators


def test_inner_flow_examples(rng):
    assert inner_flow_generator_check(StochGen.zero(2, 2)).passed
    # a -> -a (x) Delta satisfies the inequality but is not a structure map (mu(1) != 0)
    minus_a_delta = psi_R(np.zeros((6, 2)))
    rep = inner_flow_generator_check(minus_a_delta)
    assert rep.positivity_ok and not rep.passed
    assert not inner_flow_generator_check(-minus_a_delta).positivity_ok
    phi, _, _ = from_structure_data(random_structure_data(rng, 2, 2))
    assert inner_flow_generator_check(phi, rng=1).passed


def test_generators_are_hermitian(rng):
    phi, _, _ = from_structure_data(random_structure_data(rng, 2, 2))
    so = phi.as_superoperator()
    assert so.dagger().distance(so) <= 1e-12
    assert is_completely_positive(SuperOperator.zero(2))
