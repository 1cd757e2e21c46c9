import itertools
import math

import numpy as np
import pytest

from conftest import random_density, random_distribution, random_pure
from entcert import (BipartitePureState, CqState, ValidationError,
                     entanglement_entropy, eof_two_qubit, epr_state, fidelity,
                     mutual_information, partial_trace, relative_entropy,
                     relative_min_entropy, tensor, trace_distance,
                     von_neumann_entropy)
from entcert.quantum import (binary_entropy, concurrence_two_qubit,
                             cq_mutual_information, cq_relative_entropy,
                             quantum_raz_audit, trace_norm)

LN2 = math.log(2.0)


class TestLinearAlgebra:
    def test_tensor_identity(self):
        assert np.array_equal(tensor(np.eye(2), np.eye(2)), np.eye(4))

    def test_tensor_basis_projectors(self):
        p0 = np.diag([1.0, 0.0])
        p1 = np.diag([0.0, 1.0])
        out = tensor(p0, p1)
        expected = np.zeros((4, 4))
        expected[1, 1] = 1.0
        assert np.array_equal(out, expected)

    def test_tensor_matches_double_loop_oracle(self):
        rng = np.random.default_rng(0)
        a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        b = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
        out = tensor(a, b)
        for i, j, k, l in itertools.product(range(2), range(2), range(3), range(3)):
            assert out[i * 3 + k, j * 3 + l] == pytest.approx(a[i, j] * b[k, l])

    def test_partial_trace_epr(self):
        rho = epr_state().density()
        assert np.allclose(partial_trace(rho, 2, 2, "a"), np.eye(2) / 2)
        assert np.allclose(partial_trace(rho, 2, 2, "b"), np.eye(2) / 2)

    def test_partial_trace_product(self):
        rng = np.random.default_rng(1)
        ra, rb = random_density(2, rng), random_density(3, rng)
        assert np.allclose(partial_trace(tensor(ra, rb), 2, 3, "a"), ra)
        assert np.allclose(partial_trace(tensor(ra, rb), 2, 3, "b"), rb)

    def test_schmidt_symmetry(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            v = random_pure(6, rng)
            rho = np.outer(v, v.conj())
            sa = np.linalg.eigvalsh(partial_trace(rho, 2, 3, "a"))
            sb = np.linalg.eigvalsh(partial_trace(rho, 2, 3, "b"))
            assert np.allclose(sorted(sa, reverse=True)[:2],
                               sorted(sb, reverse=True)[:2], atol=1e-10)


class TestEntropies:
    def test_von_neumann_basics(self):
        assert von_neumann_entropy(np.eye(2) / 2) == pytest.approx(1.0)
        assert von_neumann_entropy(np.diag([1.0, 0.0])) == pytest.approx(0.0)
        assert von_neumann_entropy(np.diag([0.25, 0.75])) == pytest.approx(
            binary_entropy(0.25))

    def test_relative_entropy_basics(self):
        rng = np.random.default_rng(3)
        rho = random_density(3, rng)
        assert relative_entropy(rho, rho) == pytest.approx(0.0, abs=1e-9)
        assert relative_entropy(np.diag([1.0, 0.0]), np.eye(2) / 2) == \
            pytest.approx(1.0)
        assert relative_entropy(np.diag([1.0, 0.0]),
                                np.diag([0.0, 1.0])) == math.inf

    def test_relative_min_entropy_basics(self):
        rng = np.random.default_rng(4)
        rho = random_density(3, rng)
        assert relative_min_entropy(rho, rho) == pytest.approx(0.0, abs=1e-8)
        assert relative_min_entropy(np.eye(2) / 2,
                                    np.diag([0.25, 0.75])) == pytest.approx(1.0)
        assert relative_min_entropy(np.diag([1.0, 0.0]),
                                    np.diag([0.0, 1.0])) == math.inf

    def test_min_entropy_dominates_relative_entropy(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            rho, sigma = random_density(3, rng), random_density(3, rng)
            assert relative_entropy(rho, sigma) <= \
                relative_min_entropy(rho, sigma) + 1e-9

    def test_operator_dominance_bound(self):
        # whenever rho <= 2^K sigma, D(rho || sigma) <= K
        rng = np.random.default_rng(6)
        for _ in range(50):
            rho, sigma = random_density(3, rng), random_density(3, rng)
            k = relative_min_entropy(rho, sigma)
            evals = np.linalg.eigvalsh(2.0 ** k * sigma - rho)
            assert evals.min() > -1e-8
            assert relative_entropy(rho, sigma) <= k + 1e-9

    def test_pinsker(self):
        rng = np.random.default_rng(7)
        for _ in range(200):
            rho, sigma = random_density(3, rng), random_density(3, rng)
            lhs = 0.5 * trace_norm(rho - sigma) ** 2
            assert lhs <= LN2 * relative_entropy(rho, sigma) + 1e-9

    def test_mutual_information_basics(self):
        rng = np.random.default_rng(8)
        prod = tensor(random_density(2, rng), random_density(2, rng))
        assert mutual_information(prod, 2, 2) == pytest.approx(0.0, abs=1e-9)
        assert mutual_information(epr_state().density(), 2, 2) == \
            pytest.approx(2.0)
        cc = np.diag([0.5, 0.0, 0.0, 0.5])
        assert mutual_information(cc, 2, 2) == pytest.approx(1.0)

    def test_trace_distance_fidelity(self):
        rng = np.random.default_rng(9)
        rho = random_density(3, rng)
        assert trace_distance(rho, rho) == pytest.approx(0.0, abs=1e-10)
        assert fidelity(rho, rho) == pytest.approx(1.0, abs=1e-8)
        p0, p1 = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
        assert trace_distance(p0, p1) == pytest.approx(1.0)
        assert fidelity(p0, p1) == pytest.approx(0.0, abs=1e-10)
        assert trace_distance(p0, np.eye(2) / 2) == pytest.approx(0.5)


def _random_cq(labels, rng, quantum_dim=2, weights=None):
    w = random_distribution(len(labels), rng) if weights is None else weights
    return CqState(tuple(labels), tuple(w),
                   tuple(random_density(quantum_dim, rng) for _ in labels))


class TestCqStates:
    def test_chain_rule_matches_block_density(self):
        # D(rho' || rho) = D(Q || P) + E_Q D(rho'_z || rho_z)
        rng = np.random.default_rng(10)
        labels = ("u", "v", "w")
        for _ in range(50):
            rho_p, rho = _random_cq(labels, rng), _random_cq(labels, rng)
            chain = cq_relative_entropy(rho_p, rho)
            direct = relative_entropy(rho_p.block_density(),
                                      rho.block_density())
            assert chain == pytest.approx(direct, abs=1e-9)

    def test_cq_mutual_information_product(self):
        rng = np.random.default_rng(11)
        shared = random_density(2, rng)
        cq = CqState(("0", "1"), (0.3, 0.7), (shared, shared))
        assert cq_mutual_information(cq) == pytest.approx(0.0, abs=1e-10)

    def test_quantum_raz(self):
        rng = np.random.default_rng(12)
        for trial in range(100):
            n = 2 + trial % 2
            labels = tuple(itertools.product(range(2), repeat=n))
            rho = _random_cq(labels, rng)
            sigma_a = random_density(2, rng)
            sigma = CqState(labels,
                            tuple(np.full(len(labels), 1.0 / len(labels))),
                            tuple(sigma_a for _ in labels))
            lhs, rhs = quantum_raz_audit(rho, sigma)
            assert lhs <= rhs + 1e-9

    def test_quantum_raz_product_state_is_tight_zero(self):
        rng = np.random.default_rng(13)
        labels = tuple(itertools.product(range(2), repeat=2))
        sigma_a = random_density(2, rng)
        sigma = CqState(labels, tuple(np.full(4, 0.25)),
                        tuple(sigma_a for _ in labels))
        lhs, rhs = quantum_raz_audit(sigma, sigma)
        assert lhs == pytest.approx(0.0, abs=1e-10)
        assert rhs == pytest.approx(0.0, abs=1e-10)

    def test_quantum_raz_rejects_non_product_sigma(self):
        rng = np.random.default_rng(14)
        labels = tuple(itertools.product(range(2), repeat=2))
        rho = _random_cq(labels, rng)
        correlated_weights = np.array([0.4, 0.1, 0.1, 0.4])
        sigma = CqState(labels, tuple(correlated_weights),
                        tuple(random_density(2, rng) for _ in labels))
        with pytest.raises(ValidationError):
            quantum_raz_audit(rho, sigma)


class TestEntanglementMeasures:
    def test_epr_entropy(self):
        assert entanglement_entropy(epr_state()) == pytest.approx(1.0)

    def test_product_pure_state(self):
        psi = BipartitePureState(2, 2, np.array([1.0, 0, 0, 0], dtype=complex))
        assert entanglement_entropy(psi) == pytest.approx(0.0, abs=1e-10)

    def test_schmidt_angle_state(self):
        th = math.pi / 6
        amp = np.array([math.cos(th), 0.0, 0.0, math.sin(th)], dtype=complex)
        psi = BipartitePureState(2, 2, amp)
        assert entanglement_entropy(psi) == pytest.approx(
            binary_entropy(math.cos(th) ** 2), abs=1e-10)

    def test_both_sides_agree(self):
        rng = np.random.default_rng(15)
        for _ in range(20):
            psi = BipartitePureState(2, 3, random_pure(6, rng))
            ea = von_neumann_entropy(psi.reduced("a"))
            eb = von_neumann_entropy(psi.reduced("b"))
            assert ea == pytest.approx(eb, abs=1e-10)

    def test_eof_epr(self):
        assert eof_two_qubit(epr_state().density()) == pytest.approx(1.0,
                                                                     abs=1e-9)

    def test_eof_separable_diagonal(self):
        rng = np.random.default_rng(16)
        w = random_distribution(4, rng)
        assert eof_two_qubit(np.diag(w)) == pytest.approx(0.0, abs=1e-10)

    def test_eof_werner_mixture(self):
        p = 0.9
        rho = p * epr_state().density() + (1 - p) * np.eye(4) / 4
        c = max(0.0, (3 * p - 1) / 2)
        expected = binary_entropy((1 + math.sqrt(1 - c * c)) / 2)
        assert concurrence_two_qubit(rho) == pytest.approx(c, abs=1e-10)
        assert eof_two_qubit(rho) == pytest.approx(expected, abs=1e-10)

    def test_eof_pure_states_match_entanglement_entropy(self):
        rng = np.random.default_rng(17)
        for _ in range(50):
            v = random_pure(4, rng)
            psi = BipartitePureState(2, 2, v)
            assert eof_two_qubit(np.outer(v, v.conj())) == pytest.approx(
                entanglement_entropy(psi), abs=1e-8)
