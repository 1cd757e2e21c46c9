"""Small-dimension quantum information utilities.

Dense complex linear algebra (numpy) plus the entropic and entanglement
quantities used by the certification pipeline.  All entropic quantities are
in bits (log base 2); entanglement is measured in EPR-pair units.

Numerical conventions: eigenvalues below ``EIG_CLAMP`` are treated as zero
for entropies, support membership is decided at ``SUPPORT_TOL``, and every
matrix is Hermitian-symmetrized before a spectral routine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

EIG_CLAMP = 1e-12
SUPPORT_TOL = 1e-10
HERM_TOL = 1e-10
TRACE_TOL = 1e-10

LOG2E = math.log2(math.e)


# ---------------------------------------------------------------------------
# validation helpers

def hermitize(m: np.ndarray) -> np.ndarray:
    """(M + M†)/2 — drift control before spectral routines."""
    return (m + m.conj().T) / 2


def check_density_matrix(rho: np.ndarray, name: str = "rho") -> np.ndarray:
    """Validate Hermiticity, positivity and unit trace; return symmetrized copy."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValidationError(f"{name} is not square: shape {rho.shape}")
    if not np.all(np.isfinite(rho)):
        raise ValidationError(f"{name} has non-finite entries")
    if np.max(np.abs(rho - rho.conj().T)) > HERM_TOL:
        raise ValidationError(f"{name} is not Hermitian within {HERM_TOL}")
    rho = hermitize(rho)
    if abs(np.trace(rho).real - 1.0) > TRACE_TOL:
        raise ValidationError(f"{name} does not have unit trace")
    evals = np.linalg.eigvalsh(rho)
    if evals.min() < -SUPPORT_TOL:
        raise ValidationError(f"{name} has negative eigenvalue {evals.min():.3e}")
    return rho


def tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product, row-major index convention (i_a * dim_b + i_b)."""
    return np.kron(np.asarray(a), np.asarray(b))


def partial_trace(rho: np.ndarray, dim_a: int, dim_b: int, keep: str) -> np.ndarray:
    """Reduced state on the kept side ('a' or 'b') of a dim_a*dim_b system."""
    rho = np.asarray(rho, dtype=complex)
    d = dim_a * dim_b
    if rho.shape != (d, d):
        raise ValidationError(
            f"state has shape {rho.shape}, expected ({d}, {d}) for dims {dim_a}x{dim_b}")
    r4 = rho.reshape(dim_a, dim_b, dim_a, dim_b)
    if keep == "a":
        return np.einsum("abcb->ac", r4)
    if keep == "b":
        return np.einsum("abac->bc", r4)
    raise ValidationError(f"keep must be 'a' or 'b', got {keep!r}")


# ---------------------------------------------------------------------------
# entropies

def _spectrum(rho: np.ndarray) -> np.ndarray:
    evals = np.linalg.eigvalsh(hermitize(np.asarray(rho, dtype=complex)))
    evals = evals.copy()
    evals[evals < EIG_CLAMP] = 0.0
    return evals


def shannon_entropy(p: np.ndarray) -> float:
    """-sum p log2 p with 0 log 0 = 0."""
    p = np.asarray(p, dtype=float).ravel()
    nz = p[p > EIG_CLAMP]
    return float(-(nz * np.log2(nz)).sum())


def binary_entropy(p: float) -> float:
    return shannon_entropy(np.array([p, 1.0 - p]))


def kl_divergence(q: np.ndarray, p: np.ndarray) -> float:
    """Classical D(q || p) in bits; +inf when support(q) escapes support(p)."""
    q = np.asarray(q, dtype=float).ravel()
    p = np.asarray(p, dtype=float).ravel()
    if q.shape != p.shape:
        raise ValidationError("distributions have different sizes")
    mask = q > EIG_CLAMP
    if np.any(p[mask] <= EIG_CLAMP):
        return math.inf
    return float((q[mask] * (np.log2(q[mask]) - np.log2(p[mask]))).sum())


def von_neumann_entropy(rho: np.ndarray) -> float:
    """Spectral entropy in bits; eigenvalues below 1e-12 are clamped to zero."""
    return shannon_entropy(_spectrum(rho))


def relative_entropy(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Quantum relative entropy Tr(rho (log2 rho - log2 sigma)).

    Returns +inf when rho has support outside sigma's support.
    """
    rho = hermitize(np.asarray(rho, dtype=complex))
    sigma = hermitize(np.asarray(sigma, dtype=complex))
    if rho.shape != sigma.shape:
        raise ValidationError("relative_entropy: dimension mismatch")
    s_evals, s_vecs = np.linalg.eigh(sigma)
    kernel = s_vecs[:, s_evals <= SUPPORT_TOL]
    if kernel.shape[1] > 0:
        leak = float(np.einsum("ij,jk,ki->", kernel.conj().T, rho, kernel).real)
        if leak > SUPPORT_TOL:
            return math.inf
    r_evals = _spectrum(rho)
    term1 = float((r_evals[r_evals > 0] * np.log2(r_evals[r_evals > 0])).sum())
    keep = s_evals > SUPPORT_TOL
    # <v_j| rho |v_j> weights for Tr(rho log sigma)
    overlaps = np.einsum("ji,jk,ki->i", s_vecs[:, keep].conj(), rho, s_vecs[:, keep]).real
    overlaps = np.clip(overlaps, 0.0, None)
    term2 = float((overlaps * np.log2(s_evals[keep])).sum())
    return term1 - term2


def relative_min_entropy(rho: np.ndarray, sigma: np.ndarray) -> float:
    """D_inf(rho || sigma) = log2 of the largest generalized eigenvalue on sigma's support."""
    rho = hermitize(np.asarray(rho, dtype=complex))
    sigma = hermitize(np.asarray(sigma, dtype=complex))
    if rho.shape != sigma.shape:
        raise ValidationError("relative_min_entropy: dimension mismatch")
    s_evals, s_vecs = np.linalg.eigh(sigma)
    kernel = s_vecs[:, s_evals <= SUPPORT_TOL]
    if kernel.shape[1] > 0:
        leak = float(np.einsum("ij,jk,ki->", kernel.conj().T, rho, kernel).real)
        if leak > SUPPORT_TOL:
            return math.inf
    keep = s_evals > SUPPORT_TOL
    v = s_vecs[:, keep]
    inv_sqrt = v @ np.diag(1.0 / np.sqrt(s_evals[keep])) @ v.conj().T
    m = hermitize(inv_sqrt @ rho @ inv_sqrt)
    top = float(np.linalg.eigvalsh(m).max())
    if top <= 0:
        return -math.inf
    return math.log2(top)


def mutual_information(rho: np.ndarray, dim_a: int, dim_b: int) -> float:
    """I(A:B) = D(rho_AB || rho_A x rho_B) in bits."""
    rho = check_density_matrix(rho, "rho_AB")
    ra = partial_trace(rho, dim_a, dim_b, "a")
    rb = partial_trace(rho, dim_a, dim_b, "b")
    return relative_entropy(rho, tensor(ra, rb))


def trace_norm(m: np.ndarray) -> float:
    return float(np.linalg.svd(np.asarray(m, dtype=complex), compute_uv=False).sum())


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Half the trace norm of the difference."""
    rho = np.asarray(rho, dtype=complex)
    sigma = np.asarray(sigma, dtype=complex)
    if rho.shape != sigma.shape:
        raise ValidationError("trace_distance: dimension mismatch")
    return 0.5 * trace_norm(rho - sigma)


def fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    """Uhlmann fidelity F(rho, sigma) = (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2."""
    rho = hermitize(np.asarray(rho, dtype=complex))
    sigma = hermitize(np.asarray(sigma, dtype=complex))
    if rho.shape != sigma.shape:
        raise ValidationError("fidelity: dimension mismatch")
    evals, vecs = np.linalg.eigh(rho)
    evals = np.clip(evals, 0.0, None)
    sqrt_rho = vecs @ np.diag(np.sqrt(evals)) @ vecs.conj().T
    inner = hermitize(sqrt_rho @ sigma @ sqrt_rho)
    ivals = np.clip(np.linalg.eigvalsh(inner), 0.0, None)
    return float(np.sqrt(ivals).sum() ** 2)


# ---------------------------------------------------------------------------
# bipartite pure states and entanglement measures

@dataclass(frozen=True)
class BipartitePureState:
    """A unit vector on C^{dim_a} x C^{dim_b}, row-major amplitude order."""

    dim_a: int
    dim_b: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex).ravel()
        if amp.size != self.dim_a * self.dim_b:
            raise ValidationError("amplitude vector has wrong length")
        if abs(np.vdot(amp, amp).real - 1.0) > SUPPORT_TOL:
            raise ValidationError("state vector is not normalized")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    def density(self) -> np.ndarray:
        return np.outer(self.amplitudes, self.amplitudes.conj())

    def reduced(self, keep: str) -> np.ndarray:
        return partial_trace(self.density(), self.dim_a, self.dim_b, keep)


def epr_state() -> BipartitePureState:
    return BipartitePureState(2, 2, np.array([1, 0, 0, 1]) / math.sqrt(2))


def entanglement_entropy(psi: BipartitePureState) -> float:
    """Von Neumann entropy of the reduced state on the B side, in bits."""
    return von_neumann_entropy(psi.reduced("b"))


_SY_SY = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]]))


def concurrence_two_qubit(rho: np.ndarray) -> float:
    """Wootters concurrence max(0, l1 - l2 - l3 - l4) of a 2x2-qubit state."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ValidationError("concurrence requires a 4x4 density matrix")
    # The lambdas are the singular values of B = sqrt(rho) S conj(sqrt(rho))
    # with S = sigma_y x sigma_y: B B^dag = sqrt(rho) S rho^* S sqrt(rho),
    # similar to rho rho~.  SVD resolves them to absolute machine precision.
    evals_rho, vecs = np.linalg.eigh(hermitize(rho))
    roots = np.where(evals_rho < EIG_CLAMP, 0.0,
                     np.sqrt(np.clip(evals_rho, 0.0, None)))
    sqrt_rho = vecs @ np.diag(roots) @ vecs.conj().T
    b = sqrt_rho @ _SY_SY @ sqrt_rho.conj()
    lams = np.sort(np.linalg.svd(b, compute_uv=False))[::-1]
    return float(max(0.0, lams[0] - lams[1] - lams[2] - lams[3]))


def eof_two_qubit(rho: np.ndarray) -> float:
    """Entanglement of formation of a two-qubit state via the concurrence closed form."""
    c = concurrence_two_qubit(rho)
    return binary_entropy((1.0 + math.sqrt(max(0.0, 1.0 - c * c))) / 2.0)


# ---------------------------------------------------------------------------
# classical-quantum states

@dataclass(frozen=True)
class CqState:
    """A classical-quantum state: labels with weights, each carrying a conditional state."""

    labels: tuple
    weights: np.ndarray
    conditional_states: tuple  # one density matrix per label

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        if len(self.labels) != w.size or len(self.conditional_states) != w.size:
            raise ValidationError("labels / weights / states length mismatch")
        if np.any(w < -EIG_CLAMP) or abs(w.sum() - 1.0) > 1e-12:
            raise ValidationError("weights must be a probability vector")
        states = tuple(check_density_matrix(s, f"state[{i}]")
                       for i, s in enumerate(self.conditional_states))
        w = np.clip(w, 0.0, None)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "conditional_states", states)

    @property
    def quantum_dim(self) -> int:
        return self.conditional_states[0].shape[0]

    def average_state(self) -> np.ndarray:
        out = np.zeros((self.quantum_dim, self.quantum_dim), dtype=complex)
        for w, s in zip(self.weights, self.conditional_states):
            out += w * s
        return out

    def block_density(self) -> np.ndarray:
        """Explicit block-diagonal embedding sum_z p(z) |z><z| (x) rho_z."""
        d = self.quantum_dim
        k = len(self.labels)
        out = np.zeros((k * d, k * d), dtype=complex)
        for i, (w, s) in enumerate(zip(self.weights, self.conditional_states)):
            out[i * d:(i + 1) * d, i * d:(i + 1) * d] = w * s
        return out


def cq_relative_entropy(rho_prime: CqState, rho: CqState) -> float:
    """D(rho' || rho) for cq states sharing a label set, via the mixture chain rule.

    Equals D(Q_Z || P_Z) + E_{z~Q} D(rho'_z || rho_z).
    """
    if rho_prime.labels != rho.labels:
        raise ValidationError("cq states must share the same label ordering")
    total = kl_divergence(rho_prime.weights, rho.weights)
    for w, sp, s in zip(rho_prime.weights, rho_prime.conditional_states,
                        rho.conditional_states):
        if w > EIG_CLAMP:
            total += w * relative_entropy(sp, s)
    return total


def cq_mutual_information(cq: CqState) -> float:
    """I(Z : Q) of a cq state, via H(avg) - sum_z p(z) H(rho_z)."""
    total = von_neumann_entropy(cq.average_state())
    for w, s in zip(cq.weights, cq.conditional_states):
        if w > EIG_CLAMP:
            total -= w * von_neumann_entropy(s)
    return total


def _coordinate_marginal(cq: CqState, i: int) -> CqState:
    """Marginalize the tuple-labeled classical part down to coordinate i."""
    values = sorted({lab[i] for lab in cq.labels}, key=repr)
    weights = []
    states = []
    d = cq.quantum_dim
    for v in values:
        w = 0.0
        s = np.zeros((d, d), dtype=complex)
        for lab, wl, sl in zip(cq.labels, cq.weights, cq.conditional_states):
            if lab[i] == v:
                w += wl
                s += wl * sl
        weights.append(w)
        states.append(s / w if w > EIG_CLAMP else np.eye(d) / d)
    return CqState(tuple(values), np.array(weights), tuple(states))


def quantum_raz_audit(rho: CqState, sigma: CqState,
                      product_tol: float = 1e-9) -> tuple[float, float]:
    """Both sides of the superadditivity bound sum_i I(X_i : A) <= D(rho || sigma).

    ``rho`` and ``sigma`` are cq states with tuple labels (X_1, ..., X_n);
    ``sigma`` must be product across coordinates and product with its quantum
    part.  Returns (lhs, rhs); the caller asserts lhs <= rhs.
    """
    if rho.labels != sigma.labels:
        raise ValidationError("rho and sigma must share a label set")
    n = len(rho.labels[0])
    # verify sigma's product structure
    sig_marg = [_coordinate_marginal(sigma, i) for i in range(n)]
    sigma_a = sigma.average_state()
    for lab, w, s in zip(sigma.labels, sigma.weights, sigma.conditional_states):
        expect = 1.0
        for i in range(n):
            m = sig_marg[i]
            expect *= m.weights[m.labels.index(lab[i])]
        if abs(w - expect) > product_tol:
            raise ValidationError("sigma's classical part is not a product distribution")
        if w > EIG_CLAMP and trace_distance(s, sigma_a) > product_tol:
            raise ValidationError("sigma is not product with its quantum register")

    lhs = sum(cq_mutual_information(_coordinate_marginal(rho, i)) for i in range(n))
    rhs = cq_relative_entropy(rho, sigma)
    return lhs, rhs
