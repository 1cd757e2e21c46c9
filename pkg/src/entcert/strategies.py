"""Quantum strategies, induced behaviors, noise channels and a seesaw optimizer.

A strategy stores its POVM elements directly (probabilities are
``Tr((A_x(a) (x) B_y(b)) rho)``); per-question completeness
``sum_a E_x(a) = Id`` is enforced at validation time.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .games import Game, chsh_game
from .quantum import (
    BipartitePureState,
    check_density_matrix,
    epr_state,
    hermitize,
    tensor,
)

POVM_PSD_TOL = 1e-10
POVM_COMPLETE_TOL = 1e-8
NOSIG_TOL = 1e-8
NORM_TOL = 1e-9


def _check_povm(elements, dim: int, tag: str):
    """Validate one question's POVM: PSD elements summing to the identity."""
    total = np.zeros((dim, dim), dtype=complex)
    out = []
    for k, e in enumerate(elements):
        e = np.asarray(e, dtype=complex)
        if e.shape != (dim, dim):
            raise ValidationError(f"{tag}[{k}] has shape {e.shape}, expected ({dim},{dim})")
        if np.max(np.abs(e - e.conj().T)) > POVM_PSD_TOL:
            raise ValidationError(f"{tag}[{k}] is not Hermitian")
        e = hermitize(e)
        if np.linalg.eigvalsh(e).min() < -POVM_PSD_TOL:
            raise ValidationError(f"{tag}[{k}] is not PSD")
        total += e
        out.append(e)
    if np.max(np.abs(total - np.eye(dim))) > POVM_COMPLETE_TOL:
        raise ValidationError(f"{tag} does not sum to the identity")
    return tuple(out)


@dataclass(frozen=True)
class QuantumStrategy:
    """Shared bipartite state plus per-question POVM families."""

    dim_a: int
    dim_b: int
    state: np.ndarray                     # density matrix on dim_a * dim_b
    a_measurements: tuple                 # [x][a] -> (dim_a, dim_a) PSD
    b_measurements: tuple                 # [y][b] -> (dim_b, dim_b) PSD

    def __post_init__(self):
        state = check_density_matrix(self.state, "state")
        if state.shape[0] != self.dim_a * self.dim_b:
            raise ValidationError("state dimension does not match dim_a * dim_b")
        a_meas = tuple(_check_povm(povm, self.dim_a, f"A[x={x}]")
                       for x, povm in enumerate(self.a_measurements))
        b_meas = tuple(_check_povm(povm, self.dim_b, f"B[y={y}]")
                       for y, povm in enumerate(self.b_measurements))
        object.__setattr__(self, "state", state)
        object.__setattr__(self, "a_measurements", a_meas)
        object.__setattr__(self, "b_measurements", b_meas)

    @property
    def is_pure(self) -> bool:
        evals = np.linalg.eigvalsh(self.state)
        return bool(evals[:-1].max(initial=0.0) < 1e-10)

    def pure_state(self) -> BipartitePureState:
        evals, vecs = np.linalg.eigh(self.state)
        if evals[:-1].max(initial=0.0) > 1e-10:
            raise ValidationError("state is not rank one")
        return BipartitePureState(self.dim_a, self.dim_b, vecs[:, -1])

    # JSON: complex entries as [re, im] pairs, matrices row-major.
    def to_json_dict(self) -> dict:
        def cmat(m):
            return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(m)]
        return {
            "dim_a": self.dim_a,
            "dim_b": self.dim_b,
            "state": cmat(self.state),
            "a_measurements": [[cmat(e) for e in povm] for povm in self.a_measurements],
            "b_measurements": [[cmat(e) for e in povm] for povm in self.b_measurements],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_json_dict(), **kw)

    @staticmethod
    def from_json_dict(d: dict) -> "QuantumStrategy":
        def cmat(m):
            return np.array([[complex(re, im) for re, im in row] for row in m])
        try:
            return QuantumStrategy(
                dim_a=int(d["dim_a"]),
                dim_b=int(d["dim_b"]),
                state=cmat(d["state"]),
                a_measurements=tuple(tuple(cmat(e) for e in povm)
                                     for povm in d["a_measurements"]),
                b_measurements=tuple(tuple(cmat(e) for e in povm)
                                     for povm in d["b_measurements"]),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed strategy JSON: {exc}") from exc

    @staticmethod
    def from_json(text: str) -> "QuantumStrategy":
        return QuantumStrategy.from_json_dict(json.loads(text))


@dataclass(frozen=True)
class Behavior:
    """The conditional distribution P(a, b | x, y) induced by a strategy."""

    table: np.ndarray  # shape (nx, ny, na, nb)

    def __post_init__(self):
        t = np.asarray(self.table, dtype=float)
        if t.ndim != 4:
            raise ValidationError("behavior table must be 4-dimensional")
        if t.min() < -1e-12:
            raise ValidationError(f"behavior has negative entry {t.min():.3e}")
        sums = t.sum(axis=(2, 3))
        if np.max(np.abs(sums - 1.0)) > NORM_TOL:
            raise ValidationError("behavior not normalized per question pair")
        # no-signaling in both directions
        a_marg = t.sum(axis=3)  # (x, y, a)
        if np.max(np.abs(a_marg - a_marg.mean(axis=1, keepdims=True))) > NOSIG_TOL:
            raise ValidationError("behavior signals from Bob to Alice")
        b_marg = t.sum(axis=2)  # (x, y, b)
        if np.max(np.abs(b_marg - b_marg.mean(axis=0, keepdims=True))) > NOSIG_TOL:
            raise ValidationError("behavior signals from Alice to Bob")
        t = np.clip(t, 0.0, None)
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    def to_json(self, **kw) -> str:
        return json.dumps({"table": self.table.tolist()}, **kw)

    @staticmethod
    def from_json(text: str) -> "Behavior":
        return Behavior(np.asarray(json.loads(text)["table"], dtype=float))


@dataclass(frozen=True)
class NoiseChannel:
    """Convex mixing with the maximally mixed state on the full bipartite space."""

    kind: str        # "depolarizing" | "epr_fidelity_mix"
    parameter: float

    def __post_init__(self):
        if self.kind not in ("depolarizing", "epr_fidelity_mix"):
            raise ValidationError(f"unknown noise kind {self.kind!r}")
        if not (0.0 <= self.parameter <= 1.0):
            raise ValidationError("noise parameter must be in [0, 1]")

    def apply(self, rho: np.ndarray) -> np.ndarray:
        d = rho.shape[0]
        return (1.0 - self.parameter) * rho + self.parameter * np.eye(d) / d


def behavior_of(strategy: QuantumStrategy, game: Game) -> Behavior:
    """P(a, b | x, y) = Tr((A_x(a) (x) B_y(b)) rho)."""
    if len(strategy.a_measurements) != game.nx or len(strategy.b_measurements) != game.ny:
        raise ValidationError("measurement count does not match question alphabets")
    if any(len(p) != game.na for p in strategy.a_measurements) or \
       any(len(p) != game.nb for p in strategy.b_measurements):
        raise ValidationError("POVM outcome count does not match answer alphabets")
    rho = strategy.state
    table = np.empty((game.nx, game.ny, game.na, game.nb))
    for x, y, a, b in itertools.product(range(game.nx), range(game.ny),
                                        range(game.na), range(game.nb)):
        op = tensor(strategy.a_measurements[x][a], strategy.b_measurements[y][b])
        table[x, y, a, b] = float(np.trace(op @ rho).real)
    return Behavior(table)


def win_probability(behavior: Behavior, game: Game) -> float:
    """sum_{x,y} mu(x,y) sum_{winning a,b} P(a,b|x,y)."""
    if behavior.table.shape != game.predicate.shape:
        raise ValidationError("behavior and game have mismatched alphabets")
    return float((game.mu[:, :, None, None] * game.predicate * behavior.table).sum())


def apply_noise(strategy: QuantumStrategy, channel: NoiseChannel) -> QuantumStrategy:
    """Replace the shared state by the channel output; measurements unchanged."""
    return QuantumStrategy(
        dim_a=strategy.dim_a,
        dim_b=strategy.dim_b,
        state=channel.apply(strategy.state),
        a_measurements=strategy.a_measurements,
        b_measurements=strategy.b_measurements,
    )


# ---------------------------------------------------------------------------
# canonical strategies

def _zx_projectors(theta: float):
    """Projectors onto the +-1 eigenspaces of cos(t) Z + sin(t) X."""
    obs = math.cos(theta) * np.array([[1, 0], [0, -1]], dtype=complex) \
        + math.sin(theta) * np.array([[0, 1], [1, 0]], dtype=complex)
    evals, vecs = np.linalg.eigh(obs)
    # outcome 0 <-> +1 eigenvalue, outcome 1 <-> -1
    plus = np.outer(vecs[:, 1], vecs[:, 1].conj())
    minus = np.outer(vecs[:, 0], vecs[:, 0].conj())
    return (plus, minus)


def canonical_chsh_strategy() -> QuantumStrategy:
    """EPR pair with the standard CHSH measurement angles, winning at cos^2(pi/8)."""
    return QuantumStrategy(
        dim_a=2,
        dim_b=2,
        state=epr_state().density(),
        a_measurements=(_zx_projectors(0.0), _zx_projectors(math.pi / 2)),
        b_measurements=(_zx_projectors(math.pi / 4), _zx_projectors(-math.pi / 4)),
    )


def classical_deterministic_strategy(game: Game, f, h) -> QuantumStrategy:
    """Embed a deterministic classical strategy (dim-1 state, 0/1 POVM elements)."""
    one = np.array([[1.0 + 0j]])
    zero = np.array([[0.0 + 0j]])
    a_meas = tuple(tuple(one if f[x] == a else zero for a in range(game.na))
                   for x in range(game.nx))
    b_meas = tuple(tuple(one if h[y] == b else zero for b in range(game.nb))
                   for y in range(game.ny))
    return QuantumStrategy(1, 1, one.copy(), a_meas, b_meas)


def chsh_outcome_broadcast_strategy(n: int) -> QuantumStrategy:
    """A correlated n-round CHSH strategy on a single shared EPR pair.

    Each party measures once, in the canonical basis selected by the round-1
    question, and broadcasts the outcome: round i's answer is the outcome
    xored with the round-i question.  Answers are perfectly correlated across
    rounds, so the induced n-round behavior does not factorize.
    """
    base = canonical_chsh_strategy()
    xvecs = list(itertools.product(range(2), repeat=n))
    avecs = list(itertools.product(range(2), repeat=n))
    zero2 = np.zeros((2, 2), dtype=complex)

    def povm_family(meas):
        fam = []
        for xv in xvecs:
            povm = []
            for av in avecs:
                o = av[0]
                expected = tuple(o if i == 0 else o ^ xv[i] for i in range(n))
                povm.append(meas[xv[0]][o] if av == expected else zero2)
            fam.append(tuple(povm))
        return tuple(fam)

    return QuantumStrategy(
        dim_a=2,
        dim_b=2,
        state=base.state,
        a_measurements=povm_family(base.a_measurements),
        b_measurements=povm_family(base.b_measurements),
    )


# ---------------------------------------------------------------------------
# seesaw lower bound on the quantum value

def _random_povm(rng: np.random.Generator, dim: int, outcomes: int):
    """Random valid POVM: Ginibre-positive elements renormalized to completeness."""
    mats = []
    for _ in range(outcomes):
        g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        mats.append(g @ g.conj().T + 1e-6 * np.eye(dim))
    total = sum(mats)
    evals, vecs = np.linalg.eigh(total)
    inv_sqrt = vecs @ np.diag(1.0 / np.sqrt(evals)) @ vecs.conj().T
    return tuple(hermitize(inv_sqrt @ m @ inv_sqrt) for m in mats)


def _game_operator(game: Game, a_meas, b_meas, dim_a: int, dim_b: int) -> np.ndarray:
    op = np.zeros((dim_a * dim_b, dim_a * dim_b), dtype=complex)
    for x, y in itertools.product(range(game.nx), range(game.ny)):
        mu = game.mu[x, y]
        if mu == 0:
            continue
        for a, b in itertools.product(range(game.na), range(game.nb)):
            if game.predicate[x, y, a, b]:
                op += mu * tensor(a_meas[x][a], b_meas[y][b])
    return hermitize(op)


def _reward_operators(game: Game, rho, other_meas, dim_self, dim_other, side: str):
    """G_x(a): Hermitian reward matrices for one party's POVM update."""
    rewards = []
    q_range = range(game.nx) if side == "a" else range(game.ny)
    ans_range = range(game.na) if side == "a" else range(game.nb)
    for q in q_range:
        per_answer = []
        for ans in ans_range:
            g = np.zeros((dim_self, dim_self), dtype=complex)
            other_qs = range(game.ny) if side == "a" else range(game.nx)
            for oq in other_qs:
                mu = game.mu[q, oq] if side == "a" else game.mu[oq, q]
                if mu == 0:
                    continue
                for ob in (range(game.nb) if side == "a" else range(game.na)):
                    win = game.predicate[q, oq, ans, ob] if side == "a" \
                        else game.predicate[oq, q, ob, ans]
                    if not win:
                        continue
                    if side == "a":
                        op = tensor(np.eye(dim_self), other_meas[oq][ob])
                        r4 = (op @ rho).reshape(dim_self, dim_other, dim_self, dim_other)
                        g += mu * np.einsum("abcb->ac", r4)
                    else:
                        op = tensor(other_meas[oq][ob], np.eye(dim_self))
                        r4 = (op @ rho).reshape(dim_other, dim_self, dim_other, dim_self)
                        g += mu * np.einsum("abad->bd", r4)
            per_answer.append(hermitize(g))
        rewards.append(per_answer)
    return rewards


def _update_povm(rewards, dim: int):
    """Exact maximizer of sum_a Tr(E_a G_a) over POVMs for each question.

    Two outcomes: projector onto the nonnegative eigenspace of G_0 - G_1.
    More outcomes: small SDP via cvxpy (imported lazily).
    """
    out = []
    for per_answer in rewards:
        k = len(per_answer)
        if k == 1:
            out.append((np.eye(dim, dtype=complex),))
        elif k == 2:
            diff = hermitize(per_answer[0] - per_answer[1])
            evals, vecs = np.linalg.eigh(diff)
            pos = vecs[:, evals >= 0]
            proj = pos @ pos.conj().T
            out.append((hermitize(proj), hermitize(np.eye(dim) - proj)))
        else:
            import cvxpy as cp
            es = [cp.Variable((dim, dim), hermitian=True) for _ in range(k)]
            cons = [e >> 0 for e in es] + [sum(es) == np.eye(dim)]
            obj = cp.Maximize(cp.real(sum(cp.trace(e @ g)
                                          for e, g in zip(es, per_answer))))
            cp.Problem(obj, cons).solve()
            povm = [hermitize(np.asarray(e.value)) for e in es]
            # renormalize tiny solver drift
            total = sum(povm)
            evals, vecs = np.linalg.eigh(total)
            inv_sqrt = vecs @ np.diag(1.0 / np.sqrt(np.clip(evals, 1e-12, None))) \
                @ vecs.conj().T
            out.append(tuple(hermitize(inv_sqrt @ e @ inv_sqrt) for e in povm))
    return tuple(out)


def _strategy_value(game: Game, rho, a_meas, b_meas) -> float:
    val = 0.0
    for x, y in itertools.product(range(game.nx), range(game.ny)):
        mu = game.mu[x, y]
        if mu == 0:
            continue
        for a, b in itertools.product(range(game.na), range(game.nb)):
            if game.predicate[x, y, a, b]:
                op = tensor(a_meas[x][a], b_meas[y][b])
                val += mu * float(np.trace(op @ rho).real)
    return val


def seesaw_optimize(game: Game, dim: int, restarts: int = 10, seed: int = 0,
                    max_iters: int = 500, tol: float = 1e-10):
    """Alternating lower-bound optimization of the quantum value.

    Per iteration: set the state to the top eigenvector of the game operator,
    then exactly re-optimize each party's POVMs question by question.  The
    value sequence is non-decreasing; the best (strategy, value) over all
    restarts is returned, ties resolved by lowest restart index.
    """
    best_val = -1.0
    best = None
    for r in range(restarts):
        rng = np.random.default_rng(np.random.SeedSequence((seed, r)))
        a_meas = tuple(_random_povm(rng, dim, game.na) for _ in range(game.nx))
        b_meas = tuple(_random_povm(rng, dim, game.nb) for _ in range(game.ny))
        rho = None
        prev = -1.0
        for _ in range(max_iters):
            op = _game_operator(game, a_meas, b_meas, dim, dim)
            evals, vecs = np.linalg.eigh(op)
            psi = vecs[:, -1]
            rho = np.outer(psi, psi.conj())
            a_meas = _update_povm(
                _reward_operators(game, rho, b_meas, dim, dim, "a"), dim)
            b_meas = _update_povm(
                _reward_operators(game, rho, a_meas, dim, dim, "b"), dim)
            val = _strategy_value(game, rho, a_meas, b_meas)
            if val - prev < tol:
                prev = val
                break
            prev = val
        if prev > best_val + 1e-15:
            best_val = prev
            best = QuantumStrategy(dim, dim, rho, a_meas, b_meas)
    return best, best_val
