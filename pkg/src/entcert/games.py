"""Finite two-player games: validation, exact classical value, threshold games.

A game is a question distribution ``mu`` over ``x_alphabet x y_alphabet``
together with a boolean winning predicate ``V(x, y, a, b)``.  The classical
value is computed by exact enumeration of deterministic strategies, which is
optimal by convexity.
"""

from __future__ import annotations

import itertools
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceededError, ValidationError

# Deterministic-strategy enumeration cap: |A|^|X| * |B|^|Y|.
DEFAULT_ENUM_BUDGET = 10**8

MU_SUM_TOL = 1e-9
THRESHOLD_SLACK = 1e-12


def required_wins(n: int, threshold: float) -> int:
    """Number of won rounds needed to pass a threshold game.

    Exact integer comparison with a small slack on the ceiling so that
    thresholds like 0.75 * 4 do not misclassify at a float boundary.
    """
    return max(0, math.ceil(threshold * n - THRESHOLD_SLACK))


@dataclass(frozen=True)
class Game:
    """An immutable two-player game (mu, V) over finite ordered alphabets."""

    x_alphabet: tuple
    y_alphabet: tuple
    a_alphabet: tuple
    b_alphabet: tuple
    mu: np.ndarray          # shape (|X|, |Y|), entries >= 0, sums to 1
    predicate: np.ndarray   # bool, shape (|X|, |Y|, |A|, |B|)

    @property
    def nx(self) -> int:
        return len(self.x_alphabet)

    @property
    def ny(self) -> int:
        return len(self.y_alphabet)

    @property
    def na(self) -> int:
        return len(self.a_alphabet)

    @property
    def nb(self) -> int:
        return len(self.b_alphabet)

    @property
    def answer_pairs(self) -> int:
        return self.na * self.nb

    def to_json_dict(self) -> dict:
        return {
            "x_alphabet": list(self.x_alphabet),
            "y_alphabet": list(self.y_alphabet),
            "a_alphabet": list(self.a_alphabet),
            "b_alphabet": list(self.b_alphabet),
            "mu": self.mu.tolist(),
            "predicate": self.predicate.astype(int).tolist(),
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_json_dict(), **kwargs)

    @staticmethod
    def from_json(text: str) -> "Game":
        return validate_game(json.loads(text))


def validate_game(raw: dict) -> Game:
    """Check a raw game description and return an immutable :class:`Game`.

    ``mu`` is renormalized by its sum when the deviation from 1 is at most
    1e-9; larger deviations are an error.
    """
    try:
        xs = tuple(raw["x_alphabet"])
        ys = tuple(raw["y_alphabet"])
        as_ = tuple(raw["a_alphabet"])
        bs = tuple(raw["b_alphabet"])
        mu = np.asarray(raw["mu"], dtype=float)
        pred = np.asarray(raw["predicate"])
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed game description: {exc}") from exc

    if min(len(xs), len(ys), len(as_), len(bs)) == 0:
        raise ValidationError("alphabets must be non-empty")
    if mu.shape != (len(xs), len(ys)):
        raise ValidationError(
            f"mu has shape {mu.shape}, expected {(len(xs), len(ys))}")
    if pred.shape != (len(xs), len(ys), len(as_), len(bs)):
        raise ValidationError(
            f"predicate has shape {pred.shape}, expected "
            f"{(len(xs), len(ys), len(as_), len(bs))}")
    if np.any(mu < 0):
        raise ValidationError("mu has a negative probability entry")
    total = float(mu.sum())
    if abs(total - 1.0) > MU_SUM_TOL:
        raise ValidationError(f"mu not normalized: sums to {total}")
    mu = mu / total
    pred = pred.astype(bool)
    mu.setflags(write=False)
    pred.setflags(write=False)
    return Game(xs, ys, as_, bs, mu, pred)


def chsh_game() -> Game:
    """The CHSH game: uniform binary questions, win iff a xor b = x and y."""
    pred = np.zeros((2, 2, 2, 2), dtype=bool)
    for x, y, a, b in itertools.product(range(2), repeat=4):
        pred[x, y, a, b] = (a ^ b) == (x & y)
    return validate_game({
        "x_alphabet": [0, 1],
        "y_alphabet": [0, 1],
        "a_alphabet": [0, 1],
        "b_alphabet": [0, 1],
        "mu": (np.full((2, 2), 0.25)).tolist(),
        "predicate": pred.astype(int).tolist(),
    })


def _enum_budget(budget: int | None) -> int:
    if budget is not None:
        return budget
    return int(os.environ.get("NLG_ENUM_BUDGET", DEFAULT_ENUM_BUDGET))


def classical_value(g: Game, budget: int | None = None) -> float:
    """Exact classical value by enumeration of deterministic strategies.

    For each Alice function f: X -> A, Bob's best response decomposes per
    question y, so only min(|A|^|X|, |B|^|Y|) functions are enumerated; the
    result equals the full max over deterministic pairs.
    """
    if g.na ** g.nx * g.nb ** g.ny > _enum_budget(budget):
        raise BudgetExceededError(
            f"{g.na}^{g.nx} * {g.nb}^{g.ny} deterministic pairs exceed budget")

    weighted = g.mu[:, :, None, None] * g.predicate  # (x, y, a, b)
    # Enumerate the cheaper side; the other side is optimized per question.
    if g.na ** g.nx <= g.nb ** g.ny:
        best = 0.0
        for f in itertools.product(range(g.na), repeat=g.nx):
            # score[y, b] = sum_x weighted[x, y, f(x), b]
            score = weighted[np.arange(g.nx), :, list(f), :].sum(axis=0)
            best = max(best, float(score.max(axis=1).sum()))
    else:
        best = 0.0
        for h in itertools.product(range(g.nb), repeat=g.ny):
            score = weighted[:, np.arange(g.ny), :, list(h)].sum(axis=0)
            best = max(best, float(score.max(axis=1).sum()))
    return best


@dataclass(frozen=True)
class ThresholdGameSpec:
    """n parallel instances of ``base``; win iff at least ``threshold * n`` rounds won."""

    base: Game
    n: int
    threshold: float

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("n must be >= 1")
        if not (0.0 < self.threshold <= 1.0):
            raise ValidationError("threshold must be in (0, 1]")

    @property
    def wins_needed(self) -> int:
        return required_wins(self.n, self.threshold)


def threshold_predicate(spec: ThresholdGameSpec, xvec, yvec, avec, bvec) -> bool:
    """Evaluate the threshold-game predicate on n-tuples of round data."""
    n = spec.n
    g = spec.base
    if not (len(xvec) == len(yvec) == len(avec) == len(bvec) == n):
        raise ValidationError("tuples must all have length n")
    wins = 0
    for x, y, a, b in zip(xvec, yvec, avec, bvec):
        try:
            xi = g.x_alphabet.index(x)
            yi = g.y_alphabet.index(y)
            ai = g.a_alphabet.index(a)
            bi = g.b_alphabet.index(b)
        except ValueError as exc:
            raise ValidationError(f"symbol not in alphabet: {exc}") from exc
        wins += int(g.predicate[xi, yi, ai, bi])
    return wins >= spec.wins_needed


def parallel_question_alphabets(g: Game, n: int):
    """Vector question/answer alphabets of the n-fold parallel game (index tuples)."""
    return (
        tuple(itertools.product(range(g.nx), repeat=n)),
        tuple(itertools.product(range(g.ny), repeat=n)),
        tuple(itertools.product(range(g.na), repeat=n)),
        tuple(itertools.product(range(g.nb), repeat=n)),
    )
