"""Threshold-game repetition machinery.

Exact dense joint tables over the round variables (X_i, Y_i, A_i, B_i),
dependency-breaking augmentation with per-round coins, threshold-event
conditioning, conditional total-variation audits of the four decoupling
inequalities, classical correlated sampling, and the zero-entanglement
extraction protocol.

Round indices are 1-based throughout this module (S = {2} means the second
round), matching the usual [n] convention.
"""

from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import BudgetExceededError, NullEventError, SamplingError, ValidationError
from .games import Game, ThresholdGameSpec, required_wins
from .strategies import Behavior, QuantumStrategy, behavior_of, win_probability

DEFAULT_TABLE_BUDGET = 5 * 10**7
WEIGHT_SUM_TOL = 1e-10
NULL_EVENT_TOL = 1e-12


def table_budget() -> int:
    return int(os.environ.get("NLG_TABLE_BUDGET", DEFAULT_TABLE_BUDGET))


# ---------------------------------------------------------------------------
# binomial tails and the Hoeffding completeness bound

def iid_threshold_win_prob(p: float, n: int, threshold: float) -> float:
    """Exact binomial upper tail P(Bin(n, p) >= ceil(threshold * n)).

    Accumulated in log space for stability at large n.
    """
    if not (0.0 <= p <= 1.0):
        raise ValidationError("p must be in [0, 1]")
    k0 = required_wins(n, threshold)
    if k0 <= 0:
        return 1.0
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    logs = []
    lp, lq = math.log(p), math.log1p(-p)
    for k in range(k0, n + 1):
        logs.append(math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
                    + k * lp + (n - k) * lq)
    top = max(logs)
    return float(min(1.0, math.exp(top) * sum(math.exp(l - top) for l in logs)))


def hoeffding_completeness_bound(nu: float, eta: float, n: int) -> float:
    """1 - exp(-(nu - eta)^2 n / 3): guaranteed pass probability of an honest strategy."""
    if eta >= nu:
        raise ValidationError("eta must be strictly below nu")
    return 1.0 - math.exp(-((nu - eta) ** 2) * n / 3.0)


def monte_carlo_threshold(strategy: QuantumStrategy, game: Game,
                          spec: ThresholdGameSpec, trials: int, seed: int = 0):
    """Simulate i.i.d. threshold-game play; returns (pass_rate, (ci_lo, ci_hi)).

    Questions are drawn from mu and answers from the strategy's single-round
    behavior, independently across rounds.  Deterministic for a fixed seed;
    the CI is the normal-approximation binomial 95% interval.
    """
    if trials < 1:
        raise ValidationError("trials must be >= 1")
    behavior = behavior_of(strategy, game)
    return monte_carlo_threshold_behavior(behavior, game, spec, trials, seed)


def monte_carlo_threshold_behavior(behavior: Behavior, game: Game,
                                   spec: ThresholdGameSpec, trials: int, seed: int = 0):
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x7468)))
    n = spec.n
    nxy = game.nx * game.ny
    nab = game.na * game.nb
    total = trials * n
    xy = rng.choice(nxy, size=total, p=game.mu.ravel())
    cums = np.cumsum(behavior.table.reshape(nxy, nab), axis=1)
    cums[:, -1] = 1.0
    u = rng.random(total)
    ab = (u[:, None] < cums[xy]).argmax(axis=1)
    x, y = np.divmod(xy, game.ny)
    a, b = np.divmod(ab, game.nb)
    wins = game.predicate[x, y, a, b].reshape(trials, n).sum(axis=1)
    passes = int((wins >= spec.wins_needed).sum())
    rate = passes / trials
    half = 1.96 * math.sqrt(max(rate * (1.0 - rate), 1e-300) / trials)
    return rate, (max(0.0, rate - half), min(1.0, rate + half))


def sweep_threshold(strategy: QuantumStrategy, game: Game, n_values,
                    threshold: float, trials: int, seed: int = 0):
    """One row per n: empirical pass rate, exact binomial tail, Hoeffding bound.

    The Hoeffding column is populated only when the per-round win probability
    exceeds the threshold (eta < nu in the completeness narrative).
    """
    behavior = behavior_of(strategy, game)
    p = win_probability(behavior, game)
    rows = []
    for n in n_values:
        spec = ThresholdGameSpec(game, n, threshold)
        rate, (lo, hi) = monte_carlo_threshold_behavior(behavior, game, spec,
                                                        trials, seed)
        exact = iid_threshold_win_prob(p, n, threshold)
        hoeff = (1.0 - math.exp(-((p - threshold) ** 2) * n / 3.0)
                 if p > threshold else float("nan"))
        rows.append({
            "n": n, "threshold": threshold, "trials": trials,
            "passes": round(rate * trials), "pass_rate": rate,
            "ci_low": lo, "ci_high": hi,
            "exact_tail": exact, "hoeffding_bound": hoeff,
            "per_round_win": p,
        })
    return rows


# ---------------------------------------------------------------------------
# exact joint tables

@dataclass(frozen=True)
class JointTable:
    """Dense exact joint distribution over named finite-alphabet variables."""

    names: tuple
    weights: np.ndarray  # shape = per-variable alphabet sizes, sums to 1

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != len(self.names):
            raise ValidationError("weights rank does not match variable count")
        if w.min() < -NULL_EVENT_TOL:
            raise ValidationError("negative weight in joint table")
        if abs(w.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValidationError(f"weights sum to {w.sum()}, expected 1")
        w = np.clip(w, 0.0, None)
        w.setflags(write=False)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "weights", w)

    @property
    def sizes(self) -> tuple:
        return self.weights.shape

    def axis(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError as exc:
            raise ValidationError(f"unknown variable {name!r}") from exc

    def marginal_array(self, names) -> np.ndarray:
        """Marginal weights over ``names``, axes in the order given."""
        axes = [self.axis(nm) for nm in names]
        other = tuple(i for i in range(len(self.names)) if i not in axes)
        arr = self.weights.sum(axis=other) if other else self.weights
        kept = [i for i in range(len(self.names)) if i not in other]
        order = [kept.index(ax) for ax in axes]
        return np.transpose(arr, order)

    def marginal(self, names) -> "JointTable":
        return JointTable(tuple(names), self.marginal_array(names))

    def condition_mask(self, mask: np.ndarray):
        """Condition on a boolean event mask; returns (table, event probability)."""
        prob = float(self.weights[mask].sum())
        if prob < NULL_EVENT_TOL:
            raise NullEventError(f"conditioning on null event (p = {prob:.3e})")
        w = np.where(mask, self.weights, 0.0) / prob
        return JointTable(self.names, w), prob

    def condition_assignment(self, assignment: dict):
        """Condition on {name: value-index}; conditioned variables are dropped."""
        idx = [slice(None)] * len(self.names)
        for nm, v in assignment.items():
            idx[self.axis(nm)] = v
        sub = self.weights[tuple(idx)]
        prob = float(sub.sum())
        if prob < NULL_EVENT_TOL:
            raise NullEventError("conditioning on null assignment")
        names = tuple(nm for nm in self.names if nm not in assignment)
        return JointTable(names, sub / prob), prob

    def tv_distance(self, other: "JointTable") -> float:
        if self.names != other.names or self.sizes != other.sizes:
            raise ValidationError("tv_distance requires identical schemas")
        return 0.5 * float(np.abs(self.weights - other.weights).sum())

    def entropy(self, names) -> float:
        w = self.marginal_array(names).ravel()
        nz = w[w > 1e-15]
        return float(-(nz * np.log2(nz)).sum())

    def mutual_information(self, names_a, names_b, given=()) -> float:
        """I(A : B | C), all classical, in bits."""
        a, b, c = list(names_a), list(names_b), list(given)
        return (self.entropy(a + c) + self.entropy(b + c)
                - self.entropy(a + b + c) - (self.entropy(c) if c else 0.0))


def round_names(prefix: str, n: int):
    return [f"{prefix}{i}" for i in range(1, n + 1)]


def iid_lift_table(behavior: Behavior, game: Game, n: int,
                   budget: int | None = None) -> JointTable:
    """Exact joint of n i.i.d. rounds: variables X1..Xn, Y1..Yn, A1..An, B1..Bn."""
    single = game.mu[:, :, None, None] * behavior.table  # (x, y, a, b)
    size = single.size ** n
    if size > (budget if budget is not None else table_budget()):
        raise BudgetExceededError(f"i.i.d. lift needs {size} entries")
    w = single
    for _ in range(n - 1):
        w = np.multiply.outer(w, single)
    # current axis order: (x1,y1,a1,b1, x2,y2,a2,b2, ...) -> group by variable
    perm = []
    for off in range(4):  # X block, then Y, A, B
        perm.extend(off + 4 * i for i in range(n))
    w = np.transpose(w, perm)
    names = (round_names("X", n) + round_names("Y", n)
             + round_names("A", n) + round_names("B", n))
    return JointTable(tuple(names), w)


def enumerate_joint(nround_behavior: Behavior, game: Game, n: int,
                    budget: int | None = None) -> JointTable:
    """Exact joint table from an n-round behavior over vector alphabets.

    The behavior's axes are flat base-|alphabet| encodings of the round
    vectors (round 1 most significant).
    """
    nx, ny, na, nb = game.nx, game.ny, game.na, game.nb
    expected = (nx ** n, ny ** n, na ** n, nb ** n)
    if nround_behavior.table.shape != expected:
        raise ValidationError(
            f"vector behavior has shape {nround_behavior.table.shape}, expected {expected}")
    size = int(np.prod(expected)) * 1
    if size > (budget if budget is not None else table_budget()):
        raise BudgetExceededError(f"joint table needs {size} entries")
    mu_n = game.mu
    for _ in range(n - 1):
        mu_n = np.multiply.outer(mu_n, game.mu)
    # mu_n axes (x1,y1,x2,y2,...) -> (x1..xn, y1..yn)
    perm = [2 * i for i in range(n)] + [2 * i + 1 for i in range(n)]
    mu_n = np.transpose(mu_n, perm).reshape(nx ** n, ny ** n)
    w = mu_n[:, :, None, None] * nround_behavior.table
    w = w.reshape((nx,) * n + (ny,) * n + (na,) * n + (nb,) * n)
    names = (round_names("X", n) + round_names("Y", n)
             + round_names("A", n) + round_names("B", n))
    return JointTable(tuple(names), w)


def joint_table_from_strategy(strategy: QuantumStrategy, game: Game, n: int,
                              budget: int | None = None) -> JointTable:
    """Joint table for a strategy with joint n-round POVMs (vector alphabets)."""
    lifted = Game(
        x_alphabet=tuple(range(game.nx ** n)),
        y_alphabet=tuple(range(game.ny ** n)),
        a_alphabet=tuple(range(game.na ** n)),
        b_alphabet=tuple(range(game.nb ** n)),
        mu=np.full((game.nx ** n, game.ny ** n), 1.0 / (game.nx * game.ny) ** n),
        predicate=np.ones((game.nx ** n, game.ny ** n,
                           game.na ** n, game.nb ** n), dtype=bool),
    )
    vec_behavior = behavior_of(strategy, lifted)
    return enumerate_joint(vec_behavior, game, n, budget)


# ---------------------------------------------------------------------------
# dependency-breaking augmentation

def table_rounds(table: JointTable) -> int:
    return sum(1 for nm in table.names if nm.startswith("X") and nm[1:].isdigit())


def augment_dependency_breaking(table: JointTable, S, budget: int | None = None):
    """Extend the table with per-round coins D_i and disclosed questions M_i.

    D_i is uniform on {0: Alice, 1: Bob}; M_i equals X_i when D_i = 0 and
    Y_i otherwise.  Omega is the tuple of all (D_i, M_i) plus (X_S, Y_S);
    :func:`omega_variables` lists the variable names to condition on.
    """
    n = table_rounds(table)
    if any(i < 1 or i > n for i in S):
        raise ValidationError(f"S = {sorted(S)} out of range for n = {n}")
    nx = table.sizes[table.axis("X1")]
    ny = table.sizes[table.axis("Y1")]
    nm = max(nx, ny)
    new_size = table.weights.size * (2 * nm) ** n
    if new_size > (budget if budget is not None else table_budget()):
        raise BudgetExceededError(f"augmented table needs {new_size} entries")

    names = tuple(round_names("D", n) + round_names("M", n)) + table.names
    sizes = (2,) * n + (nm,) * n + table.sizes
    w = np.zeros(sizes)
    base = table.weights / (2 ** n)
    x_axes = [table.axis(f"X{i}") for i in range(1, n + 1)]
    y_axes = [table.axis(f"Y{i}") for i in range(1, n + 1)]
    # one block per coin vector; M_i copies the selected question via delta factors
    for d in itertools.product(range(2), repeat=n):
        operands = [base, list(range(2 * n, 2 * n + len(table.names)))]
        for i in range(n):
            delta = np.eye(nm)[:, : (nx if d[i] == 0 else ny)]
            src_axis = x_axes[i] if d[i] == 0 else y_axes[i]
            operands.extend([delta, [n + i, 2 * n + src_axis]])
        out_idx = list(range(n, 2 * n)) + list(range(2 * n, 2 * n + len(table.names)))
        block = np.einsum(*operands, out_idx)
        w[d] += block
    return JointTable(names, w)


def omega_variables(n: int, S) -> list:
    """Variable names constituting Omega for subset S (1-based rounds)."""
    out = round_names("D", n) + round_names("M", n)
    for i in sorted(S):
        out.append(f"X{i}")
        out.append(f"Y{i}")
    return out


def claim27_max_deviation(aug_table: JointTable, S) -> float:
    """max over omega of || P_{XY|omega} - P_{X|omega} P_{Y|omega} ||.

    Zero (to numerical precision) certifies that the questions decouple
    conditioned on the dependency-breaking variable.
    """
    n = table_rounds(aug_table)
    ovars = omega_variables(n, S)
    # X_S and Y_S are fixed by omega; the check concerns the free coordinates
    xvars = [nm for nm in round_names("X", n) if nm not in ovars]
    yvars = [nm for nm in round_names("Y", n) if nm not in ovars]
    sub = aug_table.marginal(tuple(ovars) + tuple(xvars) + tuple(yvars))
    ow = sub.marginal_array(ovars)
    worst = 0.0
    for oidx in np.ndindex(*ow.shape):
        if ow[oidx] < NULL_EVENT_TOL:
            continue
        cond, _ = sub.condition_assignment(dict(zip(ovars, oidx)))
        joint = cond.marginal_array(xvars + yvars)
        px = cond.marginal_array(xvars)
        py = cond.marginal_array(yvars)
        prod = np.multiply.outer(px, py)
        worst = max(worst, 0.5 * float(np.abs(joint - prod).sum()))
    return worst


# ---------------------------------------------------------------------------
# win events and conditioning

@dataclass(frozen=True)
class WinEventSpec:
    """Round win W_j, global threshold, or subset threshold event."""

    kind: str                 # "round" | "global" | "subset"
    j: int | None = None      # for "round"
    gamma: float | None = None  # for "global": threshold 1 - gamma
    tau: float | None = None    # for "subset": threshold 1 - tau on S
    S: tuple = ()

    def __post_init__(self):
        if self.kind not in ("round", "global", "subset"):
            raise ValidationError(f"unknown event kind {self.kind!r}")
        if self.kind == "round" and self.j is None:
            raise ValidationError("round event needs j")
        if self.kind == "global" and self.gamma is None:
            raise ValidationError("global event needs gamma")
        if self.kind == "subset" and self.tau is None:
            raise ValidationError("subset event needs tau")
        object.__setattr__(self, "S", tuple(sorted(self.S)))


def _round_win_arrays(table: JointTable, game: Game):
    """Per-round win indicators broadcast to the full table shape."""
    n = table_rounds(table)
    shape = table.sizes
    wins = []
    for i in range(1, n + 1):
        axes = [table.axis(f"{p}{i}") for p in "XYAB"]
        # broadcast the 4-axis win indicator into the full table shape
        expand = game.predicate.reshape(
            [shape[ax] if ax in axes else 1 for ax in range(len(shape))])
        wins.append(np.broadcast_to(expand, shape))
    return wins


def event_mask(table: JointTable, event: WinEventSpec, game: Game) -> np.ndarray:
    n = table_rounds(table)
    wins = _round_win_arrays(table, game)
    if event.kind == "round":
        return wins[event.j - 1]
    if event.kind == "global":
        count = sum(w.astype(np.int16) for w in wins)
        return count >= required_wins(n, 1.0 - event.gamma)
    # subset (multiset: multiplicities count)
    count = sum(wins[i - 1].astype(np.int16) for i in event.S)
    return count >= required_wins(len(event.S), 1.0 - event.tau)


def condition_on_event(table: JointTable, event: WinEventSpec, game: Game):
    """Renormalized conditional table and the exact event probability."""
    return table.condition_mask(event_mask(table, event, game))


def round_win_probability(table: JointTable, game: Game, j: int) -> float:
    wins = _round_win_arrays(table, game)[j - 1]
    return float(table.weights[wins].sum())


# ---------------------------------------------------------------------------
# conditioning-subset search

def prop32_search(table: JointTable, game: Game, gamma: float, tau: float,
                  t: int, samples: int, seed: int = 0):
    """Search random multisets S of size t for the best conditional round-win average.

    Returns (S_best, Ex_{j not in S} P(W_j | W_S), P(W_S)) with both statistics
    exact from the table.  ``samples`` candidate multisets are drawn with
    replacement; t = 0 degenerates to the unconditional average.
    """
    n = table_rounds(table)
    if t >= n:
        raise ValidationError("t must be smaller than n")
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0x5333)))
    candidates = [tuple()] if t == 0 else [
        tuple(sorted(rng.integers(1, n + 1, size=t).tolist()))
        for _ in range(samples)]
    best = None
    for S in candidates:
        support = set(S)
        outside = [j for j in range(1, n + 1) if j not in support]
        if not outside:
            continue
        if t == 0:
            cond, p_ws = table, 1.0
        else:
            try:
                cond, p_ws = condition_on_event(
                    table, WinEventSpec("subset", tau=tau, S=S), game)
            except NullEventError:
                continue
        avg = float(np.mean([round_win_probability(cond, game, j) for j in outside]))
        if best is None or avg > best[1] + 1e-15:
            best = (S, avg, p_ws)
    if best is None:
        raise NullEventError("all candidate subset events are null")
    return best


# ---------------------------------------------------------------------------
# conditional TV machinery and the lemma audits

def _aligned(arr: np.ndarray, var_names, union_names) -> np.ndarray:
    """Reshape a marginal array for broadcasting over the union variable order."""
    shape = []
    src_axes = []
    for nm in union_names:
        if nm in var_names:
            src_axes.append(var_names.index(nm))
    arr = np.transpose(arr, [var_names.index(nm) for nm in union_names if nm in var_names])
    it = iter(arr.shape)
    for nm in union_names:
        shape.append(next(it) if nm in var_names else 1)
    return arr.reshape(shape)


def expected_conditional_tv(table: JointTable, target, given_full, given_reduced) -> float:
    """Ex over the full conditioning of || P(target | full) - P(target | reduced) ||.

    ``given_reduced`` must be a subset of ``given_full``; the expectation is
    with respect to the table's marginal on the full conditioning variables.
    Computed as one global half-L1 between the joint and the reduced-
    conditional surrogate.
    """
    target = list(target)
    given_full = list(given_full)
    given_reduced = list(given_reduced)
    if not set(given_reduced) <= set(given_full):
        raise ValidationError("given_reduced must be a subset of given_full")
    union = target + given_full
    joint = table.marginal_array(union)
    g_full = table.marginal_array(given_full)
    j_red = table.marginal_array(target + given_reduced)
    g_red = table.marginal_array(given_reduced) if given_reduced else np.array(1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        if given_reduced:
            cond_red = j_red / _aligned(g_red, given_reduced, target + given_reduced)
        else:
            cond_red = j_red
    cond_red = np.nan_to_num(cond_red, nan=0.0, posinf=0.0)
    surrogate = _aligned(cond_red, target + given_reduced, union) \
        * _aligned(g_full, given_full, union)
    return 0.5 * float(np.abs(joint - surrogate).sum())


def expected_conditional_tv_loop(table: JointTable, target, given_full,
                                 given_reduced) -> float:
    """Independent slow path: explicit loop over conditioning assignments."""
    target = list(target)
    given_full = list(given_full)
    given_reduced = list(given_reduced)
    g_full = table.marginal_array(given_full)
    total = 0.0
    for gidx in np.ndindex(*g_full.shape):
        pg = g_full[gidx]
        if pg < NULL_EVENT_TOL:
            continue
        full_assign = dict(zip(given_full, gidx))
        cond_full, _ = table.condition_assignment(full_assign)
        p_t_full = cond_full.marginal_array(target)
        red_assign = {nm: full_assign[nm] for nm in given_reduced}
        if red_assign:
            cond_red, _ = table.condition_assignment(red_assign)
            p_t_red = cond_red.marginal_array(target)
        else:
            p_t_red = table.marginal_array(target)
        total += pg * 0.5 * float(np.abs(p_t_full - p_t_red).sum())
    return total


def r_variables(n: int, S, T, j: int) -> list:
    """Variable names of R_Tj = (Omega_{-j}, X_T, A_{S u T}, B_S)."""
    S = sorted(set(S))
    T = sorted(set(T))
    out = []
    for i in range(1, n + 1):
        if i != j:
            out.append(f"D{i}")
            out.append(f"M{i}")
    for i in S:
        out.append(f"X{i}")
        out.append(f"Y{i}")
    for i in T:
        if f"X{i}" not in out:
            out.append(f"X{i}")
    for i in sorted(set(S) | set(T)):
        out.append(f"A{i}")
    for i in S:
        out.append(f"B{i}")
    return out


@dataclass
class LemmaAuditEntry:
    lemma: str
    lhs: float
    bound: float
    satisfied: bool
    vacuous: bool
    detail: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {"lemma": self.lemma, "lhs": self.lhs, "bound": self.bound,
                "satisfied": self.satisfied, "vacuous": self.vacuous,
                **({"detail": self.detail} if self.detail else {})}


def _entry(lemma: str, lhs: float, bound: float, **detail) -> LemmaAuditEntry:
    return LemmaAuditEntry(lemma=lemma, lhs=lhs, bound=bound,
                           satisfied=lhs <= bound + 1e-9, vacuous=bound > 1.0,
                           detail=detail)


def lemma_audit(aug_table: JointTable, game: Game, S, tau: float, beta: float,
                entanglement_bits: float, answer_pairs: int | None = None,
                T=None, cross_check: bool = True):
    """Audit the four decoupling inequalities on an exact augmented table.

    ``aug_table`` must carry the dependency-breaking variables for subset S.
    The right-hand bounds sqrt(delta), sqrt(delta'), sqrt(2 delta''),
    sqrt(2 delta') are evaluated from the error parameters; bounds above 1
    are recorded as vacuously satisfied.  Returns (entries, params).
    """
    from .certifier import error_params

    n = table_rounds(aug_table)
    S = tuple(sorted(set(S)))
    m = n - len(S)
    answer_pairs = answer_pairs or (game.na * game.nb)

    event = WinEventSpec("subset", tau=tau, S=S)
    cond, p_ws = condition_on_event(aug_table, event, game)
    if T is None:
        tmax = int(beta * m)
        pool = [i for i in range(1, n + 1) if i not in S]
        t_sets = [tuple(c) for size in range(tmax + 1)
                  for c in itertools.combinations(pool, size)]
    else:
        t_sets = [tuple(sorted(set(T)))]

    params = error_params(alpha=None, answer_pairs=answer_pairs, n=n,
                          s_size=len(S), p_ws=p_ws, ent_bits=entanglement_bits,
                          beta=beta)
    sd, sdp = math.sqrt(params["delta"]), math.sqrt(params["delta_prime"])
    sddp = math.sqrt(2.0 * params["delta_dblprime"])
    s2dp = math.sqrt(2.0 * params["delta_prime"])

    entries = []
    lhs33 = []
    lhs34_x, lhs34_y = [], []
    lhs35_fixed = {}
    lhs36 = []
    diffs = {"input_distribution": 0.0, "dependency_breaking_given_x": 0.0,
             "dependency_breaking_given_y": 0.0, "bob_answer": 0.0,
             "alice_answer": 0.0}

    def _checked(key, fast, target, given_full, given_reduced):
        if cross_check:
            slow = expected_conditional_tv_loop(cond, target, given_full,
                                                given_reduced)
            diffs[key] = max(diffs[key], abs(fast - slow))
        return fast

    for T_cur in t_sets:
        outside = [jj for jj in range(1, n + 1)
                   if jj not in S and jj not in T_cur]
        vals33, vals34x, vals34y, vals35, vals36 = [], [], [], [], []
        for j in outside:
            xj, yj, aj, bj = f"X{j}", f"Y{j}", f"A{j}", f"B{j}"
            rv = r_variables(n, S, T_cur, j)
            # (3.3) input distribution unchanged
            tv = 0.5 * float(np.abs(cond.marginal_array([xj, yj])
                                    - aug_table.marginal_array([xj, yj])).sum())
            vals33.append(tv)
            if cross_check:
                # independent path: per-assignment probabilities
                slow = 0.0
                nxj = cond.sizes[cond.axis(xj)]
                nyj = cond.sizes[cond.axis(yj)]
                for vx in range(nxj):
                    for vy in range(nyj):
                        assign = {xj: vx, yj: vy}
                        try:
                            pc = cond.condition_assignment(assign)[1]
                        except NullEventError:
                            pc = 0.0
                        try:
                            pa = aug_table.condition_assignment(assign)[1]
                        except NullEventError:
                            pa = 0.0
                        slow += 0.5 * abs(pc - pa)
                diffs["input_distribution"] = max(
                    diffs["input_distribution"], abs(tv - slow))
            # (3.4) dependency-breaking variable sampleable from either question
            vals34x.append(_checked(
                "dependency_breaking_given_x",
                expected_conditional_tv(cond, rv, [xj, yj], [xj]),
                rv, [xj, yj], [xj]))
            vals34y.append(_checked(
                "dependency_breaking_given_y",
                expected_conditional_tv(cond, rv, [xj, yj], [yj]),
                rv, [xj, yj], [yj]))
            # (3.5) Bob's answer decouples from Alice's question and answer
            vals35.append(_checked(
                "bob_answer",
                expected_conditional_tv(cond, [bj], rv + [xj, aj, yj], rv + [yj]),
                [bj], rv + [xj, aj, yj], rv + [yj]))
            # (3.6) Alice's answer decouples from Bob's question
            vals36.append(_checked(
                "alice_answer",
                expected_conditional_tv(cond, [aj], rv + [xj, yj], rv + [xj]),
                [aj], rv + [xj, yj], rv + [xj]))
        lhs33.append(float(np.mean(vals33)))
        lhs34_x.append(float(np.mean(vals34x)))
        lhs34_y.append(float(np.mean(vals34y)))
        lhs35_fixed[T_cur] = float(np.mean(vals35))
        lhs36.append(float(np.mean(vals36)))

    def _with_diff(key, *args, **detail):
        if cross_check:
            detail["two_path_max_diff"] = diffs[key]
        return _entry(*args, **detail)

    entries.append(_with_diff("input_distribution", "input_distribution",
                              max(lhs33), sd))
    entries.append(_with_diff("dependency_breaking_given_x",
                              "dependency_breaking_given_x", max(lhs34_x), sdp))
    entries.append(_with_diff("dependency_breaking_given_y",
                              "dependency_breaking_given_y", max(lhs34_y), sdp))
    # Bob's lemma: both the fixed-T and the T-averaged conventions
    entries.append(_with_diff("bob_answer", "bob_answer_fixed_T",
                              max(lhs35_fixed.values()), sddp,
                              per_T={str(k): v for k, v in lhs35_fixed.items()}))
    entries.append(_with_diff("bob_answer", "bob_answer_avg_T",
                              float(np.mean(list(lhs35_fixed.values()))), sddp))
    entries.append(_with_diff("alice_answer", "alice_answer", max(lhs36), s2dp))
    return entries, {**params, "p_ws": p_ws, "tau": tau, "S": S}


# ---------------------------------------------------------------------------
# classical correlated sampling

def correlated_sample(p: np.ndarray, q: np.ndarray, rng: np.random.Generator,
                      max_steps: int | None = None):
    """Accept-first correlated sampling of (p_sample, q_sample) from a shared stream.

    Both parties scan the same i.i.d. stream of pairs (u uniform over the
    universe, t uniform in [0, 1]) and accept the first index with
    t < P(u) (resp. t < Q(u)).  Marginals are exactly P and Q; the outputs
    agree with probability at least 1 - 2 ||P - Q||.
    """
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    if p.shape != q.shape:
        raise ValidationError("P and Q must share a universe")
    tv = 0.5 * float(np.abs(p - q).sum())
    if tv >= 1.0 - 1e-12:
        raise SamplingError("correlated sampling requires ||P - Q|| < 1")
    u_size = p.size
    a_val = b_val = None
    steps = 0
    while a_val is None or b_val is None:
        if max_steps is not None and steps >= max_steps:
            raise SamplingError("shared randomness stream exhausted")
        u = int(rng.integers(u_size))
        t = float(rng.random())
        if a_val is None and t < p[u]:
            a_val = u
        if b_val is None and t < q[u]:
            b_val = u
        steps += 1
    return a_val, b_val


def correlated_sample_batch(p: np.ndarray, q: np.ndarray, trials: int,
                            rng: np.random.Generator, chunk: int = 64):
    """Vectorized accept-first sampling; returns integer arrays (p_samples, q_samples).

    Identical scheme to :func:`correlated_sample`, with the shared stream
    drawn in chunks of ``chunk`` steps per trial until every trial has
    accepted on both sides.
    """
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    if p.shape != q.shape:
        raise ValidationError("P and Q must share a universe")
    if 0.5 * float(np.abs(p - q).sum()) >= 1.0 - 1e-12:
        raise SamplingError("correlated sampling requires ||P - Q|| < 1")
    a_out = np.full(trials, -1, dtype=np.int64)
    b_out = np.full(trials, -1, dtype=np.int64)
    pending = np.arange(trials)
    while pending.size:
        u = rng.integers(p.size, size=(pending.size, chunk))
        t = rng.random((pending.size, chunk))
        acc_p = t < p[u]
        acc_q = t < q[u]
        for acc, out in ((acc_p, a_out), (acc_q, b_out)):
            has = acc.any(axis=1)
            first = acc.argmax(axis=1)
            rows = np.arange(pending.size)[has]
            idx = pending[has]
            fresh = out[idx] < 0
            out[idx[fresh]] = u[rows[fresh], first[has][fresh]]
        pending = pending[(a_out[pending] < 0) | (b_out[pending] < 0)]
    return a_out, b_out


def correlated_sampling_joint(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Exact output joint of the accept-first scheme.

    First-step analysis: at the first step where at least one party accepts,
    both accept the same value with mass min(P, Q); a lone accepter leaves
    the other to a fresh sample of its own marginal.  Normalization 1 + tv.
    """
    p = np.asarray(p, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    tv = 0.5 * float(np.abs(p - q).sum())
    if tv >= 1.0 - 1e-12:
        raise SamplingError("correlated sampling requires ||P - Q|| < 1")
    joint = np.multiply.outer(np.clip(p - q, 0.0, None), q) \
        + np.multiply.outer(p, np.clip(q - p, 0.0, None)) \
        + np.diag(np.minimum(p, q))
    return joint / (1.0 + tv)


def agreement_probability(p: np.ndarray, q: np.ndarray) -> float:
    return float(np.trace(correlated_sampling_joint(p, q)))


# ---------------------------------------------------------------------------
# the classical extraction protocol

@dataclass
class ExtractionResult:
    behavior_table: np.ndarray       # P(a, b | x, y) of the protocol
    win_prob: float
    protocol_joint: np.ndarray       # (rA, rB, x, y, a, b), flat R encoding
    target_joint: np.ndarray         # diagonal embedding of Ex_{T,j} P_{R Xj Yj Aj Bj | W}
    tv_to_target: float
    skipped_mass: float              # question mass where sampling was impossible


def extraction_protocol(aug_table: JointTable, game: Game, S, tau: float,
                        beta: float, T=None) -> ExtractionResult:
    """Exact output distribution of the zero-entanglement simulation protocol.

    Steps: draw (T, j) uniformly, plug the real question pair into round j,
    correlated-sample R_Tj from the two single-question conditionals, then
    answer from the respective one-sided conditionals.  Exact mode averages
    over everything, including the correlated-sampling agreement event.
    """
    n = table_rounds(aug_table)
    S = tuple(sorted(set(S)))
    m = n - len(S)
    cond, p_ws = condition_on_event(
        aug_table, WinEventSpec("subset", tau=tau, S=S), game)
    if T is None:
        tmax = int(beta * m)
        pool = [i for i in range(1, n + 1) if i not in S]
        t_sets = [tuple(c) for size in range(tmax + 1)
                  for c in itertools.combinations(pool, size)]
    else:
        t_sets = [tuple(sorted(set(T)))]

    pairs = [(T_cur, j) for T_cur in t_sets
             for j in range(1, n + 1) if j not in S and j not in T_cur]
    if not pairs:
        raise ValidationError("no free round outside S and T")
    if len({len(t) for t, _ in pairs}) != 1:
        raise ValidationError("all candidate T sets must have equal size")
    rv0 = r_variables(n, S, pairs[0][0], pairs[0][1])
    r_size = int(np.prod([cond.sizes[cond.axis(nm)] for nm in rv0]))

    proto = np.zeros((r_size, r_size, game.nx, game.ny, game.na, game.nb))
    target = np.zeros_like(proto)
    skipped = 0.0
    for T_cur, j in pairs:
        w_pair = 1.0 / len(pairs)
        xj, yj, aj, bj = f"X{j}", f"Y{j}", f"A{j}", f"B{j}"
        rv = r_variables(n, S, T_cur, j)
        # conditionals from the event-conditioned table
        r_x = cond.marginal_array(rv + [xj]).reshape(r_size, game.nx)
        r_y = cond.marginal_array(rv + [yj]).reshape(r_size, game.ny)
        px = r_x.sum(axis=0)
        py = r_y.sum(axis=0)
        a_rx = cond.marginal_array(rv + [xj, aj]).reshape(r_size, game.nx, game.na)
        b_ry = cond.marginal_array(rv + [yj, bj]).reshape(r_size, game.ny, game.nb)
        full = cond.marginal_array(rv + [xj, yj, aj, bj]).reshape(
            r_size, game.nx, game.ny, game.na, game.nb)
        for x in range(game.nx):
            for y in range(game.ny):
                mu = game.mu[x, y]
                if mu == 0:
                    continue
                if px[x] < NULL_EVENT_TOL or py[y] < NULL_EVENT_TOL:
                    skipped += w_pair * mu
                    continue
                pr_x = r_x[:, x] / px[x]
                pr_y = r_y[:, y] / py[y]
                try:
                    joint_r = correlated_sampling_joint(pr_x, pr_y)
                except SamplingError:
                    skipped += w_pair * mu
                    continue
                with np.errstate(divide="ignore", invalid="ignore"):
                    a_given_r = np.nan_to_num(a_rx[:, x, :] / r_x[:, x:x + 1])
                    b_given_r = np.nan_to_num(b_ry[:, y, :] / r_y[:, y:y + 1])
                proto[:, :, x, y, :, :] += w_pair * mu * np.einsum(
                    "rs,ra,sb->rsab", joint_r, a_given_r, b_given_r)
                # target: diagonal in (rA, rB), true conditional P(r, a, b | x, y, W)
                xy_mass = full[:, x, y, :, :].sum()
                if xy_mass > 0:
                    diag = full[:, x, y, :, :] / xy_mass
                    idx = np.arange(r_size)
                    target[idx, idx, x, y, :, :] += w_pair * mu * diag
    total_proto = proto.sum()
    tv = 0.5 * float(np.abs(proto - target).sum())
    realized = proto.sum(axis=(0, 1))
    with np.errstate(divide="ignore", invalid="ignore"):
        behavior = np.nan_to_num(
            realized / realized.sum(axis=(2, 3), keepdims=True))
    # win probability computed on the realized (non-skipped) mass
    win = float((realized * game.predicate).sum()) / max(total_proto, 1e-300)
    return ExtractionResult(
        behavior_table=behavior, win_prob=win, protocol_joint=proto,
        target_joint=target, tv_to_target=tv, skipped_mass=skipped)
