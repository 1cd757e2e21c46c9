"""Entanglement certification from threshold-game pass events.

Turns a game gap Delta = qval - cval, a noise level nu, and an observed
pass probability kappa at repetition count n into lower bounds on the
entanglement of formation (per strategy state) and on the per-round
entanglement cost, after validity gates on n and kappa.  All entropic
quantities are in bits; gates use exp/ln exactly where the source formulas
do.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass

from .errors import GateFailedError, ValidationError
from .games import Game, classical_value


def _log_answer_pairs(answer_pairs: int) -> float:
    if answer_pairs < 2:
        raise ValidationError("need at least two answer pairs")
    return math.log2(answer_pairs)


def _gap(delta: float, nu: float) -> float:
    if delta <= 0:
        raise ValidationError("game gap must be positive")
    if not 0.0 <= nu < delta:
        raise ValidationError("no quantum advantage margin: need 0 <= nu < Delta")
    return delta - nu


def constants_pure(delta: float, nu: float, answer_pairs: int):
    """Pure-strategy constants (c1', c2').

    c1' = (Delta - nu)^3 / (2000 C), c2' = (Delta - nu)^5 / (10 * 90^2 * C),
    with C = log2 of the answer-pair count.
    """
    c_log = _log_answer_pairs(answer_pairs)
    gap = _gap(delta, nu)
    return gap ** 3 / (2000.0 * c_log), gap ** 5 / (10.0 * 90 ** 2 * c_log)


def constants_mixed(delta: float, nu: float, answer_pairs: int):
    """Mixed-strategy constants (c1, c2) = (2 c1', c2' / 4)."""
    c1_prime, c2_prime = constants_pure(delta, nu, answer_pairs)
    return 2.0 * c1_prime, c2_prime / 4.0


def error_params(alpha: float | None, answer_pairs: int, n: int, s_size: int,
                 p_ws: float, ent_bits: float, beta: float | None = None) -> dict:
    """The delta, delta', delta'' error parameters and the accrued TV bound.

    ``beta`` defaults to alpha^2 / (1000 C); passing it explicitly lets
    audits pin the parameter independently of alpha.  ``p_ws`` is the
    probability of the conditioned subset-win event and ``ent_bits`` the
    entanglement (in bits) available to the strategy.
    """
    c_log = _log_answer_pairs(answer_pairs)
    if beta is None:
        if alpha is None:
            raise ValidationError("need alpha or beta")
        beta = alpha ** 2 / (1000.0 * c_log)
    if not 0.0 < p_ws <= 1.0:
        raise ValidationError("p_ws must be in (0, 1]")
    m = n - s_size
    if m < 1:
        raise ValidationError("need at least one round outside S")
    if not 0.0 < beta < 1.0:
        raise ValidationError("beta must be in (0, 1)")
    log_inv = math.log2(1.0 / p_ws)
    delta = log_inv / ((1.0 - beta) * m)
    delta_prime = (log_inv + (2 * s_size + beta * m) * c_log) / ((1.0 - beta) * m)
    delta_dblprime = ent_bits / (beta * m * p_ws)
    accrued = (math.sqrt(delta) + 8.0 * math.sqrt(delta_prime)
               + math.sqrt(2.0 * delta_dblprime))
    return {
        "C": c_log, "alpha": alpha, "beta": beta, "m": m,
        "delta": delta, "delta_prime": delta_prime,
        "delta_dblprime": delta_dblprime, "accrued_tv_bound": accrued,
    }


def prop32_ledger(epsilon: float, gamma: float, n: int, kappa: float) -> dict:
    """Parameter ledger of the good-subset argument.

    alpha = epsilon - gamma is the working slack, tau = epsilon - 3 alpha / 4
    the subset-event threshold, and the gate requires
    kappa >= (16 / alpha) 2^(-alpha^3 n / 384).  When the gate passes,
    t / n <= alpha / 4 must hold; ``t_over_n_ok`` flags violations.
    """
    if not 0.0 <= gamma < epsilon < 1.0:
        raise ValidationError("need 0 <= gamma < epsilon < 1")
    if not 0.0 < kappa <= 1.0:
        raise ValidationError("kappa must be in (0, 1]")
    alpha = epsilon - gamma
    tau = epsilon - 0.75 * alpha
    delta_cap = alpha / 4.0
    t = (6.0 / delta_cap ** 2) * (math.log(2.0 / kappa) + math.log(8.0 / alpha))
    s_size_bound = (96.0 / alpha ** 2) * math.log(16.0 / (alpha * kappa))
    gate_rhs = (16.0 / alpha) * 2.0 ** (-(alpha ** 3) * n / 384.0)
    gate_ok = kappa >= gate_rhs
    return {
        "epsilon": epsilon, "gamma": gamma, "n": n, "kappa": kappa,
        "alpha": alpha, "tau": tau, "delta_cap": delta_cap,
        "t": t, "s_size_bound": s_size_bound,
        "prop_gate_rhs": gate_rhs, "prop_gate": gate_ok,
        "delta_prop": epsilon - alpha / 4.0 - t / n,
        "t_over_n_ok": (t / n <= alpha / 4.0) if gate_ok else None,
        "conclusion_threshold": 1.0 - epsilon + alpha,
    }


@dataclass(frozen=True)
class CertInput:
    """Certifier inputs: game constants plus the observed pass event."""

    delta: float          # quantum-classical gap of the base game, in (0, 1]
    nu: float             # noise threshold in [0, delta)
    answer_pairs: int     # |A x B|
    n: int                # repetition count
    kappa: float          # observed threshold-game pass probability

    def __post_init__(self):
        _gap(self.delta, self.nu)
        _log_answer_pairs(self.answer_pairs)
        if self.n < 1:
            raise ValidationError("n must be >= 1")
        if not 0.0 < self.kappa <= 1.0:
            raise ValidationError("kappa must be in (0, 1]")


@dataclass(frozen=True)
class CertReport:
    """Certified lower bounds with explicit gates; serializes to canonical JSON.

    ``ef_lower_bound_bits`` is present only when both gates pass; the
    entanglement-cost rate bound c2 / 4 is unconditional.  The pure-state
    bound is reported in both its theorem-statement form c2' kappa n and the
    proof-chain form kappa (Delta - nu)^5 n / (2 * 5 * 90^2 * C).
    """

    inputs: CertInput
    c1: float
    c2: float
    c1_prime: float
    c2_prime: float
    n_gate: bool
    kappa_gate: bool
    n_gate_threshold: float           # certification requires n > 1/c1
    kappa_gate_threshold: float       # and kappa >= exp(-c1 n), the binding gate
    kappa_gate_section3: float        # 2^(-alpha^3 n / (1000 C)) variant
    kappa_gate_prop32: float          # (16/alpha) 2^(-alpha^3 n / 384) variant
    gate_failure_reason: str | None
    ef_lower_bound_bits: float | None  # c2 kappa^2 n per strategy state
    ec_lower_bound_bits: float         # per-round entanglement rate c2 / 4
    pure_state_bound_statement: float  # c2' kappa n
    pure_state_bound_proof_chain: float

    @property
    def gates_pass(self) -> bool:
        return self.n_gate and self.kappa_gate

    def to_json_dict(self) -> dict:
        d = dataclasses.asdict(self)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)


def certify_eof(inp: CertInput) -> CertReport:
    """Evaluate the validity gates and emit the certified bounds.

    Gate failures do not raise; the report carries ``gate_failure_reason``
    ("n below 1/c1" or "kappa below exp(-c1 n)") and omits the E_F bound.
    """
    c1_prime, c2_prime = constants_pure(inp.delta, inp.nu, inp.answer_pairs)
    c1, c2 = 2.0 * c1_prime, c2_prime / 4.0
    c_log = _log_answer_pairs(inp.answer_pairs)
    alpha = inp.delta - inp.nu
    n_gate = inp.n > 1.0 / c1
    kappa_floor = math.exp(-c1 * inp.n)
    kappa_gate = inp.kappa >= kappa_floor
    reason = None
    if not n_gate:
        reason = "n below 1/c1"
    elif not kappa_gate:
        reason = "kappa below exp(-c1 n)"
    return CertReport(
        inputs=inp,
        c1=c1, c2=c2, c1_prime=c1_prime, c2_prime=c2_prime,
        n_gate=n_gate, kappa_gate=kappa_gate,
        n_gate_threshold=1.0 / c1,
        kappa_gate_threshold=kappa_floor,
        kappa_gate_section3=2.0 ** (-(alpha ** 3) * inp.n / (1000.0 * c_log)),
        kappa_gate_prop32=(16.0 / alpha) * 2.0 ** (-(alpha ** 3) * inp.n / 384.0),
        gate_failure_reason=reason,
        ef_lower_bound_bits=(c2 * inp.kappa ** 2 * inp.n
                             if n_gate and kappa_gate else None),
        ec_lower_bound_bits=c2 / 4.0,
        pure_state_bound_statement=c2_prime * inp.kappa * inp.n,
        pure_state_bound_proof_chain=(inp.kappa * alpha ** 5 * inp.n
                                      / (2.0 * 5.0 * 90 ** 2 * c_log)),
    )


def require_gates(report: CertReport) -> CertReport:
    """Raise :class:`GateFailedError` when a validity gate failed."""
    if report.gate_failure_reason is not None:
        raise GateFailedError(report.gate_failure_reason)
    return report


def certify_game(game: Game, qval: float, nu: float, n: int,
                 kappa: float) -> CertReport:
    """Convenience wrapper: compute the gap from the game's classical value."""
    delta = qval - classical_value(game)
    return certify_eof(CertInput(delta=delta, nu=nu,
                                 answer_pairs=game.answer_pairs,
                                 n=n, kappa=kappa))
