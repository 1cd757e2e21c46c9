"""Command-line entry point.

Subcommands: value, simulate, certify, ledger, audit, sample.  JSON in,
JSON/CSV out; reports are byte-identical for identical (inputs, seed,
version) — wall time is therefore printed to stderr, never embedded in the
payload.  Exit codes: 0 success, 2 validation error, 3 certification-gate
failure, 4 enumeration budget exceeded.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time

import numpy as np

from . import __version__
from .certifier import CertInput, certify_eof, error_params, prop32_ledger
from .errors import (BudgetExceededError, GateFailedError, NullEventError,
                     SamplingError, ValidationError)
from .games import Game, ThresholdGameSpec, classical_value
from .quantum import entanglement_entropy
from .repetition import (augment_dependency_breaking, correlated_sample,
                         correlated_sampling_joint, iid_lift_table,
                         iid_threshold_win_prob, joint_table_from_strategy,
                         lemma_audit, monte_carlo_threshold, sweep_threshold)
from .strategies import (QuantumStrategy, behavior_of, seesaw_optimize,
                         win_probability)


def _read_text(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc}") from exc


def _load_game(path: str) -> Game:
    try:
        return Game.from_json(_read_text(path))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed JSON in {path}: {exc}") from exc


def _load_strategy(path: str) -> QuantumStrategy:
    try:
        return QuantumStrategy.from_json(_read_text(path))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"malformed JSON in {path}: {exc}") from exc


def _load_distribution(path: str) -> np.ndarray:
    try:
        p = np.asarray(json.loads(_read_text(path)), dtype=float).ravel()
    except (json.JSONDecodeError, TypeError, ValueError) as exc:
        raise ValidationError(f"malformed distribution in {path}: {exc}") from exc
    if p.size == 0 or p.min() < 0 or abs(p.sum() - 1.0) > 1e-9:
        raise ValidationError(f"{path} is not a probability vector")
    return p / p.sum()


def _atomic_write(path: str, data: str):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".entcert-")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def _emit(report: dict, out: str | None):
    text = json.dumps(report, indent=2, sort_keys=True, default=_jsonable) + "\n"
    if out:
        _atomic_write(out, text)
    else:
        sys.stdout.write(text)


def _report(command: str, inputs: dict, results: dict, seed: int | None = None) -> dict:
    rep = {
        "command": command,
        "inputs": inputs,
        "results": results,
        "versions": {"entcert": __version__, "numpy": np.__version__},
    }
    if seed is not None:
        rep["seed"] = seed
    return rep


# ---------------------------------------------------------------------------
# subcommand handlers

def _cmd_value(args) -> dict:
    game = _load_game(args.game)
    if args.mode == "classical":
        val = classical_value(game)
        return _report("value classical", {"game": args.game},
                       {"classical_value": val})
    _, val = seesaw_optimize(game, dim=args.dim, restarts=args.restarts,
                             seed=args.seed)
    return _report("value quantum-seesaw",
                   {"game": args.game, "dim": args.dim,
                    "restarts": args.restarts},
                   {"seesaw_lower_bound": val}, seed=args.seed)


def _cmd_simulate(args) -> dict:
    game = _load_game(args.game)
    strategy = _load_strategy(args.strategy)
    if args.mode == "sweep":
        n_values = [int(s) for s in args.n.split(",")]
        rows = sweep_threshold(strategy, game, n_values, args.threshold,
                               args.trials, args.seed)
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
        if args.out:
            _atomic_write(args.out, buf.getvalue())
        else:
            sys.stdout.write(buf.getvalue())
        return {}
    n = int(args.n)
    spec = ThresholdGameSpec(game, n, args.threshold)
    inputs = {"game": args.game, "strategy": args.strategy, "n": n,
              "threshold": args.threshold}
    if args.exact:
        p = win_probability(behavior_of(strategy, game), game)
        results = {"per_round_win": p,
                   "pass_probability": iid_threshold_win_prob(p, n, args.threshold)}
        return _report("simulate threshold", {**inputs, "exact": True}, results)
    rate, (lo, hi) = monte_carlo_threshold(strategy, game, spec,
                                           args.trials, args.seed)
    return _report("simulate threshold",
                   {**inputs, "trials": args.trials},
                   {"pass_rate": rate, "ci_low": lo, "ci_high": hi},
                   seed=args.seed)


def _cmd_certify(args):
    inp = CertInput(delta=args.delta, nu=args.nu,
                    answer_pairs=args.answer_pairs, n=args.n, kappa=args.kappa)
    rep = certify_eof(inp)
    report = _report("certify",
                     {"delta": args.delta, "nu": args.nu,
                      "answer_pairs": args.answer_pairs, "n": args.n,
                      "kappa": args.kappa},
                     rep.to_json_dict())
    _emit(report, args.out)
    if rep.gate_failure_reason is not None:
        raise GateFailedError(rep.gate_failure_reason)
    return None


def _cmd_ledger(args) -> dict:
    if args.mode == "prop32":
        results = prop32_ledger(args.epsilon, args.gamma, args.n, args.kappa)
        inputs = {"epsilon": args.epsilon, "gamma": args.gamma,
                  "n": args.n, "kappa": args.kappa}
    else:
        results = error_params(args.alpha, args.answer_pairs, args.n,
                               args.s_size, args.p_ws, args.ent_bits,
                               beta=args.beta)
        inputs = {"alpha": args.alpha, "answer_pairs": args.answer_pairs,
                  "n": args.n, "s_size": args.s_size, "p_ws": args.p_ws,
                  "ent_bits": args.ent_bits, "beta": args.beta}
    return _report(f"ledger {args.mode}", inputs, results)


def _cmd_audit(args) -> dict:
    game = _load_game(args.game)
    strategy = _load_strategy(args.strategy)
    n = args.n
    S = tuple(int(s) for s in args.s.split(",")) if args.s else ()
    if len(strategy.a_measurements) == game.nx ** n and n > 1:
        table = joint_table_from_strategy(strategy, game, n)
    elif len(strategy.a_measurements) == game.nx:
        table = iid_lift_table(behavior_of(strategy, game), game, n)
    else:
        raise ValidationError(
            "strategy question count matches neither single-round nor n-round play")
    aug = augment_dependency_breaking(table, S)
    ent_bits = args.ent_bits
    if ent_bits is None:
        if not strategy.is_pure:
            raise ValidationError("--ent-bits required for mixed strategy states")
        ent_bits = entanglement_entropy(strategy.pure_state())
    entries, params = lemma_audit(aug, game, S, args.tau, args.beta, ent_bits)
    return _report("audit lemmas",
                   {"game": args.game, "strategy": args.strategy, "n": n,
                    "S": list(S), "tau": args.tau, "beta": args.beta,
                    "ent_bits": ent_bits},
                   {"entries": [e.to_json_dict() for e in entries],
                    "params": {k: (list(v) if isinstance(v, tuple) else v)
                               for k, v in params.items()}},
                   seed=args.seed)


def _cmd_sample(args) -> dict:
    p = _load_distribution(args.p)
    q = _load_distribution(args.q)
    if p.size != q.size:
        raise ValidationError("P and Q must share a universe")
    rng = np.random.default_rng(np.random.SeedSequence((args.seed, 0xC0A2)))
    agree = 0
    p_counts = np.zeros(p.size, dtype=int)
    q_counts = np.zeros(q.size, dtype=int)
    for _ in range(args.trials):
        i, j = correlated_sample(p, q, rng)
        p_counts[i] += 1
        q_counts[j] += 1
        agree += int(i == j)
    tv = 0.5 * float(np.abs(p - q).sum())
    return _report("sample correlated",
                   {"p": args.p, "q": args.q, "trials": args.trials},
                   {"agreement_rate": agree / args.trials,
                    "tv_distance": tv,
                    "exact_agreement_probability":
                        float(np.trace(correlated_sampling_joint(p, q))),
                    "p_empirical": (p_counts / args.trials).tolist(),
                    "q_empirical": (q_counts / args.trials).tolist()},
                   seed=args.seed)


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="entcert")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_val = sub.add_parser("value", help="game value computation")
    p_val.add_argument("mode", choices=["classical", "quantum-seesaw"])
    p_val.add_argument("--game", required=True)
    p_val.add_argument("--dim", type=int, default=2)
    p_val.add_argument("--restarts", type=int, default=10)
    p_val.add_argument("--seed", type=int, default=0)
    p_val.add_argument("--out")

    p_sim = sub.add_parser("simulate", help="threshold-game simulation")
    p_sim.add_argument("mode", choices=["threshold", "sweep"])
    p_sim.add_argument("--game", required=True)
    p_sim.add_argument("--strategy", required=True)
    p_sim.add_argument("--n", required=True,
                       help="round count (comma-separated list for sweep)")
    p_sim.add_argument("--threshold", type=float, required=True)
    p_sim.add_argument("--trials", type=int, default=10000)
    p_sim.add_argument("--exact", action="store_true")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--out")

    p_cert = sub.add_parser("certify", help="entanglement certification report")
    p_cert.add_argument("--delta", type=float, required=True)
    p_cert.add_argument("--nu", type=float, required=True)
    p_cert.add_argument("--answer-pairs", type=int, required=True)
    p_cert.add_argument("--n", type=int, required=True)
    p_cert.add_argument("--kappa", type=float, required=True)
    p_cert.add_argument("--out")

    p_led = sub.add_parser("ledger", help="proof-parameter ledgers")
    p_led.add_argument("mode", choices=["prop32", "errors"])
    p_led.add_argument("--epsilon", type=float)
    p_led.add_argument("--gamma", type=float)
    p_led.add_argument("--kappa", type=float)
    p_led.add_argument("--alpha", type=float)
    p_led.add_argument("--answer-pairs", type=int)
    p_led.add_argument("--s-size", type=int, default=0)
    p_led.add_argument("--p-ws", type=float)
    p_led.add_argument("--ent-bits", type=float, default=0.0)
    p_led.add_argument("--beta", type=float)
    p_led.add_argument("--n", type=int, required=True)
    p_led.add_argument("--out")

    p_aud = sub.add_parser("audit", help="decoupling-inequality audits")
    p_aud.add_argument("mode", choices=["lemmas"])
    p_aud.add_argument("--game", required=True)
    p_aud.add_argument("--strategy", required=True)
    p_aud.add_argument("--n", type=int, required=True)
    p_aud.add_argument("--s", default="", help="comma-separated round indices")
    p_aud.add_argument("--tau", type=float, required=True)
    p_aud.add_argument("--beta", type=float, required=True)
    p_aud.add_argument("--ent-bits", type=float)
    p_aud.add_argument("--seed", type=int, default=0)
    p_aud.add_argument("--out")

    p_smp = sub.add_parser("sample", help="correlated sampling runs")
    p_smp.add_argument("mode", choices=["correlated"])
    p_smp.add_argument("--p", required=True)
    p_smp.add_argument("--q", required=True)
    p_smp.add_argument("--trials", type=int, required=True)
    p_smp.add_argument("--seed", type=int, default=0)
    p_smp.add_argument("--out")
    return parser


_HANDLERS = {
    "value": _cmd_value,
    "simulate": _cmd_simulate,
    "certify": _cmd_certify,
    "ledger": _cmd_ledger,
    "audit": _cmd_audit,
    "sample": _cmd_sample,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    start = time.monotonic()
    try:
        report = _HANDLERS[args.subcommand](args)
        if report:
            _emit(report, getattr(args, "out", None))
    except (ValidationError, NullEventError, SamplingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GateFailedError as exc:
        print(f"gate failed: {exc.reason}", file=sys.stderr)
        return 3
    except BudgetExceededError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return 4
    finally:
        elapsed = time.monotonic() - start
        print(f"wall time: {elapsed:.3f}s", file=sys.stderr)
    return 0


def main():  # console-script entry point
    sys.exit(run())


if __name__ == "__main__":
    main()
