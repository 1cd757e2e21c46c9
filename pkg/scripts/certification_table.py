#!/usr/bin/env python3
"""Tabulate certified entanglement-of-formation lower bounds for CHSH.

Scans round counts and pass probabilities and prints the certified
E_F >= c2 kappa^2 n bound (total bits) together with the distillable-rate
bound c2 kappa^2 / 4 per round, marking rows where a gate fails.
"""

import argparse

from entcert import CertInput, certify_eof

QVAL = 0.8535533905932737


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--delta", type=float, default=QVAL - 0.75)
    ap.add_argument("--nu", type=float, default=0.0)
    ap.add_argument("--answer-pairs", type=int, default=4)
    ap.add_argument("--n", default="1e6,1e7,1e8,1e9")
    ap.add_argument("--kappa", default="0.1,0.5,0.9")
    args = ap.parse_args(argv)

    ns = [int(float(v)) for v in args.n.split(",")]
    kappas = [float(v) for v in args.kappa.split(",")]
    print(f"{'n':>12} {'kappa':>7} {'E_F bits':>14} {'E_C rate':>14}  gate")
    for n in ns:
        for k in kappas:
            rep = certify_eof(CertInput(args.delta, args.nu,
                                        args.answer_pairs, n, k))
            if rep.gates_pass:
                print(f"{n:>12d} {k:>7.3f} {rep.ef_lower_bound_bits:>14.6g} "
                      f"{rep.ec_lower_bound_bits:>14.6g}  ok")
            else:
                print(f"{n:>12d} {k:>7.3f} {'-':>14} {'-':>14}  "
                      f"{rep.gate_failure_reason}")


if __name__ == "__main__":
    main()
