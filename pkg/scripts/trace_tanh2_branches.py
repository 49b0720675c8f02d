"""Trace the pitchfork branches of the coupled-tanh pair.

Marches lambda through the bifurcation at lambda = 1, prints the series
coefficients of the reduced map with their classification, and reports how
many reduced-map roots exist on each side. Optionally writes the branch
table as CSV.

Usage: python scripts/trace_tanh2_branches.py [--step H] [--out branches.csv]
"""

import argparse

import lscert
from lscert import report


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--step", type=float, default=0.05)
    ap.add_argument("--out", default=None, help="write the branch table CSV here")
    args = ap.parse_args()

    system = lscert.builtin_model("tanh2")
    point = lscert.evaluation_point(system, [0.0, 0.0], [1.0])
    ss = lscert.build_split_system(system, point)
    rm = lscert.ReducedMap(ss)

    coeffs = lscert.series_coefficients(rm)
    print("series coefficients of g at the base point:")
    for name in ("g_alpha", "g_lambda", "g_alpha_alpha", "g_alpha_alpha_alpha",
                 "g_alpha_lambda"):
        print(f"  {name:20s} = {getattr(coeffs, name)!r}")
    print(f"classification: {lscert.classify_series(coeffs)}")

    count = round((2.0 - 0.5) / args.step)
    lambda_values = [0.5 + i * args.step for i in range(count + 1)]
    result = lscert.trace_branches(rm, lambda_values, (-1.6, 1.6))
    print(f"{result.n_branches} branch(es); "
          f"roots at lambda=0.5: {len(result.roots_at(lambda_values[0]))}, "
          f"at lambda={lambda_values[-1]:g}: {len(result.roots_at(lambda_values[-1]))}")
    for p in result.roots_at(lambda_values[-1]):
        print(f"  lambda={p.lam:g} alpha={p.alpha: .12f} x={p.x.tolist()} "
              f"residual={p.residual_full:.2e}")
    for note in result.notes:
        print(f"note: {note}")

    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(report.trace_csv(result, system.n))
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
