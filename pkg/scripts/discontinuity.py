"""Entropy of the skew family across the saddle-node, printed as a table.

Usage: python scripts/discontinuity.py [EPS ...]
"""

import sys

from phlab.lab import discontinuity_experiment


def main(argv) -> int:
    eps = [float(e) for e in argv] or [0.0, 0.005, -0.005, 0.01, -0.01]
    rep = discontinuity_experiment(eps)
    b = rep.body
    print(f"h(g_1) = {b['h_g1']:.4f}   h(g_2) = {b['h_g2']:.4f}   "
          f"annihilation side: eps {'>' if b['annihilation_side'] > 0 else '<'} 0")
    print(f"{'eps':>8} {'side':>13} {'h(f_eps)':>9}  fibers (y, speed, h)")
    for r in b["rows"]:
        fib = "  ".join(f"({fb['y']:.4f}, {fb['speed']:.4f}, {fb['h_hat']:.3f})"
                        for fb in r["fibers"])
        print(f"{r['epsilon']:8.4f} {r['side']:>13} {r['h_hat']:9.4f}  {fib}")
    for v in rep.verdicts:
        print(f"{v.status.upper():5} {v.name}")
    print(f"{rep.wall_time['total']:.1f} s")
    return rep.exit_code


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
