"""Tabulate the a-priori constant C and the sample count it implies.

Shows why theory mode never builds: even for mild models ``C`` carries
``exp(3 v (1 + L^2 T (sqrt(T) + v p)^2))`` and n grows like ``C^2 / eps^2``.

    python scripts/theory_constants.py
"""

import math

from kolmonet.constructor import _log_theory_constant_C, log10_theory_sample_count

ROWS = [
    # p, v, L, T, moment_root
    (2, 2, 0.0, 1.0, 0.0),
    (2, 2, 0.44, 1.0, math.sqrt(0.2)),
    (2, 2, 0.44, 0.25, math.sqrt(0.2)),
    (4, 2, 0.44, 1.0, 1.0),
    (2, 3, 0.6, 1.0, 1.0),
]


def main() -> None:
    print(f"{'p':>3} {'v':>3} {'L':>5} {'T':>5} {'root':>6} {'log10 C':>9} {'log10 n (eps=0.01)':>19}")
    for p, v, L, T, root in ROWS:
        logC = _log_theory_constant_C(p, v, L, T, root)
        log10n = log10_theory_sample_count(1.0, logC, 0.01)
        print(f"{p:3g} {v:3g} {L:5.2f} {T:5.2f} {root:6.3f} {logC / math.log(10):9.2f} {log10n:19.2f}")


if __name__ == "__main__":
    main()
