"""A small strong-scaling run over generated university hierarchies (socket transport).

Speedups need as many cores as partitions; on fewer cores the table still shows
that result cardinalities are identical across k.

    python demos/scaling.py [universities]
"""

from __future__ import annotations

import sys

from reachjoin.bench import strong_scaling


def main(universities: int = 30) -> None:
    report = strong_scaling(universities, [1, 2, 4], runs=3)
    print(report.to_text())
    print("cardinalities consistent:", report.cardinalities_consistent())


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 30)
