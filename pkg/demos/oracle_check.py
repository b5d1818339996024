"""Random instances checked against the single-machine reference evaluator,
over the in-process, delayed/reordering and socket transports.

    python demos/oracle_check.py [instances]
"""

from __future__ import annotations

import sys

from reachjoin.generate import gen_instance
from reachjoin.oracle import Oracle, evaluate_text
from reachjoin.runtime import Engine, EngineConfig
from reachjoin.store import Store


def main(n: int = 10) -> None:
    for seed in range(n):
        inst = gen_instance(seed, vertices=300, properties=4, row_limit=100_000)
        arr, d = inst.encoded()
        q = inst.queries[0]
        want = evaluate_text(Oracle(arr), d, q).rows
        verdicts = []
        for k, transport in ((1, "inproc"), (2, "delay"), (4, "socket")):
            store = Store.build(arr.copy(), d, k=k)
            with Engine(store, EngineConfig(transport=transport, delay_seed=seed)) as engine:
                res = engine.execute(q)
            ok = res.row_set() == want and res.audit.one_round()
            verdicts.append(f"k={k}/{transport}:{'ok' if ok else 'MISMATCH'}")
        print(f"seed {seed}: {len(want)} rows  " + "  ".join(verdicts))


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 10)
