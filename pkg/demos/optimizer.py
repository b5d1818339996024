"""Cost-based planning: the chosen plan for each hierarchy query and its cost versus
the exhaustive bushy minimum.

    python demos/optimizer.py
"""

from __future__ import annotations

from reachjoin.bench import L_QUERIES, hierarchy_data, l_query
from reachjoin.optimizer import CostConfig, Optimizer, explain_text
from reachjoin.query import compile_query
from reachjoin.store import Store


def main() -> None:
    arr, d = hierarchy_data(5)
    store = Store.build(arr, d, k=4, sample_size=2000)
    for name in L_QUERIES:
        graph = compile_query(l_query(name))
        opt = Optimizer(graph, store.catalog, store.dictionary, CostConfig(k=4))
        plan = opt.enumerate()
        print(f"== {name}: DP cost {plan.est_cost:.1f}, exhaustive minimum {opt.exhaustive_min_cost():.1f}")
        print(explain_text(plan))


if __name__ == "__main__":
    main()
