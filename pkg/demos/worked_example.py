"""Turing-award colleagues: a six-pattern query with three transitive paths, run at k = 1, 2, 4.

    python demos/worked_example.py
"""

from __future__ import annotations

from reachjoin.optimizer import explain_text
from reachjoin.rdf import parse_ntriples_text
from reachjoin.runtime import Engine
from reachjoin.store import Store

DATA = """\
<alice> <workedAt> <mit> .
<alice> <won> "Turing_Award" .
<bob> <workedAt> <stanford> .
<carol> <workedAt> <eth> .
<alice> <workedWith> <bob> .
<bob> <workedWith> <carol> .
<mit> <locIn> <boston> .
<boston> <locIn> "USA" .
<stanford> <locIn> <california> .
<california> <locIn> "USA" .
<mit> <sameState> <stanford> .
<dave> <won> "Turing_Award" .
"""

# laureates who worked at a US institution, and their (transitive) colleagues at
# institutions in the same state
QUERY = """SELECT * WHERE {
  ?p workedAt ?u .
  ?p won "Turing_Award" .
  ?p1 workedAt ?u1 .
  ?u locIn* "USA" .
  ?p workedWith* ?p1 .
  ?u sameState* ?u1 .
}"""


def main() -> None:
    arr, d = parse_ntriples_text(DATA)
    for k in (1, 2, 4):
        store = Store.build(arr.copy(), d, k=k)
        with Engine(store) as engine:
            res = engine.execute(QUERY)
        print(f"== k={k}: {len(res)} rows, {res.audit.messages} messages")
        print("\t".join(f"?{v.name}" for v in res.schema))
        for row in res.decoded():
            print("\t".join(row))
        if k == 2:
            print(explain_text(res.plan))
            for line in res.audit.lines():
                print(f"  audit: {line}")


if __name__ == "__main__":
    main()
