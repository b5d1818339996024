"""Cost model and join-order enumeration producing physical plans.

Operators: DIS (index scan; singleton and unbound-variable leaves are scans
too), DMJ (merge join), DHJ (hash join) and DRJ (reachability join).

Cost of a join with ordered conditions ``c_1..c_n`` over inputs of estimated
cardinality ``L`` and ``R``::

    join  = sum_i  L * R * prod_{j<=i} Sel(c_j)     (residual cardinalities)
    card  = L * R * prod_i Sel(c_i)
    total = max(cost(left), cost(right)) + join + shipping

Shipping sums ``card * width * gamma`` over the children that must be
resharded, and is zero on a single partition.

The DP table keys entries by (vertex set, shard key, sort column) and keeps
every entry that is not dominated in both cost and cardinality.  Since a
parent's cost is monotone in each child's cost and cardinality, this keeps the
DP exact with respect to the cost model.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import Iterable, Sequence, Union

from .query import (Modifier, QueryGraph, QueryVertex, ReachPredicate, Var, VertexKind)
from .rdf import Dictionary, Term
from .stats import StatsCatalog
from .triple_index import Permutation, valid_permutations

DP_VERTEX_LIMIT = 12
MAX_ORDERINGS = 720


class PlanningError(ValueError):
    pass


@dataclass(frozen=True)
class CostConfig:
    k: int = 1
    gamma: float = 1.0
    star_scope: str = "vd"
    dp_limit: int = DP_VERTEX_LIMIT


@dataclass(frozen=True)
class EquiCondition:
    var: Var
    sel: float

    def __str__(self) -> str:
        return f"{self.var} = {self.var}"


@dataclass(frozen=True)
class ReachCondition:
    predicate: ReachPredicate
    sel: float
    source_side: int  # 0 when the source variable comes from the left child

    @property
    def source(self) -> Var:
        return self.predicate.source

    @property
    def target(self) -> Var:
        return self.predicate.target

    def __str__(self) -> str:
        return str(self.predicate)


JoinCondition = Union[EquiCondition, ReachCondition]


@dataclass(frozen=True)
class PlanNode:
    op: str                                 # DIS | DMJ | DHJ | DRJ
    vertex_set: int
    variables: tuple[Var, ...]
    est_card: float
    est_cost: float
    shard_key: Var | None
    sorted_on: Var | None
    children: tuple["PlanNode", ...] = ()
    reshard: tuple[bool, ...] = ()
    key: Var | None = None                  # equi key of DMJ/DHJ and hash-mode DRJ
    conditions: tuple[JoinCondition, ...] = ()
    join_cost: float = 0.0
    ship_cost: float = 0.0
    # leaves
    vertex: QueryVertex | None = None
    permutation: Permutation | None = None
    bound: tuple[tuple[int, int | None], ...] = ()   # (position, id or None if unknown)
    node_id: int = -1

    @property
    def is_leaf(self) -> bool:
        return not self.children

    @property
    def props(self) -> tuple[Var | None, Var | None]:
        return self.shard_key, self.sorted_on

    @property
    def reach_conditions(self) -> tuple[ReachCondition, ...]:
        return tuple(c for c in self.conditions if isinstance(c, ReachCondition))

    @property
    def equi_conditions(self) -> tuple[EquiCondition, ...]:
        return tuple(c for c in self.conditions if isinstance(c, EquiCondition))

    @property
    def drj_mode(self) -> str | None:
        if self.op != "DRJ":
            return None
        return "hash" if self.key is not None else "cross"

    def walk(self) -> Iterable["PlanNode"]:
        yield self
        for c in self.children:
            yield from c.walk()

    def label(self) -> str:
        if self.is_leaf:
            v = self.vertex
            if v.kind is VertexKind.PATTERN:
                return f"DIS[{self.permutation.name}] {v.label}: {v.pattern}"
            if v.kind is VertexKind.SINGLETON:
                return f"DIS[singleton] {v.label}"
            return f"DIS[unbound] {v.label} over {v.domain}"
        conds = ", ".join(str(c) for c in self.conditions)
        key = f" key={self.key}" if self.key is not None else ""
        return f"{self.op}{key} [{conds}]"


# --------------------------------------------------------------------------
# cost model

class CostModel:
    def __init__(self, graph: QueryGraph, catalog: StatsCatalog, dictionary: Dictionary,
                 config: CostConfig = CostConfig()):
        self.g = graph
        self.cat = catalog
        self.dict = dictionary
        self.cfg = config
        self._ids: dict[Term, int | None] = {}
        self._reach_edges: list[list[tuple[int, int]]] = [[] for _ in graph.predicates]
        for e in graph.reach_edges:
            self._reach_edges[e.predicate.index].append((1 << e.u, 1 << e.v))
        for pred in graph.predicates:
            self._check_reach_property(pred)

    # --- helpers ---------------------------------------------------------------
    def term_id(self, t: Term) -> int | None:
        if t not in self._ids:
            self._ids[t] = self.dict.lookup(t)
        return self._ids[t]

    def _check_reach_property(self, pred: ReachPredicate) -> None:
        pid = self.term_id(pred.atom.prop)
        if pid is None or pid not in self.cat.reach_sel:
            raise PlanningError(f"no reachability index for property {pred.atom.prop.lexical!r}")

    def domain_size(self, atom) -> int:
        pid = self.term_id(atom.prop)
        if atom.modifier is Modifier.PLUS or self.cfg.star_scope == "vp":
            return self.cat.property_vertices.get(pid, 0)
        return self.cat.vertex_count

    # --- leaves -------------------------------------------------------------------
    def leaf_options(self, v: QueryVertex) -> list[PlanNode]:
        mask = 1 << v.vid
        k = self.cfg.k
        if v.kind is VertexKind.SINGLETON:
            var = v.variables[0]
            return [PlanNode("DIS", mask, v.variables, 1.0, 1.0, var, var, vertex=v,
                             bound=((0, self.term_id(v.constant)),))]
        if v.kind is VertexKind.UNBOUND:
            var = v.variables[0]
            pid = self.term_id(v.domain.prop)
            card = float(self.domain_size(v.domain))
            cost = self.cat.property_edges.get(pid, 0) / k
            return [PlanNode("DIS", mask, v.variables, card, cost, var, var, vertex=v)]
        tp = v.pattern
        nodes = (tp.subject, tp.atom.prop, tp.object)
        bound: list[tuple[int, int | None]] = []
        for pos, n in enumerate(nodes):
            if isinstance(n, Term):
                bound.append((pos, self.term_id(n)))
        card = float(self._pattern_card(dict(bound)))
        cost = card / k
        out = []
        for perm in valid_permutations(pos for pos, _ in bound):
            # rows live at the owner of the subject (subject-keyed) or object (object-keyed)
            home = nodes[0] if perm.subject_keyed else nodes[2]
            shard = home if isinstance(home, Var) else None
            sort_node = nodes[perm.columns[len(bound)]] if len(bound) < 3 else None
            sort = sort_node if isinstance(sort_node, Var) else None
            out.append(PlanNode("DIS", mask, v.variables, card, cost, shard, sort, vertex=v,
                                permutation=perm, bound=tuple(bound)))
        return out

    def _pattern_card(self, bound: dict[int, int | None]) -> int:
        if any(x is None for x in bound.values()):
            return 0
        p = bound[1]
        s, o = bound.get(0), bound.get(2)
        if s is not None and o is not None:
            return min(self.cat.card_ps(p, s), self.cat.card_po(p, o), self.cat.card_pair["so"].get(s, o))
        if s is not None:
            return self.cat.card_ps(p, s)
        if o is not None:
            return self.cat.card_po(p, o)
        return self.cat.card_property(p)

    # --- selectivities ----------------------------------------------------------------
    def _provider(self, var: Var, mask: int) -> QueryVertex:
        m = mask
        while m:
            low = m & -m
            v = self.g.vertices[low.bit_length() - 1]
            if var in v.variables:
                return v
            m ^= low
        raise PlanningError(f"variable {var} not produced by vertex set {mask:b}")

    def _role(self, v: QueryVertex, var: Var) -> str:
        return "s" if v.pattern.subject == var else "o"

    def _value_fraction(self, v: QueryVertex, var: Var, const: int | None) -> float:
        """Fraction of pattern ``v``'s triples whose ``var`` position equals ``const``."""
        pid = self.term_id(v.pattern.atom.prop)
        total = self.cat.card_property(pid)
        if const is None or pid is None or total == 0:
            return 0.0
        n = self.cat.card_ps(pid, const) if self._role(v, var) == "s" else self.cat.card_po(pid, const)
        return min(1.0, n / total)

    def equi_selectivity(self, var: Var, left_mask: int, right_mask: int) -> float:
        a = self._provider(var, left_mask)
        b = self._provider(var, right_mask)
        if b.vid < a.vid:
            a, b = b, a
        ka, kb = a.kind, b.kind
        if ka is VertexKind.PATTERN and kb is VertexKind.PATTERN:
            pa, pb = self.term_id(a.pattern.atom.prop), self.term_id(b.pattern.atom.prop)
            return self.cat.join_selectivity(pa, pb, self._role(a, var) + self._role(b, var))
        if VertexKind.SINGLETON in (ka, kb):
            single, other = (a, b) if ka is VertexKind.SINGLETON else (b, a)
            const = self.term_id(single.constant)
            if other.kind is VertexKind.PATTERN:
                return self._value_fraction(other, var, const)
            if other.kind is VertexKind.SINGLETON:
                return 1.0 if const is not None and const == self.term_id(other.constant) else 0.0
            return 1.0 / max(1, self.domain_size(other.domain))
        sizes = [self.domain_size(x.domain) for x in (a, b) if x.kind is VertexKind.UNBOUND]
        return 1.0 / max(1, max(sizes))

    def reach_selectivity(self, pred: ReachPredicate) -> float:
        return self.cat.reach_selectivity(self.term_id(pred.atom.prop))

    # --- conditions of a split ------------------------------------------------------------
    def reach_predicates_for(self, left_mask: int, right_mask: int) -> list[ReachPredicate]:
        out = []
        for pred in self.g.predicates:
            crossing = False
            inside = False
            for mu, mv in self._reach_edges[pred.index]:
                if (mu & left_mask and mv & right_mask) or (mu & right_mask and mv & left_mask):
                    crossing = True
                elif (mu | mv) & ~left_mask == 0 or (mu | mv) & ~right_mask == 0:
                    inside = True
            if crossing and not inside:
                out.append(pred)
        return out

    # --- joins ----------------------------------------------------------------------
    def join_options(self, left: PlanNode, right: PlanNode) -> list[PlanNode]:
        shared = [x for x in left.variables if x in set(right.variables)]
        preds = self.reach_predicates_for(left.vertex_set, right.vertex_set)
        if not shared and not preds:
            return []
        lvars = set(left.variables)
        equis = [EquiCondition(x, self.equi_selectivity(x, left.vertex_set, right.vertex_set)) for x in shared]
        reaches = [ReachCondition(p, self.reach_selectivity(p), 0 if p.source in lvars else 1) for p in preds]
        variables = left.variables + tuple(x for x in right.variables if x not in lvars)
        mask = left.vertex_set | right.vertex_set
        out: list[PlanNode] = []
        reach_orders = _orderings(reaches)
        if equis:
            for key_cond in equis:
                rest = [c for c in equis if c is not key_cond]
                for tail in _orderings(rest):
                    eq_order = (key_cond,) + tail
                    key = key_cond.var
                    if not reaches:
                        out.append(self._make(
                            "DHJ", left, right, eq_order, key, (key, None), variables, mask))
                        if left.sorted_on == key and right.sorted_on == key:
                            out.append(self._make(
                                "DMJ", left, right, eq_order, key, (key, key), variables, mask))
                    else:
                        for r_order in reach_orders:
                            shard = r_order[-1].target
                            out.append(self._make("DRJ", left, right, eq_order + r_order, key,
                                                  (shard, None), variables, mask))
        else:
            for r_order in reach_orders:
                shard = r_order[-1].target
                out.append(self._make("DRJ", left, right, r_order, None, (shard, None), variables, mask))
        return out

    def reshard_marks(self, op: str, left: PlanNode, right: PlanNode, key: Var | None,
                      conditions: Sequence[JoinCondition]) -> tuple[bool, bool]:
        if self.cfg.k == 1:
            return (False, False)
        if key is not None:
            return (left.shard_key != key, right.shard_key != key)
        first = next(c for c in conditions if isinstance(c, ReachCondition))
        want = [first.target, first.target]
        want[first.source_side] = first.source
        return (left.shard_key != want[0], right.shard_key != want[1])

    def _make(self, op: str, left: PlanNode, right: PlanNode, conditions: tuple, key: Var | None,
              props: tuple[Var | None, Var | None], variables: tuple[Var, ...], mask: int) -> PlanNode:
        lc, rc = left.est_card, right.est_card
        base = lc * rc
        running = base
        join = 0.0
        for c in conditions:
            running *= c.sel
            join += running
        marks = self.reshard_marks(op, left, right, key, conditions)
        ship = 0.0
        for child, mark in zip((left, right), marks):
            if mark:
                ship += child.est_card * len(child.variables) * self.cfg.gamma
        cost = max(left.est_cost, right.est_cost) + join + ship
        return PlanNode(op, mask, variables, running, cost, props[0], props[1],
                        children=(left, right), reshard=marks, key=key,
                        conditions=tuple(conditions), join_cost=join, ship_cost=ship)


def _orderings(conds: Sequence) -> list[tuple]:
    if not conds:
        return [()]
    perms = itertools.islice(itertools.permutations(conds), MAX_ORDERINGS)
    return [tuple(p) for p in perms]


# --------------------------------------------------------------------------
# enumeration

def _dominated(a: PlanNode, b: PlanNode) -> bool:
    """True when ``b`` is at least as good as ``a`` in both cost and cardinality."""
    return b.est_cost <= a.est_cost and b.est_card <= a.est_card


class _Table:
    """Per vertex set: Pareto-optimal plans per physical-property pair."""

    def __init__(self) -> None:
        self.entries: dict[int, dict[tuple, list[PlanNode]]] = {}

    def add(self, plan: PlanNode) -> None:
        per = self.entries.setdefault(plan.vertex_set, {})
        front = per.setdefault(plan.props, [])
        for q in front:
            if _dominated(plan, q):
                return
        front[:] = [q for q in front if not _dominated(q, plan)]
        front.append(plan)

    def plans(self, mask: int) -> list[PlanNode]:
        return [p for front in self.entries.get(mask, {}).values() for p in front]


def _best(plans: Iterable[PlanNode]) -> PlanNode | None:
    best = None
    for p in plans:
        if best is None or p.est_cost < best.est_cost:
            best = p
    return best


def _submasks(mask: int) -> Iterable[int]:
    sub = (mask - 1) & mask
    while sub:
        yield sub
        sub = (sub - 1) & mask


class Optimizer:
    def __init__(self, graph: QueryGraph, catalog: StatsCatalog, dictionary: Dictionary,
                 config: CostConfig = CostConfig()):
        self.g = graph
        self.cfg = config
        self.model = CostModel(graph, catalog, dictionary, config)

    def enumerate(self) -> PlanNode:
        n = len(self.g.vertices)
        if not self.g.is_connected():
            raise PlanningError("query graph is disconnected")
        plan = self._dp() if n <= self.cfg.dp_limit else self._greedy()
        return number_nodes(plan)

    def _dp(self) -> PlanNode:
        n = len(self.g.vertices)
        table = _Table()
        for v in self.g.vertices:
            for leaf in self.model.leaf_options(v):
                table.add(leaf)
        full = (1 << n) - 1
        connected = {m for m in range(1, full + 1) if self.g.is_connected(m)}
        for mask in sorted(connected, key=lambda m: (bin(m).count("1"), m)):
            if mask & (mask - 1) == 0:
                continue
            low = mask & -mask
            for left in sorted(_submasks(mask)):
                if not left & low:
                    continue
                right = mask ^ left
                if left not in connected or right not in connected:
                    continue
                for lp in table.plans(left):
                    for rp in table.plans(right):
                        for plan in self.model.join_options(lp, rp):
                            table.add(plan)
        best = _best(table.plans(full))
        if best is None:
            raise PlanningError("no executable plan")
        return best

    def _greedy(self) -> PlanNode:
        parts = [_best(self.model.leaf_options(v)) for v in self.g.vertices]
        while len(parts) > 1:
            best = None
            for i, j in itertools.combinations(range(len(parts)), 2):
                for plan in self.model.join_options(parts[i], parts[j]):
                    if best is None or plan.est_cost < best[0].est_cost:
                        best = (plan, i, j)
            if best is None:
                raise PlanningError("query graph is disconnected")
            plan, i, j = best
            parts = [p for t, p in enumerate(parts) if t not in (i, j)] + [plan]
        return parts[0]

    # --- exhaustive reference ---------------------------------------------------
    def exhaustive_plans(self, mask: int | None = None, _memo: dict | None = None) -> list[PlanNode]:
        """Every bushy plan (both child orientations), deduplicated by (cost, card, props)."""
        n = len(self.g.vertices)
        mask = (1 << n) - 1 if mask is None else mask
        memo = {} if _memo is None else _memo
        if mask in memo:
            return memo[mask]
        if mask & (mask - 1) == 0:
            out = self.model.leaf_options(self.g.vertices[mask.bit_length() - 1])
        else:
            seen: dict[tuple, PlanNode] = {}
            for left in _submasks(mask):
                right = mask ^ left
                if not (self.g.is_connected(left) and self.g.is_connected(right)):
                    continue
                for lp in self.exhaustive_plans(left, memo):
                    for rp in self.exhaustive_plans(right, memo):
                        for plan in self.model.join_options(lp, rp):
                            seen.setdefault((plan.est_cost, plan.est_card, plan.props), plan)
            out = list(seen.values())
        memo[mask] = out
        return out

    def exhaustive_min_cost(self) -> float:
        return min(p.est_cost for p in self.exhaustive_plans())


def number_nodes(plan: PlanNode) -> PlanNode:
    """Assign pre-order node ids (root = 0)."""
    counter = itertools.count()

    def go(node: PlanNode) -> PlanNode:
        nid = next(counter)
        kids = tuple(go(c) for c in node.children)
        return replace(node, node_id=nid, children=kids)

    return go(plan)


def annotate_sharding(plan: PlanNode, k: int) -> PlanNode:
    """Recompute reshard marks bottom-up for ``k`` partitions (all false when k = 1)."""
    if plan.is_leaf:
        return plan
    kids = tuple(annotate_sharding(c, k) for c in plan.children)
    if k == 1:
        marks = (False, False)
    elif plan.key is not None:
        marks = tuple(c.shard_key != plan.key for c in kids)
    else:
        first = plan.reach_conditions[0]
        want = [first.target, first.target]
        want[first.source_side] = first.source
        marks = (kids[0].shard_key != want[0], kids[1].shard_key != want[1])
    return replace(plan, children=kids, reshard=tuple(marks))


def plan_query(graph: QueryGraph, catalog: StatsCatalog, dictionary: Dictionary,
               config: CostConfig = CostConfig()) -> PlanNode:
    return Optimizer(graph, catalog, dictionary, config).enumerate()


# --------------------------------------------------------------------------
# rendering

def _fmt(x: float) -> str:
    if x == 0:
        return "0"
    if abs(x) >= 1e6 or abs(x) < 1e-3:
        return f"{x:.3e}"
    return f"{x:.3f}".rstrip("0").rstrip(".")


def explain_text(plan: PlanNode) -> str:
    lines: list[str] = []

    def go(node: PlanNode, depth: int, mark: bool) -> None:
        pad = "  " * depth
        flag = " (reshard)" if mark else ""
        shard = f" shard={node.shard_key}" if node.shard_key is not None else ""
        lines.append(f"{pad}#{node.node_id} {node.label()}  card={_fmt(node.est_card)} "
                     f"cost={_fmt(node.est_cost)}{shard}{flag}")
        for child, m in zip(node.children, node.reshard or (False,) * len(node.children)):
            go(child, depth + 1, m)

    go(plan, 0, False)
    return "\n".join(lines)


def explain_dot(plan: PlanNode) -> str:
    lines = ["digraph plan {", "  node [shape=box];"]
    for node in plan.walk():
        text = f"#{node.node_id} {node.label()}\\ncard={_fmt(node.est_card)} cost={_fmt(node.est_cost)}"
        text = text.replace('"', '\\"')
        lines.append(f'  n{node.node_id} [label="{text}"];')
        for child, mark in zip(node.children, node.reshard):
            style = ' [style=dashed, label="reshard"]' if mark else ""
            lines.append(f"  n{child.node_id} -> n{node.node_id}{style};")
    lines.append("}")
    return "\n".join(lines)


def plan_cost_recompute(plan: PlanNode, model: CostModel) -> float:
    """Re-derive a plan's cost bottom-up from the catalog (coherence check)."""
    if plan.is_leaf:
        opts = model.leaf_options(plan.vertex)
        match = [o for o in opts if o.permutation == plan.permutation]
        return match[0].est_cost
    left, right = plan.children
    lc = plan_cost_recompute(left, model)
    rc = plan_cost_recompute(right, model)
    base = left.est_card * right.est_card
    running, join = base, 0.0
    for c in plan.conditions:
        running *= c.sel
        join += running
    ship = sum(ch.est_card * len(ch.variables) * model.cfg.gamma
               for ch, m in zip(plan.children, plan.reshard) if m)
    return max(lc, rc) + join + ship
