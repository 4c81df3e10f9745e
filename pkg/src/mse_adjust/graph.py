"""Causal DAGs and the purely graphical queries behind adjustment-set screening.

Nodes are dense integer indices into a label table held by the graph; all
operations take and return plain indices.  Construction enforces the standing
structural assumptions: the graph is acyclic, the treatment->outcome edge is
present (unless the graph is the derived one with that edge removed), and no
covariate is a descendant of the treatment.  Under those assumptions the
treatment has no children and the outcome has no children in the derived
graph, which several queries below rely on.

Everything is deterministic: neighbours are stored in ascending index order
and every search iterates in that order.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator

from .errors import EnumerationLimitError, GraphError

# Quantified reachability queries enumerate simple paths, which is exponential
# in the worst case; refuse unless the caller explicitly forces it.
QUANTIFIED_QUERY_COVARIATE_LIMIT = 25

_LABEL_FORBIDDEN = set("+,\t\n\r ")


@dataclass(frozen=True)
class AdjustmentSet:
    """A set of covariate indices in canonical (ascending) order.

    Canonical ordering makes equality, hashing and rendering deterministic.
    Use :meth:`of` to build one from any iterable.
    """

    members: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if any(b <= a for a, b in zip(self.members, self.members[1:])):
            raise GraphError(
                f"adjustment set members must be strictly increasing: {self.members}"
            )

    @classmethod
    def of(cls, members: Iterable[int]) -> "AdjustmentSet":
        return cls(tuple(sorted({int(v) for v in members})))

    @classmethod
    def from_labels(cls, dag: "CausalDag", labels: Iterable[str]) -> "AdjustmentSet":
        return cls.of(dag.index(lab) for lab in labels)

    def __iter__(self) -> Iterator[int]:
        return iter(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, v: object) -> bool:
        return v in self.members

    def union(self, other: Iterable[int]) -> "AdjustmentSet":
        return AdjustmentSet.of((*self.members, *other))

    def difference(self, other: Iterable[int]) -> "AdjustmentSet":
        drop = set(other)
        return AdjustmentSet.of(v for v in self.members if v not in drop)

    def labels(self, dag: "CausalDag") -> tuple[str, ...]:
        return tuple(dag.label(v) for v in self.members)

    def render(self, dag: "CausalDag") -> str:
        """'+'-joined labels; the empty set renders as an empty string."""
        return "+".join(self.labels(dag))


@dataclass(frozen=True)
class CausalDag:
    """A directed acyclic graph with designated treatment and outcome.

    ``treatment_edge_removed`` marks the derived graph obtained by deleting
    the treatment->outcome edge; validity checks and quantified queries are
    evaluated on that graph.
    """

    labels: tuple[str, ...]
    edges: tuple[tuple[int, int], ...]
    treatment: int
    outcome: int
    treatment_edge_removed: bool = False

    def __post_init__(self) -> None:
        d = len(self.labels)
        if d < 2:
            raise GraphError("graph needs at least treatment and outcome nodes")
        if len(set(self.labels)) != d:
            raise GraphError("node labels must be unique")
        for lab in self.labels:
            if not lab or _LABEL_FORBIDDEN & set(lab):
                raise GraphError(f"invalid node label {lab!r}")
        for v in (self.treatment, self.outcome):
            if not 0 <= v < d:
                raise GraphError(f"node index {v} out of range")
        if self.treatment == self.outcome:
            raise GraphError("treatment and outcome must differ")

        seen = set()
        for p, c in self.edges:
            if not (0 <= p < d and 0 <= c < d):
                raise GraphError(f"edge ({p}, {c}) references unknown node")
            if p == c:
                raise GraphError(f"self-loop on node {self.labels[p]}")
            if (p, c) in seen:
                raise GraphError(f"duplicate edge {self.labels[p]}->{self.labels[c]}")
            seen.add((p, c))
        object.__setattr__(self, "edges", tuple(sorted(self.edges)))

        ate_edge = (self.treatment, self.outcome)
        if self.treatment_edge_removed:
            if ate_edge in seen:
                raise GraphError("derived graph must not contain the treatment->outcome edge")
        elif ate_edge not in seen:
            raise GraphError(
                f"edge {self.labels[self.treatment]}->{self.labels[self.outcome]} is required"
            )

        self._check_acyclic()

        # Pre-treatment assumption: no covariate is a descendant of the
        # treatment, so De(treatment) is at most {outcome}.
        bad = self._raw_descendants(self.treatment) - {self.outcome}
        if bad:
            names = ", ".join(self.labels[v] for v in sorted(bad))
            raise GraphError(f"covariates must not descend from the treatment: {names}")

    # -- basic structure ---------------------------------------------------

    @property
    def node_count(self) -> int:
        return len(self.labels)

    @cached_property
    def covariates(self) -> tuple[int, ...]:
        return tuple(
            v for v in range(self.node_count) if v not in (self.treatment, self.outcome)
        )

    @cached_property
    def parents(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in range(self.node_count)]
        for p, c in self.edges:
            out[c].append(p)
        return tuple(tuple(sorted(ps)) for ps in out)

    @cached_property
    def children(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in range(self.node_count)]
        for p, c in self.edges:
            out[p].append(c)
        return tuple(tuple(sorted(cs)) for cs in out)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise GraphError(f"unknown node label {label!r}") from None

    def label(self, v: int) -> str:
        self._check_node(v)
        return self.labels[v]

    def _check_node(self, v: int) -> None:
        if not 0 <= v < self.node_count:
            raise GraphError(f"unknown node index {v}")

    def _check_covariates(self, vs: Iterable[int], what: str = "set") -> frozenset[int]:
        out = frozenset(int(v) for v in vs)
        for v in out:
            self._check_node(v)
            if v in (self.treatment, self.outcome):
                raise GraphError(
                    f"{what} must not contain treatment or outcome ({self.labels[v]})"
                )
        return out

    @cached_property
    def topological_order(self) -> tuple[int, ...]:
        indeg = [len(ps) for ps in self.parents]
        ready = sorted(v for v in range(self.node_count) if indeg[v] == 0)
        order: list[int] = []
        queue = deque(ready)
        while queue:
            v = queue.popleft()
            order.append(v)
            pending = []
            for c in self.children[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    pending.append(c)
            for c in sorted(pending):
                queue.append(c)
        return tuple(order)

    def _check_acyclic(self) -> None:
        # Kahn's algorithm without the cached adjacency (called pre-cache).
        d = self.node_count
        indeg = [0] * d
        children: list[list[int]] = [[] for _ in range(d)]
        for p, c in self.edges:
            indeg[c] += 1
            children[p].append(c)
        queue = deque(v for v in range(d) if indeg[v] == 0)
        seen = 0
        while queue:
            v = queue.popleft()
            seen += 1
            for c in children[v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    queue.append(c)
        if seen != d:
            raise GraphError("graph contains a directed cycle")

    def _raw_descendants(self, v: int) -> set[int]:
        children: list[list[int]] = [[] for _ in range(self.node_count)]
        for p, c in self.edges:
            children[p].append(c)
        out: set[int] = set()
        stack = [v]
        while stack:
            u = stack.pop()
            for c in children[u]:
                if c not in out:
                    out.add(c)
                    stack.append(c)
        out.discard(v)
        return out

    @cached_property
    def _descendant_map(self) -> tuple[frozenset[int], ...]:
        """Descendants of every node (excluding the node itself)."""
        desc: list[set[int]] = [set() for _ in range(self.node_count)]
        for v in reversed(self.topological_order):
            acc: set[int] = set()
            for c in self.children[v]:
                acc.add(c)
                acc |= desc[c]
            desc[v] = acc
        return tuple(frozenset(s) for s in desc)

    @cached_property
    def without_treatment_edge(self) -> "CausalDag":
        if self.treatment_edge_removed:
            return self
        return remove_treatment_edge(self)


# -- operations -------------------------------------------------------------


def descendants(g: CausalDag, v: int) -> frozenset[int]:
    """Nodes reachable from ``v`` by a directed path of length >= 1."""
    g._check_node(v)
    return g._descendant_map[v]


def remove_treatment_edge(g: CausalDag) -> CausalDag:
    """The derived graph with the treatment->outcome edge deleted."""
    if g.treatment_edge_removed:
        raise GraphError("treatment->outcome edge already removed")
    edges = tuple(e for e in g.edges if e != (g.treatment, g.outcome))
    return CausalDag(g.labels, edges, g.treatment, g.outcome, treatment_edge_removed=True)


def d_separated(g: CausalDag, x: int, y: int, z: Iterable[int] = ()) -> bool:
    """Whether every path between ``x`` and ``y`` is blocked given ``z``.

    Reachability-based (ball-passing) algorithm: linear in the graph size.
    The exhaustive path-enumeration form lives in the test suite as the
    independent oracle for this function.
    """
    g._check_node(x)
    g._check_node(y)
    if x == y:
        raise GraphError("d-separation endpoints must differ")
    zset = frozenset(int(v) for v in z)
    for v in zset:
        g._check_node(v)
    if x in zset or y in zset:
        raise GraphError("conditioning set overlaps an endpoint")

    # Nodes with themselves or a descendant in z, i.e. ancestors of z.
    open_collider = set(zset)
    stack = list(zset)
    while stack:
        v = stack.pop()
        for p in g.parents[v]:
            if p not in open_collider:
                open_collider.add(p)
                stack.append(p)

    up, down = 0, 1  # up: entered from a child; down: entered from a parent
    queue: deque[tuple[int, int]] = deque([(x, up)])
    visited: set[tuple[int, int]] = set()
    while queue:
        v, direction = queue.popleft()
        if v == y:
            return False
        if (v, direction) in visited:
            continue
        visited.add((v, direction))
        if direction == up and v not in zset:
            for p in g.parents[v]:
                queue.append((p, up))
            for c in g.children[v]:
                queue.append((c, down))
        elif direction == down:
            if v not in zset:
                for c in g.children[v]:
                    queue.append((c, down))
            if v in open_collider:
                for p in g.parents[v]:
                    queue.append((p, up))
    return True


def exists_open_given_some_conditioning(
    g: CausalDag,
    x: int,
    y: int,
    forced_in: Iterable[int] = (),
    forced_out: Iterable[int] = (),
    force: bool = False,
) -> bool:
    """Whether some admissible conditioning set d-connects ``x`` and ``y``.

    Decides the existential quantifier over conditioning sets Z with
    forced_in <= Z and Z disjoint from forced_out (treatment and outcome are
    never admissible, regardless of ``forced_out``).  A simple path witnesses
    such a Z exactly when (a) no forced-in node sits on it as a non-collider
    and (b) every collider on it has itself or a descendant among the
    admissible nodes.  Negating the result decides the dual universal
    quantifier ("d-separated for every Z") used by the variable screens.
    """
    g._check_node(x)
    g._check_node(y)
    if x == y:
        raise GraphError("endpoints must differ")
    if len(g.covariates) > QUANTIFIED_QUERY_COVARIATE_LIMIT and not force:
        raise EnumerationLimitError(
            f"quantified query on {len(g.covariates)} covariates exceeds the "
            f"limit of {QUANTIFIED_QUERY_COVARIATE_LIMIT}; pass force=True to override"
        )
    forced = g._check_covariates(forced_in, "forced_in")
    if x in forced or y in forced:
        raise GraphError("forced_in overlaps an endpoint")
    out = frozenset(int(v) for v in forced_out)
    for v in out:
        g._check_node(v)
    if forced & out:
        raise GraphError("forced_in and forced_out overlap")
    allowed = frozenset(g.covariates) - out
    desc = g._descendant_map
    special = (g.treatment, g.outcome)

    def collider_openable(c: int) -> bool:
        ok = c in allowed or not allowed.isdisjoint(desc[c])
        if not out:
            # With no extra exclusions, the pre-treatment assumption makes a
            # collider openable exactly when it is a covariate: the treatment
            # has no children here and the outcome has no covariate
            # descendants.
            assert ok == (c not in special)
        return ok

    # DFS over simple paths.  The role of an intermediate node (collider or
    # not) is determined by the orientations of the two path edges at it, so
    # constraints for the current node are checked when the next hop is
    # chosen.
    on_path = {x}

    def walk(cur: int, entered_incoming: bool | None) -> bool:
        neighbours = [(p, True) for p in g.parents[cur]] + [
            (c, False) for c in g.children[cur]
        ]
        for nxt, via_parent in sorted(neighbours):
            if nxt in on_path:
                continue
            if entered_incoming is not None:  # cur is an intermediate node
                is_collider = entered_incoming and via_parent
                if is_collider:
                    if not collider_openable(cur):
                        continue
                elif cur in forced:
                    continue
            if nxt == y:
                return True
            on_path.add(nxt)
            # Arriving at nxt via parent means traversing nxt->cur (an edge
            # leaving nxt); via child means cur->nxt enters nxt.
            if walk(nxt, entered_incoming=not via_parent):
                return True
            on_path.discard(nxt)
        return False

    return walk(x, None)


def is_valid_adjustment_set(g: CausalDag, z: Iterable[int]) -> bool:
    """Whether adjusting for ``z`` removes all treatment-outcome confounding.

    Under the pre-treatment assumption this is equivalent to d-separation of
    treatment and outcome given ``z`` in the derived graph.
    """
    zset = g._check_covariates(z, "adjustment set")
    gp = g.without_treatment_edge
    return d_separated(gp, gp.treatment, gp.outcome, zset)


def optimal_adjustment_set(g: CausalDag) -> AdjustmentSet:
    """The valid adjustment set with minimal asymptotic variance.

    Computed as the parents of the mediator closure (outcome included) minus
    the mediators and the treatment.  Under the pre-treatment assumption the
    closure is just the outcome, so this collapses to the outcome's parents
    without the treatment.
    """
    if g.treatment_edge_removed:
        raise GraphError("optimal set is defined on the causal graph, not the derived one")
    downstream = descendants(g, g.treatment)
    mediators = {v for v in downstream if v == g.outcome or g.outcome in descendants(g, v)}
    out: set[int] = set()
    for m in mediators:
        out.update(g.parents[m])
    out -= mediators
    out.discard(g.treatment)
    return AdjustmentSet.of(out)


def irreducible_completion(
    g: CausalDag, k: Iterable[int] = (), order: Iterable[int] | None = None
) -> AdjustmentSet:
    """A smallest-by-deletion set U making ``k | U`` a valid adjustment set.

    Starts from all remaining covariates and greedily deletes, by default in
    ascending index order, until no single further deletion preserves
    validity.  The result is one irreducible completion among possibly many;
    downstream population quantities must not depend on which one is found
    (asserted by the numerics tests).  If ``k`` is already valid the result
    is empty.
    """
    kset = g._check_covariates(k, "base set")
    if is_valid_adjustment_set(g, kset):
        return AdjustmentSet()
    extra = [v for v in g.covariates if v not in kset]
    if order is not None:
        explicit = [int(v) for v in order]
        if sorted(explicit) != sorted(extra):
            raise GraphError("order must be a permutation of the remaining covariates")
        extra = explicit
    current = kset | set(extra)
    # Pre-treatment assumption: conditioning on every covariate is valid.
    assert is_valid_adjustment_set(g, current)
    changed = True
    while changed:
        changed = False
        for v in extra:
            if v in current and is_valid_adjustment_set(g, current - {v}):
                current = current - {v}
                changed = True
    return AdjustmentSet.of(current - kset)
