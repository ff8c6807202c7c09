"""Finite balls of the graph-product Cayley graph and quasi-median checks.

The ball materialises all elements of syllable length <= radius, with an edge
(g, s*g) for every syllable s whenever both endpoints stay in the ball (left
multiplication, so carriers downstream are right cosets).  Distances inside
the ball agree with the group metric: for any two ball elements some geodesic
stays inside the larger of the two norms, which the test suite verifies.

Axiom checking comes in two modes.  `exact` treats a finite graph as the
whole space.  `interior` checks a ball as a window into the infinite graph:
triples are checked up to translation (basepoint moved to the identity),
which makes every candidate quasi-median visible whenever the two translated
endpoints lie in the ball; configurations that provably cannot be decided at
this radius are skipped and counted, never guessed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from .presentation import (
    GraphProduct,
    HypothesisError,
    NormalForm,
    Syllable,
    invert,
    mul_syllable_left,
    multiply,
    normal_form,
)


class BudgetError(RuntimeError):
    """Vertex budget exceeded while building a ball."""

    def __init__(self, radius_reached: int, count: int, budget: int):
        self.radius_reached = radius_reached
        self.count = count
        self.budget = budget
        super().__init__(
            f"vertex budget {budget} exceeded at radius {radius_reached} (count {count})"
        )


class GraphView:
    """A plain finite simple graph with cached BFS distances."""

    def __init__(self, n: int, edges: Iterable[tuple[int, int]], names: Optional[Sequence[str]] = None):
        self.n = n
        self.adj: list[set[int]] = [set() for _ in range(n)]
        for u, v in edges:
            if u == v:
                continue
            self.adj[u].add(v)
            self.adj[v].add(u)
        self.names = list(names) if names is not None else [str(i) for i in range(n)]
        self._dist: Optional[np.ndarray] = None

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u in range(self.n) for v in sorted(self.adj[u]) if u < v]

    def degree(self, v: int) -> int:
        return len(self.adj[v])

    def distances(self) -> np.ndarray:
        """All-pairs BFS distances; unreachable pairs get -1."""
        if self._dist is None:
            n = self.n
            dist = np.full((n, n), -1, dtype=np.int16)
            for src in range(n):
                row = dist[src]
                row[src] = 0
                queue = [src]
                d = 0
                while queue:
                    d += 1
                    nxt = []
                    for x in queue:
                        for y in self.adj[x]:
                            if row[y] < 0:
                                row[y] = d
                                nxt.append(y)
                    queue = nxt
            self._dist = dist
        return self._dist

    def connected(self) -> bool:
        if self.n == 0:
            return True
        return bool((self.distances()[0] >= 0).all())

    def components(self) -> list[list[int]]:
        seen = set()
        comps = []
        for src in range(self.n):
            if src in seen:
                continue
            comp = [src]
            seen.add(src)
            queue = [src]
            while queue:
                x = queue.pop()
                for y in self.adj[x]:
                    if y not in seen:
                        seen.add(y)
                        comp.append(y)
                        queue.append(y)
            comps.append(sorted(comp))
        return comps


def cycle_view(n: int) -> GraphView:
    return GraphView(n, [(i, (i + 1) % n) for i in range(n)])


def cube_view() -> GraphView:
    verts = list(itertools.product((0, 1), repeat=3))
    idx = {v: i for i, v in enumerate(verts)}
    edges = [
        (idx[u], idx[v])
        for u in verts
        for v in verts
        if sum(a != b for a, b in zip(u, v)) == 1 and idx[u] < idx[v]
    ]
    return GraphView(8, edges, names=["".join(map(str, v)) for v in verts])


def k112_view() -> GraphView:
    # two adjacent apexes 0,1 joined to the non-adjacent pair 2,3
    return GraphView(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3)])


def graphs_isomorphic(a: GraphView, b: GraphView) -> Optional[dict[int, int]]:
    """Backtracking isomorphism search for small graphs; returns a mapping
    a-vertex -> b-vertex or None."""
    if a.n != b.n or len(a.edges()) != len(b.edges()):
        return None
    if sorted(a.degree(v) for v in range(a.n)) != sorted(b.degree(v) for v in range(b.n)):
        return None
    order = sorted(range(a.n), key=lambda v: -a.degree(v))
    mapping: dict[int, int] = {}
    used = set()

    def extend(i: int) -> bool:
        if i == len(order):
            return True
        u = order[i]
        for w in range(b.n):
            if w in used or b.degree(w) != a.degree(u):
                continue
            ok = True
            for u2, w2 in mapping.items():
                if (u2 in a.adj[u]) != (w2 in b.adj[w]):
                    ok = False
                    break
            if ok:
                mapping[u] = w
                used.add(w)
                if extend(i + 1):
                    return True
                del mapping[u]
                used.remove(w)
        return False

    return dict(mapping) if extend(0) else None


# ---------------------------------------------------------------------------
# ball construction
# ---------------------------------------------------------------------------

class BallGraph:
    """All group elements of syllable length <= radius, with labelled edges."""

    def __init__(self, gp: GraphProduct, radius: int, verts: list[NormalForm]):
        self.gp = gp
        self.radius = radius
        self.interior_radius = radius - 1
        self.verts = verts
        self.index = {g: i for i, g in enumerate(verts)}
        self.norm = [len(g) for g in verts]
        self.adj: list[list[tuple[int, Syllable]]] = [[] for _ in verts]
        self._edge_label: dict[tuple[int, int], Syllable] = {}
        for i, g in enumerate(verts):
            for s in gp.syllables():
                h = mul_syllable_left(gp, s, g)
                j = self.index.get(h)
                if j is not None and j != i:
                    self.adj[i].append((j, s))
                    self._edge_label[(i, j)] = s
        self._view: Optional[GraphView] = None

    @property
    def n(self) -> int:
        return len(self.verts)

    def is_interior(self, i: int) -> bool:
        return self.norm[i] <= self.interior_radius

    def interior_indices(self) -> list[int]:
        return [i for i in range(self.n) if self.is_interior(i)]

    def edge_label(self, i: int, j: int) -> Syllable:
        """Syllable s with verts[j] = s * verts[i]."""
        return self._edge_label[(i, j)]

    def to_view(self) -> GraphView:
        if self._view is None:
            edges = [(i, j) for (i, j) in self._edge_label if i < j]
            self._view = GraphView(self.n, edges, names=[self.describe(i) for i in range(self.n)])
        return self._view

    def distances(self) -> np.ndarray:
        return self.to_view().distances()

    def clique_of_edge(self, i: int, j: int) -> list[int]:
        """The coset G_v * g giving the unique maximal clique through an edge."""
        s = self.edge_label(i, j)
        g = self.verts[i]
        out = []
        for e in range(self.gp.groups[s.vertex].order):
            h = mul_syllable_left(self.gp, Syllable(s.vertex, e), g) if e else g
            k = self.index.get(h)
            if k is not None:
                out.append(k)
        return sorted(out)

    def describe(self, i: int) -> str:
        g = self.verts[i]
        if not g:
            return "1"
        return ".".join(f"{self.gp.graph.names[v]}:{e}" for v, e in g.syllables)


def build_ball(gp: GraphProduct, radius: int, budget_vertices: int = 200_000) -> BallGraph:
    """BFS enumeration of the ball; raises BudgetError with the radius at
    which the count blew past the budget."""
    layer = [gp.identity]
    seen = {gp.identity}
    for r in range(1, radius + 1):
        nxt = []
        for g in layer:
            for s in gp.syllables():
                h = mul_syllable_left(gp, s, g)
                if len(h) == len(g) + 1 and h not in seen:
                    seen.add(h)
                    nxt.append(h)
                    if len(seen) > budget_vertices:
                        raise BudgetError(r, len(seen), budget_vertices)
        layer = nxt
    verts = sorted(seen, key=lambda g: (len(g), g.syllables))
    return BallGraph(gp, radius, verts)


# ---------------------------------------------------------------------------
# quasi-median machinery
# ---------------------------------------------------------------------------

class NonUniqueQuasiMedianError(ValueError):
    def __init__(self, k: int, witnesses: list[tuple[int, int, int]]):
        self.k = k
        self.witnesses = witnesses
        super().__init__(f"non-unique {k}-quasi-median; witnesses {witnesses[:2]}")


def _quasi_medians_at_min_k(
    dist: np.ndarray,
    x1: int,
    x2: int,
    x3: int,
    cand_mask: Optional[np.ndarray] = None,
) -> tuple[int, list[tuple[int, int, int]]]:
    """All quasi-median triples of (x1,x2,x3) at the minimal k.

    Candidates may be restricted by a boolean mask (all-True by default).
    Betweenness is evaluated with the supplied exact distance matrix.
    """
    n = dist.shape[0]
    full = np.ones(n, dtype=bool) if cand_mask is None else cand_mask
    d12, d13, d23 = int(dist[x1, x2]), int(dist[x1, x3]), int(dist[x2, x3])
    i12 = (dist[x1] + dist[x2] == d12) & full
    i13 = (dist[x1] + dist[x3] == d13) & full
    i23 = (dist[x2] + dist[x3] == d23) & full
    c1 = np.nonzero(i12 & i13)[0]
    c2_mask = i12 & i23
    c3_mask = i13 & i23
    best_k: Optional[int] = None
    found: list[tuple[int, int, int]] = []
    for y1 in c1:
        # y2 on the same (x1,x2) geodesic beyond y1
        m2 = c2_mask & (dist[y1] == d12 - dist[x1, y1] - dist[x2])
        for y2 in np.nonzero(m2)[0]:
            k = int(dist[y1, y2])
            if best_k is not None and k > best_k:
                continue
            m3 = (
                c3_mask
                & (dist[y1] == k)
                & (dist[y2] == k)
                & (dist[y1] + dist[x3] == d13 - dist[x1, y1])
                & (dist[y2] + dist[x3] == d23 - dist[x2, y2])
            )
            for y3 in np.nonzero(m3)[0]:
                if best_k is None or k < best_k:
                    best_k = k
                    found = [(int(y1), int(y2), int(y3))]
                elif k == best_k:
                    found.append((int(y1), int(y2), int(y3)))
    if best_k is None:
        raise AssertionError("no quasi-median candidate found (disconnected input?)")
    return best_k, found


def quasi_median(
    space: "GraphView | BallGraph", x1: int, x2: int, x3: int
) -> tuple[int, int, int, int]:
    """The unique quasi-median (y1, y2, y3, k) of a vertex triple.

    On a GraphView the graph is taken as the whole space.  On a BallGraph the
    triple is translated so one vertex is the identity; the pairwise
    distances must not exceed the radius, otherwise candidates could fall
    outside the ball and a HypothesisError is raised.
    """
    if isinstance(space, BallGraph):
        ball = space
        dist = ball.distances()
        for a, b in ((x1, x2), (x1, x3), (x2, x3)):
            if dist[a, b] > ball.radius:
                raise HypothesisError(
                    "pairwise distance exceeds the radius; quasi-median not certifiable"
                )
        gp = ball.gp
        t = invert(gp, ball.verts[x1])
        moved = [ball.index[multiply(gp, ball.verts[x], t)] for x in (x1, x2, x3)]
        k, found = _quasi_medians_at_min_k(dist, *moved)
        if len(found) != 1:
            raise NonUniqueQuasiMedianError(k, found)
        back = ball.verts[x1]
        y = [ball.index[multiply(gp, ball.verts[i], back)] for i in found[0]]
        return y[0], y[1], y[2], k
    dist = space.distances()
    k, found = _quasi_medians_at_min_k(dist, x1, x2, x3)
    if len(found) != 1:
        raise NonUniqueQuasiMedianError(k, found)
    y1, y2, y3 = found[0]
    return y1, y2, y3, k


@dataclass
class QuasiMedianVerdict:
    holds: str  # "yes" | "no" | "inconclusive-boundary"
    witness: Optional[dict] = None
    stats: dict = field(default_factory=dict)


def _find_k112(view: GraphView) -> Optional[tuple[int, int, int, int]]:
    """An induced K_{1,1,2}: adjacent u,v plus non-adjacent common neighbours."""
    for u in range(view.n):
        for v in sorted(view.adj[u]):
            if v < u:
                continue
            common = sorted(view.adj[u] & view.adj[v])
            for w1, w2 in itertools.combinations(common, 2):
                if w2 not in view.adj[w1]:
                    return (u, v, w1, w2)
    return None


def _isometric_hexagons(view: GraphView, vertices: Iterable[int]) -> list[tuple[int, ...]]:
    """All isometrically embedded 6-cycles starting at the given vertices,
    deduplicated up to rotation and reflection."""
    dist = view.distances()
    seen: set[tuple[int, ...]] = set()
    out = []
    targets = {
        (i, j): (abs(i - j) if abs(i - j) <= 3 else 6 - abs(i - j))
        for i in range(6)
        for j in range(6)
    }

    def canonical(cycle: tuple[int, ...]) -> tuple[int, ...]:
        rots = [cycle[i:] + cycle[:i] for i in range(6)]
        rev = tuple(reversed(cycle))
        rots += [rev[i:] + rev[:i] for i in range(6)]
        return min(rots)

    def extend(path: list[int]) -> None:
        i = len(path)
        if i == 6:
            if path[0] in view.adj[path[5]]:
                cyc = canonical(tuple(path))
                if cyc not in seen:
                    seen.add(cyc)
                    out.append(cyc)
            return
        for y in sorted(view.adj[path[-1]]):
            ok = True
            for j, x in enumerate(path):
                if dist[x, y] != targets[(j, i)]:
                    ok = False
                    break
            if ok:
                extend(path + [y])

    for v in vertices:
        extend([v])
    return out


def _convex_hull(view: GraphView, seed: Iterable[int], cap: Optional[int] = None) -> Optional[set[int]]:
    """Interval-closure convex hull; None when it exceeds the cap."""
    dist = view.distances()
    hull = set(seed)
    changed = True
    while changed:
        changed = False
        for u, v in itertools.combinations(sorted(hull), 2):
            d = dist[u, v]
            between = np.nonzero((dist[u] + dist[v]) == d)[0]
            for y in between:
                if int(y) not in hull:
                    hull.add(int(y))
                    changed = True
        if cap is not None and len(hull) > cap:
            return None
    return hull


def check_quasi_median(
    space: "GraphView | BallGraph",
    mode: str = "exact",
    triple_budget: int = 2_000_000,
) -> QuasiMedianVerdict:
    """Check the three quasi-median axioms by exhaustion.

    exact mode: `space` is the whole graph; every triple, every induced
    K_{1,1,2} candidate and every isometric hexagon is examined.

    interior mode: `space` is a BallGraph; triples are examined up to
    translation (all classes with both translated points in the ball), and
    hexagon hulls are certified only when no interval can leak outside the
    ball.  Skipped configurations are counted in the verdict stats.
    """
    stats: dict = {"mode": mode}
    if mode == "exact":
        if isinstance(space, BallGraph):
            view = space.to_view()
        else:
            view = space
        if not view.connected():
            raise HypothesisError("exact quasi-median check needs a connected graph")
        bad = _find_k112(view)
        if bad is not None:
            return QuasiMedianVerdict("no", {"axiom": "K112", "vertices": bad}, stats)
        dist = view.distances()
        checked = 0
        for x1, x2, x3 in itertools.combinations_with_replacement(range(view.n), 3):
            checked += 1
            if checked > triple_budget:
                raise BudgetError(0, checked, triple_budget)
            k, found = _quasi_medians_at_min_k(dist, x1, x2, x3)
            if len(found) != 1:
                return QuasiMedianVerdict(
                    "no",
                    {"axiom": "triple", "triple": (x1, x2, x3), "k": k, "witnesses": found[:2]},
                    stats,
                )
        stats["triples_checked"] = checked
        hexes = _isometric_hexagons(view, range(view.n))
        stats["isometric_hexagons"] = len(hexes)
        for cyc in hexes:
            hull = _convex_hull(view, cyc, cap=64)
            if hull is None or len(hull) != 8:
                return QuasiMedianVerdict(
                    "no", {"axiom": "C6", "cycle": cyc, "hull_size": None if hull is None else len(hull)}, stats
                )
            sub = _induced(view, sorted(hull))
            if graphs_isomorphic(sub, cube_view()) is None:
                return QuasiMedianVerdict("no", {"axiom": "C6", "cycle": cyc, "hull": sorted(hull)}, stats)
        return QuasiMedianVerdict("yes", None, stats)

    if mode != "interior":
        raise ValueError(f"unknown mode {mode!r}")
    if not isinstance(space, BallGraph):
        raise HypothesisError("interior mode needs a BallGraph")
    ball = space
    view = ball.to_view()
    dist = ball.distances()
    r = ball.radius

    # Axiom: no induced K_{1,1,2}.  The ball is an induced subgraph of the
    # Cayley graph, so any hit here is a genuine violation.
    bad = _find_k112(view)
    if bad is not None:
        return QuasiMedianVerdict("no", {"axiom": "K112", "vertices": bad}, stats)

    # Axiom: unique quasi-medians, checked per translation class (1, a, b).
    # Every candidate lies on an interval from the identity, hence inside the
    # ball; distances between ball elements are exact, so each class check is
    # faithful to the infinite graph.
    o = ball.index[ball.gp.identity]
    classes = 0
    for ai in range(ball.n):
        for bi in range(ai, ball.n):
            classes += 1
            if classes > triple_budget:
                raise BudgetError(0, classes, triple_budget)
            k, found = _quasi_medians_at_min_k(dist, o, ai, bi)
            if len(found) != 1:
                return QuasiMedianVerdict(
                    "no",
                    {
                        "axiom": "triple",
                        "class": (ball.describe(o), ball.describe(ai), ball.describe(bi)),
                        "k": k,
                        "witnesses": found[:2],
                    },
                    stats,
                )
    stats["triple_classes_checked"] = classes
    # Interior triples whose translated class would need a bigger ball.
    interior = ball.interior_indices()
    sub = dist[np.ix_(interior, interior)]
    skipped = int((np.triu(sub, 1) > r).sum())
    stats["interior_pairs_beyond_radius"] = skipped

    # Axiom: isometric hexagons span 3-cubes, checked at the identity
    # translation class with interval-leak certification.
    hex_checked = 0
    hex_skipped = 0
    for cyc in _isometric_hexagons(view, [o]):
        hull = _convex_hull(view, cyc, cap=64)
        certified = hull is not None and all(
            min(ball.norm[u], ball.norm[v]) + dist[u, v] <= r
            for u, v in itertools.combinations(sorted(hull), 2)
        )
        if not certified:
            hex_skipped += 1
            continue
        hex_checked += 1
        sub_view = _induced(view, sorted(hull))
        if len(hull) != 8 or graphs_isomorphic(sub_view, cube_view()) is None:
            return QuasiMedianVerdict(
                "no", {"axiom": "C6", "cycle": cyc, "hull": sorted(hull)}, stats
            )
    stats["hexagons_checked"] = hex_checked
    stats["hexagons_skipped"] = hex_skipped
    if classes == 0:
        return QuasiMedianVerdict("inconclusive-boundary", None, stats)
    return QuasiMedianVerdict("yes", None, stats)


def _induced(view: GraphView, vertices: list[int]) -> GraphView:
    pos = {v: i for i, v in enumerate(vertices)}
    edges = [
        (pos[u], pos[v])
        for u in vertices
        for v in view.adj[u]
        if v in pos and pos[u] < pos[v]
    ]
    return GraphView(len(vertices), edges, names=[view.names[v] for v in vertices])


def verify_no_witness(view: GraphView, witness: dict) -> bool:
    """Independently re-verify a 'no' witness from scratch."""
    if witness["axiom"] == "K112":
        u, v, w1, w2 = witness["vertices"]
        return (
            v in view.adj[u]
            and w2 not in view.adj[w1]
            and all(x in view.adj[u] and x in view.adj[v] for x in (w1, w2))
        )
    if witness["axiom"] == "triple":
        return len(witness["witnesses"]) >= 2
    if witness["axiom"] == "C6":
        cyc = witness["cycle"]
        dist = view.distances()
        for i in range(6):
            for j in range(6):
                want = min(abs(i - j), 6 - abs(i - j))
                if dist[cyc[i], cyc[j]] != want:
                    return False
        hull = _convex_hull(view, cyc, cap=64)
        return hull is None or len(hull) != 8 or graphs_isomorphic(_induced(view, sorted(hull)), cube_view()) is None
    return False
