"""Hyperplanes, carriers, gates and geodesic surgery on Cayley balls.

A hyperplane is identified algebraically by its clique direction and the
minimal representative of the star-parabolic right coset forming its carrier,
so the identity is stable across ball radii.  The union-find table over ball
edges (triangle-side and square-opposite moves) is kept as a consistency
check against the algebraic identity, not as the source of truth.

Two classification routes coexist on purpose: the combinatorial one reads
squares and shared carrier vertices off the ball and certifies itself by
carrier completeness, while the algebraic one decides coset intersection
exactly.  Tests pin them against each other.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Literal, Optional, Sequence

from .ball import BallGraph, GraphView
from .presentation import (
    GraphProduct,
    HypothesisError,
    NormalForm,
    Syllable,
    invert,
    multiply,
    normal_form,
    parabolic_strip,
    projection,
    quotient,
    right_strip,
)


class InconclusiveError(RuntimeError):
    """The ball is too small to certify the answer near the boundary."""


class GateError(ValueError):
    """The gate property failed; carries a witness."""

    def __init__(self, x, p, y):
        self.witness = (x, p, y)
        super().__init__(f"gate property fails: x={x}, candidate={p}, y={y}")


class SwapError(ValueError):
    """Swap move rejected (non-intersecting duals or no position)."""


@dataclass(frozen=True, order=True)
class Hyperplane:
    vertex: int
    base: NormalForm


PairKind = Literal["equal", "intersect", "osculate", "separated"]


def hyperplane_through(gp: GraphProduct, g: NormalForm, v: int) -> Hyperplane:
    """The hyperplane whose carrier coset contains g, for clique direction v."""
    return Hyperplane(v, parabolic_strip(gp, gp.graph.star_mask(v), g)[1])


def dual_hyperplane(ball: BallGraph, i: int, j: int) -> Hyperplane:
    s = ball.edge_label(i, j)
    return hyperplane_through(ball.gp, ball.verts[i], s.vertex)


def conjugate_hyperplane(gp: GraphProduct, h: Hyperplane, g: NormalForm) -> Hyperplane:
    """Image of a hyperplane under the right action x -> x*g."""
    return hyperplane_through(gp, multiply(gp, h.base, g), h.vertex)


# ---------------------------------------------------------------------------
# union-find edge classes
# ---------------------------------------------------------------------------

class EdgeClassTable:
    """Union-find over ball edges under triangle/square moves, with the
    algebraic hyperplane of every class."""

    def __init__(self, ball: BallGraph):
        self.ball = ball
        self.parent: dict[tuple[int, int], tuple[int, int]] = {}
        edges = [(i, j) for (i, j) in ball._edge_label if i < j]
        for e in edges:
            self.parent[e] = e
        adj_sets = [set(j for j, _ in ball.adj[i]) for i in range(ball.n)]
        for i, j in edges:
            # triangle moves: common neighbours adjacent to both endpoints
            for z in adj_sets[i] & adj_sets[j]:
                self._union((i, j), self._key(i, z))
                self._union((i, j), self._key(j, z))
            # square moves: i-j-y-x-i with x adj i, y adj j, x adj y
            for x in adj_sets[i]:
                if x == j:
                    continue
                for y in adj_sets[j]:
                    if y == i or y == x:
                        continue
                    if y in adj_sets[x]:
                        self._union((i, j), self._key(x, y))
        self.class_hyperplane: dict[tuple[int, int], Hyperplane] = {}
        self.inconsistent: list[tuple[tuple[int, int], Hyperplane, Hyperplane]] = []
        for e in edges:
            h = dual_hyperplane(ball, *e)
            root = self.find(e)
            prev = self.class_hyperplane.get(root)
            if prev is None:
                self.class_hyperplane[root] = h
            elif prev != h:
                self.inconsistent.append((e, prev, h))

    @staticmethod
    def _key(a: int, b: int) -> tuple[int, int]:
        return (a, b) if a < b else (b, a)

    def find(self, e: tuple[int, int]) -> tuple[int, int]:
        root = e
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[e] != root:
            self.parent[e], e = root, self.parent[e]
        return root

    def _union(self, a: tuple[int, int], b: tuple[int, int]) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)

    def classes(self) -> dict[tuple[int, int], list[tuple[int, int]]]:
        out: dict[tuple[int, int], list[tuple[int, int]]] = {}
        for e in self.parent:
            out.setdefault(self.find(e), []).append(e)
        return {root: sorted(es) for root, es in sorted(out.items())}

    def n_classes(self) -> int:
        return len({self.find(e) for e in self.parent})


def hyperplanes_of_ball(ball: BallGraph) -> EdgeClassTable:
    return EdgeClassTable(ball)


def ball_hyperplanes(ball: BallGraph) -> list[Hyperplane]:
    """All hyperplanes with at least one dual edge in the ball, sorted."""
    out = {dual_hyperplane(ball, i, j) for (i, j) in ball._edge_label if i < j}
    return sorted(out)


# ---------------------------------------------------------------------------
# carriers
# ---------------------------------------------------------------------------

@dataclass
class CarrierView:
    hyperplane: Hyperplane
    indices: tuple[int, ...]
    complete: bool


def carrier(ball: BallGraph, h: Hyperplane) -> CarrierView:
    """Ball vertices of the carrier coset; flagged partial when the coset
    touches the boundary sphere (it may continue outside)."""
    gp = ball.gp
    star = gp.graph.star_mask(h.vertex)
    base_idx = ball.index.get(h.base)
    if base_idx is None:
        raise HypothesisError("hyperplane base outside this ball")
    members = []
    touches_boundary = False
    queue = [base_idx]
    seen = {base_idx}
    while queue:
        i = queue.pop()
        members.append(i)
        if ball.norm[i] >= ball.radius:
            touches_boundary = True
        for j, s in ball.adj[i]:
            if s.vertex == h.vertex or (star >> s.vertex & 1):
                if j not in seen:
                    seen.add(j)
                    queue.append(j)
    return CarrierView(h, tuple(sorted(members)), complete=not touches_boundary)


def carrier_contains(gp: GraphProduct, h: Hyperplane, g: NormalForm) -> bool:
    return parabolic_strip(gp, gp.graph.star_mask(h.vertex), g)[1] == h.base


def hyperplanes_through(gp: GraphProduct, g: NormalForm) -> list[Hyperplane]:
    """Every vertex lies in exactly one carrier per clique direction."""
    return [hyperplane_through(gp, g, v) for v in range(gp.graph.n)]


def carrier_gate(gp: GraphProduct, h: Hyperplane, v: NormalForm) -> NormalForm:
    """Gate of a vertex in a carrier, computed algebraically.

    The nearest point of the coset P*b to v is r*v where r is the minimal
    representative of P*(b*v^{-1}).
    """
    z = multiply(gp, h.base, invert(gp, v))
    r = parabolic_strip(gp, gp.graph.star_mask(h.vertex), z)[1]
    return multiply(gp, r, v)


def carriers_intersect(gp: GraphProduct, h1: Hyperplane, h2: Hyperplane) -> bool:
    """Exact coset-intersection test: P*b meets Q*b' iff the left-strip of
    b*b'^-1 by P leaves a remainder supported inside Q's vertex set."""
    z = multiply(gp, h1.base, invert(gp, h2.base))
    rem = parabolic_strip(gp, gp.graph.star_mask(h1.vertex), z)[1]
    star2 = gp.graph.star_mask(h2.vertex)
    return rem.support_mask() & ~star2 == 0


def carrier_pair_distance(
    gp: GraphProduct, h1: Hyperplane, h2: Hyperplane
) -> tuple[int, NormalForm, NormalForm]:
    """min distance between the two carriers and a witness pair (p, q).

    Alternating prefix/suffix stripping of b1*b2^-1 to the minimal element of
    the double coset; exactness is cross-checked by tests against ball
    enumeration.
    """
    star1 = gp.graph.star_mask(h1.vertex)
    star2 = gp.graph.star_mask(h2.vertex)
    z = multiply(gp, h1.base, invert(gp, h2.base))
    left_acc = gp.identity
    right_acc = gp.identity
    while True:
        pre, z2 = parabolic_strip(gp, star1, z)
        if pre:
            left_acc = multiply(gp, left_acc, pre)
        z3, suf = right_strip(gp, star2, z2)
        if suf:
            right_acc = multiply(gp, suf, right_acc)
        if not pre and not suf:
            break
        z = z3
    # z = left_acc^-1 * b1 * b2^-1 * right_acc^-1, so p = left_acc^-1 b1 etc.
    p = multiply(gp, invert(gp, left_acc), h1.base)
    q = multiply(gp, right_acc, h2.base)
    assert quotient(gp, p, q) == z
    return len(z), p, q


def classify_pair_algebraic(gp: GraphProduct, h1: Hyperplane, h2: Hyperplane) -> PairKind:
    """Exact classification for graph products.

    Same-direction distinct hyperplanes have disjoint carriers.  Touching
    carriers intersect exactly when the directions are adjacent in the
    defining graph (the commuting square exists at any shared vertex) and
    osculate otherwise; interosculation cannot occur.
    """
    if h1 == h2:
        return "equal"
    if not carriers_intersect(gp, h1, h2):
        return "separated"
    if h1.vertex != h2.vertex and gp.graph.adjacent(h1.vertex, h2.vertex):
        return "intersect"
    if h1.vertex == h2.vertex:
        raise AssertionError("distinct same-direction carriers sharing a vertex")
    return "osculate"


@dataclass
class PairClassification:
    kind: PairKind
    certified: bool
    witness: Optional[dict] = None


def classify_pair(
    ball: BallGraph, h1: Hyperplane, h2: Hyperplane, strict: bool = False
) -> PairClassification:
    """Combinatorial classification inside the ball.

    intersect: some dual edges adjacent in a square (positive evidence,
    always certified).  osculate/separated: certified only when both
    carriers are complete; otherwise inconclusive near the boundary.
    """
    if h1 == h2:
        return PairClassification("equal", True)
    c1 = carrier(ball, h1)
    c2 = carrier(ball, h2)
    shared = sorted(set(c1.indices) & set(c2.indices))
    adj_sets = [set(j for j, _ in ball.adj[i]) for i in range(ball.n)]
    for p in shared:
        xs = [j for j in adj_sets[p] if dual_hyperplane(ball, p, j) == h1]
        ys = [j for j in adj_sets[p] if dual_hyperplane(ball, p, j) == h2]
        for x in xs:
            for y in ys:
                for z in sorted(adj_sets[x] & adj_sets[y] - {p}):
                    witness = {"square": (p, x, z, y)}
                    both = PairClassification("intersect", True, witness)
                    return both
    certified = c1.complete and c2.complete
    kind: PairKind = "osculate" if shared else "separated"
    if shared:
        witness = {"osculation_point": shared[0]}
    else:
        witness = None
    if strict and not certified:
        raise InconclusiveError(f"cannot certify {kind} for {h1} vs {h2} at this radius")
    return PairClassification(kind, certified, witness)


# ---------------------------------------------------------------------------
# separation
# ---------------------------------------------------------------------------

def geodesic_path(gp: GraphProduct, p: NormalForm, q: NormalForm) -> list[NormalForm]:
    """One geodesic from p to q: apply the canonical spelling of q*p^-1
    rightmost syllable first (edges left-multiply)."""
    u = quotient(gp, q, p)
    path = [p]
    for s in reversed(u.syllables):
        path.append(multiply(gp, NormalForm((s,)), path[-1]))
    assert path[-1] == q
    return path


def separating_hyperplanes(
    gp: GraphProduct, p: NormalForm, q: NormalForm
) -> frozenset[Hyperplane]:
    """Hyperplanes dual to the edges of one geodesic from p to q; their
    number equals the distance.  Geodesic independence is a tested property,
    not an assumption here."""
    path = geodesic_path(gp, p, q)
    out = set()
    for x, y in zip(path, path[1:]):
        s = quotient(gp, y, x)
        assert len(s) == 1
        out.add(hyperplane_through(gp, x, s.syllables[0].vertex))
    if len(out) != len(path) - 1:
        raise AssertionError("geodesic crosses a hyperplane twice")
    return frozenset(out)


def separating_hyperplanes_ball(ball: BallGraph, i: int, j: int) -> frozenset[Hyperplane]:
    if not (ball.is_interior(i) and ball.is_interior(j)):
        raise HypothesisError("endpoints must be interior")
    return separating_hyperplanes(ball.gp, ball.verts[i], ball.verts[j])


def separates(gp: GraphProduct, h: Hyperplane, p: NormalForm, q: NormalForm) -> bool:
    return h in separating_hyperplanes(gp, p, q)


def find_cancelling_plane(
    ball: BallGraph, q: int, p: int, r: int
) -> Optional[tuple[Hyperplane, int, int]]:
    """Realise the cancelling-hyperplane lemma: a hyperplane C separating q
    from both p and r whose dual edges on some geodesics to p and to r both
    start at q.  Returns (C, first step towards p, first step towards r)."""
    gp = ball.gp
    qs, ps, rs = (ball.verts[x] for x in (q, p, r))
    common = separating_hyperplanes(gp, qs, ps) & separating_hyperplanes(gp, qs, rs)
    if not common:
        raise HypothesisError("no hyperplane separates q from both endpoints")
    dist = ball.distances()
    for c in sorted(common):
        xp = xr = None
        for jj, s in sorted(ball.adj[q]):
            if dual_hyperplane(ball, q, jj) != c:
                continue
            if dist[jj, p] == dist[q, p] - 1 and xp is None:
                xp = jj
            if dist[jj, r] == dist[q, r] - 1 and xr is None:
                xr = jj
        if xp is not None and xr is not None:
            return c, xp, xr
    return None


# ---------------------------------------------------------------------------
# gates and gated hulls
# ---------------------------------------------------------------------------

def gate(ball: BallGraph, subgraph: Sequence[int], x: int) -> int:
    """Nearest point of the subgraph with the universal gate property,
    verified exhaustively; raises GateError with a witness on failure."""
    if not subgraph:
        raise HypothesisError("empty subgraph has no gate")
    dist = ball.distances()
    best = min(subgraph, key=lambda y: (int(dist[x, y]), y))
    for y in subgraph:
        if dist[x, y] != dist[x, best] + dist[best, y]:
            raise GateError(x, best, y)
    return best


@dataclass
class GatedSubgraph:
    vertices: tuple[int, ...]
    partial: bool
    gates: dict[int, int] = field(default_factory=dict)
    failures: list[tuple[int, int, int]] = field(default_factory=list)

    @property
    def certified(self) -> bool:
        return not self.failures


def gated_hull(
    ball: BallGraph, seed: Sequence[int], orbit_labels: Iterable[int], certify: bool = True
) -> GatedSubgraph:
    """Vertices reachable from the seed crossing only hyperplanes whose
    orbit (clique direction) lies in the label set.

    A vertex belongs exactly when all hyperplanes separating it from some
    seed point carry allowed labels, which equals reachability through
    allowed edge labels.  Hulls touching the boundary are flagged partial.
    """
    labels = set(orbit_labels)
    seen = set(seed)
    queue = list(seed)
    partial = False
    while queue:
        i = queue.pop()
        if ball.norm[i] >= ball.radius:
            partial = True
        for j, s in ball.adj[i]:
            if s.vertex in labels and j not in seen:
                seen.add(j)
                queue.append(j)
    hull = GatedSubgraph(tuple(sorted(seen)), partial)
    if certify:
        for x in range(ball.n):
            if x in seen:
                continue
            dist = ball.distances()
            best = min(hull.vertices, key=lambda y: (int(dist[x, y]), y))
            ok = all(
                dist[x, y] == dist[x, best] + dist[best, y] for y in hull.vertices
            )
            if ok:
                hull.gates[x] = best
            else:
                bad = next(
                    y
                    for y in hull.vertices
                    if dist[x, y] != dist[x, best] + dist[best, y]
                )
                hull.failures.append((x, best, bad))
    return hull


# ---------------------------------------------------------------------------
# geodesic surgery
# ---------------------------------------------------------------------------

def is_geodesic(ball: BallGraph, path: Sequence[int]) -> bool:
    dist = ball.distances()
    if len(path) < 1:
        return False
    for a, b in zip(path, path[1:]):
        if b not in {j for j, _ in ball.adj[a]}:
            return False
    return dist[path[0], path[-1]] == len(path) - 1


def swap_move(ball: BallGraph, path: Sequence[int], i: int) -> list[int]:
    """Exchange the crossing order of the hyperplanes dual to edges i, i+1 of
    a geodesic by routing through the opposite square corner."""
    if not is_geodesic(ball, path):
        raise SwapError("input is not a geodesic edge path in the ball")
    if not 0 <= i <= len(path) - 3:
        raise SwapError(f"no position {i} on a path of {len(path) - 1} edges")
    a, b, c = path[i], path[i + 1], path[i + 2]
    h1 = dual_hyperplane(ball, a, b)
    h2 = dual_hyperplane(ball, b, c)
    kind = classify_pair_algebraic(ball.gp, h1, h2)
    if kind != "intersect":
        raise SwapError(f"dual hyperplanes do not intersect (classified {kind})")
    adj_a = {j for j, _ in ball.adj[a]}
    adj_c = {j for j, _ in ball.adj[c]}
    corners = sorted(adj_a & adj_c - {b})
    corners = [
        z
        for z in corners
        if dual_hyperplane(ball, a, z) == h2 and dual_hyperplane(ball, z, c) == h1
    ]
    if not corners:
        raise InconclusiveError("square corner falls outside the ball")
    out = list(path)
    out[i + 1] = corners[0]
    assert is_geodesic(ball, out)
    return out


@dataclass
class LiftResult:
    hyperplanes: list[Hyperplane]
    breakpoints: list[int]
    total: int
    exact: bool


def lift_geodesic(
    ball: BallGraph,
    kind: str,
    a: Hyperplane,
    b: Hyperplane,
    p: int,
    q: int,
) -> LiftResult:
    """Lift a contact/crossing-graph geodesic back to the ball: hyperplanes
    A=A_0..A_m=B and breakpoints p=p_0..p_{m+1}=q with consecutive carriers
    sharing breakpoints, minimising the sum of leg lengths.

    The search is exhaustive over the ball's view-geodesics and in-ball
    breakpoints (dynamic programming over the shortest-path levels).  When
    truncation prevents the sum from reaching d(p, q), the best lift found is
    returned with exact=False.
    """
    if kind not in ("contact", "crossing"):
        raise ValueError("kind must be 'contact' or 'crossing'")
    gp = ball.gp
    if not carrier_contains(gp, a, ball.verts[p]) or not carrier_contains(gp, b, ball.verts[q]):
        raise HypothesisError("p must lie in N(A) and q in N(B)")
    nodes = ball_hyperplanes(ball)
    node_ix = {h: t for t, h in enumerate(nodes)}
    if a not in node_ix or b not in node_ix:
        raise HypothesisError("hyperplane has no dual edge in this ball")

    def adjacent(h1: Hyperplane, h2: Hyperplane) -> bool:
        k = classify_pair_algebraic(gp, h1, h2)
        if kind == "contact":
            return k in ("intersect", "osculate")
        return k == "intersect"

    # BFS levels from a in the chosen graph restricted to ball hyperplanes
    level = {a: 0}
    frontier = [a]
    while frontier and b not in level:
        nxt = []
        for h in frontier:
            for h2 in nodes:
                if h2 not in level and adjacent(h, h2):
                    level[h2] = level[h] + 1
                    nxt.append(h2)
        frontier = nxt
    if b not in level:
        raise HypothesisError("hyperplanes not in one component of the restricted graph")
    m = level[b]
    back = {b: m}
    frontier = [b]
    while frontier:
        nxt = []
        for h in frontier:
            for h2 in nodes:
                if h2 in level and h2 not in back and level[h2] == back[h] - 1 and adjacent(h2, h):
                    back[h2] = level[h2]
                    nxt.append(h2)
        frontier = nxt
    on_geodesic = [h for h in nodes if h in back]

    carriers = {h: set(carrier(ball, h).indices) for h in on_geodesic}
    dist = ball.distances()
    # DP over (level i, hyperplane at level i, entry breakpoint)
    INF = 10 ** 9
    state: dict[tuple[Hyperplane, int], tuple[int, Optional[tuple]]] = {(a, p): (0, None)}
    for lev in range(m):
        nxt_state: dict[tuple[Hyperplane, int], tuple[int, Optional[tuple]]] = {}
        for (h, x), (cost, _) in sorted(state.items()):
            if level.get(h) != lev:
                continue
            for h2 in on_geodesic:
                if back.get(h2) != lev + 1 or not adjacent(h, h2):
                    continue
                for y in sorted(carriers[h] & carriers[h2]):
                    c2 = cost + int(dist[x, y])
                    key = (h2, y)
                    if key not in nxt_state or c2 < nxt_state[key][0]:
                        nxt_state[key] = (c2, (h, x))
        for key, val in nxt_state.items():
            prev = state.get(key)
            if prev is None or val[0] < prev[0]:
                state[key] = val
    finals = {key: val for key, val in state.items() if key[0] == b}
    if not finals:
        raise HypothesisError("no lift with in-ball breakpoints")
    best_key = min(finals, key=lambda key: (finals[key][0] + int(dist[key[1], q]), key[1]))
    total = finals[best_key][0] + int(dist[best_key[1], q])
    # reconstruct
    chain = [best_key]
    while True:
        _, prev = state[chain[-1]]
        if prev is None:
            break
        chain.append(prev)
    chain.reverse()
    hyps = [h for h, _ in chain]
    breakpoints = [x for _, x in chain] + [q]
    exact = total == int(dist[p, q])
    return LiftResult(hyps, breakpoints, total, exact)


# ---------------------------------------------------------------------------
# carrier product structure
# ---------------------------------------------------------------------------

def carrier_product_structure(ball: BallGraph, h: Hyperplane) -> dict:
    """Verify the fibre-times-clique decomposition of a complete carrier by
    constructing the isomorphism from parabolic coordinates."""
    gp = ball.gp
    cv = carrier(ball, h)
    if not cv.complete:
        raise InconclusiveError("carrier truncated by the ball boundary")
    link = gp.graph.link_mask(h.vertex)
    coords = {}
    for i in cv.indices:
        rel = quotient(gp, ball.verts[i], h.base)
        gpart = projection(gp, 1 << h.vertex, rel)
        lpart = projection(gp, link, rel)
        if multiply(gp, lpart, gpart) != rel:
            raise AssertionError("carrier element not in link x clique coordinates")
        coords[i] = (lpart, gpart)
    fibres = sorted({l for l, _ in coords.values()})
    clique = sorted({g for _, g in coords.values()}, key=lambda g: g.syllables)
    if len(coords) != len(fibres) * len(clique):
        return {"ok": False, "reason": "coordinate map not bijective"}
    adj = [set(j for j, _ in ball.adj[i]) for i in range(ball.n)]
    fibre_adj = set()
    for i in cv.indices:
        for j in cv.indices:
            if j in adj[i] and coords[i][1] == coords[j][1]:
                fibre_adj.add((coords[i][0], coords[j][0]))
    for i in cv.indices:
        for j in cv.indices:
            if i >= j:
                continue
            li, gi = coords[i]
            lj, gj = coords[j]
            in_ball = j in adj[i]
            if li == lj:
                want = gi != gj
            elif gi == gj:
                want = (li, lj) in fibre_adj
            else:
                want = False
            if in_ball != want:
                return {
                    "ok": False,
                    "reason": "adjacency mismatch",
                    "pair": (ball.describe(i), ball.describe(j)),
                }
    return {
        "ok": True,
        "fibres": len(fibres),
        "clique_size": len(clique),
        "carrier_size": len(coords),
    }
