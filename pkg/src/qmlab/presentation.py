"""Graph-product presentations over finite vertex groups, with exact arithmetic.

A presentation is a finite simplicial graph together with one finite group per
vertex, given by its multiplication table.  Group elements are represented by
canonical normal forms: reduced syllable sequences, ordered by a fixed
leftmost-greedy rule so that two elements are equal iff their normal forms are
equal as tuples.  Syllable count of the normal form equals the distance to the
identity in the Cayley graph over the syllable alphabet.

On top of the arithmetic the module provides the parabolic machinery used
everywhere else: maximal prefix/suffix stripping for parabolic subgroups
(minimal coset representatives), star-length, the retraction onto a parabolic,
and the complement-walk element whose powers never reduce.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Optional, Sequence


class PresentationError(ValueError):
    """Malformed presentation document or invalid group table."""


class HypothesisError(ValueError):
    """A stated hypothesis of an operation is not met (not a bug)."""


class Syllable(NamedTuple):
    vertex: int
    elt: int


class DefGraph:
    """Finite simple graph with named vertices, adjacency kept as bitmasks."""

    def __init__(self, names: Sequence[str], edges: Iterable[tuple[int, int]]):
        self.names = list(names)
        n = len(self.names)
        if len(set(self.names)) != n:
            raise PresentationError("duplicate vertex names")
        self.adj = [0] * n
        edge_set = set()
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise PresentationError(f"edge ({u},{v}) out of range")
            if u == v:
                raise PresentationError(f"loop at vertex {u}")
            edge_set.add((min(u, v), max(u, v)))
        self.edges = sorted(edge_set)
        for u, v in self.edges:
            self.adj[u] |= 1 << v
            self.adj[v] |= 1 << u

    @property
    def n(self) -> int:
        return len(self.names)

    def adjacent(self, u: int, v: int) -> bool:
        return bool(self.adj[u] >> v & 1)

    def neighbours(self, v: int) -> list[int]:
        return [u for u in range(self.n) if self.adj[v] >> u & 1]

    def degree(self, v: int) -> int:
        return bin(self.adj[v]).count("1")

    def star_mask(self, v: int) -> int:
        return self.adj[v] | (1 << v)

    def link_mask(self, v: int) -> int:
        return self.adj[v]

    def star(self, v: int) -> frozenset[int]:
        return frozenset(self.neighbours(v)) | {v}

    def link(self, v: int) -> frozenset[int]:
        return frozenset(self.neighbours(v))

    def max_degree(self) -> int:
        return max((self.degree(v) for v in range(self.n)), default=0)

    def complement_edges(self) -> list[tuple[int, int]]:
        return [
            (u, v)
            for u in range(self.n)
            for v in range(u + 1, self.n)
            if not self.adjacent(u, v)
        ]

    def _connected(self, adj: Sequence[int]) -> bool:
        if self.n == 0:
            return True
        seen = 1
        frontier = [0]
        while frontier:
            x = frontier.pop()
            for y in range(self.n):
                if adj[x] >> y & 1 and not seen >> y & 1:
                    seen |= 1 << y
                    frontier.append(y)
        return seen == (1 << self.n) - 1

    def connected(self) -> bool:
        return self._connected(self.adj)

    def complement_connected(self) -> bool:
        full = (1 << self.n) - 1
        comp = [full & ~self.adj[v] & ~(1 << v) for v in range(self.n)]
        return self._connected(comp)

    def girth(self) -> Optional[int]:
        """Length of a shortest cycle, or None for a forest.

        Brute-force BFS from every vertex; the graphs here are tiny.
        """
        best: Optional[int] = None
        for src in range(self.n):
            dist = {src: 0}
            parent = {src: -1}
            queue = [src]
            while queue:
                nxt = []
                for x in queue:
                    for y in self.neighbours(x):
                        if y not in dist:
                            dist[y] = dist[x] + 1
                            parent[y] = x
                            nxt.append(y)
                        elif y != parent[x]:
                            cycle = dist[x] + dist[y] + 1
                            if best is None or cycle < best:
                                best = cycle
                queue = nxt
        return best

    def is_triangle_free(self) -> bool:
        g = self.girth()
        return g is None or g >= 4


class VertexGroup:
    """Finite group given by its multiplication table; 0 is the identity.

    All three group axioms are checked exhaustively at construction.
    """

    def __init__(self, table: Sequence[Sequence[int]]):
        order = len(table)
        if order < 1:
            raise PresentationError("empty multiplication table")
        self.order = order
        self.table = tuple(tuple(row) for row in table)
        for row in self.table:
            if len(row) != order or any(not (0 <= x < order) for x in row):
                raise PresentationError("multiplication table is not square over 0..order-1")
        for a in range(order):
            if self.table[0][a] != a or self.table[a][0] != a:
                raise PresentationError("0 is not a two-sided identity")
        inverse = [None] * order
        for a in range(order):
            for b in range(order):
                if self.table[a][b] == 0 and self.table[b][a] == 0:
                    inverse[a] = b
        if any(x is None for x in inverse):
            raise PresentationError("some element has no two-sided inverse")
        self.inverse = tuple(inverse)
        for a in range(order):
            for b in range(order):
                for c in range(order):
                    if self.table[self.table[a][b]][c] != self.table[a][self.table[b][c]]:
                        raise PresentationError(
                            f"associativity fails at ({a},{b},{c})"
                        )

    @classmethod
    def cyclic(cls, n: int) -> "VertexGroup":
        if n < 1:
            raise PresentationError("cyclic group order must be >= 1")
        return cls([[(a + b) % n for b in range(n)] for a in range(n)])

    def mul(self, a: int, b: int) -> int:
        return self.table[a][b]

    def inv(self, a: int) -> int:
        return self.inverse[a]


class GraphProduct:
    """A defining graph together with a finite vertex group per vertex."""

    def __init__(self, graph: DefGraph, groups: Sequence[VertexGroup]):
        if len(groups) != graph.n:
            raise PresentationError("one vertex group required per vertex")
        for v, g in enumerate(groups):
            if g.order < 2:
                raise PresentationError(
                    f"vertex group at '{graph.names[v]}' is trivial (order 1)"
                )
        self.graph = graph
        self.groups = list(groups)
        self.identity = NormalForm(())

    @property
    def n_vertices(self) -> int:
        return self.graph.n

    def vertex_id(self, name: str) -> int:
        try:
            return self.graph.names.index(name)
        except ValueError:
            raise PresentationError(f"unknown vertex '{name}'") from None

    def syllables(self) -> list[Syllable]:
        """All generators, in canonical (vertex, element) order."""
        return [
            Syllable(v, e)
            for v in range((self.graph.n))
            for e in range(1, self.groups[v].order)
        ]

    def check_syllable(self, s: Syllable) -> None:
        if not 0 <= s.vertex < self.graph.n:
            raise PresentationError(f"unknown vertex id {s.vertex}")
        if not 1 <= s.elt < self.groups[s.vertex].order:
            raise PresentationError(f"invalid element {s.elt} at vertex {s.vertex}")


@dataclass(frozen=True)
class Word:
    """An arbitrary finite syllable sequence; no reducedness assumed."""

    syllables: tuple[Syllable, ...]

    def __len__(self) -> int:
        return len(self.syllables)


@dataclass(frozen=True, order=True)
class NormalForm:
    """Canonical reduced syllable sequence: the lexicographically least
    shuffle-equivalent spelling by (vertex id, element id)."""

    syllables: tuple[Syllable, ...] = field(default_factory=tuple)

    def __len__(self) -> int:
        return len(self.syllables)

    def __bool__(self) -> bool:
        return bool(self.syllables)

    def support(self) -> frozenset[int]:
        return frozenset(s.vertex for s in self.syllables)

    def support_mask(self) -> int:
        m = 0
        for s in self.syllables:
            m |= 1 << s.vertex
        return m


def _append_syllable(gp: GraphProduct, sylls: list[Syllable], s: Syllable) -> None:
    """Right-multiply a reduced syllable list by one syllable, in place.

    Walk back over the commuting suffix; merge with the first same-vertex
    syllable found, else append.  Preserves reducedness.
    """
    v, e = s
    adj = gp.graph.adj[v]
    i = len(sylls) - 1
    while i >= 0:
        w, f = sylls[i]
        if w == v:
            prod = gp.groups[v].mul(f, e)
            if prod == 0:
                del sylls[i]
            else:
                sylls[i] = Syllable(v, prod)
            return
        if not adj >> w & 1:
            break
        i -= 1
    sylls.append(Syllable(v, e))


def _prepend_syllable(gp: GraphProduct, sylls: list[Syllable], s: Syllable) -> None:
    """Left-multiply a reduced syllable list by one syllable, in place."""
    v, e = s
    adj = gp.graph.adj[v]
    i = 0
    while i < len(sylls):
        w, f = sylls[i]
        if w == v:
            prod = gp.groups[v].mul(e, f)
            if prod == 0:
                del sylls[i]
            else:
                sylls[i] = Syllable(v, prod)
            return
        if not adj >> w & 1:
            break
        i += 1
    sylls.insert(0, Syllable(v, e))


def _canonicalise(gp: GraphProduct, sylls: Sequence[Syllable]) -> tuple[Syllable, ...]:
    """Lex-least shuffle-equivalent ordering by leftmost-greedy selection.

    At each step the available syllables are those not preceded by a syllable
    of the same or a non-commuting vertex; pick the least by (vertex, elt).
    """
    rest = list(sylls)
    out: list[Syllable] = []
    adj = gp.graph.adj
    while rest:
        best_idx = -1
        blocked = 0  # vertices that can no longer reach the front
        for i, (w, f) in enumerate(rest):
            if not blocked >> w & 1:
                if best_idx < 0 or (w, f) < rest[best_idx]:
                    best_idx = i
            # a vertex blocks itself and every non-neighbour
            blocked |= ((1 << gp.graph.n) - 1) & ~adj[w]
        out.append(rest.pop(best_idx))
    return tuple(out)


def normal_form(gp: GraphProduct, word: Word | Sequence[Syllable]) -> NormalForm:
    """Canonical normal form of the element represented by a word."""
    sylls = word.syllables if isinstance(word, Word) else tuple(word)
    acc: list[Syllable] = []
    for s in sylls:
        gp.check_syllable(Syllable(*s))
        if s.elt != 0:
            _append_syllable(gp, acc, Syllable(*s))
    return NormalForm(_canonicalise(gp, acc))


def multiply(gp: GraphProduct, x: NormalForm, y: NormalForm) -> NormalForm:
    acc = list(x.syllables)
    for s in y.syllables:
        _append_syllable(gp, acc, s)
    return NormalForm(_canonicalise(gp, acc))


def mul_syllable_left(gp: GraphProduct, s: Syllable, x: NormalForm) -> NormalForm:
    """Normal form of s*x; the edge step of the (g, sg) Cayley convention."""
    acc = list(x.syllables)
    _prepend_syllable(gp, acc, s)
    return NormalForm(_canonicalise(gp, acc))


def invert(gp: GraphProduct, x: NormalForm) -> NormalForm:
    inv = [Syllable(v, gp.groups[v].inv(e)) for v, e in reversed(x.syllables)]
    return NormalForm(_canonicalise(gp, inv))


def support(x: NormalForm) -> frozenset[int]:
    return x.support()


def syllable_length(x: NormalForm) -> int:
    return len(x)


def quotient(gp: GraphProduct, q: NormalForm, p: NormalForm) -> NormalForm:
    """q * p^-1; its length is the Cayley distance between p and q."""
    return multiply(gp, q, invert(gp, p))


def parabolic_strip(
    gp: GraphProduct, vertex_set: Iterable[int] | int, g: NormalForm
) -> tuple[NormalForm, NormalForm]:
    """Split g = prefix * rep with prefix the maximal head inside the
    parabolic over `vertex_set` and rep the minimal representative of the
    right coset (parabolic)*g.

    Fixpoint iteration: repeatedly remove a syllable whose vertex lies in the
    set and which commutes past everything before it.
    """
    mask = vertex_set if isinstance(vertex_set, int) else _mask_of(vertex_set)
    rep = list(g.syllables)
    prefix: list[Syllable] = []
    adj = gp.graph.adj
    changed = True
    while changed:
        changed = False
        blocked = 0
        for i, (w, f) in enumerate(rep):
            if mask >> w & 1 and not blocked >> w & 1:
                _append_syllable(gp, prefix, Syllable(w, f))
                del rep[i]
                changed = True
                break
            blocked |= ((1 << gp.graph.n) - 1) & ~adj[w]
    return (
        NormalForm(_canonicalise(gp, prefix)),
        NormalForm(_canonicalise(gp, rep)),
    )


def right_strip(
    gp: GraphProduct, vertex_set: Iterable[int] | int, g: NormalForm
) -> tuple[NormalForm, NormalForm]:
    """Split g = rem * suffix with suffix the maximal parabolic tail."""
    mask = vertex_set if isinstance(vertex_set, int) else _mask_of(vertex_set)
    inv_prefix, inv_rem = parabolic_strip(gp, mask, invert(gp, g))
    return invert(gp, inv_rem), invert(gp, inv_prefix)


def _mask_of(vertex_set: Iterable[int]) -> int:
    m = 0
    for v in vertex_set:
        m |= 1 << v
    return m


def coset_rep(gp: GraphProduct, vertex_set: Iterable[int] | int, g: NormalForm) -> NormalForm:
    """Minimal-length representative of (parabolic over vertex_set) * g."""
    return parabolic_strip(gp, vertex_set, g)[1]


def projection(gp: GraphProduct, vertex_set: Iterable[int] | int, g: NormalForm) -> NormalForm:
    """Canonical retraction onto the parabolic: delete syllables outside the set.

    Well defined on elements because relators map to relators or vanish.
    """
    mask = vertex_set if isinstance(vertex_set, int) else _mask_of(vertex_set)
    kept = [s for s in g.syllables if mask >> s.vertex & 1]
    return normal_form(gp, kept)


def star_length(gp: GraphProduct, g: NormalForm) -> int:
    """Minimal number of star-parabolic factors multiplying to g.

    Exact BFS over the states reached by maximal star-prefix stripping,
    branching over every vertex of the defining graph.
    """
    if not g:
        return 0
    start = g
    dist = {start: 0}
    queue = [start]
    while queue:
        nxt = []
        for h in queue:
            d = dist[h]
            for v in range(gp.graph.n):
                prefix, rep = parabolic_strip(gp, gp.graph.star_mask(v), h)
                if not prefix:
                    continue
                if not rep:
                    return d + 1
                if rep not in dist:
                    dist[rep] = d + 1
                    nxt.append(rep)
        queue = nxt
    raise AssertionError("star-length BFS exhausted without reaching identity")


def complement_walk(gp: GraphProduct) -> list[int]:
    """A closed walk on the complement of the defining graph visiting every
    vertex, as a vertex list v_0,...,v_l with v_l = v_0.

    Raises HypothesisError when the complement is disconnected or the graph
    has a single vertex.
    """
    graph = gp.graph
    if graph.n < 2:
        raise HypothesisError("need at least two vertices")
    if not graph.complement_connected():
        raise HypothesisError("complement of the defining graph is disconnected")
    comp_adj: dict[int, list[int]] = {
        v: [u for u in range(graph.n) if u != v and not graph.adjacent(u, v)]
        for v in range(graph.n)
    }
    # depth-first traversal of a spanning tree of the complement,
    # recording every tree-edge step in both directions
    walk = [0]
    seen = {0}

    def visit(v: int) -> None:
        for u in comp_adj[v]:
            if u not in seen:
                seen.add(u)
                walk.append(u)
                visit(u)
                walk.append(v)

    visit(0)
    return walk


def complement_walk_element(gp: GraphProduct) -> NormalForm:
    """Element g = g_1...g_l read along a complement closed walk, with each
    g_i the least nontrivial element of its vertex group.

    Consecutive walk vertices are distinct and non-adjacent, so no power of g
    admits any reduction: the normal form of g^n is n concatenated copies.
    """
    walk = complement_walk(gp)
    sylls = [Syllable(v, 1) for v in walk[1:]]
    nf = NormalForm(tuple(sylls))
    if len(normal_form(gp, sylls)) != len(sylls):
        raise AssertionError("complement walk word unexpectedly reduced")
    return nf


def power(gp: GraphProduct, g: NormalForm, n: int) -> NormalForm:
    acc = gp.identity
    for _ in range(n):
        acc = multiply(gp, acc, g)
    return acc


def is_rigid(gp: GraphProduct, g: NormalForm) -> bool:
    """True when no two cyclically consecutive syllables commute, making every
    spelling of every power unique."""
    s = g.syllables
    if len(s) < 2:
        return True
    for i in range(len(s)):
        a, b = s[i], s[(i + 1) % len(s)]
        if a.vertex == b.vertex or gp.graph.adjacent(a.vertex, b.vertex):
            return False
    return True


# ---------------------------------------------------------------------------
# presentation documents
# ---------------------------------------------------------------------------

def load_presentation(doc: dict) -> GraphProduct:
    """Build a GraphProduct from a presentation document.

    Expected shape::

        {"vertices": [{"name": str,
                       "group": {"type": "cyclic", "n": int}
                              | {"type": "table", "table": [[...]]}},
                      ...],
         "edges": [[name, name], ...]}

    Vertex ids are assigned in document order.
    """
    if not isinstance(doc, dict) or "vertices" not in doc:
        raise PresentationError("presentation document must have a 'vertices' list")
    names = []
    groups = []
    for entry in doc["vertices"]:
        try:
            name = entry["name"]
            gspec = entry["group"]
        except (TypeError, KeyError) as exc:
            raise PresentationError(f"malformed vertex entry: {entry!r}") from exc
        names.append(str(name))
        if gspec.get("type") == "cyclic":
            groups.append(VertexGroup.cyclic(int(gspec["n"])))
        elif gspec.get("type") == "table":
            groups.append(VertexGroup(gspec["table"]))
        else:
            raise PresentationError(f"unknown group type in {gspec!r}")
    name_to_id = {name: i for i, name in enumerate(names)}
    edges = []
    for pair in doc.get("edges", []):
        try:
            u, v = pair
        except (TypeError, ValueError) as exc:
            raise PresentationError(f"malformed edge {pair!r}") from exc
        if u not in name_to_id or v not in name_to_id:
            raise PresentationError(f"edge {pair!r} references unknown vertex")
        edges.append((name_to_id[u], name_to_id[v]))
    graph = DefGraph(names, edges)
    return GraphProduct(graph, groups)


def parse_word(gp: GraphProduct, text: str) -> Word:
    """Parse whitespace-separated "vertex:elementIndex" tokens; a "^-1"
    suffix inverts and a leading "cyclic" directive is accepted and ignored
    at this level (cyclic words are handled by callers)."""
    tokens = text.split()
    if tokens and tokens[0] == "cyclic":
        tokens = tokens[1:]
    sylls = []
    for tok in tokens:
        inverted = tok.endswith("^-1")
        if inverted:
            tok = tok[: -len("^-1")]
        if ":" not in tok:
            raise PresentationError(f"bad word token {tok!r}")
        name, _, idx = tok.partition(":")
        v = gp.vertex_id(name)
        try:
            e = int(idx)
        except ValueError:
            raise PresentationError(f"bad element index in token {tok!r}") from None
        if inverted:
            e = gp.groups[v].inv(e)
        gp.check_syllable(Syllable(v, e))
        if e != 0:
            sylls.append(Syllable(v, e))
    return Word(tuple(sylls))


# Canned example presentations used across tests and experiments.

def example_presentations() -> dict[str, dict]:
    def racg(names, edges):
        return {
            "vertices": [{"name": n, "group": {"type": "cyclic", "n": 2}} for n in names],
            "edges": edges,
        }

    hexagon = [f"v{i}" for i in range(1, 7)]
    return {
        "dinf": racg(["u", "v"], []),
        "edgeprod": {
            "vertices": [
                {"name": "u", "group": {"type": "cyclic", "n": 2}},
                {"name": "v", "group": {"type": "cyclic", "n": 3}},
            ],
            "edges": [["u", "v"]],
        },
        "p4": racg(["a", "b", "c", "d"], [["a", "b"], ["b", "c"], ["c", "d"]]),
        "hex": racg(
            hexagon,
            [[hexagon[i], hexagon[(i + 1) % 6]] for i in range(6)],
        ),
        "pentagon": racg(
            [f"p{i}" for i in range(1, 6)],
            [[f"p{i}", f"p{i % 5 + 1}"] for i in range(1, 6)],
        ),
        "square": racg(
            ["s1", "s2", "s3", "s4"],
            [["s1", "s2"], ["s2", "s3"], ["s3", "s4"], ["s4", "s1"]],
        ),
        "triangle": racg(["t1", "t2", "t3"], [["t1", "t2"], ["t2", "t3"], ["t1", "t3"]]),
        "two_free": {
            "vertices": [
                {"name": "u", "group": {"type": "cyclic", "n": 2}},
                {"name": "v", "group": {"type": "cyclic", "n": 3}},
            ],
            "edges": [],
        },
    }


def load_example(name: str) -> GraphProduct:
    return load_presentation(example_presentations()[name])
