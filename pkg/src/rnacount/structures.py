"""Secondary structures, their dual weighted plane trees, and a brute-force oracle.

Positions are 1-based.  A structure is a length ``n`` plus a crossing-free
set of pairs ``(i, j)`` with ``i < j``; hairpin (``theta``) and stem
(``tau``) thresholds are properties checked against :class:`ModelParams`.

The length of a stem is its number of stacking adjacencies, so a lone pair
is a stem of length 0.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Iterator

FAMILIES = ("general", "saturated", "gsaturated")
DEFAULT_CAP = 18


class StructureError(ValueError):
    """Malformed structure, dot-bracket string or tree."""


@dataclass(frozen=True)
class ModelParams:
    theta: int = 1
    tau: int = 0
    p: Fraction = Fraction(1)
    q: Fraction = Fraction(0)

    def __post_init__(self):
        if self.theta < 0 or self.tau < 0:
            raise ValueError("theta and tau must be nonnegative")
        object.__setattr__(self, "p", Fraction(self.p))
        object.__setattr__(self, "q", Fraction(self.q))
        if self.p <= 0:
            raise ValueError("stickiness p must be positive")
        if self.q < 0:
            raise ValueError("dangle weight q must be nonnegative")


@dataclass(frozen=True)
class SecondaryStructure:
    n: int
    pairs: frozenset
    _partner: tuple = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        if self.n < 1:
            raise StructureError("length must be positive")
        pairs = frozenset((int(i), int(j)) for i, j in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        partner = [0] * (self.n + 2)
        for i, j in pairs:
            if not 1 <= i < j <= self.n:
                raise StructureError(f"pair {(i, j)} out of range for n={self.n}")
            if partner[i] or partner[j]:
                raise StructureError(f"base triple at pair {(i, j)}")
            partner[i], partner[j] = j, i
        # crossing check: scanning left to right, closings must match a stack
        stack = []
        for k in range(1, self.n + 1):
            m = partner[k]
            if m > k:
                stack.append(k)
            elif m:
                if not stack or stack[-1] != m:
                    raise StructureError("pseudoknot: pairs cross")
                stack.pop()
        object.__setattr__(self, "_partner", tuple(partner))

    # -- views ---------------------------------------------------------------
    def partner(self, i: int) -> int:
        """Partner of position ``i`` or 0 when free."""
        return self._partner[i]

    def dot_bracket(self) -> str:
        p = self._partner
        return "".join("." if not p[k] else ("(" if p[k] > k else ")") for k in range(1, self.n + 1))

    def __str__(self):
        return self.dot_bracket()

    @property
    def links(self) -> int:
        return len(self.pairs)

    def sorted_pairs(self) -> list[tuple[int, int]]:
        return sorted(self.pairs)

    def stacked_pairs(self) -> int:
        """Pairs (i, j) whose inner neighbour (i+1, j-1) is also a pair."""
        return sum(1 for i, j in self.pairs if self._partner[i + 1] == j - 1 and i + 1 < j - 1)

    def stems(self) -> list[list[tuple[int, int]]]:
        """Maximal stems, each listed outermost pair first."""
        p = self._partner
        out = []
        for i, j in sorted(self.pairs):
            if p[i - 1] == j + 1 and i > 1:
                continue
            stem = [(i, j)]
            while p[i + 1] == j - 1 and i + 1 < j - 1:
                i, j = i + 1, j - 1
                stem.append((i, j))
            out.append(stem)
        return out

    # -- serialisation -------------------------------------------------------
    def to_json(self) -> str:
        return json.dumps({"n": self.n, "pairs": [list(pq) for pq in self.sorted_pairs()]})

    @classmethod
    def from_json(cls, text: str) -> "SecondaryStructure":
        data = json.loads(text)
        return cls(data["n"], frozenset(tuple(pq) for pq in data["pairs"]))


def parse_dot_bracket(text: str) -> SecondaryStructure:
    text = text.strip()
    if not text:
        raise StructureError("empty dot-bracket string")
    stack: list[int] = []
    pairs = []
    for k, ch in enumerate(text, start=1):
        if ch == "(":
            stack.append(k)
        elif ch == ")":
            if not stack:
                raise StructureError(f"unbalanced ')' at position {k}")
            pairs.append((stack.pop(), k))
        elif ch != ".":
            raise StructureError(f"illegal character {ch!r} at position {k}")
    if stack:
        raise StructureError(f"unbalanced '(' at position {stack[-1]}")
    return SecondaryStructure(len(text), frozenset(pairs))


def validate(s: SecondaryStructure, params: ModelParams) -> bool:
    """Hairpin and stem thresholds (non-crossing is enforced at construction)."""
    if any(j - i <= params.theta for i, j in s.pairs):
        return False
    if params.tau and any(len(stem) - 1 < params.tau for stem in s.stems()):
        return False
    return True


# -- classification ---------------------------------------------------------

@dataclass(frozen=True)
class Classification:
    links: int
    stacked_pairs: int
    is_saturated: bool
    is_g_saturated: bool


def _loops(s: SecondaryStructure) -> list[int]:
    """For each position, the opening index of the innermost enclosing pair (0 = exterior)."""
    p = s._partner
    loop = [0] * (s.n + 1)
    stack = [0]
    for k in range(1, s.n + 1):
        m = p[k]
        if m and m < k:
            stack.pop()
        loop[k] = stack[-1]
        if m > k:
            stack.append(k)
    return loop


def addable_pairs(s: SecondaryStructure, theta: int) -> Iterator[tuple[int, int]]:
    """Every single pair that could be added keeping the structure crossing-free and θ-valid."""
    p = s._partner
    loop = _loops(s)
    free = [k for k in range(1, s.n + 1) if not p[k]]
    for a_idx, i in enumerate(free):
        for j in free[a_idx + 1:]:
            if j - i > theta and loop[i] == loop[j]:
                yield (i, j)


def extends_stem(s: SecondaryStructure, i: int, j: int) -> bool:
    p = s._partner
    outer = i > 1 and j < s.n and p[i - 1] == j + 1
    inner = i + 1 < j - 1 and p[i + 1] == j - 1
    return outer or inner


def classify(s: SecondaryStructure, params: ModelParams) -> Classification:
    """Link/stack counts and the two local-optimality predicates.

    Saturated: no single pair can be added giving a structure valid under
    (theta, tau).  With tau > 0 a lone new pair would violate the stem
    threshold, so only stem-extending additions are candidates.
    G-saturated: no addable pair extends an existing stem.
    """
    if not validate(s, params):
        raise StructureError(f"{s.dot_bracket()} is not valid for {params}")
    extending = False
    any_addition = False
    for i, j in addable_pairs(s, params.theta):
        any_addition = True
        if extends_stem(s, i, j):
            extending = True
            break
    saturated = not extending if params.tau > 0 else not any_addition
    return Classification(s.links, s.stacked_pairs(), saturated, not extending)


def in_family(s: SecondaryStructure, params: ModelParams, family: str) -> bool:
    if not validate(s, params):
        return False
    if family == "general":
        return True
    c = classify(s, params)
    if family == "saturated":
        return c.is_saturated
    if family == "gsaturated":
        return c.is_g_saturated
    raise ValueError(f"unknown family {family!r}")


# -- dangles ----------------------------------------------------------------

def dangle_slots(s: SecondaryStructure) -> list[tuple[int, bool, bool]]:
    """Free positions eligible as dangles: (index, 5'-eligible, 3'-eligible).

    A free base is 5'-eligible when the next character is '(' and
    3'-eligible when the previous character is ')'.
    """
    p = s._partner
    out = []
    for k in range(1, s.n + 1):
        if p[k]:
            continue
        five = k < s.n and p[k + 1] > k + 1
        three = k > 1 and 0 < p[k - 1] < k - 1
        if five or three:
            out.append((k, five, three))
    return out


def count_dangle_annotations(s: SecondaryStructure) -> list[int]:
    """Polynomial in q (coefficient list): annotations grouped by dangle count."""
    poly = [1]
    for _, five, three in dangle_slots(s):
        w = 2 if five and three else 1
        nxt = poly + [0]
        for d, c in enumerate(poly):
            nxt[d + 1] += w * c
        poly = nxt
    return poly


def enumerate_dangle_annotations(s: SecondaryStructure) -> Iterator[tuple[frozenset, frozenset]]:
    """Every (fivePrime, threePrime) annotation of ``s``."""
    slots = dangle_slots(s)

    def go(idx: int, five: frozenset, three: frozenset):
        if idx == len(slots):
            yield five, three
            return
        k, f, t = slots[idx]
        yield from go(idx + 1, five, three)
        if f:
            yield from go(idx + 1, five | {k}, three)
        if t:
            yield from go(idx + 1, five, three | {k})

    yield from go(0, frozenset(), frozenset())


# -- weighted plane trees ---------------------------------------------------

@dataclass(frozen=True)
class TreeNode:
    """Node of a weighted plane tree.

    ``children`` holds (edge weight, child) in plane order; ``corners`` has
    one more entry than ``children``: corners[0] lies before the first
    child and corners[-1] after the last (for the root these are the two
    halves of the sector split by the root marker).
    """

    children: tuple = ()
    corners: tuple = (0,)

    def __post_init__(self):
        if len(self.corners) != len(self.children) + 1:
            raise StructureError("a node with k children needs k+1 corners")
        if any(w < 0 for w in self.corners) or any(w < 0 for w, _ in self.children):
            raise StructureError("weights must be nonnegative")

    @property
    def arity(self) -> int:
        return len(self.children)


@dataclass(frozen=True)
class WeightedPlaneTree:
    root: TreeNode

    def nodes(self) -> Iterator[tuple[TreeNode, bool]]:
        """All nodes with an is-root flag, preorder."""
        stack = [(self.root, True)]
        while stack:
            node, is_root = stack.pop()
            yield node, is_root
            stack.extend((c, False) for _, c in reversed(node.children))

    def edges(self) -> list[int]:
        return [w for node, _ in self.nodes() for w, _ in node.children]

    @property
    def num_edges(self) -> int:
        return len(self.edges())

    @property
    def edge_weight(self) -> int:
        return sum(self.edges())

    @property
    def corner_weight(self) -> int:
        return sum(sum(node.corners) for node, _ in self.nodes())

    @property
    def num_leaves(self) -> int:
        return sum(1 for node, root in self.nodes() if not root and node.arity == 0)

    def length(self) -> int:
        return 2 * self.num_edges + 2 * self.edge_weight + self.corner_weight

    def admissibility_errors(self, params: ModelParams) -> list[str]:
        errs = []
        if self.root.arity == 0:
            errs.append("tree has no edges")
        for node, is_root in self.nodes():
            for w, _ in node.children:
                if w < params.tau:
                    errs.append(f"edge weight {w} < tau={params.tau}")
            if is_root:
                continue
            if node.arity == 0 and node.corners[0] < params.theta:
                errs.append(f"leaf corner {node.corners[0]} < theta={params.theta}")
            if node.arity == 1 and node.corners[0] == 0 and node.corners[1] == 0:
                errs.append("unary node with both corners empty")
        return errs

    def is_admissible(self, params: ModelParams) -> bool:
        return not self.admissibility_errors(params)


def to_tree(s: SecondaryStructure) -> WeightedPlaneTree:
    """Dual tree: stems become weighted edges, segments become weighted corners."""
    if not s.pairs:
        raise StructureError("the dual tree of a pair-free structure is undefined")
    p = s._partner

    def level(lo: int, hi: int) -> TreeNode:
        # positions lo..hi at one loop level
        children, corners = [], []
        run = 0
        k = lo
        while k <= hi:
            m = p[k]
            if not m:
                run += 1
                k += 1
                continue
            corners.append(run)
            run = 0
            i, j, w = k, m, 0
            while p[i + 1] == j - 1 and i + 1 < j - 1:
                i, j, w = i + 1, j - 1, w + 1
            children.append((w, level(i + 1, j - 1)))
            k = m + 1
        corners.append(run)
        return TreeNode(tuple(children), tuple(corners))

    return WeightedPlaneTree(level(1, s.n))


def from_tree(tree: WeightedPlaneTree, params: ModelParams | None = None) -> SecondaryStructure:
    """Inverse of :func:`to_tree`; the tree must be admissible for ``params``."""
    params = params or ModelParams(theta=0, tau=0)
    errs = tree.admissibility_errors(params)
    if errs:
        raise StructureError("inadmissible tree: " + "; ".join(errs))
    parts: list[str] = []

    def emit(node: TreeNode):
        for idx, (w, child) in enumerate(node.children):
            parts.append("." * node.corners[idx])
            parts.append("(" * (w + 1))
            emit(child)
            parts.append(")" * (w + 1))
        parts.append("." * node.corners[-1])

    emit(tree.root)
    return parse_dot_bracket("".join(parts))


def tree_is_saturated(tree: WeightedPlaneTree, theta: int) -> bool:
    """Corner criterion for saturation (tau = 0): every corner <= theta+1, <= 1 positive corner per node."""
    for node, _ in tree.nodes():
        if any(c > theta + 1 for c in node.corners):
            return False
        if sum(1 for c in node.corners if c > 0) > 1:
            return False
    return True


def tree_is_g_saturated(tree: WeightedPlaneTree, theta: int) -> bool:
    """Corner criterion for G-saturation: leaf corners <= theta+1, adjacent corners not both positive.

    Corners on the two sides of a child edge are adjacent; for a non-root
    inner node the first and last corners are adjacent through the parent
    edge.  The root's outer corners are adjacent only through its edge when
    it has a single child, which the child-edge rule already covers.
    """
    for node, is_root in tree.nodes():
        cs = node.corners
        if not is_root and node.arity == 0:
            if cs[0] > theta + 1:
                return False
            continue
        for a, b in zip(cs, cs[1:]):
            if a > 0 and b > 0:
                return False
        if not is_root and cs[0] > 0 and cs[-1] > 0:
            return False
    return True


# -- brute-force enumeration ------------------------------------------------

@lru_cache(maxsize=None)
def _strings(length: int, theta: int) -> tuple[str, ...]:
    """All θ-valid dot-bracket strings of a given length (decomposed on the last base)."""
    if length <= 0:
        return ("",)
    out = [s + "." for s in _strings(length - 1, theta)]
    # last base paired with position k (1-based); inner length length-k-1 >= theta
    for k in range(1, length - theta):
        inner = _strings(length - k - 1, theta)
        for left in _strings(k - 1, theta):
            for mid in inner:
                out.append(left + "(" + mid + ")")
    return tuple(out)


def _check_cap(n: int, cap: int):
    if n < 1:
        raise ValueError("n must be positive")
    if n > cap:
        raise ValueError(f"n={n} exceeds the enumeration cap {cap}")


def enumerate_structures(n: int, params: ModelParams | None = None, family: str = "general",
                         cap: int = DEFAULT_CAP) -> Iterator[SecondaryStructure]:
    """Every valid structure of length ``n`` in ``family``, each exactly once."""
    params = params or ModelParams()
    _check_cap(n, cap)
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    for text in _strings(n, params.theta):
        s = parse_dot_bracket(text)
        if in_family(s, params, family):
            yield s


def _scan(text: str, theta: int, tau: int):
    """Fast per-string analysis for the census.

    Returns None if a stem is shorter than tau, else
    (links, has_addition, has_extending_addition, dangle slot kinds).
    """
    n = len(text)
    partner = [0] * (n + 2)
    loop = [0] * (n + 2)
    stack = [0]
    for k, ch in enumerate(text, start=1):
        if ch == ")":
            o = stack.pop()
            partner[o], partner[k] = k, o
        loop[k] = stack[-1]
        if ch == "(":
            stack.append(k)
    links = 0
    extending = False
    for i in range(1, n + 1):
        j = partner[i]
        if j <= i:
            continue
        links += 1
        outer_pair = i > 1 and partner[i - 1] == j + 1
        inner_pair = partner[i + 1] == j - 1 and i + 1 < j - 1
        if tau and not outer_pair:
            length, a, b = 0, i, j
            while partner[a + 1] == b - 1 and a + 1 < b - 1:
                a, b, length = a + 1, b - 1, length + 1
            if length < tau:
                return None
        if not extending:
            if not outer_pair and i > 1 and j < n and not partner[i - 1] and not partner[j + 1]:
                extending = True
            elif not inner_pair and not partner[i + 1] and not partner[j - 1] and j - i - 2 > theta:
                extending = True
    # any addition: some loop has two free bases more than theta apart
    lo: dict[int, int] = {}
    hi: dict[int, int] = {}
    slots = []
    for k in range(1, n + 1):
        if partner[k]:
            continue
        lp = loop[k]
        if lp not in lo:
            lo[lp] = k
        hi[lp] = k
        five = k < n and partner[k + 1] > k + 1
        three = k > 1 and 0 < partner[k - 1] < k - 1
        if five or three:
            slots.append(2 if five and three else 1)
    addition = extending or any(hi[lp] - lo[lp] > theta for lp in lo)
    return links, addition, extending, slots


def census(n: int, params: ModelParams | None = None, cap: int = DEFAULT_CAP) -> dict[str, Counter]:
    """Brute-force weighted counts per family.

    Returns ``{family: Counter{(links, dangles): count}}`` where ``dangles``
    is the number of dangle annotations chosen (so the Counter is the joint
    polynomial in p and q summed over all annotated structures).
    """
    params = params or ModelParams()
    _check_cap(n, cap)
    theta, tau = params.theta, params.tau
    out = {f: Counter() for f in FAMILIES}
    for text in _strings(n, theta):
        res = _scan(text, theta, tau)
        if res is None:
            continue
        links, addition, extending, slots = res
        poly = [1]
        for w in slots:
            nxt = poly + [0]
            for d, c in enumerate(poly):
                nxt[d + 1] += w * c
            poly = nxt
        saturated = not extending if tau else not addition
        for d, c in enumerate(poly):
            key = (links, d)
            out["general"][key] += c
            if saturated:
                out["saturated"][key] += c
            if not extending:
                out["gsaturated"][key] += c
    return out


def census_total(table: Counter, p=1, q=0):
    """Evaluate a census Counter at stickiness ``p`` and dangle weight ``q``."""
    p, q = Fraction(p), Fraction(q)
    total = sum(c * p**k * q**d for (k, d), c in table.items())
    return total.numerator if total.denominator == 1 else total

