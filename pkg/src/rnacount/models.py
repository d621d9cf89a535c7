"""Generating-function systems for the structure classes and exact counts.

A class is described by an equation ``f = Q(t, s, r, f)`` and a composed
function ``g = R(t, s, r, f)``; ``t`` marks length, ``s`` marks links and
``r`` marks dangles.  The full generating function is ``g`` evaluated at
``s = p t^2, r = q`` plus a pair-free tail.

Q and R are obtained from plane-tree equations in (u, v, x) (leaf corners,
other corners, edges) by substituting series in t and s that account for
corner and edge weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

from .expr import Expr, diff, subs, var
from .series import SeriesRing, TruncatedSeries, solve_fixed_point
from .structures import FAMILIES, ModelParams

t, s, r, y = var("t"), var("s"), var("r"), var("y")
u_, v_, x_ = var("u"), var("v"), var("x")
v1_, v2_ = var("v1"), var("v2")
mark = var("u")  # link mark in Phi/Psi


class ModelError(ValueError):
    """Unsupported class/parameter combination."""


@dataclass(frozen=True)
class StructureClass:
    family: str = "general"
    dangles: bool = False
    params: ModelParams = field(default_factory=ModelParams)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ModelError(f"unknown family {self.family!r}")
        if self.family == "saturated" and self.params.tau != 0:
            raise ModelError("saturated structures are modelled for tau = 0 only")

    @property
    def name(self) -> str:
        return self.family + ("+dangles" if self.dangles else "")


@dataclass(frozen=True)
class GfSystem:
    cls: StructureClass
    Q: Expr
    R: Expr
    tail: Expr

    @property
    def shift(self) -> int:
        """1 when f(0,0) = 1 (theta = 0), else 0."""
        return 1 if self.cls.params.theta == 0 else 0

    def phi_psi(self, p=None, q=None) -> tuple[Expr, Expr]:
        """(Phi, Psi) in (t, u, y) with s = p u t^2, r = q and the theta = 0 shift."""
        prm = self.cls.params
        p = prm.p if p is None else Fraction(p)
        q = prm.q if q is None else Fraction(q)
        b = self.shift
        binding = {"s": p * mark * t * t, "r": q, "y": y + b}
        phi = subs(self.Q, binding) - b
        psi = subs(self.R, binding)
        return phi, psi


def _tree_equations(family: str, dangles: bool) -> tuple[Expr, Expr]:
    """(F, G) in u, v (or v1, v2), x, y for a family."""
    x, u = x_, u_
    if not dangles:
        v = v_
        if family == "general":
            G = x * (1 + v) ** 2 * y / (1 - x * (1 + v) * y)
            F = u + G - x * y
        elif family == "saturated":
            D = 1 - x * y
            F = u + x**2 * y**2 / D + v / D**2 - v
            G = x * y / D + v / D**2 - v
        else:
            D = 1 - x * y - v * x**2 * y**2
            F = u + 2 * v * x * y + (1 + 2 * v * x**2 * y**2 * (1 + v * x * y)) / D - x * y - 1
            G = x * y * (1 + 2 * v + (1 + v) * v * x * y) / D
        return F, G
    v1, v2 = v1_, v2_
    if family == "general":
        G = x * (1 + v1) ** 2 * y / (1 - x * (1 + v2) * y)
        F = u + G - x * y
    elif family == "saturated":
        D = 1 - x * y
        F = u + (x**2 * y**2 + 2 * x * y * (v1 - v2)) / D + v2 / D**2 - v2
        G = x * y * (1 + 2 * (v1 - v2)) / D + v2 / D**2 - v2
    else:
        D = 1 - x * y - v2 * x**2 * y**2
        F = u + 2 * v1 * x * y + (1 + 2 * v1 * x**2 * y**2 * (1 + v2 * x * y)) / D - x * y - 1
        G = x * y * (1 + 2 * v1 + x * y * (v2 + v1**2)) / D
    return F, G


def _substitutions(family: str, dangles: bool, theta: int, tau: int) -> tuple[dict, Expr]:
    """Corner/edge weight substitutions and the pair-free tail."""
    geo = t / (1 - t)
    if family == "saturated":
        U = t**theta * (1 + t)
        V = (t - t ** (theta + 2)) / (1 - t)
        X = s / (1 - s)
        tail = sum((t**k for k in range(2, theta + 2)), t)
    elif family == "gsaturated":
        U = t**theta * (1 + t)
        V = geo
        X = s ** (tau + 1) / (1 - s)
        tail = geo
    else:
        U = t**theta / (1 - t)
        V = geo
        X = s ** (tau + 1) / (1 - s)
        tail = geo
    if not dangles:
        return {"u": U, "v": V, "x": X}, tail
    V1 = V * (1 + r)
    V2 = V * (1 + r) ** 2 - t * r**2
    return {"u": U, "x": X, "v1": V1, "v2": V2}, tail


@lru_cache(maxsize=None)
def _expressions(family: str, dangles: bool, theta: int, tau: int) -> tuple[Expr, Expr, Expr]:
    F, G = _tree_equations(family, dangles)
    bind, tail = _substitutions(family, dangles, theta, tau)
    return subs(F, bind), subs(G, bind), tail


def build_system(cls: StructureClass) -> GfSystem:
    prm = cls.params
    return GfSystem(cls, *_expressions(cls.family, cls.dangles, prm.theta, prm.tau))


def emit_phi_psi(cls: StructureClass) -> tuple[Expr, Expr]:
    return build_system(cls).phi_psi()


# -- series extraction ------------------------------------------------------

def _solve(system: GfSystem, env: dict, order: int, ring: SeriesRing) -> tuple[TruncatedSeries, dict]:
    f = solve_fixed_point(system.Q, env, order, ring=ring)
    full = dict(env, y=f)
    return f, full


def _scaled_env(system: GfSystem, order: int, p: Fraction, q: Fraction):
    """Univariate environment with t = b T, s = a b T^2 for p = a/b (integer coefficients)."""
    a, b = p.numerator, p.denominator
    ring = SeriesRing(("T",))
    T = ring.gen("T", order)
    env = {"t": T * b, "s": T * T * (a * b), "r": q.numerator if q.denominator == 1 else q}
    return ring, env, b


def gf_series(cls: StructureClass, order: int, p=None, q=None) -> list:
    """Coefficients [t^0..t^order] of the full generating function at (p, q)."""
    system = build_system(cls)
    prm = cls.params
    p = prm.p if p is None else Fraction(p)
    q = prm.q if q is None else Fraction(q)
    ring, env, b = _scaled_env(system, order, p, q)
    f, full = _solve(system, env, order, ring)
    g = system.R.evaluate(full) + system.tail.evaluate(full)
    coeffs = g.to_list()
    if b == 1:
        return coeffs
    out = []
    for n, c in enumerate(coeffs):
        v = Fraction(c, b**n)
        out.append(v.numerator if v.denominator == 1 else v)
    return out


def count(cls: StructureClass, n: int):
    """Weighted count [t^n] g_{p,q}(t) (an integer when p and q are)."""
    if n < 1:
        raise ValueError("n must be positive")
    return gf_series(cls, n)[n]


def _bivariate(cls: StructureClass, order: int, q=None):
    """g(t, s) (+ tail) as a series in (t, s) with s of weight 2, r := q."""
    system = build_system(cls)
    q = cls.params.q if q is None else Fraction(q)
    ring = SeriesRing(("t", "s"), (1, 2))
    env = {"t": ring.gen("t", order), "s": ring.gen("s", order), "r": q}
    f, full = _solve(system, env, order, ring)
    return system.R.evaluate(full) + system.tail.evaluate(full)


def link_polynomial(cls: StructureClass, n: int, symbolic_q: bool = False) -> dict:
    """[t^n] g as a polynomial in p (and q): {k: c} or {(k, d): c}.

    ``k`` counts links and ``d`` dangles.  Without ``symbolic_q`` the dangle
    weight of the class is substituted.
    """
    system = build_system(cls)
    if symbolic_q and cls.dangles:
        ring = SeriesRing(("t", "s", "r"), (1, 2, 0))
        env = {name: ring.gen(name, n) for name in ring.variables}
        f, full = _solve(system, env, n, ring)
        g = system.R.evaluate(full) + system.tail.evaluate(full)
        return {(k, d): c for (i, k, d), c in g.terms() if i + 2 * k == n}
    g = _bivariate(cls, n)
    out = {k: c for (i, k), c in g.terms() if i + 2 * k == n}
    if symbolic_q:
        return {(k, 0): c for k, c in out.items()}
    return out


def count_by_links(cls: StructureClass, n: int) -> dict[int, int]:
    """{k: number of (annotated, q-weighted) structures of length n with k links}.

    Uses p = 2^B so that the link distribution is packed into the digits of
    one exact univariate coefficient (requires integer q).
    """
    prm = cls.params
    if prm.q.denominator != 1:
        return link_polynomial(cls, n)
    total = gf_series(cls, n, p=1)[n]
    bits = max(int(total).bit_length() + 1, 2)
    packed = gf_series(cls, n, p=1 << bits)[n]
    mask = (1 << bits) - 1
    out, k = {}, 0
    while packed:
        c = packed & mask
        if c:
            out[k] = c
        packed >>= bits
        k += 1
    return out


def mean_links(cls: StructureClass, n: int, p=None, q=None) -> Fraction:
    """Exact mean number of links over length-n structures weighted by p^links q^dangles.

    Derivative route: with f = Q(f), f_s = Q_s / (1 - Q_y) and
    g_s = R_s + R_y f_s; the mean is [t^n](s g_s) / [t^n] g.
    """
    system = build_system(cls)
    prm = cls.params
    p = prm.p if p is None else Fraction(p)
    q = prm.q if q is None else Fraction(q)
    ring, env, b = _scaled_env(system, n, p, q)
    f, full = _solve(system, env, n, ring)
    Q, R = system.Q, system.R
    Qs, Qy, Rs, Ry = diff(Q, "s"), diff(Q, "y"), diff(R, "s"), diff(R, "y")
    vals: dict = {}
    fs = Qs.evaluate(full, vals) / (1 - Qy.evaluate(full, vals))
    gs = Rs.evaluate(full, vals) + Ry.evaluate(full, vals) * fs
    g = R.evaluate(full, vals) + system.tail.evaluate(full, vals)
    num = (env["s"] * gs)[n]
    den = g[n]
    return Fraction(num, den)


def stickiness_identity(cls: StructureClass, n_max: int) -> tuple[list, list]:
    """([t^n] g(4t, 6t^2), 4^n [t^n] g_{3/8}(t)) for n = 1..n_max (both exact)."""
    system = build_system(cls)
    ring = SeriesRing(("T",))
    T = ring.gen("T", n_max)
    q = cls.params.q
    env = {"t": T * 4, "s": T * T * 6, "r": q.numerator if q.denominator == 1 else q}
    f, full = _solve(system, env, n_max, ring)
    direct = (system.R.evaluate(full) + system.tail.evaluate(full)).to_list()
    weighted = gf_series(cls, n_max, p=Fraction(3, 8))
    scaled = [Fraction(c) * 4**n for n, c in enumerate(weighted)]
    return direct[1:], [int(x) if x.denominator == 1 else x for x in scaled[1:]]


def coefficient_table(cls: StructureClass, order: int) -> dict:
    """{(n, links, dangles): count} for n <= order (dangles are 0 without dangle marks)."""
    system = build_system(cls)
    if cls.dangles:
        ring = SeriesRing(("t", "s", "r"), (1, 2, 0))
        env = {name: ring.gen(name, order) for name in ring.variables}
    else:
        ring = SeriesRing(("t", "s"), (1, 2))
        env = {"t": ring.gen("t", order), "s": ring.gen("s", order), "r": 0}
    f, full = _solve(system, env, order, ring)
    g = system.R.evaluate(full) + system.tail.evaluate(full)
    out = {}
    for exps, c in g.terms():
        i, k = exps[0], exps[1]
        d = exps[2] if cls.dangles else 0
        n = i + 2 * k
        if 1 <= n <= order:
            out[(n, k, d)] = c
    return dict(sorted(out.items()))
