"""Rational expression trees.

Expressions are immutable DAGs over exact rational constants, named
variables, sums, products and integer powers (division is a product with a
negative power).  The same tree can be evaluated over exact rationals,
floats, mpmath numbers or truncated power series, and differentiated
symbolically.
"""

from __future__ import annotations

import numbers
from fractions import Fraction
from functools import reduce
import operator
from typing import Any, Callable, Iterator, Mapping


class Expr:
    __slots__ = ("_vars",)

    # -- construction helpers ---------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return add(self, mul(-1, other))

    def __rsub__(self, other):
        return add(other, mul(-1, self))

    def __neg__(self):
        return mul(-1, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return mul(self, power(other, -1))

    def __rtruediv__(self, other):
        return mul(other, power(self, -1))

    def __pow__(self, k):
        if not isinstance(k, numbers.Integral):
            raise TypeError("only integer powers are supported")
        return power(self, int(k))

    # -- structure ---------------------------------------------------------
    @property
    def variables(self) -> frozenset[str]:
        v = self._vars
        if v is None:
            v = frozenset().union(*(c.variables for c in self.children()))
            self._vars = v
        return v

    def children(self) -> tuple["Expr", ...]:
        return ()

    def depends_on(self, name: str) -> bool:
        return name in self.variables

    def walk(self) -> Iterator["Expr"]:
        """Every distinct node once, children before parents."""
        seen: set[int] = set()
        stack: list[tuple[Expr, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if id(node) in seen:
                continue
            if expanded:
                seen.add(id(node))
                yield node
            else:
                stack.append((node, True))
                stack.extend((c, False) for c in node.children() if id(c) not in seen)

    def denominators(self) -> list["Expr"]:
        """Bases of all negative powers (the expression's poles)."""
        return [n.base for n in self.walk() if isinstance(n, Power) and n.exp < 0]

    # -- operations --------------------------------------------------------
    def diff(self, name: str) -> "Expr":
        return diff(self, name)

    def subs(self, mapping: Mapping[str, Any]) -> "Expr":
        return subs(self, mapping)

    def evaluate(self, env: Mapping[str, Any], memo: dict | None = None):
        return evaluate(self, env, memo)

    def __call__(self, **env):
        return evaluate(self, env)


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value):
        self.value = Fraction(value)
        self._vars = frozenset()

    def __repr__(self):
        v = self.value
        return str(v.numerator) if v.denominator == 1 else f"({v})"


class Var(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name
        self._vars = frozenset((name,))

    def __repr__(self):
        return self.name


class Sum(Expr):
    __slots__ = ("terms",)

    def __init__(self, terms: tuple[Expr, ...]):
        self.terms = terms
        self._vars = None

    def children(self):
        return self.terms

    def __repr__(self):
        return "(" + " + ".join(map(repr, self.terms)) + ")"


class Prod(Expr):
    __slots__ = ("factors",)

    def __init__(self, factors: tuple[Expr, ...]):
        self.factors = factors
        self._vars = None

    def children(self):
        return self.factors

    def __repr__(self):
        return "*".join(map(repr, self.factors))


class Power(Expr):
    __slots__ = ("base", "exp")

    def __init__(self, base: Expr, exp: int):
        self.base = base
        self.exp = exp
        self._vars = None

    def children(self):
        return (self.base,)

    def __repr__(self):
        return f"{self.base!r}^{self.exp}"


ZERO = Const(0)
ONE = Const(1)


def var(name: str) -> Var:
    return Var(name)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (numbers.Rational, str)) and not isinstance(x, bool):
        return Const(x)
    if isinstance(x, bool):
        return Const(int(x))
    raise TypeError(f"cannot use {type(x).__name__} as an exact constant")


def _is_const(e: Expr, value=None) -> bool:
    return isinstance(e, Const) and (value is None or e.value == value)


def add(*items) -> Expr:
    const = Fraction(0)
    terms: list[Expr] = []
    for item in map(as_expr, items):
        parts = item.terms if isinstance(item, Sum) else (item,)
        for p in parts:
            if isinstance(p, Const):
                const += p.value
            else:
                terms.append(p)
    if const:
        terms.insert(0, Const(const))
    if not terms:
        return ZERO
    if len(terms) == 1:
        return terms[0]
    return Sum(tuple(terms))


def mul(*items) -> Expr:
    const = Fraction(1)
    factors: list[Expr] = []
    for item in map(as_expr, items):
        parts = item.factors if isinstance(item, Prod) else (item,)
        for p in parts:
            if isinstance(p, Const):
                const *= p.value
            else:
                factors.append(p)
    if const == 0:
        return ZERO
    if const != 1:
        factors.insert(0, Const(const))
    if not factors:
        return ONE
    if len(factors) == 1:
        return factors[0]
    return Prod(tuple(factors))


def power(base, k: int) -> Expr:
    base = as_expr(base)
    if k == 0:
        return ONE
    if k == 1:
        return base
    if isinstance(base, Const):
        if base.value == 0 and k < 0:
            raise ZeroDivisionError("division by the zero constant")
        return Const(base.value**k)
    if isinstance(base, Power):
        return power(base.base, base.exp * k)
    return Power(base, k)


def diff(expr: Expr, name: str, memo: dict | None = None) -> Expr:
    """Symbolic partial derivative with respect to variable ``name``."""
    if memo is None:
        memo = {}
    key = (id(expr), name)
    if key in memo:
        return memo[key][1]
    if not expr.depends_on(name):
        out = ZERO
    elif isinstance(expr, Var):
        out = ONE
    elif isinstance(expr, Sum):
        out = add(*(diff(t, name, memo) for t in expr.terms))
    elif isinstance(expr, Prod):
        fs = expr.factors
        parts = []
        for i, f in enumerate(fs):
            df = diff(f, name, memo)
            if not _is_const(df, 0):
                parts.append(mul(*fs[:i], df, *fs[i + 1:]))
        out = add(*parts)
    elif isinstance(expr, Power):
        db = diff(expr.base, name, memo)
        out = mul(expr.exp, power(expr.base, expr.exp - 1), db)
    else:  # pragma: no cover
        raise TypeError(type(expr))
    # keep expr alive so its id is not recycled during this traversal
    memo[key] = (expr, out)
    return out


def subs(expr: Expr, mapping: Mapping[str, Any]) -> Expr:
    """Replace variables by expressions (or constants)."""
    repl = {k: as_expr(v) for k, v in mapping.items()}
    memo: dict[int, Expr] = {}

    def go(e: Expr) -> Expr:
        key = id(e)
        if key in memo:
            return memo[key]
        if not (e.variables & repl.keys()):
            out = e
        elif isinstance(e, Var):
            out = repl[e.name]
        elif isinstance(e, Sum):
            out = add(*map(go, e.terms))
        elif isinstance(e, Prod):
            out = mul(*map(go, e.factors))
        elif isinstance(e, Power):
            out = power(go(e.base), e.exp)
        else:  # pragma: no cover
            raise TypeError(type(e))
        memo[key] = out
        return out

    return go(expr)


def _pow_value(x, k: int):
    if k >= 0:
        return x**k
    return 1 / (x ** (-k))


def _walk_unknown(expr: Expr, memo: dict) -> Iterator[Expr]:
    # post-order over nodes not already in memo; known subtrees are not entered
    stack: list[tuple[Expr, bool]] = [(expr, False)]
    while stack:
        node, expanded = stack.pop()
        if id(node) in memo:
            continue
        if expanded:
            yield node
        else:
            stack.append((node, True))
            stack.extend((c, False) for c in node.children() if id(c) not in memo)


def evaluate(expr: Expr, env: Mapping[str, Any], memo: dict | None = None,
             convert: Callable[[Fraction], Any] | None = None):
    """Evaluate ``expr`` with variables bound by ``env``.

    Works for any value type closed under +, *, ** and ``1 / x``.  ``memo``
    maps ``id(node)`` to a precomputed value and may be prefilled.
    ``convert`` maps exact constants into the value domain (e.g. mpmath).
    """
    if memo is None:
        memo = {}
    for node in _walk_unknown(expr, memo):
        key = id(node)
        if isinstance(node, Const):
            v = node.value
            if convert is not None:
                v = convert(v)
            elif v.denominator == 1:
                v = v.numerator
        elif isinstance(node, Var):
            try:
                v = env[node.name]
            except KeyError:
                raise KeyError(f"no value bound for variable {node.name!r}") from None
        elif isinstance(node, Sum):
            v = reduce(operator.add, (memo[id(t)] for t in node.terms))
        elif isinstance(node, Prod):
            v = reduce(operator.mul, (memo[id(f)] for f in node.factors))
        else:
            v = _pow_value(memo[id(node.base)], node.exp)
        memo[key] = v
    return memo[id(expr)]
