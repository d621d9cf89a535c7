"""Truncated multivariate power series with exact rational coefficients.

A series lives in a :class:`SeriesRing` (ordered variable names with
nonnegative integer weights) and is known exactly for all monomials of
weighted degree ``<= order``.  Coefficients are ``int`` or
``fractions.Fraction``; floats are rejected.

Internally a monomial is packed into one integer (``_SHIFT`` bits per
variable) so exponent addition is integer addition.
"""

from __future__ import annotations

import csv
import io
import numbers
from dataclasses import dataclass
from fractions import Fraction
from operator import mul as _mul
from typing import Any, Iterable, Iterator, Mapping

from .expr import Expr, diff, evaluate

_SHIFT = 24
_MASK = (1 << _SHIFT) - 1


class SeriesError(ValueError):
    """Ill-defined series operation (bad composition, non-invertible, ...)."""


class ConvergenceError(ArithmeticError):
    """Fixed-point iteration failed to stabilise."""


def _exact(c):
    if isinstance(c, bool) or not isinstance(c, numbers.Rational):
        raise TypeError(f"series coefficients must be exact rationals, got {type(c).__name__}")
    if isinstance(c, Fraction) and c.denominator == 1:
        return c.numerator
    return c if isinstance(c, (int, Fraction)) else Fraction(c)


@dataclass(frozen=True)
class SeriesRing:
    variables: tuple[str, ...]
    weights: tuple[int, ...]

    def __init__(self, variables: Iterable[str], weights: Iterable[int] | None = None):
        variables = tuple(variables)
        weights = tuple(weights) if weights is not None else (1,) * len(variables)
        if len(weights) != len(variables) or not variables:
            raise ValueError("need one weight per variable and at least one variable")
        if len(set(variables)) != len(variables):
            raise ValueError("duplicate variable names")
        if any(w < 0 for w in weights) or not any(weights):
            raise ValueError("weights must be nonnegative and not all zero")
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "weights", weights)

    def pack(self, exps: Iterable[int]) -> int:
        key = 0
        for i, e in enumerate(exps):
            if e < 0 or e > _MASK:
                raise ValueError("exponent out of range")
            key |= e << (_SHIFT * i)
        return key

    def unpack(self, key: int) -> tuple[int, ...]:
        return tuple((key >> (_SHIFT * i)) & _MASK for i in range(len(self.variables)))

    def degree(self, key: int) -> int:
        d = 0
        for w in self.weights:
            d += w * (key & _MASK)
            key >>= _SHIFT
        return d

    def index(self, name: str) -> int:
        return self.variables.index(name)

    def gen(self, name: str, order: int) -> "TruncatedSeries":
        i = self.index(name)
        return TruncatedSeries(self, {1 << (_SHIFT * i): 1}, order)

    def const(self, c, order: int) -> "TruncatedSeries":
        return TruncatedSeries(self, {0: c}, order)

    def zero(self, order: int) -> "TruncatedSeries":
        return TruncatedSeries(self, {}, order)


class TruncatedSeries:
    """Exact series truncated at a weighted total degree.

    Binary operations between series of different orders yield the smaller
    order, so no coefficient is ever reported beyond what is known.
    """

    __slots__ = ("ring", "order", "_c")

    def __init__(self, ring: SeriesRing, coeffs: Mapping[int, Any], order: int, *, _trusted=False):
        if order < 0:
            raise ValueError("order must be nonnegative")
        self.ring = ring
        self.order = order
        if _trusted:
            self._c = coeffs
        else:
            deg = ring.degree
            self._c = {k: _exact(v) for k, v in coeffs.items() if v and deg(k) <= order}

    # -- constructors --------------------------------------------------------
    @classmethod
    def from_terms(cls, ring: SeriesRing, terms: Mapping[tuple[int, ...], Any], order: int):
        return cls(ring, {ring.pack(e): c for e, c in terms.items()}, order)

    @classmethod
    def from_list(cls, coeffs: Iterable, name: str = "t", order: int | None = None):
        coeffs = list(coeffs)
        ring = SeriesRing((name,))
        if order is None:
            order = len(coeffs) - 1
        return cls(ring, dict(enumerate(coeffs)), order)

    # -- access --------------------------------------------------------------
    @property
    def variables(self) -> tuple[str, ...]:
        return self.ring.variables

    def terms(self) -> Iterator[tuple[tuple[int, ...], int | Fraction]]:
        """Nonzero terms as (exponent tuple, coefficient), sorted."""
        up = self.ring.unpack
        for e, c in sorted((up(k), c) for k, c in self._c.items()):
            yield e, c

    def coefficient(self, *exps: int):
        if len(exps) != len(self.ring.variables):
            raise ValueError("wrong number of exponents")
        key = self.ring.pack(exps)
        if self.ring.degree(key) > self.order:
            raise IndexError("coefficient beyond truncation order")
        return self._c.get(key, 0)

    def __getitem__(self, n: int):
        if len(self.ring.variables) != 1:
            raise TypeError("integer indexing only for univariate series")
        return self.coefficient(n)

    def to_list(self) -> list:
        """Dense coefficient list of a univariate series."""
        if len(self.ring.variables) != 1:
            raise TypeError("to_list only for univariate series")
        w = self.ring.weights[0]
        return [self._c.get(k, 0) for k in range(self.order // w + 1)]

    def is_zero(self) -> bool:
        return not self._c

    def valuation(self) -> int | None:
        """Smallest weighted degree of a nonzero term (None for zero)."""
        if not self._c:
            return None
        return min(map(self.ring.degree, self._c))

    def constant_term(self):
        return self._c.get(0, 0)

    def truncate(self, order: int) -> "TruncatedSeries":
        if order >= self.order:
            return self
        deg = self.ring.degree
        return TruncatedSeries(self.ring, {k: v for k, v in self._c.items() if deg(k) <= order},
                               order, _trusted=True)

    def with_order(self, order: int) -> "TruncatedSeries":
        """Same coefficients, re-declared as known (zero-padded) to ``order``.

        Only meaningful when the caller knows the extra coefficients; used to
        seed iterations.
        """
        deg = self.ring.degree
        return TruncatedSeries(self.ring, {k: v for k, v in self._c.items() if deg(k) <= order},
                               order, _trusted=True)

    def __eq__(self, other):
        if isinstance(other, TruncatedSeries):
            return self.ring == other.ring and self.order == other.order and self._c == other._c
        if isinstance(other, numbers.Rational):
            return self._c == ({0: _exact(other)} if other else {})
        return NotImplemented

    def __hash__(self):
        return hash((self.ring, self.order, frozenset(self._c.items())))

    def __repr__(self):
        if not self._c:
            body = "0"
        else:
            names = self.ring.variables
            parts = []
            for e, c in self.terms():
                mono = "*".join(f"{n}^{k}" if k > 1 else n for n, k in zip(names, e) if k)
                parts.append(f"{c}*{mono}" if mono else str(c))
            body = " + ".join(parts)
        return f"{body} + O(deg>{self.order})"

    # -- arithmetic ----------------------------------------------------------
    def _coerce(self, other) -> "TruncatedSeries | None":
        if isinstance(other, TruncatedSeries):
            if other.ring != self.ring:
                raise SeriesError(f"variable mismatch: {self.ring} vs {other.ring}")
            return other
        if isinstance(other, numbers.Rational) and not isinstance(other, bool):
            return TruncatedSeries(self.ring, {0: _exact(other)} if other else {}, self.order, _trusted=True)
        return None

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        order = min(self.order, o.order)
        deg = self.ring.degree
        out = {k: v for k, v in self._c.items() if deg(k) <= order}
        for k, v in o._c.items():
            if deg(k) <= order:
                s = out.get(k, 0) + v
                if s:
                    out[k] = s
                else:
                    out.pop(k, None)
        return TruncatedSeries(self.ring, out, order, _trusted=True)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedSeries(self.ring, {k: -v for k, v in self._c.items()}, self.order, _trusted=True)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o + (-self)

    def scale(self, c) -> "TruncatedSeries":
        c = _exact(c)
        if not c:
            return TruncatedSeries(self.ring, {}, self.order, _trusted=True)
        return TruncatedSeries(self.ring, {k: v * c for k, v in self._c.items()}, self.order, _trusted=True)

    def __mul__(self, other):
        if isinstance(other, numbers.Rational) and not isinstance(other, bool):
            return self.scale(other)
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        order = min(self.order, o.order)
        if len(self.ring.variables) == 1:
            out = _dense_mul(self, o, order)
        else:
            out = _sparse_mul(self.ring, self._c, o._c, order)
        return TruncatedSeries(self.ring, out, order, _trusted=True)

    __rmul__ = __mul__

    def reciprocal(self) -> "TruncatedSeries":
        c0 = self._c.get(0, 0)
        deg = self.ring.degree
        if not c0:
            raise SeriesError("reciprocal of a series with zero constant term")
        if any(k and deg(k) == 0 for k in self._c):
            raise SeriesError("degree-0 part is not a constant; reciprocal undefined")
        N = self.order
        if len(self.ring.variables) == 1:
            return TruncatedSeries(self.ring, _dense_reciprocal(self, c0), N, _trusted=True)
        inv0 = Fraction(1, 1) / c0
        inv0 = inv0.numerator if inv0.denominator == 1 else inv0
        r = TruncatedSeries(self.ring, {0: inv0}, 0, _trusted=True)
        m = 0
        while m < N:
            m = min(2 * m + 1, N)
            a = self.truncate(m)
            r = r.with_order(m)
            r = r * (2 - a * r)
        return r

    def __truediv__(self, other):
        if isinstance(other, numbers.Rational) and not isinstance(other, bool):
            if not other:
                raise ZeroDivisionError("series division by zero")
            return self.scale(Fraction(1) / Fraction(other))
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self * o.reciprocal()

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o * self.reciprocal()

    def __pow__(self, k):
        if not isinstance(k, numbers.Integral):
            return NotImplemented
        k = int(k)
        if k < 0:
            return self.reciprocal() ** (-k)
        result = TruncatedSeries(self.ring, {0: 1}, self.order, _trusted=True)
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    # -- composition ---------------------------------------------------------
    def substitute(self, bindings: Mapping[str, Any], ring: SeriesRing | None = None,
                   order: int | None = None) -> "TruncatedSeries":
        """Compose: replace variables by series (or rational expressions).

        ``ring`` is the target ring (default: this series' ring).  Every
        variable left unbound must exist in the target ring.  A binding must
        have valuation at least the weight of the variable it replaces in
        the source ring; otherwise truncation would not commute with
        composition and :class:`SeriesError` is raised.
        """
        ring = ring or self.ring
        N = self.order if order is None else min(order, self.order)
        images: list[TruncatedSeries] = []
        env = {n: ring.gen(n, N) for n in ring.variables}
        for name, w in zip(self.ring.variables, self.ring.weights):
            if name in bindings:
                b = bindings[name]
                if isinstance(b, Expr):
                    b = evaluate(b, env)
                if not isinstance(b, TruncatedSeries):
                    b = ring.const(_exact(b), N)
                if b.ring != ring:
                    raise SeriesError(f"binding for {name!r} lives in a different ring")
                b = b.truncate(N)
            else:
                if name not in ring.variables:
                    raise SeriesError(f"variable {name!r} unbound and absent from target ring")
                b = env[name]
            val = b.valuation()
            if val is not None and val < w and any(
                    self.ring.unpack(k)[self.ring.index(name)] for k in self._c):
                if w > 0 or b.order < N:
                    raise SeriesError(
                        f"ill-defined composition: {name!r} (weight {w}) bound to a series of valuation {val}")
            images.append(b)
        N = min([N] + [b.order for b in images])
        result = ring.zero(N)
        cache: list[dict[int, TruncatedSeries]] = [{0: ring.const(1, N)} for _ in images]

        def pw(i: int, e: int) -> TruncatedSeries:
            c = cache[i]
            if e not in c:
                c[e] = pw(i, e - 1) * images[i]
            return c[e]

        for key, coef in self._c.items():
            term = ring.const(coef, N)
            for i, e in enumerate(self.ring.unpack(key)):
                if e:
                    term = term * pw(i, e)
            result = result + term
        return result

    # -- serialisation -------------------------------------------------------
    def to_csv(self) -> str:
        """Rows ``exponents,numerator,denominator`` (exponents ';'-joined)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["exponents", "numerator", "denominator"])
        for e, c in self.terms():
            c = Fraction(c)
            w.writerow([";".join(map(str, e)), str(c.numerator), str(c.denominator)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, ring: SeriesRing, order: int) -> "TruncatedSeries":
        rows = list(csv.reader(io.StringIO(text)))
        terms = {}
        for row in rows[1:]:
            exps = tuple(int(x) for x in row[0].split(";")) if row[0] else ()
            terms[exps] = Fraction(int(row[1]), int(row[2]))
        return cls.from_terms(ring, terms, order)


def _dense_mul(a: TruncatedSeries, b: TruncatedSeries, order: int) -> dict[int, Any]:
    w = a.ring.weights[0]
    top = order // w
    if not a._c or not b._c:
        return {}
    A = [a._c.get(k, 0) for k in range(min(top, max(a._c)) + 1)]
    B = [b._c.get(k, 0) for k in range(min(top, max(b._c)) + 1)]
    lo_a = min(a._c)
    lo_b = min(b._c)
    rb = B[::-1]
    nb = len(B) - 1
    out = {}
    for k in range(lo_a + lo_b, min(top, len(A) - 1 + nb) + 1):
        lo = max(lo_a, k - nb)
        hi = min(k - lo_b, len(A) - 1)
        if lo > hi:
            continue
        s = sum(map(_mul, A[lo:hi + 1], rb[nb - k + lo:nb - k + hi + 1]))
        if s:
            out[k] = s
    return out


def _dense_reciprocal(a: TruncatedSeries, c0) -> dict[int, Any]:
    w = a.ring.weights[0]
    top = a.order // w
    A = [a._c.get(k, 0) for k in range(top + 1)]
    unit = c0 in (1, -1)
    inv0 = c0 if unit else Fraction(1) / c0
    R = [inv0]
    support = [k for k in range(1, top + 1) if A[k]]
    for n in range(1, top + 1):
        s = 0
        for k in support:
            if k > n:
                break
            s += A[k] * R[n - k]
        R.append(-s * inv0)
    out = {}
    for k, v in enumerate(R):
        if v:
            if isinstance(v, Fraction) and v.denominator == 1:
                v = v.numerator
            out[k] = v
    return out


def _sparse_mul(ring: SeriesRing, A: dict, B: dict, order: int) -> dict[int, Any]:
    deg = ring.degree
    buckets_a: dict[int, list] = {}
    for k, v in A.items():
        d = deg(k)
        if d <= order:
            buckets_a.setdefault(d, []).append((k, v))
    buckets_b: dict[int, list] = {}
    for k, v in B.items():
        d = deg(k)
        if d <= order:
            buckets_b.setdefault(d, []).append((k, v))
    out: dict[int, Any] = {}
    get = out.get
    degs_b = sorted(buckets_b)
    for da, la in buckets_a.items():
        for db in degs_b:
            if da + db > order:
                break
            lb = buckets_b[db]
            for ka, va in la:
                for kb, vb in lb:
                    k = ka + kb
                    out[k] = get(k, 0) + va * vb
    return {k: v for k, v in out.items() if v}


def solve_fixed_point(Q: Expr, env: Mapping[str, Any], order: int, *, unknown: str = "y",
                      ring: SeriesRing | None = None, method: str = "newton") -> TruncatedSeries:
    """Series solution ``f`` of ``f = Q(..., f)`` exact to ``order``.

    ``env`` binds every other variable of ``Q`` to a series or exact scalar.
    The constant (degree-0) part of the solution must be forced by Q, which
    holds whenever Q's dependence on the unknown vanishes at degree 0.

    ``method="newton"`` doubles the number of known degrees per step;
    ``method="iterate"`` is plain fixed-point iteration (one more degree per
    step at least).  Either way the residual ``Q(f) - f`` is verified to be
    zero to ``order`` before returning.
    """
    if ring is None:
        rings = {v.ring for v in env.values() if isinstance(v, TruncatedSeries)}
        if len(rings) != 1:
            raise SeriesError("cannot infer a unique series ring from env; pass ring=")
        ring = rings.pop()
    full_env = {k: (v.truncate(order) if isinstance(v, TruncatedSeries) else v) for k, v in env.items()}
    missing = Q.variables - set(full_env) - {unknown}
    if missing:
        raise KeyError(f"unbound variables: {sorted(missing)}")

    def y_free_frontier(*exprs: Expr) -> list[Expr]:
        out, seen = [], set()
        for e in exprs:
            for node in e.walk():
                if id(node) in seen:
                    continue
                seen.add(id(node))
                if not node.depends_on(unknown) and node.variables:
                    out.append(node)
        return out

    if method == "newton":
        Qy = diff(Q, unknown)
        exprs = (Q, Qy)
    elif method == "iterate":
        exprs = (Q,)
    else:
        raise ValueError(f"unknown method {method!r}")

    # y-independent subexpressions are computed once at full order
    frontier = y_free_frontier(*exprs)
    pre: dict[int, Any] = {}
    for node in frontier:
        evaluate(node, full_env, pre)
    pre_vals = {id(n): pre[id(n)] for n in frontier}

    def at_order(m: int) -> dict[int, Any]:
        return {k: (v.truncate(m) if isinstance(v, TruncatedSeries) else v) for k, v in pre_vals.items()}

    def ev(expr: Expr, f: TruncatedSeries, memo: dict) -> TruncatedSeries:
        env_m = dict(full_env)
        env_m[unknown] = f
        v = evaluate(expr, env_m, memo)
        if not isinstance(v, TruncatedSeries):
            v = ring.const(v, f.order)
        return v.truncate(f.order)

    zero = ring.zero(0)
    f = ev(Q, zero, at_order(0)).truncate(0)
    if method == "newton":
        m = 0
        while m < order:
            m = min(2 * m + 1, order)
            f = f.with_order(m)
            memo = at_order(m)
            q = ev(Q, f, memo)
            d = 1 - ev(Qy, f, memo)
            f = f + (q - f) / d
    else:
        f = f.with_order(order)
        for _ in range(order + 2):
            nxt = ev(Q, f, at_order(order))
            if nxt == f:
                break
            f = nxt
    residual = ev(Q, f.with_order(order), at_order(order)) - f
    if not residual.is_zero():
        raise ConvergenceError(
            f"fixed point did not stabilise to order {order} (residual valuation {residual.valuation()})")
    return f
