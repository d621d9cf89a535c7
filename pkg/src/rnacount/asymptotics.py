"""Numeric singularity analysis for positive algebraic systems.

For ``y = Phi(t, y)`` with a square-root singularity the dominant
singularity ``t0`` solves ``y = Phi(t, y), Phi_y(t, y) = 1``; then

    [t^n] y ~ c * gamma^n * n^(-3/2),   gamma = 1/t0,
    c = sqrt(t0 Phi_t / (2 pi Phi_yy)),

and for ``g = Psi(t, y)`` the amplitude is ``d = c * Psi_y``.  Systems of
several equations use ``det(I - J) = 0`` in place of ``Phi_y = 1``.

Derivatives of Phi are symbolic; evaluation uses mpmath at a configurable
precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Mapping, Sequence

import mpmath

from .expr import Expr, diff, evaluate, subs
from .series import SeriesRing, solve_fixed_point

DEFAULT_DPS = 30


class SingularityError(ArithmeticError):
    """The singularity system could not be solved."""


class NewtonDivergence(SingularityError):
    """Newton iteration failed to converge."""


class OutsideDomain(SingularityError):
    """The iteration left the convergence domain (a pole of Phi came first)."""


@dataclass
class AsymptoticEstimate:
    gamma: Any
    c: Any
    t0: Any
    y0: Any
    residual: Any
    d: Any = None
    diagnostics: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        def num(x):
            if x is None:
                return None
            if isinstance(x, (list, tuple)):
                return [num(v) for v in x]
            return float(x)

        return {"gamma": num(self.gamma), "c": num(self.c), "d": num(self.d), "t0": num(self.t0),
                "y0": num(self.y0), "residual": num(self.residual), "diagnostics": self.diagnostics}


@dataclass
class LimitLaw:
    mu: Any
    sigma: Any
    rho_samples: list
    stability: Any
    mu_implicit: Any = None

    def as_dict(self) -> dict:
        return {"mu": float(self.mu), "sigma": float(self.sigma),
                "sigma2": float(self.sigma**2) if self.sigma is not None else None,
                "mu_implicit": None if self.mu_implicit is None else float(self.mu_implicit),
                "stability": float(self.stability),
                "rho_samples": [[float(u), float(r)] for u, r in self.rho_samples]}


def _to_mp(c: Fraction):
    return mpmath.mpf(c.numerator) / c.denominator


class _Numeric:
    """An expression with cached symbolic derivatives, evaluated in mpmath."""

    def __init__(self, expr: Expr):
        self.expr = expr
        self._d: dict[tuple[str, ...], Expr] = {(): expr}

    def d(self, *names: str) -> Expr:
        key = tuple(sorted(names))
        if key not in self._d:
            parent = self.d(*key[:-1])
            self._d[key] = diff(parent, key[-1])
        return self._d[key]

    def __call__(self, env: Mapping[str, Any], *names: str):
        return evaluate(self.d(*names), env, convert=_to_mp)


def _in_domain(denoms: Sequence[_Numeric], env) -> bool:
    try:
        return all(dn(env) > 0 for dn in denoms)
    except ZeroDivisionError:
        return False


def _denominators(*exprs: Expr) -> list[_Numeric]:
    seen, out = set(), []
    for e in exprs:
        for b in e.denominators():
            if id(b) not in seen:
                seen.add(id(b))
                out.append(_Numeric(b))
    return out


def coefficient_seed(phi: Expr, n: int = 200, unknown: str = "y") -> float:
    """t0 estimate a_{n-1}/a_n from the exact series of y = Phi(t, y)."""
    ring = SeriesRing(("t",))
    coeffs = solve_fixed_point(phi, {"t": ring.gen("t", n)}, n, unknown=unknown, ring=ring).to_list()
    k = n
    while k > 1 and not (coeffs[k] and coeffs[k - 1]):
        k -= 1
    if k <= 1:
        raise SingularityError("series has too few nonzero coefficients for a ratio seed")
    return float(Fraction(coeffs[k - 1]) / Fraction(coeffs[k]))


def _minimal_root(phi: _Numeric, t, denoms, unknown="y", max_iter=20000, tol=None):
    """Smallest nonnegative fixed point of y = Phi(t, y) by monotone iteration (None if it escapes)."""
    tol = tol or mpmath.mpf(10) ** (-(mpmath.mp.dps - 5))
    yv = mpmath.mpf(0)
    for _ in range(max_iter):
        env = {"t": t, unknown: yv}
        if not _in_domain(denoms, env):
            return None
        nxt = phi(env)
        if not mpmath.isfinite(nxt) or nxt > 1e6:
            return None
        if abs(nxt - yv) <= tol * (1 + abs(yv)):
            return nxt
        yv = nxt
    return yv


def _bisect_t0(phi: _Numeric, denoms, hi: float, unknown="y", steps=60):
    """Largest t with a bounded monotone fixed-point iteration (the singularity)."""
    lo = mpmath.mpf(0)
    hi = mpmath.mpf(hi)
    while _minimal_root(phi, hi, denoms, unknown, max_iter=4000) is not None:
        lo, hi = hi, hi * 2
        if hi > 1e6:
            raise OutsideDomain("no singularity found: iteration bounded for all t tried")
    for _ in range(steps):
        mid = (lo + hi) / 2
        if _minimal_root(phi, mid, denoms, unknown, max_iter=4000) is None:
            hi = mid
        else:
            lo = mid
    return lo


def solve_singularity(phi: Expr, *, env: Mapping[str, Any] | None = None, seed: tuple | None = None,
                      dps: int = DEFAULT_DPS, unknown: str = "y", seed_order: int = 200,
                      max_iter: int = 200, extra_domain: Sequence[Expr] = ()) -> tuple:
    """Solve ``y = Phi(t, y), Phi_y(t, y) = 1``; returns (t0, y0, residual).

    ``env`` binds any further variables of Phi (e.g. the link mark ``u``).
    The seed defaults to a coefficient-ratio estimate of t0 with y from
    the minimal fixed point slightly below it; if Newton from there fails,
    t0 is bracketed by bisection on boundedness of the fixed-point
    iteration and Newton is restarted.
    """
    env = dict(env or {})
    with mpmath.workdps(dps):
        bound = {k: v for k, v in env.items() if isinstance(v, mpmath.mpf)}
        exact = {k: v for k, v in env.items() if k not in bound}
        phi_b = subs(phi, exact)
        P = _Numeric(phi_b)
        denoms = _denominators(phi_b, *(subs(e, exact) for e in extra_domain))

        def full(tv, yv):
            e = dict(bound)
            e["t"], e[unknown] = tv, yv
            return e

        def newton(t_start, y_start):
            tv, yv = mpmath.mpf(t_start), mpmath.mpf(y_start)
            target = mpmath.mpf(10) ** (-(dps - 6))
            prev = None
            for _ in range(max_iter):
                e = full(tv, yv)
                if not _in_domain(denoms, e):
                    raise OutsideDomain(f"left the convergence domain at t={mpmath.nstr(tv, 8)}")
                F1 = P(e) - yv
                F2 = P(e, unknown) - 1
                res = max(abs(F1), abs(F2))
                if res < target:
                    return tv, yv, res
                a, b = P(e, "t"), P(e, unknown) - 1
                c_, d_ = P(e, "t", unknown), P(e, unknown, unknown)
                det = a * d_ - b * c_
                if det == 0:
                    raise NewtonDivergence("singular Jacobian in the singularity system")
                dt = (F1 * d_ - b * F2) / det
                dy = (a * F2 - c_ * F1) / det
                lam = mpmath.mpf(1)
                while True:
                    tn, yn = tv - lam * dt, yv - lam * dy
                    en = full(tn, yn)
                    if tn > 0 and _in_domain(denoms, en):
                        rn = max(abs(P(en) - yn), abs(P(en, unknown) - 1))
                        if rn < res or lam < 1e-6:
                            break
                    lam /= 2
                    if lam < 1e-12:
                        raise NewtonDivergence("damping failed to reduce the residual")
                tv, yv = tn, yn
                if prev is not None and rn > prev and lam < 1e-6:
                    raise NewtonDivergence("residual stagnated")
                prev = rn
            raise NewtonDivergence(f"no convergence in {max_iter} iterations")

        def start_from(t_guess):
            t_guess = mpmath.mpf(t_guess)
            y_guess = _minimal_root(P, t_guess, denoms, unknown)
            if y_guess is None:
                return None
            return t_guess, y_guess

        attempts = []
        if seed is not None:
            attempts.append(tuple(map(mpmath.mpf, seed)))
        else:
            try:
                if bound:
                    raise SingularityError("series seed needs exact bindings")
                ts = coefficient_seed(phi_b, seed_order, unknown) * (1 - 1.5 / seed_order)
                for shrink in (0.999, 0.99, 0.95, 0.8):
                    st = start_from(ts * shrink)
                    if st is not None:
                        attempts.append(st)
                        break
            except (SingularityError, ZeroDivisionError, TypeError):
                pass
        errors = []
        for st in attempts:
            try:
                return newton(*st)
            except SingularityError as exc:
                errors.append(exc)
        # bracketing fallback
        try:
            hi = float(attempts[0][0]) * 1.5 if attempts else 0.5
            tb = _bisect_t0(P, denoms, hi, unknown)
            st = start_from(tb * (1 - mpmath.mpf(10) ** -6))
            if st is None:
                raise OutsideDomain("bisection bracket did not yield a fixed point")
            return newton(*st)
        except SingularityError as exc:
            errors.append(exc)
        raise errors[-1]


def amplitude(phi: Expr, psi: Expr | None, t0, y0, *, env: Mapping[str, Any] | None = None,
              dps: int = DEFAULT_DPS, unknown: str = "y") -> tuple:
    """(c, d) at the singular point; d is None without ``psi``."""
    env = dict(env or {})
    with mpmath.workdps(dps):
        e = {k: (v if isinstance(v, mpmath.mpf) else _to_mp(Fraction(v))) for k, v in env.items()}
        e["t"], e[unknown] = mpmath.mpf(t0), mpmath.mpf(y0)
        P = _Numeric(phi)
        pt, pyy = P(e, "t"), P(e, unknown, unknown)
        if pyy <= 0:
            raise SingularityError("Phi_yy <= 0 at the singular point (not a square-root singularity)")
        c = mpmath.sqrt(e["t"] * pt / (2 * mpmath.pi * pyy))
        d = None
        if psi is not None:
            d = c * _Numeric(psi)(e, unknown)
        return c, d


def analyze(phi: Expr, psi: Expr | None = None, **kw) -> AsymptoticEstimate:
    """Singular point plus amplitudes for a one-equation system."""
    env = kw.pop("env", None)
    dps = kw.get("dps", DEFAULT_DPS)
    extra = (psi,) if psi is not None else ()
    t0, y0, res = solve_singularity(phi, env=env, extra_domain=extra, **kw)
    c, d = amplitude(phi, psi, t0, y0, env=env, dps=dps, unknown=kw.get("unknown", "y"))
    with mpmath.workdps(dps):
        gamma = 1 / t0
    return AsymptoticEstimate(gamma=gamma, c=c, d=d, t0=t0, y0=y0, residual=res)


# -- systems ----------------------------------------------------------------

def _lu_solve(A, b):
    return mpmath.lu_solve(mpmath.matrix(A), mpmath.matrix(b))


def solve_singularity_system(equations: Mapping[str, Expr], *, seed: Mapping[str, Any] | None = None,
                             t_seed=None, dps: int = DEFAULT_DPS, max_iter: int = 200,
                             seed_order: int = 200) -> AsymptoticEstimate:
    """Solve ``y = Phi(t, y), det(I - J_Phi) = 0`` for a k-equation positive system.

    Returns an estimate whose ``y0`` is the list of unknowns in the order of
    ``equations``; ``c`` is the list of amplitudes of the components.
    """
    names = list(equations)
    k = len(names)
    exprs = [equations[nm] for nm in names]
    with mpmath.workdps(dps):
        nums = [_Numeric(e) for e in exprs]
        denoms = _denominators(*exprs)

        def env_of(tv, ys):
            e = {"t": tv}
            e.update(zip(names, ys))
            return e

        def jac_y(e):
            return mpmath.matrix([[nums[i](e, names[j]) for j in range(k)] for i in range(k)])

        def F(vec):
            tv, ys = vec[0], list(vec[1:])
            e = env_of(tv, ys)
            vals = [nums[i](e) - ys[i] for i in range(k)]
            M = mpmath.eye(k) - jac_y(e)
            return vals + [mpmath.det(M)]

        # seed: ratio of the summed series, then the minimal fixed point below it
        if t_seed is None:
            ring = SeriesRing(("t",))
            env = {"t": ring.gen("t", seed_order)}
            sols = _solve_series_system(exprs, names, env, seed_order, ring)
            a = sols[0].to_list()
            # a_{n-1}/a_n ~ t0 (1 + 3/(2n)) for square-root singularities
            t_seed = float(Fraction(a[-2]) / Fraction(a[-1])) * (1 - 1.5 / seed_order)

        def minimal_root(tv):
            ys = [mpmath.mpf(0)] * k
            tol = mpmath.mpf(10) ** (-(dps - 5))
            for _ in range(20000):
                e = env_of(tv, ys)
                if not _in_domain(denoms, e):
                    return None
                nxt = [nums[i](e) for i in range(k)]
                if any(not mpmath.isfinite(v) or v > 1e6 for v in nxt):
                    return None
                if max(abs(a_ - b_) for a_, b_ in zip(nxt, ys)) < tol:
                    return nxt
                ys = nxt
            return ys

        if seed is None:
            for shrink in ("0.999", "0.99", "0.95", "0.8"):
                tv = mpmath.mpf(t_seed) * mpmath.mpf(shrink)
                ys = minimal_root(tv)
                if ys is not None:
                    break
            else:
                raise OutsideDomain("no seed point inside the convergence domain")
        else:
            tv = mpmath.mpf(t_seed)
            ys = [mpmath.mpf(seed[nm]) for nm in names]
        x = [tv] + ys
        target = mpmath.mpf(10) ** (-(dps - 8))
        fx = F(x)
        res = max(abs(v) for v in fx)
        for _ in range(max_iter):
            if res < target:
                break
            h = mpmath.mpf(10) ** (-(dps // 2))
            cols = []
            for j in range(k + 1):
                xp = list(x)
                xm = list(x)
                xp[j] += h
                xm[j] -= h
                fp, fm = F(xp), F(xm)
                cols.append([(a_ - b_) / (2 * h) for a_, b_ in zip(fp, fm)])
            Jm = [[cols[j][i] for j in range(k + 1)] for i in range(k + 1)]
            try:
                step = _lu_solve(Jm, [-v for v in fx])
            except ZeroDivisionError:
                raise NewtonDivergence("singular Jacobian of the characteristic system") from None
            lam = mpmath.mpf(1)
            while True:
                xn = [x[i] + lam * step[i] for i in range(k + 1)]
                if xn[0] > 0 and _in_domain(denoms, env_of(xn[0], xn[1:])):
                    fn = F(xn)
                    rn = max(abs(v) for v in fn)
                    if rn < res:
                        break
                lam /= 2
                if lam < 1e-10:
                    raise NewtonDivergence("damping failed in the characteristic system")
            x, fx, res = xn, fn, rn
        else:
            raise NewtonDivergence(f"no convergence in {max_iter} iterations")

        t0, y0 = x[0], x[1:]
        e = env_of(t0, y0)
        A = mpmath.eye(k) - jac_y(e)
        vr = _null_vector(A)
        vl = _null_vector(A.T)
        phit = [nums[i](e, "t") for i in range(k)]
        quad = [sum(nums[i](e, names[a], names[b]) * vr[a] * vr[b] for a in range(k) for b in range(k))
                for i in range(k)]
        ut = sum(vl[i] * phit[i] for i in range(k))
        uq = sum(vl[i] * quad[i] for i in range(k))
        if uq == 0 or ut / uq <= 0:
            raise SingularityError("degenerate quadratic term at the singular point")
        scale = mpmath.sqrt(2 * t0 * ut / uq)
        betas = [abs(scale * vr[i]) for i in range(k)]
        amps = [b / (2 * mpmath.sqrt(mpmath.pi)) for b in betas]
        return AsymptoticEstimate(gamma=1 / t0, c=amps, t0=t0, y0=list(y0), residual=res,
                                  diagnostics={"unknowns": names})


def _null_vector(A):
    """Unit-sup-norm vector spanning the (numerical) kernel of a singular matrix."""
    U, S, V = mpmath.svd_r(A)
    v = [V[V.rows - 1, j] for j in range(V.cols)]
    m = max(v, key=abs)
    return [x / m for x in v]


def _solve_series_system(exprs, names, env, order, ring):
    """Series solutions of y_i = Phi_i(t, y) by simultaneous iteration (exact)."""
    k = len(names)
    ys = [ring.zero(order) for _ in range(k)]
    for _ in range(order + 2):
        e = dict(env)
        e.update(zip(names, ys))
        nxt = []
        for ex in exprs:
            v = evaluate(ex, e)
            if not hasattr(v, "truncate"):
                v = ring.const(v, order)
            nxt.append(v.truncate(order))
        if all(a == b for a, b in zip(nxt, ys)):
            break
        ys = nxt
    return ys


def system_output_amplitude(est: AsymptoticEstimate, start: Expr, names: Sequence[str],
                            dps: int = DEFAULT_DPS):
    """Amplitude of a composed function ``start(t, y)`` of the system's components."""
    with mpmath.workdps(dps):
        e = {"t": est.t0}
        e.update(zip(names, est.y0))
        S = _Numeric(start)
        return sum(S(e, nm) * a for nm, a in zip(names, est.c))


# -- limit law --------------------------------------------------------------

def rho(phi_u: Expr, u, *, seed=None, dps: int = DEFAULT_DPS) -> tuple:
    """(t0(u), y0(u)) for Phi(t, u, y)."""
    with mpmath.workdps(dps):
        uu = u if isinstance(u, mpmath.mpf) else _to_mp(Fraction(u))
        t0, y0, _ = solve_singularity(phi_u, env={"u": uu}, seed=seed, dps=dps)
        return t0, y0


def limit_law(phi_u: Expr, h: float = 1e-3, dps: int = 40) -> LimitLaw:
    """Mean and variance constants of the link count from rho(u) = t0(u).

    mu = -rho'(1)/rho(1), sigma^2 = -rho''/rho - rho'/rho + (rho'/rho)^2,
    with central differences at steps h and 2h combined by Richardson
    extrapolation; ``stability`` is the change in (mu, sigma) when the step
    is halved.  ``mu_implicit`` is the exact implicit-function value of mu.
    """
    with mpmath.workdps(dps):
        phi1 = subs(phi_u, {"u": 1})
        t1, y1, _ = solve_singularity(phi1, dps=dps)
        samples = {mpmath.mpf(1): t1}
        seed = (t1, y1)

        def r_at(uv):
            if uv not in samples:
                samples[uv] = rho(phi_u, uv, seed=seed, dps=dps)[0]
            return samples[uv]

        def estimate(step):
            step = mpmath.mpf(step)
            one = mpmath.mpf(1)
            r0 = samples[one]
            rp1, rm1 = r_at(one + step), r_at(one - step)
            rp2, rm2 = r_at(one + 2 * step), r_at(one - 2 * step)
            d1h = (rp1 - rm1) / (2 * step)
            d1H = (rp2 - rm2) / (4 * step)
            d2h = (rp1 - 2 * r0 + rm1) / step**2
            d2H = (rp2 - 2 * r0 + rm2) / (4 * step**2)
            d1 = (4 * d1h - d1H) / 3
            d2 = (4 * d2h - d2H) / 3
            mu = -d1 / r0
            s2 = -d2 / r0 - d1 / r0 + (d1 / r0) ** 2
            return mu, s2

        mu, s2 = estimate(h)
        mu_half, s2_half = estimate(mpmath.mpf(h) / 2)
        if s2 <= 0:
            raise SingularityError(f"sigma^2 = {mpmath.nstr(s2, 6)} <= 0 after extrapolation")
        sigma = mpmath.sqrt(s2)
        stability = max(abs(mu - mu_half), abs(sigma - mpmath.sqrt(abs(s2_half))))
        # implicit derivative: d/du of {Phi - y = 0, Phi_y - 1 = 0}
        P = _Numeric(phi_u)
        e = {"t": t1, "y": y1, "u": mpmath.mpf(1)}
        A = [[P(e, "t"), P(e, "y") - 1], [P(e, "t", "y"), P(e, "y", "y")]]
        rhs = [-P(e, "u"), -P(e, "u", "y")]
        sol = _lu_solve(A, rhs)
        mu_imp = -sol[0] / t1
        pts = sorted(samples.items())
        return LimitLaw(mu=mu, sigma=sigma, rho_samples=pts, stability=stability, mu_implicit=mu_imp)


def ratio_diagnostic(coeffs: Sequence, n: int, gamma=None) -> tuple:
    """(a_n / a_{n-1}, a_n n^{3/2} / gamma^n); gamma defaults to the ratio itself."""
    a, b = coeffs[n], coeffs[n - 1]
    if not a or not b:
        raise ZeroDivisionError("zero coefficient in ratio diagnostic")
    with mpmath.workdps(30):
        an = _to_mp(Fraction(a))
        ratio = an / _to_mp(Fraction(b))
        g = ratio if gamma is None else mpmath.mpf(gamma)
        c_est = an * mpmath.mpf(n) ** mpmath.mpf(1.5) / g**n
        return ratio, c_est


# -- entry points for structure classes and grammars ------------------------

def class_asymptotics(cls, p=None, q=None, dps: int = DEFAULT_DPS) -> AsymptoticEstimate:
    """Growth constant and amplitudes of a structure class (models.StructureClass).

    ``c`` refers to the tree series y, ``d`` to the full generating function.
    """
    from .models import build_system

    phi, psi = build_system(cls).phi_psi(p, q)
    phi1, psi1 = subs(phi, {"u": 1}), subs(psi, {"u": 1})
    est = analyze(phi1, psi1, dps=dps)
    est.diagnostics["class"] = cls.name
    return est


def class_limit_law(cls, p=None, q=None, h: float = 1e-3, dps: int = 40) -> LimitLaw:
    """Gaussian limit-law constants of the link count of a structure class."""
    from .models import build_system

    phi, _ = build_system(cls).phi_psi(p, q)
    return limit_law(phi, h=h, dps=dps)


def grammar_asymptotics(grammar: str, theta: int = 1, q=1, dps: int = DEFAULT_DPS,
                        eliminate: bool = False) -> AsymptoticEstimate:
    """Growth constant and start-symbol amplitude (``d``) of a grammar's equation system."""
    from .grammars import eliminate_to_single, grammar_system

    system = grammar_system(grammar, theta=theta, q=Fraction(q))
    if eliminate:
        system = eliminate_to_single(system)
    names = list(system.unknowns)
    if len(names) == 1:
        est = analyze(system.equations[names[0]], system.start, unknown=names[0], dps=dps)
    else:
        est = solve_singularity_system(system.equations, dps=dps)
        est.d = system_output_amplitude(est, system.start, names, dps=dps)
    est.diagnostics["grammar"] = system.name
    return est
