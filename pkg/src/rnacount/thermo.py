"""Partition functions and melting curves for homopolymer energy models.

Nussinov model: every pair contributes -epsilon.  Base-stacking model:
every stacked pair contributes -epsilon.  Exact occupancy tables
N_k (number of length-n structures with statistic k) come from the
grammar DPs; thermal averages are computed from them in log-sum-exp form.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction

from .expr import diff, var
from .grammars import g2_tables, grammar_distribution
from .series import SeriesRing, solve_fixed_point

R_PHYSICAL = 0.0019872  # kcal / (mol K)
R_PAPER = 0.001959
KELVIN = 273.15


class MeltingError(ArithmeticError):
    """No melting transition in the searched interval."""


@dataclass(frozen=True)
class EnergyModel:
    kind: str = "nussinov"
    epsilon: float = 1.0
    R: float = R_PHYSICAL

    def __post_init__(self):
        if self.kind not in ("nussinov", "stacking"):
            raise ValueError(f"unknown energy model {self.kind!r}")
        if self.epsilon <= 0 or self.R <= 0:
            raise ValueError("epsilon and R must be positive")

    def log_weight(self, T: float) -> float:
        """log w with w = exp(epsilon / (R T)), the Boltzmann factor per unit of statistic."""
        if T <= 0:
            raise ValueError("temperature must be positive (Kelvin)")
        return self.epsilon / (self.R * T)


@dataclass
class MeltingCurve:
    temperatures: list
    expected: list
    tm: float | None


def occupancy_table(n: int, model: EnergyModel, theta: int = 1) -> dict[int, int]:
    """{k: number of structures with k pairs (Nussinov) or k stacked pairs (stacking)}."""
    if model.kind == "nussinov":
        return grammar_distribution("G1", n, theta, mark="pairs")
    return grammar_distribution("G2", n, theta, mark="stacked")


def _log_moments(table: dict, log_w: float, values: dict | None = None) -> float:
    """sum_k values_k w^k / sum_k N_k w^k computed stably (values default k N_k)."""
    if not table:
        raise ValueError("empty occupancy table")
    logs = {k: math.log(c) + k * log_w for k, c in table.items() if c}
    top = max(logs.values())
    z = sum(math.exp(v - top) for v in logs.values())
    if values is None:
        num = sum(k * math.exp(logs[k] - top) for k in logs)
    else:
        num = sum(float(Fraction(values.get(k, 0), table[k])) * math.exp(logs[k] - top) for k in logs)
    return num / z


def expected_from_table(table: dict, model: EnergyModel, T: float, values: dict | None = None) -> float:
    return _log_moments(table, model.log_weight(T), values)


def expected_pairs(n: int, model: EnergyModel, T: float, theta: int = 1, table: dict | None = None) -> float:
    """Thermal mean of the model's statistic at temperature T (Kelvin)."""
    table = table if table is not None else occupancy_table(n, model, theta)
    return expected_from_table(table, model, T)


def unweighted_mean(table: dict) -> Fraction:
    return Fraction(sum(k * c for k, c in table.items()), sum(table.values()))


class _Dual:
    """a + b*eps with eps^2 = 0; tracks a first derivative through a DP."""

    __slots__ = ("a", "b")

    def __init__(self, a, b=0):
        self.a, self.b = a, b

    def __add__(self, o):
        if isinstance(o, _Dual):
            return _Dual(self.a + o.a, self.b + o.b)
        return _Dual(self.a + o, self.b)

    __radd__ = __add__

    def __mul__(self, o):
        if isinstance(o, _Dual):
            return _Dual(self.a * o.a, self.a * o.b + self.b * o.a)
        return _Dual(self.a * o, self.b * o)

    __rmul__ = __mul__

    def __bool__(self):
        return bool(self.a) or bool(self.b)


def stacking_pair_table(n: int, theta: int = 1) -> tuple[dict, dict]:
    """({m: N_m}, {m: sum of pair counts over structures with m stacked pairs}).

    The G2 DP runs with the stacked mark packed into powers of two and the
    pair mark as a dual number evaluated at u = 1.
    """
    table = grammar_distribution("G2", n, theta, mark="stacked")
    total_pairs_bound = sum(table.values()) * (n // 2 + 1)
    bits = total_pairs_bound.bit_length() + 1
    X = 1 << bits
    S, _ = g2_tables(n, theta, u=_Dual(1, 1), v=X)
    val = S[n]
    if not isinstance(val, _Dual):
        val = _Dual(val, 0)
    mask = X - 1
    counts, pairs = {}, {}
    a, b, m = val.a, val.b, 0
    while a or b:
        if a & mask:
            counts[m] = a & mask
            pairs[m] = b & mask
        a >>= bits
        b >>= bits
        m += 1
    return counts, pairs


def expected_total_pairs_stacking(n: int, T: float, model: EnergyModel | None = None, theta: int = 1,
                                  tables: tuple | None = None) -> float:
    """Thermal mean of the number of pairs under stacking-model weights."""
    model = model or EnergyModel("stacking")
    counts, pairs = tables if tables is not None else stacking_pair_table(n, theta)
    return expected_from_table(counts, model, T, values=pairs)


def zero_temperature_limit(table: dict) -> int:
    return max(k for k, c in table.items() if c)


def melting_temperature(n: int, model: EnergyModel, theta: int = 1, *, reference: str = "ground",
                        table: dict | None = None, lo: float = 1.0, hi: float = 1.0e5,
                        tol: float = 1e-9) -> float:
    """Temperature (Kelvin) at which the mean statistic falls to a reference level.

    ``reference="ground"``: half of the T -> 0 limit (the maximum statistic).
    ``reference="midpoint"``: halfway between the T -> 0 limit and the
    T -> infinity limit (the unweighted mean).  Bisection relies on the
    mean being nonincreasing in T.
    """
    table = table if table is not None else occupancy_table(n, model, theta)
    kmax = zero_temperature_limit(table)
    if kmax == 0:
        raise MeltingError(f"no pairs possible at n={n}, theta={theta}: nothing to melt")
    if reference == "ground":
        level = kmax / 2
    elif reference == "midpoint":
        level = (kmax + float(unweighted_mean(table))) / 2
    else:
        raise ValueError(f"unknown reference {reference!r}")
    f_lo = expected_from_table(table, model, lo) - level
    f_hi = expected_from_table(table, model, hi) - level
    if f_lo < 0 or f_hi > 0:
        raise MeltingError(
            f"mean statistic does not cross {level:g} on [{lo:g}, {hi:g}] K "
            f"(high-temperature mean {float(unweighted_mean(table)):.4f})")
    while hi - lo > tol * max(1.0, lo):
        mid = (lo + hi) / 2
        if expected_from_table(table, model, mid) > level:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def melting_curve(n: int, model: EnergyModel, temps_celsius, theta: int = 1,
                  reference: str = "ground") -> MeltingCurve:
    table = occupancy_table(n, model, theta)
    values = [expected_from_table(table, model, T + KELVIN) for T in temps_celsius]
    try:
        tm = melting_temperature(n, model, theta, reference=reference, table=table) - KELVIN
    except MeltingError:
        tm = None
    return MeltingCurve(list(temps_celsius), values, tm)


def max_slope(temps, values) -> float:
    """Largest |d value / d T| over consecutive grid points."""
    return max(abs((b - a) / (t2 - t1)) for t1, t2, a, b in zip(temps, temps[1:], values, values[1:]))


def figure_csv(n: int, temps_celsius, theta: int = 1, epsilon: float = 1.0, R: float = R_PHYSICAL) -> str:
    """CSV of both melting curves on a Celsius grid."""
    nus = EnergyModel("nussinov", epsilon, R)
    stk = EnergyModel("stacking", epsilon, R)
    t_nus = occupancy_table(n, nus, theta)
    counts, pairs = stacking_pair_table(n, theta)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["T_celsius", "expected_pairs_nussinov", "expected_stacked_pairs_stacking",
                "expected_pairs_stacking"])
    for Tc in temps_celsius:
        T = Tc + KELVIN
        w.writerow([f"{Tc:g}", f"{expected_from_table(t_nus, nus, T):.10f}",
                    f"{expected_from_table(counts, stk, T):.10f}",
                    f"{expected_from_table(counts, stk, T, values=pairs):.10f}"])
    return buf.getvalue()


# -- generating-function derivative route -----------------------------------

def mean_by_derivative(n: int, model: EnergyModel) -> Fraction:
    """Unweighted mean statistic from [z^n] dS/dmark at mark = 1 (theta = 1).

    Nussinov: S = z + zS + u z^2 S + u z^2 S^2, differentiate in u.
    Stacking: T = u z^3 (1+S) / (1 - u v z^2 - u z^2 S), S = z + zS + T(1+S),
    differentiate in v.
    """
    z, S, u, v = var("z"), var("S"), var("u"), var("v")
    if model.kind == "nussinov":
        Q = z + z * S + u * z**2 * S + u * z**2 * S**2
        mark = "u"
    else:
        T = u * z**3 * (1 + S) / (1 - u * v * z**2 - u * z**2 * S)
        Q = z + z * S + T * (1 + S)
        mark = "v"
    ring = SeriesRing(("z",))
    env = {"z": ring.gen("z", n), "u": 1, "v": 1}
    f = solve_fixed_point(Q, env, n, unknown="S", ring=ring)
    full = dict(env, S=f)
    fm = diff(Q, mark).evaluate(full) / (1 - diff(Q, "S").evaluate(full))
    return Fraction(fm[n], f[n])
