"""Cross-checks of brute-force, grammar and generating-function counts."""

from __future__ import annotations

from dataclasses import dataclass, field

from .grammars import grammar_count
from .models import ModelError, StructureClass, gf_series
from .structures import FAMILIES, ModelParams, census, census_total


@dataclass
class CheckRow:
    family: str
    dangles: bool
    theta: int
    tau: int
    q: int
    n: int
    oracle: int
    series: int
    grammars: dict = field(default_factory=dict)

    @property
    def consistent(self) -> bool:
        return self.oracle == self.series and all(v == self.oracle for v in self.grammars.values())

    def describe(self) -> str:
        name = self.family + ("+dangles" if self.dangles else "")
        gram = " ".join(f"{g}={v}" for g, v in sorted(self.grammars.items()))
        return (f"{name} theta={self.theta} tau={self.tau} q={self.q} n={self.n}: "
                f"oracle={self.oracle} series={self.series} {gram}".rstrip())


def _grammar_counts(family: str, dangles: bool, theta: int, tau: int, q: int, n: int) -> dict:
    if tau != 0:
        return {}
    out = {}
    if family == "general" and not dangles:
        for g in ("G1", "G2", "G3"):
            out[g] = grammar_count(g, n, theta)
    elif family == "general" and dangles:
        out["G5"] = grammar_count("G5", n, theta, q=q)
    elif family == "saturated" and not dangles and theta == 1:
        out["G6"] = grammar_count("G6", n, theta)
    return out


def classes(thetas=(0, 1, 3), taus=(0, 1), qs=(0, 1, 2)):
    """Every (StructureClass, q) combination covered by the models."""
    for theta in thetas:
        for tau in taus:
            for family in FAMILIES:
                for dangles in (False, True):
                    for q in (qs if dangles else (0,)):
                        try:
                            cls = StructureClass(family, dangles, ModelParams(theta, tau, 1, q))
                        except ModelError:
                            continue
                        yield cls, q


def consistency_rows(n_max: int, thetas=(0, 1, 3), taus=(0, 1), qs=(0, 1, 2)) -> list[CheckRow]:
    rows = []
    tables = {}
    for cls, q in classes(thetas, taus, qs):
        prm = cls.params
        series = gf_series(cls, n_max)
        for n in range(1, n_max + 1):
            key = (n, prm.theta, prm.tau)
            if key not in tables:
                tables[key] = census(n, ModelParams(prm.theta, prm.tau))
            table = tables[key][cls.family]
            oracle = census_total(table, 1, q if cls.dangles else 0)
            rows.append(CheckRow(cls.family, cls.dangles, prm.theta, prm.tau, q, n, oracle, series[n],
                                 _grammar_counts(cls.family, cls.dangles, prm.theta, prm.tau, q, n)))
    return rows
