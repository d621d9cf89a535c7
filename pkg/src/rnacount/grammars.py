"""Counting dynamic programs for unambiguous structure grammars.

Every grammar here is translated into recurrences over subword *length*
(in the homopolymer model a nonterminal's count depends only on the length
it spans).  The tables are filled with plain ``+`` and ``*`` so any value
type works: exact integers, Fractions, floats, or the packed integers used
by :func:`grammar_distribution` to recover mark statistics.

Grammars (``theta`` is the minimum hairpin size):

* G1  ``S -> . | S. | (H) | S(H)``: all structures, ``u`` marks pairs.
* G2  ``S -> . | S. | T | ST``, ``T -> (.) | (S.) | (T) | (ST)``: ``u``
  marks pairs, ``v`` marks stacked pairs (a pair whose interior is a
  single closed structure).
* G3  loop decomposition (hairpin / stack-bulge-interior / multiloop); used
  only to recount all structures.
* G4  loop decomposition with dangles, including multiloop-internal ones.
* G5  loop decomposition with external dangles only.
* G6  saturated structures (theta = 1 only).

For G4 and G5 each dangle carries weight ``q`` (``q = 1`` counts annotated
structures).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from .expr import Expr, subs, var

GRAMMARS = ("G1", "G2", "G3", "G4", "G5", "G6")


class GrammarError(ValueError):
    """Unsupported grammar or parameter combination."""


def _conv(a: list, b: list, n: int, lo_a: int = 0, lo_b: int = 0):
    """Coefficient n of the product of two length-indexed tables."""
    total = 0
    for k in range(lo_a, n - lo_b + 1):
        x = a[k]
        if x:
            y = b[n - k]
            if y:
                total = total + x * y
    return total


def g1_table(n: int, theta: int = 1, u: Any = 1) -> list:
    """S[L] for L = 0..n (S[0] = 0: S generates nonempty words)."""
    S = [0] * (n + 1)

    def H(L):
        if L == 0:
            return 1 if theta == 0 else 0
        return S[L] if L >= theta else 0

    for L in range(1, n + 1):
        val = (1 if L == 1 else 0) + S[L - 1]
        if L >= 2:
            closed = H(L - 2)
            for m in range(1, L - 1):
                h = H(L - 2 - m)
                if h and S[m]:
                    closed = closed + S[m] * h
            val = val + u * closed
        S[L] = val
    return S


def g2_tables(n: int, theta: int = 1, u: Any = 1, v: Any = 1) -> tuple[list, list]:
    """(S, T) tables for the stacking grammar."""
    S = [0] * (n + 1)
    T = [0] * (n + 1)
    for L in range(1, n + 1):
        if L >= 2:
            c = L - 2
            inner = 0
            if c == 0:
                inner = 1 if theta == 0 else 0
            elif c >= theta:
                inner = (1 if c == 1 else 0) + S[c - 1] + v * T[c] + _conv(S, T, c, 1, 1)
            T[L] = u * inner if inner else 0
        S[L] = (1 if L == 1 else 0) + S[L - 1] + T[L] + _conv(S, T, L, 1, 1)
    return S, T


def g3_table(n: int, theta: int = 1) -> list:
    """Total structure counts via the loop-decomposition grammar."""
    B = [0] * (n + 1)
    M1 = [0] * (n + 1)
    M = [0] * (n + 1)
    S = [0] * (n + 1)
    for L in range(1, n + 1):
        if L >= 2:
            # hairpin, then stack/bulge/interior with m = a+b unpaired
            b = 1 if L - 2 >= theta else 0
            for m in range(0, L - 3):
                b += (m + 1) * B[L - 2 - m]
            b += _conv(M, M1, L - 2, 1, 1)
            B[L] = b
        M1[L] = sum(B[2:L + 1])
        M[L] = M1[L] + sum(M1[1:L]) + _conv(M, M1, L, 1, 1)
        S[L] = (1 if L == 1 else 0) + B[L] + S[L - 1] + _conv(S, B, L, 1, 1)
    return S


def _dangle_tables(n: int, theta: int, u: Any, q: Any, external_only: bool) -> list:
    B = [0] * (n + 1)
    Bd = [0] * (n + 1)  # B (1 + q z)^2: optional 5' and 3' dangles around a helix
    M1 = [0] * (n + 1)
    M = [0] * (n + 1)
    MM = [0] * (n + 1)
    S = [0] * (n + 1)
    q2 = q * q
    if external_only:
        # (1 + L)^2 with L = (1+q) U:  1, then 2(1+q) + (1+q)^2 (a-1) for a >= 1
        one_q = 1 + q

        def flank(a):
            return 1 if a == 0 else 2 * one_q + one_q * one_q * (a - 1)
    else:
        def flank(a):
            return a + 1  # (1 + U)^2
    for L in range(1, n + 1):
        if L >= 2:
            c = L - 2
            val = 1 if c >= theta else 0
            for a in range(0, c - 1):
                if B[c - a]:
                    val = val + flank(a) * B[c - a]
            if external_only:
                val = val + MM[c]
            else:
                mm = MM[c]
                if c >= 1:
                    mm = mm + 2 * q * MM[c - 1]
                if c >= 2:
                    mm = mm + q2 * MM[c - 2]
                val = val + mm
            B[L] = u * val
        bd = B[L]
        if L >= 1:
            bd = bd + 2 * q * B[L - 1]
        if L >= 2:
            bd = bd + q2 * B[L - 2]
        Bd[L] = bd
        M1[L] = M1[L - 1] + Bd[L]
        # M = (1 + U + M) M1
        m = M1[L]
        for k in range(1, L):
            m = m + (1 + M[k]) * M1[L - k]
        M[L] = m
        MM[L] = _conv(M, M1, L, 1, 1)
        # S = z + z S + (1 + S) B (1 + q z)^2
        s = (1 if L == 1 else 0) + S[L - 1] + Bd[L]
        s = s + _conv(S, Bd, L, 1, 1)
        S[L] = s
    return S


def g4_table(n: int, theta: int = 1, u: Any = 1, q: Any = 1) -> list:
    return _dangle_tables(n, theta, u, q, external_only=False)


def g5_table(n: int, theta: int = 1, u: Any = 1, q: Any = 1) -> list:
    return _dangle_tables(n, theta, u, q, external_only=True)


def g6_table(n: int, theta: int = 1, u: Any = 1) -> list:
    """Saturated structures; the grammar is specific to theta = 1."""
    if theta != 1:
        raise GrammarError("the saturated-structure grammar G6 is defined for theta = 1 only")
    S = [0] * (n + 1)
    R = [0] * (n + 1)
    for L in range(1, n + 1):
        s = (1 if L <= 2 else 0) + R[L - 1]
        if L >= 2:
            s = s + R[L - 2] + u * S[L - 2] + u * _conv(S, S, L - 2, 1, 1)
        r = 0
        if L >= 2:
            r = u * S[L - 2] + u * _conv(R, S, L - 2, 1, 1)
        S[L], R[L] = s, r
    return S


def grammar_table(grammar: str, n: int, theta: int = 1, *, u: Any = 1, v: Any = 1,
                  q: Any = 1) -> list:
    """Length-indexed start-symbol table ``[0, c_1, ..., c_n]``."""
    grammar = grammar.upper()
    if grammar == "G1":
        return g1_table(n, theta, u)
    if grammar == "G2":
        return g2_tables(n, theta, u, v)[0]
    if grammar == "G3":
        return g3_table(n, theta)
    if grammar == "G4":
        return g4_table(n, theta, u, q)
    if grammar == "G5":
        return g5_table(n, theta, u, q)
    if grammar == "G6":
        return g6_table(n, theta, u)
    raise GrammarError(f"unknown grammar {grammar!r}")


def grammar_count(grammar: str, n: int, theta: int = 1, **marks) -> Any:
    """Weighted number of derivations of length ``n`` (the structure count for unit marks)."""
    if n < 1:
        raise ValueError("n must be positive")
    return grammar_table(grammar, n, theta, **marks)[n]


def _unpack(value: int, bits: int) -> list[int]:
    mask = (1 << bits) - 1
    out = []
    while value:
        out.append(value & mask)
        value >>= bits
    return out


def grammar_distribution(grammar: str, n: int, theta: int = 1, mark: str = "pairs",
                         q: int = 1) -> dict:
    """Exact counts of length-``n`` derivations by a marked statistic.

    ``mark`` is ``"pairs"`` (any grammar but G3), ``"stacked"`` (G2) or
    ``"joint"`` (G2; keys are (pairs, stacked)).  Marks are realised as
    powers of two wide enough that packed digits never overflow into each
    other.
    """
    grammar = grammar.upper()
    if grammar == "G3":
        raise GrammarError("G3 is a counting grammar without marks")
    if mark in ("stacked", "joint") and grammar != "G2":
        raise GrammarError("stacked-pair marks exist only for G2")
    if mark not in ("pairs", "stacked", "joint"):
        raise ValueError(f"unknown mark {mark!r}")
    extra = {"q": q} if grammar in ("G4", "G5") else {}
    total = grammar_count(grammar, n, theta, **extra)
    bits = max(total.bit_length() + 1, 2)
    X = 1 << bits
    if mark == "pairs":
        digits = _unpack(grammar_count(grammar, n, theta, u=X, **extra), bits)
        return {k: c for k, c in enumerate(digits) if c}
    if mark == "stacked":
        digits = _unpack(grammar_count(grammar, n, theta, v=X), bits)
        return {k: c for k, c in enumerate(digits) if c}
    slots = n // 2 + 1
    digits = _unpack(grammar_count(grammar, n, theta, u=X, v=X**slots), bits)
    return {(e % slots, e // slots): c for e, c in enumerate(digits) if c}


# -- grammar equation systems -----------------------------------------------

@dataclass(frozen=True)
class GrammarSystem:
    """Functional equations of a grammar.

    ``equations`` maps each nonterminal of the strongly connected core to
    its right-hand side in ``t`` (length) and the core unknowns; ``start``
    expresses the start symbol through the core, so S = start(t, core).
    """

    name: str
    equations: dict
    start: Expr

    @property
    def unknowns(self) -> tuple[str, ...]:
        return tuple(self.equations)


def grammar_system(grammar: str, theta: int = 1, q: Any = 1, u: Any = 1) -> GrammarSystem:
    """Equation system obtained by the standard grammar-to-generating-function translation."""
    grammar = grammar.upper()
    z = var("t")
    if grammar == "G1":
        S = var("S")
        H = S + (1 if theta == 0 else 0)
        if theta > 1:
            raise GrammarError("the G1 equation system is provided for theta <= 1")
        eq = z + z * S + u * z**2 * H + u * z**2 * S * H
        return GrammarSystem("G1", {"S": eq}, S)
    if grammar == "G6":
        if theta != 1:
            raise GrammarError("the saturated-structure grammar G6 is defined for theta = 1 only")
        S, R = var("S"), var("R")
        eqS = z + z**2 + R * (z + z**2) + u * z**2 * S + u * z**2 * S**2
        eqR = u * z**2 * S + R * u * z**2 * S
        return GrammarSystem("G6", {"S": eqS, "R": eqR}, S)
    if grammar not in ("G4", "G5"):
        raise GrammarError(f"no equation system for {grammar!r}")
    B, M, M1 = var("B"), var("M"), var("M1")
    U = z / (1 - z)
    P = z**theta / (1 - z)
    flank = (1 + q * z) ** 2
    if grammar == "G4":
        eqB = u * z**2 * (P + B * (1 + U) ** 2 + flank * M * M1)
    else:
        L = (1 + q) * U
        eqB = u * z**2 * (P + B * (1 + L) ** 2 + M * M1)
    eqM = (1 + U + M) * M1
    eqM1 = z * M1 + B * flank
    # S = z + z S + (1 + S) B flank, solved for S
    Bf = B * flank
    start = (z + Bf) / (1 - z - Bf)
    return GrammarSystem(grammar, {"B": eqB, "M": eqM, "M1": eqM1}, start)


def eliminate_to_single(system: GrammarSystem) -> GrammarSystem:
    """G4/G5 core reduced to one equation in B (M1 and M solved explicitly)."""
    if system.name not in ("G4", "G5"):
        raise GrammarError("elimination is provided for G4/G5")
    z = var("t")
    eqM1 = system.equations["M1"]
    # M1 = z M1 + c  =>  M1 = c / (1 - z)
    c = subs(eqM1, {"M1": 0})
    M1 = c / (1 - z)
    # M = (1 + U + M) M1  =>  M = (1 + U) M1 / (1 - M1)
    one_plus_U = subs(system.equations["M"], {"M": 0, "M1": 1})
    M = one_plus_U * M1 / (1 - M1)
    eqB = subs(system.equations["B"], {"M": M, "M1": M1})
    return GrammarSystem(system.name + "-eliminated", {"B": eqB}, system.start)
