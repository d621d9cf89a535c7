from __future__ import annotations

import math

import mpmath
import pytest

from rnacount.asymptotics import (NewtonDivergence, OutsideDomain, SingularityError, amplitude, analyze,
                                  class_asymptotics, class_limit_law, coefficient_seed, grammar_asymptotics,
                                  limit_law, ratio_diagnostic, solve_singularity, solve_singularity_system)
from rnacount.expr import var
from rnacount.models import StructureClass, gf_series
from rnacount.series import SeriesRing, solve_fixed_point
from rnacount.structures import ModelParams

t, y, u = var("t"), var("y"), var("u")


def test_catalan_constants():
    # y = t (1 + y)^2 has [t^n] y = Catalan(n) ~ 4^n / (sqrt(pi) n^(3/2))
    est = analyze(t * (1 + y) ** 2, y)
    with mpmath.workdps(30):
        assert abs(est.gamma - 4) < 1e-20
        assert abs(est.t0 - mpmath.mpf(1) / 4) < 1e-20
        assert abs(est.y0 - 1) < 1e-20
        assert abs(est.c - 1 / mpmath.sqrt(mpmath.pi)) < 1e-20
    assert est.d == est.c


def test_rational_phi_and_explicit_seed():
    # Motzkin: y = t (1 + y) + t^2 (1 + y)^2, t0 = 1/3
    phi = t * (1 + y) + t**2 * (1 + y) ** 2
    t0, y0, res = solve_singularity(phi, seed=(0.3, 1.5))
    with mpmath.workdps(30):
        assert abs(t0 - mpmath.mpf(1) / 3) < 1e-20
    assert res < 1e-20
    c, d = amplitude(phi, None, t0, y0)
    assert d is None and c > 0


def test_coefficient_seed_is_close():
    seed = coefficient_seed(t * (1 + y) ** 2)
    assert abs(seed - 0.25) < 0.01


def test_general_class_golden_ratio():
    est = class_asymptotics(StructureClass())
    golden = (3 + math.sqrt(5)) / 2
    assert abs(float(est.gamma) - golden) < 1e-12
    assert abs(float(est.d) - 1.104366) < 1e-6


def test_precision_is_configurable():
    lo = class_asymptotics(StructureClass("saturated"), dps=20)
    hi = class_asymptotics(StructureClass("saturated"), dps=50)
    assert abs(lo.gamma - hi.gamma) < 1e-15
    assert hi.residual < mpmath.mpf(10) ** -40


def test_grammar_systems_single_and_eliminated_agree():
    full = grammar_asymptotics("G4")
    single = grammar_asymptotics("G4", eliminate=True)
    assert abs(full.gamma - single.gamma) < 1e-15
    assert abs(full.d - single.d) < 1e-12
    assert len(full.y0) == 3


def test_g5_matches_dangle_class():
    grammar = grammar_asymptotics("G5", eliminate=True)
    cls = class_asymptotics(StructureClass("general", True, ModelParams(q=1)))
    assert abs(grammar.gamma - cls.gamma) < 1e-15
    assert abs(grammar.d - cls.d) < 1e-12


def test_saturated_grammar_matches_class():
    grammar = grammar_asymptotics("G6")
    cls = class_asymptotics(StructureClass("saturated"))
    assert abs(grammar.gamma - cls.gamma) < 1e-15
    assert abs(grammar.d - cls.d) < 1e-10


def test_two_equation_system_for_catalan_pair():
    # y1 = t (1 + y2)^2, y2 = y1: same singularity as Catalan
    y1, y2 = var("y1"), var("y2")
    est = solve_singularity_system({"y1": t * (1 + y2) ** 2, "y2": y1})
    assert abs(est.gamma - 4) < 1e-15
    assert abs(est.c[0] - 1 / mpmath.sqrt(mpmath.pi)) < 1e-12


def test_non_square_root_singularity_is_reported():
    # a Phi linear in y has a pole, not a branch point
    with pytest.raises(SingularityError):
        analyze(t + t * y)


def test_error_types():
    assert issubclass(NewtonDivergence, SingularityError)
    assert issubclass(OutsideDomain, SingularityError)
    assert issubclass(SingularityError, ArithmeticError)


def test_amplitude_predicts_coefficients():
    cls = StructureClass("gsaturated")
    est = class_asymptotics(cls)
    n = 300
    exact = gf_series(cls, n)[n]
    approx = est.d * est.gamma**n * mpmath.mpf(n) ** mpmath.mpf(-1.5)
    assert abs(approx / exact - 1) < 0.03


def test_ratio_diagnostic():
    ring = SeriesRing(("t",))
    f = solve_fixed_point(t * (1 + y) ** 2, {"t": ring.gen("t", 400)}, 400).to_list()
    ratio, c_est = ratio_diagnostic(f, 400, gamma=4)
    assert abs(ratio - 4) < 0.02
    assert abs(c_est - 1 / mpmath.sqrt(mpmath.pi)) < 0.01
    with pytest.raises(ZeroDivisionError):
        ratio_diagnostic([0, 0, 1], 2)


def test_limit_law_general_class():
    law = class_limit_law(StructureClass())
    # the mean link density of the general class is (5 - sqrt 5) / 10
    assert abs(float(law.mu) - (5 - math.sqrt(5)) / 10) < 1e-8
    assert abs(law.mu - law.mu_implicit) < 1e-8
    assert law.sigma > 0
    assert law.stability < 1e-6
    d = law.as_dict()
    assert set(d) >= {"mu", "sigma", "sigma2", "mu_implicit", "stability", "rho_samples"}


def test_limit_law_on_marked_catalan():
    # binary trees where u marks every occupied right-child slot
    phi = t * (1 + y) * (1 + u * y)
    law = limit_law(phi)
    assert 0 < law.mu < 1
    assert abs(law.mu - law.mu_implicit) < 1e-8
