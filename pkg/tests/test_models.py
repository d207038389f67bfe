import numpy as np
import pytest
from pydantic import ValidationError

from fracvqa.core.errors import UsageError
from fracvqa.solver.models import (
    BurgersProblem,
    SeirProblem,
    SubdiffusionProblem,
    grid_points,
    problem_summary,
    reproduction_number,
    sample_initial,
)


def test_grid_and_initial_profiles():
    np.testing.assert_allclose(grid_points(4, 1.0), [0.25, 0.5, 0.75, 1.0])
    np.testing.assert_allclose(sample_initial("parabola", 4), [0.1875, 0.25, 0.1875, 0.0])
    np.testing.assert_allclose(sample_initial("constant", 4), 1.0)
    np.testing.assert_allclose(sample_initial(lambda x: 2 * x, 4), [0.5, 1.0, 1.5, 2.0])
    with pytest.raises(UsageError):
        sample_initial("parabola", 6)
    with pytest.raises(UsageError):
        sample_initial("gaussian", 4)


def test_domain_derived_quantities():
    p = SubdiffusionProblem(alpha=0.5, T=0.5, N=32, M=32)
    assert p.h == pytest.approx(1 / 32)
    assert p.tau == pytest.approx(0.5 / 32)
    assert p.n_qubits == 5
    assert p.t()[-1] == pytest.approx(0.5)
    assert p.a == pytest.approx(1.0 / (p.weights().g * p.h ** 2))


def test_problem_validation():
    with pytest.raises(ValidationError):
        SubdiffusionProblem(N=12)
    with pytest.raises(ValidationError):
        SubdiffusionProblem(alpha=1.2)
    with pytest.raises(ValidationError):
        SubdiffusionProblem(unknown=1)
    with pytest.raises(ValidationError):
        SeirProblem(alphas=(1.0, 0.0, 1.0, 1.0))
    with pytest.raises(ValidationError):
        SeirProblem(nus=(1e-3, -1e-3, 0.0, 0.0))


def test_burgers_metadata():
    p = BurgersProblem(alpha=1.0, nu=0.02, N=32, M=32, T=1.0)
    assert p.reynolds == pytest.approx(100.0)
    assert p.courant == pytest.approx(1.0)
    assert p.b_adv == pytest.approx(1.0 / (2.0 * p.weights().g * p.h))
    assert p.initial_values()[-1] == pytest.approx(0.0, abs=1e-12)


def test_seir_reproduction_number():
    assert reproduction_number(SeirProblem()) == pytest.approx(0.6675, abs=0.005)
    assert SeirProblem(beta=1.02e-5).reproduction_number() == pytest.approx(1.335, abs=0.005)
    with pytest.raises(UsageError):
        reproduction_number(SeirProblem(mu=0.0))


def test_seir_operators():
    p = SeirProblem()
    assert p.initial_values("I")[0] == pytest.approx(20.0 * np.exp(-2.0 / 16))
    np.testing.assert_allclose(p.initial_values("S"), 22500.0)
    A = p.system_matrix("E")
    assert A.shift == pytest.approx(p.sigma + p.mu + p.weights("E").g)
    assert A.a == pytest.approx(p.nus[1] / p.h ** 2)
    with pytest.raises(UsageError):
        p.weights("X")


def test_problem_summary():
    assert set(problem_summary(SubdiffusionProblem())) >= {"kind", "h", "tau", "a", "g"}
    assert problem_summary(BurgersProblem())["reynolds"] == pytest.approx(100.0)
    assert problem_summary(SeirProblem())["reproduction_number"] == pytest.approx(0.6675, abs=0.005)
