import numpy as np
import pytest

from bflab.errors import ContractViolation
from bflab.model import (NonlinearityModel, check_conditions, eval_f,
                         eval_jacobian_apply, eval_potential,
                         implicit_pointwise_solve)


def fd_gradient(u, model, h=1e-4):
    """Central-difference gradient of the potential, the independent oracle."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    for i in range(len(u)):
        e = np.zeros_like(u)
        e[i] = h
        out[i] = (eval_potential(u + e, model) - eval_potential(u - e, model)) / (2 * h)
    return out


def test_derived_constants():
    m = NonlinearityModel(a=-1.0, b=2.0, r=3.0)
    assert m.K == 1.0 and m.kappa == 2.0
    assert m.q == pytest.approx(4.0 / 3.0)
    m2 = NonlinearityModel(a=0.5, b=1.0, r=1.0)
    assert m2.K == 0.0 and m2.q == 2.0
    assert 1.0 < m.q <= 2.0


def test_construction_rejected():
    with pytest.raises(ContractViolation):
        NonlinearityModel(a=0.0, b=-1.0, r=3.0)
    with pytest.raises(ContractViolation):
        NonlinearityModel(a=0.0, b=1.0, r=0.5)
    # disabled models skip validation
    NonlinearityModel(a=0.0, b=-1.0, r=0.5, enabled=False)


def test_eval_f_substitutions():
    m = NonlinearityModel(a=1.0, b=2.0, r=3.0)
    assert np.allclose(eval_f(np.array([1.0, 0.0, 0.0]), m), [3.0, 0.0, 0.0])
    m2 = NonlinearityModel(a=0.0, b=1.0, r=2.0)
    assert np.allclose(eval_f(np.array([0.0, 3.0, 4.0]), m2), [0.0, 15.0, 20.0])
    assert np.all(eval_f(np.zeros(3), m) == 0.0)
    off = NonlinearityModel(enabled=False)
    assert np.all(eval_f(np.array([1.0, 2.0, 3.0]), off) == 0.0)


def test_eval_f_parallel_to_input():
    m = NonlinearityModel(a=0.3, b=1.7, r=2.5)
    rng = np.random.default_rng(0)
    for _ in range(50):
        u = rng.normal(size=3)
        f = eval_f(u, m)
        cross = np.linalg.norm(np.cross(f, u))
        assert cross <= 1e-12 * np.linalg.norm(f) * np.linalg.norm(u)


def test_potential_values():
    m = NonlinearityModel(a=0.0, b=1.0, r=3.0)
    assert eval_potential(np.zeros(3), m) == 0.0
    u = np.array([0.6, 0.8, 0.0])  # |u| = 1
    assert eval_potential(u, m) == pytest.approx(0.25)


def test_potential_gradient_matches_f():
    rng = np.random.default_rng(1)
    for m in (NonlinearityModel(a=0.5, b=1.0, r=3.0),
              NonlinearityModel(a=-0.3, b=2.0, r=2.5),
              NonlinearityModel(a=0.0, b=1.0, r=1.0)):
        for _ in range(20):
            u = rng.normal(0, 1.0, size=3)
            assert np.allclose(fd_gradient(u, m), eval_f(u, m), atol=1e-6)


def test_jacobian_apply_matches_fd():
    m = NonlinearityModel(a=0.2, b=1.3, r=3.0)
    rng = np.random.default_rng(2)
    h = 1e-6
    for _ in range(20):
        u = rng.normal(size=3)
        v = rng.normal(size=3)
        fd = (eval_f(u + h * v, m) - eval_f(u - h * v, m)) / (2 * h)
        assert np.allclose(eval_jacobian_apply(u, v, m), fd, atol=1e-6)


def test_check_conditions():
    rep = check_conditions(NonlinearityModel(a=-1.0, b=1.0, r=3.0),
                           samples=500, seed=3)
    assert rep.passed and rep.min_slack_lower >= -1e-10
    rep_lin = check_conditions(NonlinearityModel(a=0.0, b=1.0, r=1.0),
                               samples=200, seed=4)
    assert rep_lin.passed
    assert rep_lin.fitted_C == pytest.approx(0.5, rel=1e-12)  # b/(1+1) for r=1
    with pytest.raises(ContractViolation):
        check_conditions(NonlinearityModel(), samples=0)


def test_implicit_solve_trivial():
    m = NonlinearityModel(a=0.0, b=1.0, r=3.0)
    rhs = np.array([0.4, -0.2, 0.3])
    assert np.all(implicit_pointwise_solve(rhs, 0.0, m) == rhs)
    assert np.all(implicit_pointwise_solve(np.zeros(3), 1.0, m) == 0.0)


def test_implicit_solve_cubic_root():
    # s + s^3 = 2 has the unique real root s = 1
    m = NonlinearityModel(a=0.0, b=1.0, r=3.0)
    u = implicit_pointwise_solve(np.array([2.0, 0.0, 0.0]), 1.0, m)
    assert np.allclose(u, [1.0, 0.0, 0.0], atol=1e-12)


def test_implicit_solve_residual_and_parallel():
    rng = np.random.default_rng(5)
    for m in (NonlinearityModel(a=0.0, b=1.0, r=3.0),
              NonlinearityModel(a=-0.5, b=2.0, r=2.2),
              NonlinearityModel(a=1.0, b=0.5, r=1.0)):
        for _ in range(30):
            rhs = rng.normal(0, 2.0, size=3)
            dt = float(rng.uniform(0.01, 0.5))
            u = implicit_pointwise_solve(rhs, dt, m)
            resid = np.linalg.norm(u + dt * eval_f(u, m) - rhs)
            assert resid <= 1e-12 * (1.0 + np.linalg.norm(rhs))
            cross = np.linalg.norm(np.cross(u, rhs))
            assert cross <= 1e-10 * max(1.0, np.linalg.norm(rhs) ** 2)


def test_implicit_solve_vectorized_matches_loop():
    m = NonlinearityModel(a=0.1, b=1.5, r=2.7)
    rng = np.random.default_rng(6)
    field = rng.normal(size=(3, 5, 4))
    out = implicit_pointwise_solve(field, 0.2, m)
    for idx in np.ndindex(5, 4):
        single = implicit_pointwise_solve(field[(slice(None),) + idx], 0.2, m)
        assert np.allclose(out[(slice(None),) + idx], single, atol=1e-13)


def test_implicit_solve_nonexpansive():
    m = NonlinearityModel(a=0.5, b=1.0, r=3.0)  # a >= 0
    rng = np.random.default_rng(7)
    for _ in range(50):
        r1 = rng.normal(size=3)
        r2 = rng.normal(size=3)
        u1 = implicit_pointwise_solve(r1, 0.3, m)
        u2 = implicit_pointwise_solve(r2, 0.3, m)
        assert np.linalg.norm(u1 - u2) <= np.linalg.norm(r1 - r2) * (1 + 1e-12)


def test_implicit_solve_precondition():
    m = NonlinearityModel(a=-2.0, b=1.0, r=3.0)
    with pytest.raises(ContractViolation):
        implicit_pointwise_solve(np.ones(3), 0.6, m)  # 1 + dt*a <= 0


def test_monotonicity_sampling():
    m = NonlinearityModel(a=-1.0, b=1.0, r=3.0)
    rng = np.random.default_rng(8)
    for _ in range(100):
        u1 = rng.normal(size=3)
        u2 = rng.normal(size=3)
        lhs = np.dot(eval_f(u1, m) - eval_f(u2, m), u1 - u2)
        assert lhs >= -m.K * np.dot(u1 - u2, u1 - u2) - 1e-12


def test_sign_identity_exact():
    m = NonlinearityModel(a=-0.7, b=1.3, r=2.5)
    rng = np.random.default_rng(9)
    for _ in range(50):
        u = rng.normal(size=3)
        mag = np.linalg.norm(u)
        lhs = np.dot(eval_f(u, m), u)
        rhs = m.a * mag ** 2 + m.b * mag ** (m.r + 1.0)
        assert lhs == pytest.approx(rhs, rel=1e-12)


def test_mag_pow_at_zero():
    # |u|^(r-1) at 0: continuous extension 0 for r > 1, 1 for r = 1
    m = NonlinearityModel(a=2.0, b=3.0, r=1.0)
    assert np.allclose(eval_f(np.zeros(3), m), 0.0)
    u = np.array([1e-300, 0.0, 0.0])
    assert np.isfinite(eval_f(u, NonlinearityModel(a=0, b=1, r=1.5))).all()
