"""Power-law nonlinearity f(u) = a*u + b*|u|^(r-1)*u and its implicit solver.

The derived constants are the ones the structural conditions use:
K = max(0, -a) and kappa = b bound the quadratic form of f' from below,
q = 1 + 1/r is the dual exponent of r+1. |u|^(r-1) at u=0 is defined by
continuity: 0 for r > 1, and 1 for r = 1.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, NumericalFailure

_IMPLICIT_TOL = 1e-13
_IMPLICIT_MAX_ITER = 100


@dataclass(frozen=True)
class NonlinearityModel:
    a: float = 0.0
    b: float = 1.0
    r: float = 3.0
    enabled: bool = True
    K: float = field(init=False)
    kappa: float = field(init=False)
    q: float = field(init=False)

    def __post_init__(self):
        if self.enabled:
            if not (self.b > 0):
                raise ContractViolation("model.b must be positive")
            if not (self.r >= 1):
                raise ContractViolation("model.r must be >= 1")
        object.__setattr__(self, "K", max(0.0, -self.a))
        object.__setattr__(self, "kappa", self.b)
        object.__setattr__(self, "q", 1.0 + 1.0 / self.r)


def _mag_pow(mag, expo):
    """|u|^expo with the continuous extension at 0 (0 for expo>0, 1 for expo=0)."""
    if expo == 0.0:
        return np.ones_like(mag)
    return np.where(mag > 0, np.where(mag > 0, mag, 1.0) ** expo, 0.0)


def eval_f(u, model):
    """Apply f pointwise; u has shape (dim,) or (dim, n, ..., n)."""
    u = np.asarray(u, dtype=np.float64)
    if not model.enabled:
        return np.zeros_like(u)
    mag = np.sqrt(np.sum(u ** 2, axis=0))
    return model.a * u + model.b * _mag_pow(mag, model.r - 1.0) * u


def eval_potential(u, model):
    """Scalar potential with gradient f: (a/2)|u|^2 + (b/(r+1))|u|^(r+1)."""
    u = np.asarray(u, dtype=np.float64)
    if not model.enabled:
        return np.zeros(u.shape[1:]) if u.ndim > 1 else 0.0
    magsq = np.sum(u ** 2, axis=0)
    mag = np.sqrt(magsq)
    val = 0.5 * model.a * magsq + (model.b / (model.r + 1.0)) * mag ** (model.r + 1.0)
    return val


def eval_jacobian_apply(u, v, model):
    """Directional derivative f'(u) v, pointwise.

    f'(u) v = a v + b |u|^(r-1) v + b (r-1) |u|^(r-3) (u.v) u, the last term
    written through the unit vector so it vanishes continuously at u=0.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if not model.enabled:
        return np.zeros_like(v)
    mag = np.sqrt(np.sum(u ** 2, axis=0))
    rad = _mag_pow(mag, model.r - 1.0)
    out = (model.a + model.b * rad) * v
    if model.r != 1.0:
        inv = np.where(mag > 0, 1.0 / np.where(mag > 0, mag, 1.0), 0.0)
        uhat = u * inv
        dot = np.sum(uhat * v, axis=0)
        out = out + model.b * (model.r - 1.0) * rad * dot * uhat
    return out


def _jacobian_matrix(u, model):
    u = np.asarray(u, dtype=np.float64)
    d = u.shape[0]
    eye = np.eye(d)
    cols = [eval_jacobian_apply(u, eye[:, j], model) for j in range(d)]
    return np.stack(cols, axis=1)


@dataclass
class ConditionReport:
    samples: int
    min_slack_lower: float
    fitted_C: float
    min_slack_growth: float
    passed: bool


def check_conditions(model, samples=1000, seed=0, dim=3, scale=5.0):
    """Sample the structural conditions on random (u, v) pairs.

    Condition 1: f'(u)v.v >= (-K + kappa |u|^(r-1)) |v|^2 with the derived
    (K, kappa). Condition 2: |f'(u)| <= C (1 + |u|^(r-1)) with C fitted as
    the max observed ratio; its slack is then re-checked against that C.
    """
    if samples < 1:
        raise ContractViolation("check_conditions needs samples >= 1")
    rng = np.random.default_rng(seed)
    min_slack1 = np.inf
    ratio_max = 0.0
    records = []
    for _ in range(samples):
        u = rng.normal(0.0, scale, size=dim)
        v = rng.normal(0.0, 1.0, size=dim)
        mag = float(np.linalg.norm(u))
        rad = mag ** (model.r - 1.0) if (mag > 0 or model.r == 1.0) else 0.0
        quad = float(np.dot(eval_jacobian_apply(u, v, model), v))
        bound = (-model.K + model.kappa * rad) * float(np.dot(v, v))
        min_slack1 = min(min_slack1, quad - bound)
        opnorm = float(np.linalg.norm(_jacobian_matrix(u, model), 2))
        records.append((opnorm, rad))
        ratio_max = max(ratio_max, opnorm / (1.0 + rad))
    fitted_C = ratio_max
    min_slack2 = min(fitted_C * (1.0 + rad) - opnorm for opnorm, rad in records)
    passed = min_slack1 >= -1e-10 and min_slack2 >= -1e-10
    return ConditionReport(samples=samples, min_slack_lower=float(min_slack1),
                           fitted_C=float(fitted_C),
                           min_slack_growth=float(min_slack2), passed=passed)


def _solve_magnitude(m, dt, model):
    """Solve s (1 + dt*a) + dt*b*s^r = m for s >= 0, elementwise.

    Safeguarded Newton on the bracket [0, m / (1 + dt*a)]; the map is
    strictly increasing there, so the root is unique.
    """
    c1 = 1.0 + dt * model.a
    cb = dt * model.b
    r = model.r
    lo = np.zeros_like(m)
    hi = m / c1
    s = hi.copy()
    for _ in range(_IMPLICIT_MAX_ITER):
        phi = c1 * s + cb * s ** r - m
        done = np.abs(phi) <= _IMPLICIT_TOL * (1.0 + m)
        if np.all(done):
            return s
        hi = np.where(phi > 0, s, hi)
        lo = np.where(phi < 0, s, lo)
        dphi = c1 + cb * r * _mag_pow(s, r - 1.0)
        step = np.where(done, 0.0, phi / dphi)
        cand = s - step
        outside = (cand < lo) | (cand > hi)
        s = np.where(outside & ~done, 0.5 * (lo + hi), cand)
    phi = c1 * s + cb * s ** r - m
    if np.all(np.abs(phi) <= _IMPLICIT_TOL * (1.0 + m) * 10):
        return s
    raise NumericalFailure("implicit pointwise solve did not converge")


def implicit_pointwise_solve(rhs, dt, model):
    """Solve u + dt f(u) = rhs pointwise; u is parallel to rhs.

    rhs has shape (dim,) or (dim, n, ..., n). Requires 1 + dt*a > 0 so the
    scalar magnitude map stays monotone.
    """
    rhs = np.asarray(rhs, dtype=np.float64)
    if dt < 0:
        raise ContractViolation("implicit solve needs dt >= 0")
    if not model.enabled or dt == 0.0:
        return rhs.copy()
    if 1.0 + dt * model.a <= 0:
        raise ContractViolation("implicit solve needs 1 + dt*a > 0")
    m = np.sqrt(np.sum(rhs ** 2, axis=0))
    s = _solve_magnitude(m, dt, model)
    ratio = np.where(m > 0, s / np.where(m > 0, m, 1.0), 0.0)
    return rhs * ratio
