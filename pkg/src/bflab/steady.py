"""Stationary solves of the semilinear Stokes balance and regularity sweeps.

The discrete steady problem is R(w) = A w - P D f(w) [- P D (w.grad)w] + P g = 0,
i.e. a zero of the same right-hand side the time stepper integrates. Two
solvers: a damped Newton-Krylov iteration preconditioned by the modewise
inverse Stokes operator, and a pseudo-time marcher whose fixed point is the
exact discrete equilibrium at any step size (implicit diffusion resolvent,
explicit nonlinearity).
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .errors import ConfigError, ContractViolation, NumericalFailure
from .model import eval_f, eval_jacobian_apply
from .dynamics import convective_term, nonlinear_term, rhs
from .spectral import (PhysicalField, SpectralField, dealias, leray_project,
                       lebesgue_norm, scalar_sobolev_norm, sobolev_norm,
                       to_physical, to_spectral)

NEWTON_MAX_ITER = 60
NEWTON_INNER_RTOL = 1e-2
PSEUDO_MAX_STEPS = 200000

SWEEP_CSV_HEADER = "g_amplitude,g_l2,g_lq,w_h1,w_h2,w_lr1,p_h1,residual"


@dataclass
class SteadySolution:
    w: SpectralField
    p: np.ndarray
    residual: float
    iterations: int
    method: str


@dataclass
class SweepRow:
    g_amplitude: float
    g_l2: float
    g_lq: float
    w_h1: float
    w_h2: float
    w_lr1: float
    p_h1: float
    residual: float
    converged: bool

    def row(self):
        return (self.g_amplitude, self.g_l2, self.g_lq, self.w_h1, self.w_h2,
                self.w_lr1, self.p_h1, self.residual)


@dataclass
class SweepTable:
    rows: list
    slope_h2_vs_l2: float
    energy_envelope_C: float
    model_r: float

    def write_csv(self, path):
        with open(path, "w") as fh:
            fh.write(SWEEP_CSV_HEADER + "\n")
            for row in self.rows:
                fh.write(",".join(repr(float(v)) for v in row.row()) + "\n")


def _steady_residual(w, g, model, convective):
    return rhs(w, g, model, convective)


def _jacobian_matvec(w, w_phys, v, model, convective):
    """Linearization of -R at w applied to v (so the Newton system is J d = R)."""
    grid = w.grid
    out = grid.ksq * v.data  # -A v
    if model.enabled:
        v_phys = to_physical(v).data
        jv = eval_jacobian_apply(w_phys, v_phys, model)
        out = out + leray_project(dealias(to_spectral(
            PhysicalField(grid, jv)))).data
    if convective:
        # (v.grad)w + (w.grad)v, pseudo-spectral
        acc = np.zeros((grid.dim,) + grid.shape)
        vp = to_physical(v).data
        for j in range(grid.dim):
            dwj = to_physical(SpectralField(grid, 1j * grid.kvec[j] * w.data)).data
            dvj = to_physical(SpectralField(grid, 1j * grid.kvec[j] * v.data)).data
            acc += vp[j] * dwj + w_phys[j] * dvj
        out = out + leray_project(dealias(to_spectral(
            PhysicalField(grid, acc)))).data
    return SpectralField(grid, out, divergence_free=True, mean_zero=True,
                         dealiased=True)


def _newton(g, model, convective, tol, grid, w0=None):
    """Inexact Newton with inverse-Stokes preconditioning and backtracking."""
    if w0 is None:
        w = SpectralField(grid, g.data * grid.inv_ksq, divergence_free=True,
                          mean_zero=True, dealiased=True)  # Stokes solution
    else:
        w = w0.copy()
    shape = (grid.dim,) + grid.shape
    size = int(np.prod(shape))

    def precond(arr):
        return arr * grid.inv_ksq

    for it in range(NEWTON_MAX_ITER):
        res = _steady_residual(w, g, model, convective)
        rnorm = sobolev_norm(res, 0)
        if rnorm <= tol:
            return w, rnorm, it, True
        w_phys = to_physical(w).data

        def matvec(x):
            v = SpectralField(grid, x.reshape(shape).copy())
            jv = _jacobian_matvec(w, w_phys, v, model, convective)
            return precond(jv.data).ravel()

        op = LinearOperator((size, size), matvec=matvec, dtype=np.complex128)
        b = precond(res.data).ravel()
        sol, info = gmres(op, b, rtol=NEWTON_INNER_RTOL, atol=0.0,
                          restart=60, maxiter=40)
        if info != 0 and not np.all(np.isfinite(sol.view(np.float64))):
            return w, rnorm, it, False
        delta = SpectralField(grid, sol.reshape(shape))
        delta = leray_project(dealias(delta))
        lam, ok = 1.0, False
        for _ in range(25):
            trial = SpectralField(grid, w.data + lam * delta.data,
                                  divergence_free=True, mean_zero=True,
                                  dealiased=True)
            tnorm = sobolev_norm(_steady_residual(trial, g, model, convective), 0)
            if tnorm <= (1.0 - 1e-4 * lam) * rnorm:
                w, ok = trial, True
                break
            lam *= 0.5
        if not ok:
            return w, rnorm, it, False
    res = _steady_residual(w, g, model, convective)
    return w, sobolev_norm(res, 0), NEWTON_MAX_ITER, sobolev_norm(res, 0) <= tol


def _pseudo_time(g, model, convective, tol, grid, w0=None):
    """March w <- (I - dt A)^{-1} (w + dt (-P D f(w) [- conv] + P g)).

    The fixed point solves R(w) = 0 exactly, so the residual can be driven
    to round-off; dt adapts downward when progress stalls.
    """
    w = w0.copy() if w0 is not None else SpectralField.zeros(grid)
    dt = 0.5
    best = math.inf
    check_every = 20
    for it in range(PSEUDO_MAX_STEPS):
        expl = g.data.copy()
        if model.enabled:
            expl -= nonlinear_term(w, model).data
        if convective:
            expl -= convective_term(w).data
        data = (w.data + dt * expl) / (1.0 + dt * grid.ksq)
        if not np.all(np.isfinite(data.view(np.float64))):
            dt *= 0.5
            if dt < 1e-8:
                raise NumericalFailure("pseudo-time step size underflow",
                                       best_residual=best)
            continue
        w = SpectralField(grid, data, divergence_free=True, mean_zero=True,
                          dealiased=True)
        if (it + 1) % check_every == 0:
            rnorm = sobolev_norm(_steady_residual(w, g, model, convective), 0)
            if rnorm <= tol:
                return w, rnorm, it + 1, True
            if rnorm > 10 * best:
                dt *= 0.5
            elif rnorm > 0.97 * best:
                dt *= 0.5
                if dt < 1e-10:
                    return w, rnorm, it + 1, False
            best = min(best, rnorm)
    rnorm = sobolev_norm(_steady_residual(w, g, model, convective), 0)
    return w, rnorm, PSEUDO_MAX_STEPS, rnorm <= tol


def recover_pressure(w, g, model, convective):
    """Solve the pressure Poisson balance: Laplacian p = div(g - f(w) - (w.grad)w).

    On the torus the Laplacian of w is divergence-free and drops out; the
    returned coefficients have zero mean.
    """
    grid = w.grid
    src = g.data.copy()
    if model.enabled:
        src -= dealias(to_spectral(PhysicalField(
            grid, eval_f(to_physical(w).data, model)))).data
    if convective:
        src -= convective_term(w, project=False).data
    div_src = sum(1j * grid.kvec[i] * src[i] for i in range(grid.dim))
    # -|k|^2 p = div_src, zero mean at k=0
    return np.where(grid.ksq > 0, -div_src * grid.inv_ksq, 0.0)


def assembled_residual(w, p, g, model, convective):
    """L2 norm of -Lap w + f(w) + (w.grad)w + grad p - g, all spectral.

    The balance lives in the mean-zero space: a constant component of f(w)
    cannot be matched by a periodic pressure gradient and is quotiented out,
    exactly as the projector does.
    """
    grid = w.grid
    total = grid.ksq * w.data - g.data
    if model.enabled:
        total += dealias(to_spectral(PhysicalField(
            grid, eval_f(to_physical(w).data, model)))).data
    if convective:
        total += convective_term(w, project=False).data
    for i in range(grid.dim):
        total[i] += 1j * grid.kvec[i] * p
    total[(slice(None),) + (0,) * grid.dim] = 0.0
    return float(np.sqrt(grid.volume * np.sum(np.abs(total) ** 2)))


def solve_steady(g, model, convective=False, method="newton", tol=1e-9,
                 grid=None, w0=None):
    """Solve the stationary balance; Newton falls back to pseudo-time.

    w0 optionally replaces the default initial iterate (the Stokes solution
    for Newton, the zero field for pseudo-time).
    """
    if grid is None:
        grid = g.grid
    if tol <= 0:
        raise ContractViolation("tol must be positive")
    if convective and model.enabled and model.r < 2:
        raise ConfigError("convective steady solves require model.r >= 2")
    if method not in ("newton", "pseudo_time"):
        raise ConfigError(f"unknown steady method {method!r}")

    # the velocity solves the projected balance; the pressure sees the full g
    # so a gradient component of the forcing lands in p, not in w
    gp = leray_project(g)
    used = method
    if method == "newton":
        w, rnorm, iters, ok = _newton(gp, model, convective, tol, grid, w0=w0)
        if not ok:
            w2, rnorm2, iters2, ok2 = _pseudo_time(gp, model, convective, tol,
                                                   grid, w0=w)
            if not ok2:
                raise NumericalFailure(
                    f"steady solve did not converge (best residual {min(rnorm, rnorm2):g})",
                    best_residual=min(rnorm, rnorm2))
            w, rnorm, iters, used = w2, rnorm2, iters + iters2, "pseudo_time"
    else:
        w, rnorm, iters, ok = _pseudo_time(gp, model, convective, tol, grid,
                                           w0=w0)
        if not ok:
            raise NumericalFailure(
                f"steady solve did not converge (best residual {rnorm:g})",
                best_residual=rnorm)

    p = recover_pressure(w, g, model, convective)
    residual = sobolev_norm(_steady_residual(w, gp, model, convective), 0)
    return SteadySolution(w=w, p=p, residual=residual, iterations=iters,
                          method=used)


def _sweep_row(g_shape, amp, model, convective, tol, method):
    grid = g_shape.grid
    q = model.q
    g = SpectralField(grid, g_shape.data * amp, divergence_free=True,
                      mean_zero=True, dealiased=True)
    g_l2 = sobolev_norm(g, 0)
    g_lq = lebesgue_norm(to_physical(g), q)
    if amp == 0.0:
        return SweepRow(amp, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, True)
    try:
        sol = solve_steady(g, model, convective=convective, method=method,
                           tol=tol, grid=grid)
    except NumericalFailure as exc:
        return SweepRow(amp, g_l2, g_lq, math.nan, math.nan, math.nan,
                        math.nan,
                        exc.best_residual if exc.best_residual else math.nan,
                        False)
    w_phys = to_physical(sol.w)
    return SweepRow(
        amp, g_l2, g_lq,
        sobolev_norm(sol.w, 1), sobolev_norm(sol.w, 2),
        lebesgue_norm(w_phys, model.r + 1.0),
        scalar_sobolev_norm(grid, sol.p, 1),
        sol.residual, True)


def regularity_sweep(g_shape, amplitudes, model, convective=False, tol=1e-9,
                     method="newton", jobs=1):
    """Solve along increasing forcing amplitudes and fit the H2 load response.

    g_shape must be unit-normalized (L2 norm 1); each row solves with
    g = amplitude * g_shape. The log-log slope of w_h2 against g_l2 is
    fitted over the top decade of amplitudes. Non-convergent rows are
    marked and excluded from the fit. Rows are independent; jobs > 1 runs
    them concurrently with the output order fixed by amplitude.
    """
    amps = [float(a) for a in amplitudes]
    if any(a < 0 for a in amps) or any(b <= a for a, b in zip(amps, amps[1:])):
        raise ContractViolation("amplitudes must be nonnegative and increasing")
    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(
                lambda amp: _sweep_row(g_shape, amp, model, convective, tol,
                                       method), amps))
    else:
        rows = [_sweep_row(g_shape, amp, model, convective, tol, method)
                for amp in amps]

    good = [row for row in rows if row.converged and row.g_l2 > 0]
    top = max(row.g_l2 for row in good) if good else 0.0
    fit_rows = [row for row in good if row.g_l2 >= top / 10.0]
    if len(fit_rows) >= 2:
        x = np.log([row.g_l2 for row in fit_rows])
        y = np.log([row.w_h2 for row in fit_rows])
        slope = float(np.polyfit(x, y, 1)[0])
    else:
        slope = math.nan
    env = 0.0
    for row in good:
        env = max(env, (row.w_h1 ** 2 + row.w_lr1 ** (model.r + 1.0))
                  / (1.0 + row.g_lq ** model.q))
    return SweepTable(rows=rows, slope_h2_vs_l2=slope, energy_envelope_C=env,
                      model_r=model.r)
