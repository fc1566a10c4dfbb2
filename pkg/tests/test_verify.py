import json
import math

import numpy as np
import pytest

from bflab.errors import ContractViolation
from bflab.model import NonlinearityModel
from bflab.dynamics import (ForcingSpec, InitSpec, SimConfig, build_initial,
                            build_single_mode)
from bflab.spectral import Grid, SpectralField, sobolev_norm
from bflab.verify import (PerturbSpec, ReducedSystem, band_modes, build_reduced,
                          integrate_reference, oracle_check, separation_curve,
                          skewness_defect, verify_convective, verify_energy,
                          verify_lipschitz, verify_negative_norm)


def _cfg(**kw):
    base = dict(dim=2, n=16, model=NonlinearityModel(a=0.0, b=1.0, r=3.0),
                dt=2e-3, t_end=0.5, sample_dt=2e-2, scheme="imex1",
                init=InitSpec(kind="random_smooth", amplitude=1.0, seed=1))
    base.update(kw)
    return SimConfig(**base)


def test_band_modes_dimension_guard():
    grid = Grid(2, 16)
    modes = band_modes(grid)
    assert len(modes) == 11 * 11 - 1  # |m_i| <= 5, origin excluded
    cfg = _cfg(n=64)
    with pytest.raises(ContractViolation):
        build_reduced(band_modes(cfg.grid()), cfg)


def test_reduced_single_mode_rhs_exact():
    cfg = _cfg(model=NonlinearityModel(enabled=False))
    system = build_reduced([(2, 1), (-2, -1)], cfg)
    grid = cfg.grid()
    u = build_single_mode(grid, (2, 1), 1.0)
    coef = system.coefficients_from_field(u)
    out = system.rhs(coef)
    assert np.max(np.abs(out + 5.0 * coef)) <= 1e-14


def test_reduced_heat_decay_vs_exact():
    cfg = _cfg(model=NonlinearityModel(enabled=False), t_end=1.0)
    system = build_reduced([(2, 1), (-2, -1)], cfg)
    grid = cfg.grid()
    u = build_single_mode(grid, (2, 1), 1.0)
    coef = system.coefficients_from_field(u)
    _, snaps = integrate_reference(system, coef, 1.0, tol=1e-10, t_eval=[1.0])
    expect = coef * math.exp(-5.0)
    assert np.max(np.abs(snaps[-1] - expect)) <= 1e-9


def test_reduced_round_trip_field_embedding():
    cfg = _cfg()
    grid = cfg.grid()
    system = build_reduced(band_modes(grid), cfg)
    u = build_initial(grid, cfg.init)
    coef = system.coefficients_from_field(u)
    back = system.field_from_coefficients(coef)
    assert np.max(np.abs(back.data - u.data)) <= 1e-15


def test_oracle_check_passes_imex2(tmp_path):
    cfg = _cfg(scheme="imex2", t_end=0.24, dt=4e-3, sample_dt=0.24)
    rep = oracle_check(cfg, tmp_path, dts=(8e-3, 4e-3, 2e-3))
    assert rep.passed
    assert abs(rep.fitted["measured_order"] - 2.0) <= 0.2


def test_oracle_check_rejects_nondivisor_dt(tmp_path):
    cfg = _cfg(scheme="imex2", t_end=0.25, dt=4e-3, sample_dt=0.25)
    with pytest.raises(ContractViolation):
        oracle_check(cfg, tmp_path, dts=(8e-3,))


def test_verdict_json_shape_and_determinism(tmp_path):
    cfg = _cfg(t_end=0.2)
    rep1 = verify_energy(cfg, tmp_path / "a")
    rep2 = verify_energy(cfg, tmp_path / "b")
    assert rep1.to_json() == rep2.to_json()
    payload = json.loads((tmp_path / "a" / "energy_verdict.json").read_text())
    assert set(payload) == {"experiment", "params", "fitted", "tolerance",
                            "pass", "evidence_csv"}
    assert payload["experiment"] == "energy"
    assert payload["evidence_csv"] == "energy_trajectory.csv"
    assert (tmp_path / "a" / "energy_trajectory.csv").exists()


def test_unforced_energy_envelope_is_exact():
    rep = verify_energy(_cfg(t_end=1.0), "/tmp/bflab_test_energy")
    assert rep.passed
    assert rep.fitted["envelope_C"] == 0.0
    assert rep.fitted["g_l2"] == 0.0


def test_separation_zero_perturbation():
    cfg = _cfg(t_end=0.1)
    times, seps, _ = separation_curve(cfg, PerturbSpec(amplitude=0.0))
    assert np.all(seps <= 1e-12)


def test_separation_scale_covariance():
    cfg = _cfg(t_end=0.3, forcing=ForcingSpec(kind="random_smooth",
                                              amplitude=0.3, seed=2))
    _, s1, _ = separation_curve(cfg, PerturbSpec(amplitude=1e-6, seed=9))
    _, s2, _ = separation_curve(cfg, PerturbSpec(amplitude=5e-7, seed=9))
    ratio = s1[1:] / s2[1:]
    assert np.max(np.abs(ratio - 2.0)) <= 2e-3


def test_lipschitz_r1_exact_rate(tmp_path):
    cfg = _cfg(model=NonlinearityModel(a=0.3, b=0.7, r=1.0), scheme="imex2",
               t_end=2.0, dt=2e-3, sample_dt=0.02,
               init=InitSpec(kind="random_smooth", amplitude=0.5, seed=3))
    rep = verify_lipschitz(cfg, tmp_path,
                           perturb=PerturbSpec(amplitude=1e-6,
                                               kind="single_mode", mode=(1, 0)))
    assert rep.passed
    assert rep.fitted["rate_measured"] == pytest.approx(2.0, rel=1e-3)


def test_negnorm_zero_run(tmp_path):
    cfg = _cfg(t_end=2.0, sample_dt=0.05, dt=0.01,
               init=InitSpec(kind="zero"))
    rep = verify_negative_norm(cfg, tmp_path)
    assert rep.passed
    assert rep.fitted["window_max"] == 0.0


def test_negnorm_requires_unit_window():
    with pytest.raises(ContractViolation):
        verify_negative_norm(_cfg(t_end=1.0), "/tmp/bflab_negnorm_short")


def test_single_mode_hm2_weight():
    # H^-2 norm of a single mode is |k|^-2 times its L2 norm
    grid = Grid(2, 16)
    u = build_single_mode(grid, (2, 1), 1.0)
    assert sobolev_norm(u, -2) == pytest.approx(sobolev_norm(u, 0) / 5.0,
                                                rel=1e-12)


def test_convective_needs_r_at_least_3():
    cfg = _cfg(convective=True, dt=1e-3,
               model=NonlinearityModel(a=0.0, b=1.0, r=2.0))
    with pytest.raises(ContractViolation):
        verify_convective(cfg, "/tmp/bflab_conv_guard")


def test_convective_r3_records_only(tmp_path):
    cfg = _cfg(convective=True, scheme="imex2", t_end=0.2, dt=2e-3,
               sample_dt=0.02,
               model=NonlinearityModel(a=0.0, b=1.0, r=3.0),
               init=InitSpec(kind="random_smooth", amplitude=0.5, seed=4))
    rep = verify_convective(cfg, tmp_path, perturb=PerturbSpec(amplitude=1e-7),
                            b_small=0.5, b_large=2.0)
    assert rep.passed  # no claim made, evidence recorded
    assert "envelope_C_b_small" in rep.fitted
    assert "envelope_C_b_large" in rep.fitted


def test_skewness_defect_small_for_smooth_fields():
    grid = Grid(2, 32)
    from bflab.dynamics import build_random_smooth
    u = build_random_smooth(grid, 2.0, seed=5)
    assert skewness_defect(u) <= 1e-12


def test_smooth_data_bounded_derivative_at_first_sample():
    # H2 initial data controls ||du/dt|| immediately; rough data does not
    from bflab.dynamics import run_trajectory
    smooth = _cfg(n=32, t_end=0.05, dt=1e-3, sample_dt=1e-3)
    rough = _cfg(n=32, t_end=0.05, dt=1e-3, sample_dt=1e-3,
                 init=InitSpec(kind="random_rough", amplitude=1.0, seed=1))
    d_smooth = run_trajectory(smooth).records[0].dtu_l2
    d_rough = run_trajectory(rough).records[0].dtu_l2
    assert d_smooth < 0.2 * d_rough


def test_oracle_order_imex1(tmp_path):
    cfg = _cfg(scheme="imex1", t_end=0.24, dt=4e-3, sample_dt=0.24)
    rep = oracle_check(cfg, tmp_path, dts=(8e-3, 4e-3, 2e-3))
    assert abs(rep.fitted["measured_order"] - 1.0) <= 0.2


def test_fractional_r_aliasing_controlled_by_resolution():
    # the two-thirds rule only dealiases quadratic products exactly; for
    # fractional r the residual aliasing must vanish under grid refinement
    # of the same initial trigonometric polynomial
    from bflab.spectral import prolong
    from bflab.dynamics import build_random_smooth, run_trajectory
    coarse = Grid(2, 16)
    u0 = build_random_smooth(coarse, 1.0, seed=3)
    vals = []
    for n in (16, 32, 64):
        grid = Grid(2, n)
        cfg = _cfg(n=n, model=NonlinearityModel(a=0.0, b=1.0, r=2.5),
                   init=InitSpec(kind="zero"), scheme="imex2",
                   t_end=0.5, sample_dt=0.5)
        init = u0 if n == 16 else prolong(u0, grid)
        vals.append(run_trajectory(cfg, initial_field=init).records[-1].l2)
    assert abs(vals[1] - vals[0]) <= 1e-5
    assert abs(vals[2] - vals[1]) <= 1e-8


def test_prolong_preserves_polynomial():
    from bflab.spectral import prolong, to_physical
    from bflab.dynamics import build_random_smooth
    from bflab.errors import ContractViolation as CV
    coarse = Grid(2, 16)
    u = build_random_smooth(coarse, 1.0, seed=4)
    fine = Grid(2, 32)
    up = prolong(u, fine)
    assert sobolev_norm(up, 0) == pytest.approx(sobolev_norm(u, 0), rel=1e-14)
    assert sobolev_norm(up, 2) == pytest.approx(sobolev_norm(u, 2), rel=1e-14)
    # physical samples agree on the shared collocation points
    pc = to_physical(u).data
    pf = to_physical(up).data
    assert np.max(np.abs(pf[:, ::2, ::2] - pc)) <= 1e-12
    with pytest.raises(CV):
        prolong(up, coarse)


def test_lyapunov_constant_at_steady_start(tmp_path):
    # started at a converged equilibrium the functional stays flat and the
    # right-hand side stays at the solver tolerance scale
    from bflab.dynamics import build_random_smooth, run_trajectory
    from bflab.steady import solve_steady
    grid = Grid(2, 16)
    model = NonlinearityModel(a=0.0, b=1.0, r=3.0)
    g = build_random_smooth(grid, 0.2, seed=9)
    sol = solve_steady(g, model, tol=1e-12, grid=grid)
    cfg = _cfg(model=model, dt=1e-3, t_end=0.2, sample_dt=1e-3,
               forcing=ForcingSpec(kind="random_smooth", amplitude=0.2, seed=9),
               init=InitSpec(kind="zero"), scheme="imex2")
    log = run_trajectory(cfg, initial_field=sol.w)
    lyap = log.column("lyapunov")
    assert np.max(np.abs(lyap - lyap[0])) <= 1e-10
    assert np.max(log.column("dtu_l2")) <= 1e-6


def test_energy_zero_initial_data(tmp_path):
    cfg = _cfg(t_end=2.0, init=InitSpec(kind="zero"),
               forcing=ForcingSpec(kind="random_smooth", amplitude=0.3, seed=6))
    rep = verify_energy(cfg, tmp_path)
    assert rep.passed


def test_absorbing_set_evidence(tmp_path):
    from bflab.verify import absorbing_set_evidence
    cfg = _cfg(t_end=6.0, dt=5e-3, sample_dt=0.06,
               forcing=ForcingSpec(kind="random_smooth", amplitude=0.4, seed=2),
               init=InitSpec(kind="random_smooth", amplitude=1.5, seed=0))
    rep = absorbing_set_evidence(cfg, tmp_path, n_seeds=4)
    assert rep.passed
    assert rep.fitted["max_post_burn_h2"] <= rep.fitted["ball_radius"]
    assert (tmp_path / "absorbing_h2.csv").exists()
