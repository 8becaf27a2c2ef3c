"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (the lines are repeated in the
terminal summary) or directly with ``python3 tests/test_acceptance.py``.
"""
from __future__ import annotations

import time

import numpy as np
import pytest

from reinforced_mems.boundary_data import PermittivityProfile, default_grounded_family, series_capacitor_family
from reinforced_mems.field_solver import (
    build_recovery_sequence,
    energy_reduced,
    energy_transmission,
    solve_robin,
    solve_transmission,
)
from reinforced_mems.geometry import Deflection, DeviceConfig
from reinforced_mems.harness import export_report, load_config, run_delta_sweep, verify_inequalities
from reinforced_mems.mechanics import mechanical_energy, mechanical_gradient, total_energy, total_gradient

RESULTS: dict[int, str] = {}

SIGMA = PermittivityProfile.constant(2.0, 1.0, 1.0)
LADDER = (0.2, 0.1, 0.05, 0.025)


def record(n: int, ok: bool, detail: str) -> None:
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
    RESULTS[n] = line
    print(line)


def smooth_profile(nodes, coeffs, scale=None):
    """(1 - x^2)^2 p(x) with polynomial p, interpolated exactly at the nodes (L = 1)."""
    f = np.polynomial.Polynomial([1.0, 0.0, -2.0, 0.0, 1.0]) * np.polynomial.Polynomial(coeffs)
    vals, slopes = f(nodes), f.deriv()(nodes)
    vals[[0, -1]] = slopes[[0, -1]] = 0.0
    u = Deflection(nodes, vals, slopes)
    return u if scale is None else u * (scale / u.max_abs())


def capacitor_exact(z, delta, s=2.0, H=1.0, V=1.0):
    A = V / (delta * (1 + s * H))
    return np.where(z < -H, A * (z + H + delta), A * delta + s * V / (1 + s * H) * (z + H))


def strictly_decreasing(v) -> bool:
    return bool(np.all(np.diff(v) < 0))


@pytest.fixture(scope="module")
def default_run():
    cfg = load_config({})
    t0 = time.perf_counter()
    report = run_delta_sweep(cfg)
    return cfg, report, time.perf_counter() - t0


def test_criterion_1_manufactured_transmission():
    cfg = DeviceConfig(nx=64, nz_free=32, nz_layer=32)
    bd = series_capacitor_family(1.0, SIGMA, 1.0)
    u = Deflection.zeros(cfg.beam_nodes())
    e_err = node_err = slowest = 0.0
    for delta in (0.2, 0.1, 0.05):
        t0 = time.perf_counter()
        fld = solve_transmission(u, delta, bd, SIGMA, cfg)
        slowest = max(slowest, time.perf_counter() - t0)
        e_err = max(e_err, abs(energy_transmission(fld) + 2 / 3))
        for mesh in (fld.mesh.free_mesh, fld.mesh.layer_mesh):
            X, Z = mesh.node_coordinates()
            node_err = max(node_err, float(np.max(np.abs(fld.psi_at(X, Z) - capacitor_exact(Z, delta)))))
    ok = e_err <= 1e-8 and node_err <= 1e-10 and slowest < 1.0
    record(1, ok, f"|E+2/3|={e_err:.2e} (<=1e-8), nodal={node_err:.2e} (<=1e-10), slowest solve {slowest:.3f}s (<1s)")
    assert ok


def test_criterion_2_manufactured_robin():
    cfg = DeviceConfig(nx=64, nz_free=64)
    bd = series_capacitor_family(1.0, SIGMA, 1.0)
    fld = solve_robin(Deflection.zeros(cfg.beam_nodes()), bd, SIGMA, cfg)
    e_err = abs(energy_reduced(fld) + 2 / 3)
    tr_err = float(np.max(np.abs(fld.interface_trace() - 1 / 3)))
    ok = e_err <= 1e-8 and tr_err <= 1e-8
    record(2, ok, f"|E0+2/3|={e_err:.2e} (<=1e-8), |trace-1/3|={tr_err:.2e} (<=1e-8)")
    assert ok


def _bd_default():
    return load_config({}).boundary_data(SIGMA)


def test_criterion_3_reinforced_limit_fixed_u():
    cfg = load_config({}).device
    bd = _bd_default()
    nodes = cfg.beam_nodes()
    cases = {"flat": Deflection.zeros(nodes), "bump": smooth_profile(nodes, [1.0]) * -0.5}
    ok, parts = True, []
    for name, u in cases.items():
        assert u.min_value() + cfg.H >= 0.3 * cfg.H
        e0 = energy_reduced(solve_robin(u, bd, SIGMA, cfg))
        d = np.array([abs(energy_transmission(solve_transmission(u, dl, bd, SIGMA, cfg)) - e0) for dl in LADDER])
        good = strictly_decreasing(d) and d[-1] <= 0.5 * d[0]
        ok &= good
        parts.append(f"{name}: " + ", ".join(f"{v:.4f}" for v in d))
    record(3, ok, "|E_d - E_0| over delta=0.2..0.025 strictly decreasing, last <= first/2; " + "; ".join(parts))
    assert ok


def test_criterion_4_recovery_sequence():
    cfg = load_config({}).device
    bd = _bd_default()
    nodes = cfg.beam_nodes()
    ok, parts = True, []
    for name, u in {"flat": Deflection.zeros(nodes), "bump": smooth_profile(nodes, [1.0]) * -0.5}.items():
        fr = solve_robin(u, bd, SIGMA, cfg)
        d = np.array([abs(build_recovery_sequence(fr, u, dl)[1] - fr.functional_value) for dl in LADDER])
        ok &= strictly_decreasing(d)
        parts.append(f"{name}: " + ", ".join(f"{v:.4f}" for v in d))
    record(4, ok, "|G_d[theta_d] - G[theta]| strictly decreasing; " + "; ".join(parts))
    assert ok


def test_criterion_5_gradient_oracle():
    """Force pairings against central differences of the energy.

    The discrete energy is itself an O(h^2) approximation of the continuum
    energy whose derivative the force formula represents, so the central
    differences are taken on two nested meshes and Richardson-extrapolated.
    """
    bd = default_grounded_family(3.0, SIGMA, 1.0)
    coarse = DeviceConfig(nx=48, nz_free=24, nz_layer=32)
    fine = DeviceConfig(nx=96, nz_free=48, nz_layer=64)
    delta, eps = 0.1, 1e-4
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(3):
        state = rng.uniform(-0.5, 0.5, 3)
        dirs = [rng.standard_normal(4) for _ in range(5)]
        fd = {}
        for cfg in (coarse, fine):
            x = cfg.beam_nodes()
            u = smooth_profile(x, state)
            u = u * (0.6 / max(u.max_abs(), 0.6))
            assert u.min_value() >= -0.7  # gap >= 0.3 H
            vs = [smooth_profile(x, c, 0.1) for c in dirs]
            fd[cfg.nx] = np.array(
                [
                    (total_energy(u + v * eps, delta, bd, SIGMA, cfg).e_total - total_energy(u - v * eps, delta, bd, SIGMA, cfg).e_total)
                    / (2 * eps)
                    for v in vs
                ]
            )
        R = (4 * fd[96] - fd[48]) / 3
        g = total_gradient(u, delta, bd, SIGMA, fine, method="force")
        force = np.array([g @ v.free_dofs for v in vs])
        worst = max(worst, float(np.max(np.abs(force - R) / np.abs(R))))

    # mechanical part on random clamped states
    cfg = DeviceConfig(nx=32)
    mech = 0.0
    for _ in range(5):
        x = cfg.beam_nodes()
        u = smooth_profile(x, rng.standard_normal(4), 0.5)
        v = smooth_profile(x, rng.standard_normal(4), 1.0)
        e = 1e-5
        fdm = (mechanical_energy(u + v * e, cfg) - mechanical_energy(u - v * e, cfg)) / (2 * e)
        mech = max(mech, abs(mechanical_gradient(u, cfg) @ v.free_dofs - fdm))
    ok = worst <= 1e-3 and mech <= 1e-6
    record(5, ok, f"force vs extrapolated central differences: max rel {worst:.2e} (<=1e-3, 3 states x 5 dirs); E_m gradient {mech:.2e} (<=1e-6)")
    assert ok


def test_criterion_6_minimizer_convergence(default_run):
    cfg, report, elapsed = default_run
    eu, ee = report.errors("err_u_h2"), report.errors("err_e")
    rows = report.rows + [report.reduced]
    signs = all(r.e_total <= r.e_at_zero + 1e-12 and r.e_at_zero <= 0 for r in rows) and report.reduced.e_total <= 0
    ok = strictly_decreasing(eu) and strictly_decreasing(ee) and signs and elapsed <= 600 and cfg.device.nx == 48
    record(
        6,
        ok,
        f"err_u_H2={np.array2string(eu, precision=4)}, err_E={np.array2string(ee, precision=4)} strictly decreasing; "
        f"E_d(u*) <= E_d(0) <= 0 and E(u*) <= 0: {signs}; sweep {elapsed:.1f}s at nx=48",
    )
    assert ok


def test_criterion_7_inequality_audit(default_run):
    cfg, report, _ = default_run
    mins = [(r.model, r.delta, r.deflection) for r in report.rows]
    audit = verify_inequalities(cfg, n_samples=50, seed=cfg.audit_seed, minimizers=mins)
    names = sorted({r.name for r in audit.rows})
    n_min = sum(r.sample.startswith("minimizer:") for r in audit.rows)
    ok = audit.passed and len(names) == 5 and n_min == len(report.rows)
    record(7, ok, f"{sum(r.passed for r in audit.rows)}/{len(audit.rows)} rows pass ({', '.join(names)}); c1={audit.constants['c1']:.4g}")
    assert ok


def test_criterion_8_determinism(tmp_path):
    cfg = load_config({})
    outs = []
    for k in range(2):
        rep = run_delta_sweep(cfg)
        aud = verify_inequalities(cfg, minimizers=[(r.model, r.delta, r.deflection) for r in rep.rows])
        export_report(tmp_path / f"run{k}", rep, aud, cfg)
        outs.append({n: (tmp_path / f"run{k}" / n).read_bytes() for n in ("sweep.csv", "audit.csv")})
    ok = outs[0] == outs[1]
    record(8, ok, "sweep.csv and audit.csv byte-identical across two runs")
    assert ok


if __name__ == "__main__":  # pragma: no cover
    import sys

    sys.exit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
