"""Acceptance gate: one test per criterion, each printing a single PASS/FAIL line."""

import itertools
import math
import shutil
import subprocess
import sys
import time

import numpy as np
import pytest

from tpsa.assembly import SourceField, assemble_elastic, assemble_poromech, handle_incompressible_limit
from tpsa.discretization import face_coefficients, rotation_couplings
from tpsa.errors import TpsaError
from tpsa.fields import BoundarySpec, MaterialField
from tpsa.geometry import closure_residual, volume_residual
from tpsa.manufactured import evaluate_sources, from_expressions
from tpsa.solver import solve
from tpsa.tensor_ops import asym, asym_adjoint
from tpsa.verification import (
    ExperimentConfig,
    cell_norm,
    face_distance,
    face_norm,
    make_grid,
    run_convergence,
    solution_norm,
)

LEVELS = (8, 16, 32, 64)
LAMBDAS = (1.0, 1e2, 1e4, math.inf)


@pytest.fixture
def verdict(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} {detail}")
        return ok

    return emit


def fmt(values):
    return "[" + ", ".join(f"{v:.3g}" for v in values) + "]"


def test_criterion_1_operator_identities(verdict):
    rng = np.random.default_rng(1)
    t0 = time.perf_counter()
    r = rng.standard_normal((1000, 3))
    u = rng.standard_normal((1000, 3))
    s = rng.standard_normal((1000, 3, 3))
    Sr = asym_adjoint(r)
    errs = {
        "SS*r=2r": np.abs(asym(Sr) - 2 * r).max(),
        "S*S=skew": np.abs(asym_adjoint(asym(s)) - (s - np.swapaxes(s, 1, 2))).max(),
        "swap": np.abs(np.einsum("kab,kb->ka", Sr, u) + np.einsum("kab,kb->ka", asym_adjoint(u), r)).max(),
        "pairing": np.abs(np.einsum("kab,kab->k", s, Sr) - np.einsum("ka,ka->k", asym(s), r)).max(),
    }
    elapsed = time.perf_counter() - t0
    worst = max(errs.values())
    ok = worst <= 1e-13 and elapsed < 1.0
    verdict(1, ok, f"max error {worst:.1e} (tol 1e-13), {elapsed * 1e3:.1f} ms")
    assert ok


def _calculus_errors(grid, rng):
    nc = grid.num_cells
    mu = rng.uniform(0.1, 10.0, nc)
    m = MaterialField.uniform(grid, mu=mu, lambda_inv=1.0, ell=rng.uniform(0.0, 1.0, nc))
    bc = BoundarySpec.dirichlet(grid)
    c = face_coefficients(grid, m, bc)
    fi, fj = grid.face_cells.T
    inner = grid.interior_faces
    r = rng.standard_normal(nc)

    # Ξ̃r per face (boundary neighbors carry zero)
    avg = c.xi_j * r[fi]
    avg[inner] += c.xi_i[inner] * r[fj[inner]]
    lhs = face_norm(avg, 1.0 / c.mu_bar, grid) ** 2
    rhs = cell_norm(r, 1.0 / mu, grid) ** 2
    literal = abs(lhs - rhs) / rhs
    # the weighted sum of squares Σ_i Ξ̃_{k,i} r_i² reproduces the cell norm exactly
    sq = c.xi_j * r[fi] ** 2
    sq[inner] += c.xi_i[inner] * r[fj[inner]] ** 2
    summed = (grid.face_areas * face_distance(grid) / grid.dim / c.mu_bar * sq).sum()
    proof_form = abs(summed - rhs) / rhs

    u = rng.standard_normal((nc, 2))
    jump = np.zeros((grid.num_faces, 2))
    jump += u[fi]
    jump[inner] -= u[fj[inner]]
    jump /= face_distance(grid)[:, None]
    n = grid.face_normals
    _, c_ru = rotation_couplings(n)
    full = face_norm(jump, c.mu_bar, grid) ** 2
    normal = face_norm((n * jump).sum(axis=1), c.mu_bar, grid) ** 2
    tangential = face_norm(np.einsum("kab,kb->ka", c_ru, jump), c.mu_bar, grid) ** 2
    decomposition = abs(full - normal - tangential) / full

    s = assemble_elastic(grid, m, bc)
    scale = abs(s.matrix).max()
    adj_p = abs(s.block("u", "p") + s.block("p", "u").T).max() / scale
    adj_r = abs(s.block("u", "r") - s.block("r", "u").T).max() / scale
    return literal, proof_form, lhs <= rhs * (1 + 1e-12), decomposition, adj_p, adj_r


def test_criterion_2_discrete_calculus(verdict):
    rng = np.random.default_rng(2)
    t0 = time.perf_counter()
    rows = []
    for family, n in (("gt1", 8), ("gt2", 8), ("gt3", 4), ("gt4", 8)):
        rows.append(_calculus_errors(make_grid(family, n), rng))
    elapsed = time.perf_counter() - t0
    literal = max(r[0] for r in rows)
    proof_form = max(r[1] for r in rows)
    bounded = all(r[2] for r in rows)
    p2, p3, p4 = (max(r[k] for r in rows) for k in (3, 4, 5))
    ok = max(literal, p2, p3, p4) <= 1e-12 and elapsed < 5.0
    verdict(
        2,
        ok,
        f"point 1 as stated {literal:.1e} (weighted-sum form {proof_form:.1e}, "
        f"averaged norm bounded: {bounded}), point 2 {p2:.1e}, point 3 {p3:.1e}, "
        f"point 4 {p4:.1e} (tol 1e-12), {elapsed:.2f} s",
    )
    assert ok


def test_criterion_3_geometric_identities(verdict):
    worst = {}
    for family in ("gt1", "gt2", "gt3", "gt4"):
        for n in (4, 8, 32):
            g = make_grid(family, n)
            worst[family] = max(worst.get(family, 0.0), closure_residual(g).max(), volume_residual(g).max())
    w = max(worst.values())
    ok = w <= 1e-12
    verdict(3, ok, "max relative residual " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()) + " (tol 1e-12)")
    assert ok


def test_criterion_4_two_point_flux_exactness(verdict):
    exact = from_expressions(2, ["0", "0"], ["0"], p="0", w="0.3 + 2*x - 1.5*y")
    err = 0.0
    for n in (4, 16):
        g = make_grid("gt1", n)
        m = MaterialField.uniform(g, lambda_inv=1.0, theta=0.0, kappa=2.5, eta_w=0.0)
        bc = exact.boundary_spec(g, m, BoundarySpec.dirichlet(g))
        sol = solve(assemble_poromech(g, m, bc, evaluate_sources(exact, m, g)))
        err = max(err, np.abs(sol.w - exact.sample(g).w).max())
    ok = err <= 1e-10
    verdict(4, ok, f"max |w - w_exact| {err:.1e} (tol 1e-10)")
    assert ok


def _lambda_sweep(grid):
    cfg = ExperimentConfig(grid=grid, levels=LEVELS, param_name="lambda", param_values=LAMBDAS)
    return run_convergence(cfg)


def test_criterion_5_elastic_and_stokes_convergence(verdict):
    t0 = time.perf_counter()
    details, ok = [], True
    for grid in ("gt1", "gt2"):
        rep = _lambda_sweep(grid)
        orders = [rep.headline_order(v) for v in LAMBDAS]
        e4 = np.array([r.errors.total for r in rep.series(1e4)])
        einf = np.array([r.errors.total for r in rep.series(math.inf)])
        gap = float(np.max(np.abs(e4 - einf) / einf))
        ok &= min(orders) >= 1.7 and gap <= 0.1
        details.append(f"{grid} orders {fmt(orders)}, 1e4 vs inf gap {gap:.1e}")
    elapsed = time.perf_counter() - t0
    ok &= elapsed <= 300
    verdict(5, ok, "; ".join(details) + f" (order >= 1.7, gap <= 0.1), {elapsed:.0f} s")
    assert ok


def test_criterion_6_simplex_and_rough_grids(verdict):
    rep3 = _lambda_sweep("gt3")
    orders = [rep3.headline_order(v) for v in LAMBDAS]
    rep4 = _lambda_sweep("gt4")
    ratios = []
    for v in LAMBDAS:
        e = [r.errors.total for r in rep4.series(v)]
        ratios.append(e[-1] / min(e))
    ok = all(0.7 <= o <= 1.5 for o in orders) and max(ratios) <= 2.0
    verdict(6, ok, f"gt3 orders {fmt(orders)} (in [0.7, 1.5]); gt4 finest/min error {fmt(ratios)} (<= 2)")
    assert ok


def test_criterion_7_cosserat(verdict):
    ells = (1.0, 1e-2, 1e-4)
    cfg = ExperimentConfig(model="cosserat", levels=LEVELS, lambda_inv=1.0, param_name="ell", param_values=ells)
    rep = run_convergence(cfg)
    orders = [rep.headline_order(v) for v in ells]
    errs = np.array([[r.errors.total for r in rep.series(v)] for v in ells])
    monotone = bool(np.all(np.diff(errs, axis=0) >= 0))
    ok = min(orders) >= 1.7 and monotone
    verdict(7, ok, f"orders {fmt(orders)} (>= 1.7); error nondecreasing as ell decreases: {monotone}")
    assert ok


def test_criterion_8_poromechanics(verdict):
    kappas = (1.0, 1e-2, 1e-4)
    details, ok = [], True
    for grid in ("gt1", "gt2"):
        cfg = ExperimentConfig(
            model="poromech",
            grid=grid,
            solution="poromech_smooth",
            levels=LEVELS,
            lambda_inv=1.0,
            theta=1.0,
            ell=0.0,
            param_name="kappa",
            param_values=(*kappas, 0.0),
        )
        try:
            rep = run_convergence(cfg)
        except TpsaError as exc:
            ok = False
            details.append(f"{grid} failed: {exc}")
            continue
        orders = [rep.headline_order(v) for v in kappas]
        zero = rep.headline_order(0.0)
        ok &= min(orders) >= 1.7
        details.append(f"{grid} orders {fmt(orders)}, kappa=0 solved (order {zero:.3g})")
    verdict(8, ok, "; ".join(details) + " (order >= 1.7)")
    assert ok


def test_criterion_9_stability_sweep(verdict):
    g = make_grid("gt4", 32)
    rng = np.random.default_rng(0)
    nc = g.num_cells
    f = SourceField(rng.standard_normal((nc, 2)), rng.standard_normal((nc, 1)), rng.standard_normal(nc), rng.standard_normal(nc))
    fnorm = f.norm(g)
    bc = BoundarySpec.dirichlet(g)
    worst, failures = 0.0, []
    for lam_inv, ell, kappa, eta_w in itertools.product((0.0, 1.0), repeat=4):
        label = f"(lambda_inv={lam_inv:g}, ell={ell:g}, kappa={kappa:g}, eta_w={eta_w:g})"
        try:
            m = MaterialField.uniform(g, lambda_inv=lam_inv, ell=ell, theta=1.0, kappa=kappa, eta_w=eta_w)
            s = assemble_poromech(g, m, bc, f)
            if m.pressure_kernel(flow=True) is not None:
                s = handle_incompressible_limit(s, m, bc)
            sol = solve(s)
        except TpsaError as exc:
            failures.append(f"{label}: {type(exc).__name__}")
            continue
        worst = max(worst, solution_norm(sol, m, g, "poromech") / fnorm)
    ok = not failures and worst <= 1e3
    detail = f"max ||z||/||f|| {worst:.3g} (<= 1e3) over {16 - len(failures)}/16 systems"
    if failures:
        detail += "; not factorized: " + ", ".join(failures)
    verdict(9, ok, detail)
    assert ok


def test_criterion_10_deterministic_csv(verdict, tmp_path):
    cfg = tmp_path / "study.cfg"
    cfg.write_text("model = cosserat\ngrid = gt4\nseed = 3\nlevels = 8, 16\nparam_name = ell\nparam_values = 1, 0.01\n")
    exe = shutil.which("tpsa")
    cmd = [exe] if exe else [sys.executable, "-m", "tpsa.cli"]
    outputs = []
    for name in ("first", "second"):
        proc = subprocess.run([*cmd, "run", str(cfg), "--out", str(tmp_path / name)], capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outputs.append((tmp_path / name / "convergence.csv").read_bytes())
    ok = outputs[0] == outputs[1] and len(outputs[0]) > 0
    verdict(10, ok, f"two runs byte-identical: {ok} ({len(outputs[0])} bytes)")
    assert ok
