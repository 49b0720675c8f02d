"""End-to-end acceptance checks, one test per numbered criterion.

Each test prints a single `CRITERION n: PASS|FAIL - ...` line with its
runtime, then asserts. Tolerances are pinned inline; runtime budgets are part
of the verdict.
"""

import json
import math
import time
from pathlib import Path

import numpy as np

import lscert
from lscert import (
    ReducedMap,
    SupremumEstimator,
    build_split_system,
    certify_ls_region,
    classify_series,
    compute_ls_M,
    estimate_ls_L,
    in_certified_region,
    ls_quantities,
    series_coefficients,
    trace_branches,
    witness_check,
)
from lscert.cli import main as cli_main
from lscert.imft import certify_region, split_function
from conftest import central_difference_jacobian, generate_expression_cases, \
    random_singular_matrix
from lscert import expr as expr_mod
from lscert.subspace import compute_decomposition

SQRT2 = math.sqrt(2.0)

REPO = Path(__file__).resolve().parent.parent
GOLDEN = Path(__file__).resolve().parent / "golden" / "tanh2_analytic_nonmeta.json"
ANALYTIC_CONFIG = str(REPO / "configs" / "tanh2_certify_analytic.json")

ANALYTIC = SupremumEstimator(
    mode="analytic",
    override_L_x=lambda r: 0.0,
    override_L_y=lambda r_par, r_perp: 1.0 - min(0.0, 1.0 - r_par),
)


def _verdict(num: int, description: str, failures: list, started: float, budget: float):
    elapsed = time.perf_counter() - started
    if elapsed >= budget:
        failures = failures + [f"runtime {elapsed:.2f}s exceeded {budget:.0f}s budget"]
    status = "PASS" if not failures else "FAIL"
    detail = f"{elapsed:.2f}s/{budget:.0f}s"
    if failures:
        detail += "; " + "; ".join(str(f) for f in failures)
    print(f"CRITERION {num}: {status} - {description} ({detail})")
    assert not failures, f"criterion {num}: " + "; ".join(str(f) for f in failures)


def test_criterion_1_base_norms_and_parallel_deviation(tanh2_split):
    started = time.perf_counter()
    failures = []
    m_par, m_perp = compute_ls_M(tanh2_split)
    if not abs(m_par) <= 1e-12:
        failures.append(f"M_par = {m_par!r}, expected |.| <= 1e-12")
    if not abs(m_perp - 0.5) <= 1e-12:
        failures.append(f"M_perp = {m_perp!r}, expected 0.5 +- 1e-12")
    est = SupremumEstimator()
    for r in (0.1, 0.5, 1.0, 1.9):
        l_par, _ = estimate_ls_L(tanh2_split, r, 0.0, est)
        if not l_par <= 1e-10:
            failures.append(f"L_par({r}) = {l_par!r}, expected <= 1e-10")
    _verdict(1, "base norms and vanishing parallel deviation at the symmetric point",
             failures, started, 1.0)


def test_criterion_2_analytic_certification_boundary(tanh2_split):
    started = time.perf_counter()
    failures = []
    q = ls_quantities(tanh2_split, ANALYTIC)
    from lscert import check_ls_conditions
    for t in (0.1, 1.0, 10.0):
        if not check_ls_conditions(q, 1.99, t).certified:
            failures.append(f"(1.99, {t}) not certified")
    for r_par in (2.0, 2.1):
        for t in (0.1, 1.0, 10.0):
            if check_ls_conditions(q, r_par, t).certified:
                failures.append(f"({r_par}, {t}) certified but must fail")
    grid = [i / 100.0 for i in range(1, 211)]  # 0.01 .. 2.10 step 0.01
    region, _ = certify_ls_region(tanh2_split, grid, [0.1, 1.0, 10.0],
                                  ANALYTIC, quantities=q)
    for front in region.frontier:
        if front.r_par_max is None or not (1.98 <= front.r_par_max <= 2.0):
            failures.append(
                f"frontier at r_perp={front.r_perp}: r_par_max={front.r_par_max}, "
                "expected inside [1.98, 2.0]")
    _verdict(2, "strict certification boundary at r_par = 2 with analytic overrides",
             failures, started, 5.0)


def test_criterion_3_sampled_vs_analytic_deviation(tanh2_split):
    started = time.perf_counter()
    failures = []
    est = SupremumEstimator(samples_per_dim=33)
    for r_par in (0.5, 1.0, 1.5):
        for r_perp in (0.5, 2.0):
            _, sampled = estimate_ls_L(tanh2_split, r_par, r_perp, est)
            analytic = 1.0 - min(0.0, 1.0 - r_par)
            rel = abs(sampled - analytic) / analytic
            if not rel <= 0.05:
                failures.append(
                    f"L_perp({r_par}, {r_perp}): sampled {sampled:.6f} vs "
                    f"analytic {analytic:.6f}, rel err {rel:.4f} > 0.05")
    _verdict(3, "sampled complement deviation within 5% of the analytic overrides",
             failures, started, 30.0)


def test_criterion_4_series_coefficients(tanh2_split):
    started = time.perf_counter()
    failures = []
    c = series_coefficients(ReducedMap(tanh2_split))
    for name, value, target, tol in (
        ("g_alpha", c.g_alpha, 0.0, 1e-6),
        ("g_alpha_alpha", c.g_alpha_alpha, 0.0, 1e-6),
        ("g_alpha_alpha_alpha", c.g_alpha_alpha_alpha, -1.0, 1e-4),
        ("g_alpha_lambda", c.g_alpha_lambda, 1.0, 1e-5),
    ):
        if not abs(value - target) <= tol:
            failures.append(f"{name} = {value!r}, expected {target} +- {tol:g}")
    _verdict(4, "reduced-map series coefficients at the symmetric base point",
             failures, started, 1.0)


def test_criterion_5_branch_root_vs_full_system(tanh2_system, tanh2_split):
    started = time.perf_counter()
    failures = []
    rm = ReducedMap(tanh2_split)
    lam = 1.5

    # independent scalar bisection for x = tanh(1.5 tanh(1.5 x))
    f = lambda x: math.tanh(lam * math.tanh(lam * x)) - x
    lo, hi = 0.1, 3.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    x_bisect = 0.5 * (lo + hi)

    result = trace_branches(rm, [lam], (-1.6, 1.6))
    traced = result.roots_at(lam)
    positive = [p for p in traced if p.alpha > 0.1]
    if len(positive) != 1:
        failures.append(f"expected one positive root, got {len(positive)}")
    else:
        x_star = positive[0].x[0]
        if not abs(x_star - x_bisect) <= 1e-8:
            failures.append(f"|x* - x_bisect| = {abs(x_star - x_bisect):.3e} > 1e-8")

    # exhaustive full-system sweep: nothing certified may be missing from the trace
    region, _ = certify_ls_region(tanh2_split, [0.5, 1.0, 1.5, 1.99, 2.0],
                                  [0.5, 2.0], ANALYTIC)
    ss = tanh2_split
    found: list[np.ndarray] = []
    for x1 in np.linspace(-1.5, 1.5, 40):
        for x2 in np.linspace(-1.5, 1.5, 40):
            sol = lscert.newton_full(tanh2_system, [x1, x2], [lam])
            if sol is None:
                continue
            if not any(np.linalg.norm(sol - known) <= 1e-8 for known in found):
                found.append(sol)
    unmatched = []
    for sol in found:
        alpha = ss.decomp.V.T @ sol
        beta = ss.decomp.Vperp.T @ sol
        r_par_pt = float(np.hypot(alpha[0] - ss.alpha0[0], lam - 1.0))
        r_perp_pt = float(abs(beta[0] - ss.beta0[0]))
        if not in_certified_region(region.frontier, r_par_pt, r_perp_pt):
            continue
        if not any(np.linalg.norm(sol - p.x) <= 1e-6 for p in traced):
            unmatched.append(sol)
    if unmatched:
        failures.append(
            f"{len(unmatched)} certified equilibria missing from traced branches: "
            + "; ".join(np.array2string(s, precision=6) for s in unmatched))
    _verdict(5, "traced roots agree with bisection oracle and exhaust the "
                "certified equilibria", failures, started, 60.0)


def test_criterion_6_generic_certification_with_witness():
    started = time.perf_counter()
    failures = []
    f = split_function(
        lambda x, y: np.array([y[0] - x[0] ** 2]), 1, 1,
        jac_x=lambda x, y: np.array([[-2.0 * x[0]]]),
        jac_y=lambda x, y: np.array([[1.0]]),
    )
    x0, y0 = np.array([0.0]), np.array([0.0])
    region, _ = certify_region(f, x0, y0, [0.1, 0.2, 0.3], [0.1, 0.3],
                               SupremumEstimator(samples_per_dim=5))
    got = {(e.r_x, e.r_y) for e in region.entries if e.certified}
    want = {(rx, ry) for rx in (0.1, 0.2, 0.3) for ry in (0.1, 0.3)
            if 2.0 * rx * rx < ry}
    if got != want:
        failures.append(f"certified set {sorted(got)} != closed form {sorted(want)}")
    for rx, ry in sorted(got):
        w = witness_check(f, x0, y0, rx, ry, n_samples=100, seed=7)
        if not (w.converged == w.total == 100 and w.max_y_norm < ry):
            failures.append(
                f"witness at ({rx}, {ry}): {w.converged}/{w.total} converged, "
                f"max ||y|| = {w.max_y_norm!r}")
    _verdict(6, "quadratic graph certified set matches 2 r_x^2 < r_y with "
                "Newton witnesses", failures, started, 5.0)


def test_criterion_7_property_suites(tanh2_split, tmp_path):
    started = time.perf_counter()
    failures = []

    # subspace invariants on 200 random singular matrices
    rng = np.random.default_rng(20240917)
    for i in range(200):
        n = int(rng.integers(2, 9))
        q = int(rng.integers(1, n))
        decomp = compute_decomposition(random_singular_matrix(rng, n, q))
        if decomp.q != q:
            failures.append(f"matrix {i}: kernel dimension {decomp.q} != {q}")
            break
        if max(decomp.validate().values()) > 1e-12:
            failures.append(f"matrix {i}: basis residual {max(decomp.validate().values()):.2e}")
            break

    # dual evaluation against central differences on 500 generated expressions
    for node, names, x, lam in generate_expression_cases(500):
        _, jx, jl = expr_mod.eval_dual([node], x, lam, names=names)
        fd_x, fd_l = central_difference_jacobian(node, names, x, lam)
        for got, want in ((jx[0], fd_x), (jl[0], fd_l)):
            rel = np.max(np.abs(got - want) / np.maximum(1.0, np.abs(want)), initial=0.0)
            if rel > 1e-6:
                failures.append(
                    f"derivative mismatch {rel:.2e} on "
                    f"{expr_mod.to_source(node, *names)!r}")
                break

    # deviation estimates are monotone in the radii and under sample doubling
    est = SupremumEstimator(samples_per_dim=5)
    radii = (0.25, 0.5, 1.0, 1.5, 2.0)
    perp_values = [estimate_ls_L(tanh2_split, r, r, est)[1] for r in radii]
    if any(a > b for a, b in zip(perp_values, perp_values[1:])):
        failures.append(f"L_perp not monotone in radius: {perp_values}")
    for spd in (3, 5, 9):
        small = estimate_ls_L(tanh2_split, 1.0, 1.0,
                              SupremumEstimator(samples_per_dim=spd))
        large = estimate_ls_L(tanh2_split, 1.0, 1.0,
                              SupremumEstimator(samples_per_dim=2 * spd))
        if small[0] > large[0] or small[1] > large[1]:
            failures.append(f"doubling {spd} -> {2 * spd} lost supremum: {small} vs {large}")

    # report determinism, pinned by a committed golden file
    texts = []
    for i in range(2):
        out = tmp_path / f"det{i}.json"
        code = cli_main(["ls-certify", "--config", ANALYTIC_CONFIG, "--out", str(out)])
        if code != 0:
            failures.append(f"ls-certify exited {code}")
            break
        doc = json.loads(out.read_text(encoding="utf-8"))
        texts.append(json.dumps(
            {k: doc[k] for k in ("decomposition", "quantities", "region", "frontier")},
            indent=2) + "\n")
    if len(texts) == 2:
        if texts[0] != texts[1]:
            failures.append("two identical runs produced different non-meta reports")
        if texts[0] != GOLDEN.read_text(encoding="utf-8"):
            failures.append("non-meta report deviates from the committed golden file")

    _verdict(7, "property suites: subspace invariants, dual derivatives, "
                "estimate monotonicity, report determinism", failures, started, 120.0)


def test_criterion_8_mirrored_parameter_pipeline(tanh2_system):
    started = time.perf_counter()
    failures = []
    point = lscert.evaluation_point(tanh2_system, [0.0, 0.0], [-1.0])
    jac = tanh2_system.dphi_dx(point.x0, point.lambda0)
    if not np.array_equal(jac, np.array([[-1.0, -1.0], [-1.0, -1.0]])):
        failures.append(f"Jacobian at lambda = -1 is {jac.tolist()}")
    ss = build_split_system(tanh2_system, point)
    if ss.q != 1:
        failures.append(f"kernel dimension {ss.q} != 1")
    m_par, m_perp = compute_ls_M(ss)
    if not abs(m_par) <= 1e-12:
        failures.append(f"M_par = {m_par!r}")
    if not abs(m_perp - 0.5) <= 1e-12:
        failures.append(f"M_perp = {m_perp!r}, expected 0.5 +- 1e-12")
    region, _ = certify_ls_region(ss, [0.1, 0.25], [0.1, 0.25],
                                  SupremumEstimator(samples_per_dim=9))
    if not region.any_certified:
        failures.append("no radius pair certified at the mirrored point")
    c = series_coefficients(ReducedMap(ss))
    label = classify_series(c)
    if label not in ("pitchfork_supercritical", "pitchfork_subcritical"):
        failures.append(f"classification {label!r} is not a pitchfork")
    _verdict(8, "full pipeline at the mirrored parameter value lambda = -1",
             failures, started, 10.0)
