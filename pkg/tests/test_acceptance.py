"""End-to-end acceptance suite: ten numbered criteria, one verdict line each.

Each criterion drives the library at fixed resolutions and tolerances and
prints a single machine-checkable line (run with ``pytest -s`` to see all
of them; a failing criterion carries its line in the assertion message).
Criteria 1-6, 8, and 9 run through the experiment harness so the CLI and
this suite cannot drift apart; criteria 7 and 10 call the discrete-identity
helpers directly.
"""

import time

import numpy as np
import pytest

from wulff_lab.grids import make_grid
from wulff_lab.harness import ExperimentConfig, run_experiment
from wulff_lab.integrand import (
    ConstantOne,
    ModePerturbation,
    QuadraticForm,
    build_wulff,
)
from wulff_lab.surface import (
    WulffGraphChart,
    aniso_shape_operator,
    build_surface,
    codazzi_residual,
    convexity_check,
    det_identity_residual,
    nodal_mode_field,
)

DIAG3 = [[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 3.0]]
SURFACE_LADDER = (16, 24, 32, 48, 128)


def _criterion(name: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} {name}: {detail}"
    print(line)
    assert ok, line


def _failures(results) -> str:
    lines = []
    for res in results:
        lines += [a.line() for a in res.assertions if not a.passed]
    return "; ".join(lines) if lines else "all assertions hold"


def _random_convex_graphs(wulff, rng, count):
    """Rejection-sample mildly perturbed convex graphs over the shape."""
    axes_pool = [(0, 1)] if wulff.n == 1 else [(0, 1), (0, 2), (1, 2)]
    surfaces = []
    attempts = 0
    while len(surfaces) < count and attempts < 20 * count:
        attempts += 1
        amp = 10.0 ** rng.uniform(-2.5, -1.5)
        modes = [
            {
                "k": int(rng.integers(2, 5)),
                "amp": amp * rng.uniform(0.4, 1.0),
                "axes": axes_pool[rng.integers(0, len(axes_pool))],
                "phase": float(rng.uniform(0.0, 2.0 * np.pi)),
            }
            for _ in range(2)
        ]
        surf = build_surface(
            WulffGraphChart(wulff, nodal_mode_field(wulff.grid, modes))
        )
        convex, _ = convexity_check(surf)
        if convex:
            surfaces.append(surf)
    assert len(surfaces) == count, "convex rejection sampler starved"
    return surfaces


def test_criterion_01_rigidity_of_the_minimizer():
    """The curvature composition is the identity on the minimizing shape."""
    integrands = {
        "constant-one": {"family": "constant_one"},
        "quadratic-form": {"family": "quadratic_form", "M": DIAG3},
        "mode-perturbation": {"family": "mode_perturbation", "eps": 0.1, "k": 3},
    }
    results, worst_dev, worst_time = [], 0.0, 0.0
    for spec in integrands.values():
        tic = time.perf_counter()
        results.append(
            run_experiment(
                ExperimentConfig(
                    experiment="rigidity",
                    integrand=spec,
                    n=2,
                    resolutions=SURFACE_LADDER,
                )
            )
        )
        worst_time = max(worst_time, time.perf_counter() - tic)
        finest = results[-1].records[-1]
        worst_dev = max(worst_dev, finest["max_identity_deviation"])
    _criterion(
        "acceptance-01/rigidity",
        all(r.passed for r in results),
        f"max ||S - Id|| = {worst_dev:.3e} <= 1e-4 at 128x256 over "
        f"{len(integrands)} integrands, refinement slope >= 3.5, "
        f"{worst_time:.1f} s worst ({_failures(results)})",
    )


def test_criterion_02_translation_kernel():
    """Translation heights are annihilated by the stability linearization."""
    result = run_experiment(
        ExperimentConfig(
            experiment="kernel",
            integrand={"family": "quadratic_form", "M": DIAG3},
            n=2,
            resolutions=SURFACE_LADDER,
            seed=2,
        )
    )
    finest = [
        r for r in result.records if r["resolution"] == SURFACE_LADDER[-1]
    ]
    worst = max(r["tensor_residual_ratio"] for r in finest)
    _criterion(
        "acceptance-02/kernel",
        result.passed,
        f"max relative L2 residual {worst:.3e} <= 1e-3 over 6 random "
        f"directions at 128x256, slope >= 3.5 ({_failures([result])})",
    )


def test_criterion_03_oscillation_bound():
    """The distance to the nearest multiple of Id is controlled by the
    trace-free part, uniformly over random convex graphs."""
    results, worst_ratio, worst_drift = [], 0.0, 0.0
    for n in (1, 2):
        spec = (
            {"family": "quadratic_form", "M": [[1.0, 0.0], [0.0, 2.0]]}
            if n == 1
            else {"family": "quadratic_form", "M": DIAG3}
        )
        resolutions = (128, 256) if n == 1 else (24, 32)
        for p in (1.5, 2.0, 4.0):
            result = run_experiment(
                ExperimentConfig(
                    experiment="oscillation",
                    integrand=spec,
                    n=n,
                    p=p,
                    resolutions=resolutions,
                    seed=12,
                )
            )
            results.append(result)
            worst_ratio = max(
                worst_ratio,
                max(r["ratio_osc_over_deviation"] for r in result.records),
            )
            drift_line = next(
                a
                for a in result.assertions
                if a.name == "oscillation/resolution-stability"
            )
            worst_drift = max(worst_drift, 0.0 if drift_line.passed else 1.0)
    _criterion(
        "acceptance-03/oscillation",
        all(r.passed for r in results),
        f"ratio <= 10 (worst {worst_ratio:.3f}) and stable within 20% "
        f"across two resolutions, for p in (1.5, 2, 4) and n in (1, 2), "
        f"20 random convex graphs each ({_failures(results)})",
    )


def test_criterion_04_quantitative_estimate():
    """Both sides of the quantitative closeness estimate scale linearly in
    the perturbation amplitude and their ratio stays bounded."""
    result = run_experiment(
        ExperimentConfig(
            experiment="main_estimate",
            integrand={"family": "constant_one"},
            n=2,
            p=2.0,
            resolutions=(48,),
            eps_ladder=(0.1, 0.0316, 0.01, 0.00316, 0.001),
        )
    )
    ratios = [r["ratio_misfit_over_deviation"] for r in result.records]
    _criterion(
        "acceptance-04/quantitative-estimate",
        result.passed,
        f"misfit/deviation ratio in [{min(ratios):.3f}, {max(ratios):.3f}] "
        f"over eps in [1e-3, 1e-1], both log-log slopes 1 +- 0.1 "
        f"({_failures([result])})",
    )


def test_criterion_05_linearization_accuracy():
    """First-order curvature prediction: the residual after subtracting the
    linearization is super-linear in the amplitude."""
    iso = run_experiment(
        ExperimentConfig(
            experiment="linearization",
            integrand={"family": "constant_one"},
            n=2,
            resolutions=(64,),
            eps_ladder=(0.1, 0.05, 0.025, 0.0125),
        )
    )
    aniso = run_experiment(
        ExperimentConfig(
            experiment="linearization",
            integrand={"family": "quadratic_form", "M": DIAG3},
            n=2,
            resolutions=(64,),
            eps_ladder=(0.1, 0.05, 0.025, 0.0125),
        )
    )
    details = {
        a.name: a.detail for res in (iso, aniso) for a in res.assertions
    }
    _criterion(
        "acceptance-05/linearization",
        iso.passed and aniso.passed,
        f"mode slope >= 1.4 for isotropic and anisotropic integrands, "
        f"translation slope >= 1.9 at the isotropic one "
        f"({details.get('linearization/translation-slope', '')}; "
        f"{_failures([iso, aniso])})",
    )


def test_criterion_06_expansion_inequalities():
    """All seven geometric expansion remainders obey the calibrated
    sqrt(eps) bound with non-increasing ratios."""
    result = run_experiment(
        ExperimentConfig(
            experiment="expansion",
            integrand={"family": "quadratic_form", "M": DIAG3},
            n=2,
            resolutions=(32,),
            eps_ladder=(0.08, 0.04, 0.02, 0.01),
        )
    )
    checks = sorted({r["check"] for r in result.records})
    _criterion(
        "acceptance-06/expansion",
        result.passed and len(checks) == 7,
        f"{len(checks)} remainder inequalities hold over the pilot ladder "
        f"with calibrated constants, ratios non-increasing within 10% "
        f"({_failures([result])})",
    )


def test_criterion_07_determinant_identity():
    """The surface integral of det S matches its sphere-side value on
    random convex surfaces."""
    worst = {1: 0.0, 2: 0.0}
    tol = {1: 1e-6, 2: 1e-4}
    for n, res in ((1, 256), (2, 64)):
        integrands = (
            ConstantOne(n + 1),
            QuadraticForm(np.diag([1.0, 2.0, 3.0][: n + 1])),
            ModePerturbation(n + 1, 0.1, 3),
        )
        for F in integrands:
            rng = np.random.Generator(np.random.PCG64(5))
            W = build_wulff(F, make_grid(n, res))
            for surf in _random_convex_graphs(W, rng, 10):
                report = det_identity_residual(surf, aniso_shape_operator(surf, F))
                diff = abs(
                    report["surface_integral"] - report["sphere_integral"]
                )
                worst[n] = max(worst[n], diff)
    _criterion(
        "acceptance-07/determinant-identity",
        worst[1] <= tol[1] and worst[2] <= tol[2],
        f"max |integral gap| = {worst[1]:.3e} (n=1, tol 1e-6) and "
        f"{worst[2]:.3e} (n=2, tol 1e-4) over 10 random convex surfaces "
        f"per integrand",
    )


def test_criterion_08_deficit_controls_asymmetry():
    """The asymmetry index is controlled by the square root of the
    isoperimetric deficit, and both vanish on the minimizer."""
    results = []
    for n, resolutions in ((1, (128, 256)), (2, (32, 64))):
        spec = (
            {"family": "quadratic_form", "M": [[1.0, 0.3], [0.3, 2.0]]}
            if n == 1
            else {"family": "quadratic_form", "M": DIAG3}
        )
        results.append(
            run_experiment(
                ExperimentConfig(
                    experiment="fmp",
                    integrand=spec,
                    n=n,
                    resolutions=resolutions,
                )
            )
        )
    minimizer = [
        r for res in results for r in res.records if r["family-id"] == "wulff"
    ]
    worst_A = max(r["A"] for r in minimizer)
    worst_d = max(abs(r["delta"]) for r in minimizer)
    _criterion(
        "acceptance-08/deficit-asymmetry",
        all(r.passed for r in results),
        f"max A/sqrt(delta) stable within 20% across two resolutions for "
        f"n in (1, 2); minimizer asymmetry {worst_A:.3e} and deficit "
        f"{worst_d:.3e} both <= 1e-6 ({_failures(results)})",
    )


def test_criterion_09_c1_closeness():
    """Inside the tube, the gradient of the height stays O(sqrt(eps))."""
    results, ranges = [], []
    for n in (1, 2):
        spec = (
            {"family": "quadratic_form", "M": [[1.0, 0.0], [0.0, 1.5]]}
            if n == 1
            else {"family": "quadratic_form", "M": DIAG3}
        )
        modes = (
            ({"k": 2, "amp": 1.0, "axes": (0, 1)},) if n == 1 else ()
        )
        result = run_experiment(
            ExperimentConfig(
                experiment="qualitative",
                integrand=spec,
                n=n,
                resolutions=(256,) if n == 1 else (32,),
                eps_ladder=(0.1, 0.01, 0.001, 0.0001),
                modes=modes,
            )
        )
        results.append(result)
        rats = [r["gradient_over_sqrt_eps"] for r in result.records]
        ranges.append(f"n={n}: [{min(rats):.3f}, {max(rats):.3f}]")
    _criterion(
        "acceptance-09/c1-closeness",
        all(r.passed for r in results),
        f"sup|grad u|/sqrt(eps) bounded and non-increasing over eps in "
        f"[1e-4, 1e-1] ({'; '.join(ranges)}; {_failures(results)})",
    )


def test_criterion_10_curl_free_curvature():
    """The discrete curvature field satisfies its differential identity at
    the stencil order."""
    F = QuadraticForm(np.asarray(DIAG3))
    residuals, spacings = [], []
    for res in (16, 24, 32, 48):
        W = build_wulff(F, make_grid(2, res))
        u = nodal_mode_field(
            W.grid, [{"k": 2, "amp": 0.05, "axes": (0, 2)}]
        )
        surf = build_surface(WulffGraphChart(W, u))
        residuals.append(codazzi_residual(surf, aniso_shape_operator(surf, F)))
        spacings.append(np.pi / res)
    slope = float(np.polyfit(np.log(spacings), np.log(residuals), 1)[0])

    # curves: the spectral pipeline resolves the identity to roundoff
    F1 = QuadraticForm(np.array([[1.0, 0.3], [0.3, 2.0]]))
    floor = 0.0
    for res in (64, 96, 128):
        W = build_wulff(F1, make_grid(1, res))
        u = nodal_mode_field(W.grid, [{"k": 2, "amp": 0.05}])
        surf = build_surface(WulffGraphChart(W, u))
        floor = max(floor, codazzi_residual(surf, aniso_shape_operator(surf, F1)))
    _criterion(
        "acceptance-10/differential-identity",
        slope >= 3.0 and floor <= 1e-10,
        f"residual refinement slope {slope:.2f} >= 3 on smooth convex "
        f"surfaces (n=2); curve residuals at roundoff ({floor:.3e})",
    )
