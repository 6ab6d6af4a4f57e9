"""Experiment runner: sweeps, constant fits, and reproducible reports.

Each experiment sweeps a family of surfaces or bodies against one integrand,
records the two sides of an inequality (or a residual and its driver) per
sweep point, and evaluates a fixed list of assertions.  Results land in
three files per experiment: a CSV table, a log-log SVG plot of the headline
columns, and a summary file with one machine-checkable PASS or FAIL line per
assertion.

Reproducibility contract: a config carries a seed for a named 64-bit
generator (PCG64); identical config and seed produce byte-identical CSV
output.  Floats are written with a fixed scientific format and rows are
sorted before writing, so the file content does not depend on dict ordering
or accumulation order.

Norm conventions used by ratio columns: Lp norms are taken against the
area measure of the surface or shape carrying the field; the deviator of
the shape operator splits off the pointwise trace for surfaces (n = 2) and
the area-averaged trace for curves (n = 1); Sobolev norms aggregate value,
gradient, and Hessian in the induced metric.  The CSV header repeats this
tag so every table is self-describing.
"""

from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .deficit import (
    StarBody,
    asymmetry_index,
    isoperimetric_deficit,
    wulff_star_body,
)
from .errors import ConfigError, PreconditionError
from .grids import make_grid
from .integrand import EllipticIntegrand, build_wulff, integrand_from_spec
from .stability import (
    StabilityOperator,
    centering_map,
    expansion_check,
    find_center,
    reparametrize_over_wulff,
)
from .surface import (
    TensorField,
    WulffGraphChart,
    aniso_shape_operator,
    build_surface,
    codazzi_residual,
    convexity_check,
    det_identity_residual,
    hausdorff_distance,
    lp_norm,
    nodal_mode_field,
    oscillation_minimum,
    rescale_to_perimeter,
    w2p_norm,
)

__all__ = [
    "EXPERIMENT_IDS",
    "ExperimentConfig",
    "Assertion",
    "ExperimentResult",
    "ConstantFit",
    "fit_constant",
    "c1_closeness_check",
    "run_experiment",
    "write_records_csv",
    "write_loglog_svg",
    "export_wulff_obj",
]

EXPERIMENT_IDS = (
    "rigidity",
    "oscillation",
    "main_estimate",
    "linearization",
    "expansion",
    "kernel",
    "centering",
    "fmp",
    "qualitative",
)

NORM_CONVENTION = (
    "Lp against the area measure; deviator splits the pointwise trace for "
    "n=2 and the area-averaged trace for n=1; Sobolev = value+gradient+"
    "hessian in the induced metric"
)

# default sweep modes per surface dimension (low-order, convexity-friendly)
_DEFAULT_MODES = {
    1: ({"k": 3, "amp": 1.0, "axes": (0, 1)},),
    2: (
        {"k": 2, "amp": 1.0, "axes": (0, 2)},
        {"k": 3, "amp": 0.6, "axes": (1, 2)},
    ),
}
# single fixed degree-2 mode for the quantitative-estimate sweep
_DEGREE_TWO_MODE = {
    1: ({"k": 2, "amp": 1.0, "axes": (0, 1)},),
    2: ({"k": 2, "amp": 1.0, "axes": (0, 2)},),
}


@dataclass
class ExperimentConfig:
    """Declarative description of one experiment sweep.

    Fields
    ------
    experiment : one of ``EXPERIMENT_IDS`` (hyphens accepted).
    integrand : plain-dict integrand description (family plus parameters).
    n : surface dimension, 1 (curves) or 2 (surfaces).
    p : Lp exponent used by norm-ratio columns, in (1, inf).
    resolutions : strictly increasing grid resolutions (latitude count for
        n = 2, node count for n = 1).
    eps_ladder : strictly decreasing positive sweep amplitudes.
    modes : optional tuple of mode dicts (k/amp/axes/phase); experiments
        fall back to a per-dimension default family when empty.
    seed : seed for the named 64-bit generator (PCG64).
    out_dir : where report files go (may be overridden at run time).
    """

    experiment: str
    integrand: dict = field(default_factory=lambda: {"family": "constant_one"})
    n: int = 2
    p: float = 2.0
    resolutions: tuple = (16, 24, 32)
    eps_ladder: tuple = (0.1, 0.05, 0.025)
    modes: tuple = ()
    seed: int = 0
    out_dir: str | None = None

    def __post_init__(self):
        self.experiment = str(self.experiment).replace("-", "_")
        if self.experiment not in EXPERIMENT_IDS:
            raise ConfigError(
                f"unknown experiment {self.experiment!r}; "
                f"choose from {EXPERIMENT_IDS}"
            )
        if not isinstance(self.integrand, dict):
            raise ConfigError("integrand must be a plain dict description")
        if self.n not in (1, 2):
            raise ConfigError("n must be 1 or 2")
        if not (np.isfinite(self.p) and 1.0 < self.p):
            raise ConfigError("p must lie in (1, inf)")
        self.resolutions = tuple(int(r) for r in self.resolutions)
        if len(self.resolutions) == 0:
            raise ConfigError("at least one resolution is required")
        if any(b <= a for a, b in zip(self.resolutions, self.resolutions[1:])):
            raise ConfigError("resolutions must be strictly increasing")
        if min(self.resolutions) < 4:
            raise ConfigError("resolutions below 4 cannot carry the stencils")
        self.eps_ladder = tuple(float(e) for e in self.eps_ladder)
        if len(self.eps_ladder) == 0:
            raise ConfigError("at least one sweep amplitude is required")
        if any(e <= 0 or not np.isfinite(e) for e in self.eps_ladder):
            raise ConfigError("sweep amplitudes must be positive and finite")
        if any(b >= a for a, b in zip(self.eps_ladder, self.eps_ladder[1:])):
            raise ConfigError("the amplitude ladder must be strictly decreasing")
        self.modes = tuple(dict(m) for m in self.modes)
        for mode in self.modes:
            axes = tuple(mode.get("axes", (0, 1)))
            if any(a < 0 or a > self.n for a in axes):
                raise ConfigError(
                    f"mode axes {axes} leave the ambient dimension {self.n + 1}"
                )
        self.seed = int(self.seed)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        known = {
            "experiment",
            "integrand",
            "n",
            "p",
            "resolutions",
            "eps_ladder",
            "modes",
            "seed",
            "out_dir",
        }
        clean = {}
        for key, value in data.items():
            name = str(key).replace("-", "_")
            if name not in known:
                raise ConfigError(f"unknown config key {key!r}")
            clean[name] = value
        if "experiment" not in clean:
            raise ConfigError("config needs an 'experiment' key")
        return cls(**clean)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "integrand": self.integrand,
            "n": self.n,
            "p": self.p,
            "resolutions": list(self.resolutions),
            "eps_ladder": list(self.eps_ladder),
            "modes": [dict(m) for m in self.modes],
            "seed": self.seed,
            "out_dir": self.out_dir,
        }

    def rng_name(self) -> str:
        return f"PCG64(seed={self.seed})"

    def rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed))


class Assertion(NamedTuple):
    """One machine-checkable claim evaluated by an experiment."""

    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


@dataclass
class ExperimentResult:
    """Everything one experiment run produced."""

    config: ExperimentConfig
    records: list
    assertions: list
    csv_path: str | None = None
    svg_path: str | None = None
    summary_path: str | None = None

    @property
    def passed(self) -> bool:
        return all(a.passed for a in self.assertions)

    def summary_lines(self) -> list:
        return [a.line() for a in self.assertions]


class ConstantFit(NamedTuple):
    """Empirical constant and scaling fit between two record columns."""

    c_hat: float
    slope: float
    r_squared: float
    skipped: int


def fit_constant(records, x_col: str, y_col: str) -> ConstantFit:
    """Estimate C in y <= C x plus the log-log scaling between the columns.

    ``c_hat`` is the maximal ratio y/x over the records; ``slope`` and
    ``r_squared`` come from a least-squares line through (log x, log y).
    Records with x = 0 are skipped and counted (y = 0 rows are likewise
    unusable for the log fit); at least three usable records are required.
    """
    xs, ys, skipped = [], [], 0
    for rec in records:
        x, y = float(rec[x_col]), float(rec[y_col])
        if x == 0.0 or y == 0.0 or not (np.isfinite(x) and np.isfinite(y)):
            skipped += 1
            continue
        xs.append(abs(x))
        ys.append(abs(y))
    if len(xs) < 3:
        raise ConfigError(
            f"fit needs at least 3 usable records, got {len(xs)} "
            f"({skipped} skipped)"
        )
    xs, ys = np.asarray(xs), np.asarray(ys)
    c_hat = float(np.max(ys / xs))
    lx, ly = np.log(xs), np.log(ys)
    slope, intercept = np.polyfit(lx, ly, 1)
    model = slope * lx + intercept
    ss_res = float(np.sum((ly - model) ** 2))
    ss_tot = float(np.sum((ly - np.mean(ly)) ** 2))
    r_squared = 1.0 if ss_tot < 1e-30 else 1.0 - ss_res / ss_tot
    return ConstantFit(c_hat, float(slope), float(r_squared), skipped)


def c1_closeness_check(surface, wulff, eps: float):
    """Sup norms (|u|, |grad u|) of the wulff-normal height of a surface.

    The surface must lie inside the eps-tube of the shape: the reparametrized
    height is required to satisfy sup |u| <= eps, otherwise a precondition
    error is raised.  The gradient is measured in the shape's metric.
    """
    if not (np.isfinite(eps) and eps > 0):
        raise ConfigError("the tube radius eps must be positive")
    rep = reparametrize_over_wulff(surface, wulff)
    u = rep.height
    sup_u = float(np.max(np.abs(u)))
    if sup_u > eps:
        raise PreconditionError(
            f"surface leaves the {eps:.3e}-tube (sup height {sup_u:.3e})"
        )
    du = wulff.grid.partials(u)
    grad_sq = np.einsum("...a,...b,...ab->...", du, du, wulff.omega_inv)
    sup_grad = float(np.sqrt(max(np.max(grad_sq), 0.0)))
    return sup_u, sup_grad


# ---------------------------------------------------------------------------
# shared sweep machinery
# ---------------------------------------------------------------------------


def _build_integrand(config: ExperimentConfig) -> EllipticIntegrand:
    spec = dict(config.integrand)
    spec.setdefault("dim", config.n + 1)
    F = integrand_from_spec(spec)
    if F.dim != config.n + 1:
        raise ConfigError(
            f"integrand dimension {F.dim} does not fit n={config.n}"
        )
    return F


def _modes(config: ExperimentConfig, fallback=None) -> tuple:
    if config.modes:
        return config.modes
    return fallback if fallback is not None else _DEFAULT_MODES[config.n]


def _normalized_mode_field(grid, modes) -> np.ndarray:
    u = nodal_mode_field(grid, modes)
    sup = float(np.max(np.abs(u)))
    if sup == 0.0:
        raise ConfigError("the mode list produced an identically zero field")
    return u / sup


def _grid_spacing(n: int, res: int) -> float:
    return np.pi / res if n == 2 else 2.0 * np.pi / res


def _tensor_lp(wulff, data, variance: str, p: float) -> float:
    pw = TensorField(wulff.grid, data, variance).pointwise_norm(
        wulff.omega, wulff.omega_inv
    )
    return lp_norm(wulff, pw, p)


def _wulff_ladder(config: ExperimentConfig, F: EllipticIntegrand):
    for res in config.resolutions:
        yield res, build_wulff(F, make_grid(config.n, res))


def _relative_spread(values) -> float:
    values = np.asarray(values, dtype=float)
    lo, hi = float(np.min(values)), float(np.max(values))
    return (hi - lo) / max(abs(lo), 1e-300)


# below this, residuals are roundoff noise and a refinement slope is not
# informative; the assertion then certifies the floor instead of the slope
ROUNDOFF_FLOOR = 1e-10


def _slope_or_floor_assertion(
    name: str, records, x_col: str, y_col: str, threshold: float
) -> Assertion:
    worst = max(float(r[y_col]) for r in records)
    if worst <= ROUNDOFF_FLOOR:
        return Assertion(
            name,
            True,
            f"residuals are at the roundoff floor (max {worst:.3e} <= "
            f"{ROUNDOFF_FLOOR:.0e}); refinement slope not informative",
        )
    fit = fit_constant(records, x_col, y_col)
    return Assertion(
        name,
        fit.slope >= threshold,
        f"log-log slope {fit.slope:.2f} over {len(records)} points "
        f"(threshold {threshold}, r^2 {fit.r_squared:.4f})",
    )


# ---------------------------------------------------------------------------
# experiment runners
# ---------------------------------------------------------------------------


def _run_rigidity(config: ExperimentConfig):
    F = _build_integrand(config)
    records = []
    # wall-clock times stay out of the records so the CSV is byte-stable
    runtimes = []
    for res, W in _wulff_ladder(config, F):
        tic = time.perf_counter()
        surf = build_surface(WulffGraphChart(W, 0.0))
        an = aniso_shape_operator(surf, F)
        dev = float(np.max(an.identity_deviation()))
        runtimes.append(time.perf_counter() - tic)
        records.append(
            {
                "resolution": res,
                "grid_spacing": _grid_spacing(config.n, res),
                "max_identity_deviation": dev,
                "gauge_residual": W.gauge_residual(),
            }
        )
    assertions = []
    final = records[-1]
    assertions.append(
        Assertion(
            "rigidity/max-deviation-at-finest",
            final["max_identity_deviation"] <= 1e-4,
            f"max ||S - Id|| = {final['max_identity_deviation']:.3e} "
            f"at resolution {final['resolution']} (threshold 1e-4)",
        )
    )
    if len(records) >= 3:
        assertions.append(
            _slope_or_floor_assertion(
                "rigidity/refinement-slope",
                records,
                "grid_spacing",
                "max_identity_deviation",
                3.5,
            )
        )
    assertions.append(
        Assertion(
            "rigidity/runtime",
            runtimes[-1] <= 60.0,
            f"finest-resolution evaluation took {runtimes[-1]:.1f} s "
            "(budget 60 s)",
        )
    )
    plot = ("grid_spacing", ["max_identity_deviation"], "identity deviation")
    return records, assertions, plot


def _run_kernel(config: ExperimentConfig):
    F = _build_integrand(config)
    rng = config.rng()
    probes = rng.standard_normal((6, config.n + 1))
    records = []
    for res, W in _wulff_ladder(config, F):
        op = StabilityOperator(W)
        for idx, c in enumerate(probes):
            phi = W.grid.nodes @ c
            denom = lp_norm(W, phi, 2.0)
            tensor = op.apply_tensor(phi)
            t_res = _tensor_lp(W, tensor.data, "ud", 2.0) / denom
            s_res = lp_norm(W, op.apply(phi), 2.0) / denom
            records.append(
                {
                    "resolution": res,
                    "grid_spacing": _grid_spacing(config.n, res),
                    "probe": idx,
                    "tensor_residual_ratio": t_res,
                    "scalar_residual_ratio": s_res,
                    "zeroth_variant": op.zeroth_order,
                }
            )
    assertions = []
    finest = [r for r in records if r["resolution"] == config.resolutions[-1]]
    worst = max(r["tensor_residual_ratio"] for r in finest)
    assertions.append(
        Assertion(
            "kernel/residual-at-finest",
            worst <= 1e-3,
            f"max ||Lt[phi_c]||_L2 / ||phi_c||_L2 = {worst:.3e} over "
            f"{len(finest)} probes (threshold 1e-3)",
        )
    )
    if len(config.resolutions) >= 3:
        per_res = [
            {
                "grid_spacing": _grid_spacing(config.n, res),
                "worst": max(
                    r["tensor_residual_ratio"]
                    for r in records
                    if r["resolution"] == res
                ),
            }
            for res in config.resolutions
        ]
        assertions.append(
            _slope_or_floor_assertion(
                "kernel/refinement-slope", per_res, "grid_spacing", "worst", 3.5
            )
        )
    plot = (
        "grid_spacing",
        ["tensor_residual_ratio", "scalar_residual_ratio"],
        "translation-kernel residuals",
    )
    return records, assertions, plot


def _sample_oscillation_modes(config: ExperimentConfig, rng, F, base_wulff):
    """Draw convex perturbed graphs with deviation norm inside [1e-3, 1e-1]."""
    axes_pool = [(0, 1)] if config.n == 1 else [(0, 1), (0, 2), (1, 2)]
    samples = []
    attempts = 0
    while len(samples) < 20 and attempts < 400:
        attempts += 1
        amp = 10.0 ** rng.uniform(-2.6, -1.4)
        modes = []
        for _ in range(2):
            modes.append(
                {
                    "k": int(rng.integers(2, 5)),
                    "amp": amp * rng.uniform(0.4, 1.0) * rng.choice([-1.0, 1.0]),
                    "axes": axes_pool[rng.integers(0, len(axes_pool))],
                    "phase": float(rng.uniform(0.0, 2.0 * np.pi)),
                }
            )
        u = nodal_mode_field(base_wulff.grid, modes)
        surf = build_surface(WulffGraphChart(base_wulff, u))
        convex, _ = convexity_check(surf)
        if not convex:
            continue
        s0 = aniso_shape_operator(surf, F).s0_lp(config.p)
        if not 1e-3 <= s0 <= 1e-1:
            continue
        samples.append(modes)
    if len(samples) < 20:
        raise PreconditionError(
            f"could not draw 20 admissible graphs in {attempts} attempts"
        )
    return samples


def _run_oscillation(config: ExperimentConfig):
    if len(config.resolutions) < 2:
        raise ConfigError("the oscillation sweep compares two resolutions")
    F = _build_integrand(config)
    rng = config.rng()
    wulffs = {res: W for res, W in _wulff_ladder(config, F)}
    base = wulffs[config.resolutions[0]]
    samples = _sample_oscillation_modes(config, rng, F, base)
    records = []
    for res in config.resolutions:
        W = wulffs[res]
        for idx, modes in enumerate(samples):
            u = nodal_mode_field(W.grid, modes)
            surf = build_surface(WulffGraphChart(W, u))
            convex, margin = convexity_check(surf)
            an = aniso_shape_operator(surf, F)
            s0 = an.s0_lp(config.p)
            _, osc = oscillation_minimum(an, config.p)
            records.append(
                {
                    "resolution": res,
                    "sample": idx,
                    "p": config.p,
                    "deviation_norm": s0,
                    "oscillation_min": osc,
                    "ratio_osc_over_deviation": osc / s0,
                    "convex_margin": margin,
                    "convex": convex,
                }
            )
    assertions = []
    ratios = [r["ratio_osc_over_deviation"] for r in records]
    assertions.append(
        Assertion(
            "oscillation/ratio-bounded",
            max(ratios) <= 10.0,
            f"max oscillation/deviation ratio {max(ratios):.3f} over "
            f"{len(records)} runs (threshold 10)",
        )
    )
    assertions.append(
        Assertion(
            "oscillation/all-convex",
            all(r["convex"] for r in records),
            "every sampled graph stayed convex at every resolution",
        )
    )
    res_lo, res_hi = config.resolutions[0], config.resolutions[-1]
    drifts = []
    for idx in range(len(samples)):
        r_lo = next(
            r["ratio_osc_over_deviation"]
            for r in records
            if r["sample"] == idx and r["resolution"] == res_lo
        )
        r_hi = next(
            r["ratio_osc_over_deviation"]
            for r in records
            if r["sample"] == idx and r["resolution"] == res_hi
        )
        drifts.append(abs(r_hi - r_lo) / r_lo)
    assertions.append(
        Assertion(
            "oscillation/resolution-stability",
            max(drifts) <= 0.2,
            f"worst per-sample ratio drift {max(drifts):.3f} between "
            f"resolutions {res_lo} and {res_hi} (threshold 0.20)",
        )
    )
    plot = (
        "deviation_norm",
        ["oscillation_min"],
        "oscillation vs deviation",
    )
    return records, assertions, plot


def _run_main_estimate(config: ExperimentConfig):
    F = _build_integrand(config)
    res = config.resolutions[-1]
    W = build_wulff(F, make_grid(config.n, res))
    mode = _normalized_mode_field(W.grid, _modes(config, _DEGREE_TWO_MODE[config.n]))
    records = []
    for eps in config.eps_ladder:
        surf = build_surface(WulffGraphChart(W, eps * mode))
        convex, margin = convexity_check(surf)
        scaled, scale = rescale_to_perimeter(surf, W.perimeter)
        center = find_center(scaled, W)
        disp = center.height[..., None] * W.grid.nodes
        lhs = w2p_norm(W, disp, config.p)
        an = aniso_shape_operator(scaled, F)
        rhs = an.s0_lp(config.p)
        records.append(
            {
                "eps": eps,
                "parametrization_misfit": lhs,
                "deviation_norm": rhs,
                "ratio_misfit_over_deviation": lhs / rhs,
                "center_norm": float(np.linalg.norm(center.center)),
                "perimeter_scale": scale,
                "convex_margin": margin,
                "center_converged": center.converged,
            }
        )
    assertions = []
    fit_lhs = fit_constant(records, "eps", "parametrization_misfit")
    fit_rhs = fit_constant(records, "eps", "deviation_norm")
    assertions.append(
        Assertion(
            "main-estimate/misfit-slope",
            abs(fit_lhs.slope - 1.0) <= 0.1,
            f"parametrization misfit scales with slope {fit_lhs.slope:.3f} "
            f"in eps (target 1 +- 0.1, r^2 {fit_lhs.r_squared:.4f})",
        )
    )
    assertions.append(
        Assertion(
            "main-estimate/deviation-slope",
            abs(fit_rhs.slope - 1.0) <= 0.1,
            f"curvature deviation scales with slope {fit_rhs.slope:.3f} "
            f"in eps (target 1 +- 0.1, r^2 {fit_rhs.r_squared:.4f})",
        )
    )
    ratios = [r["ratio_misfit_over_deviation"] for r in records]
    assertions.append(
        Assertion(
            "main-estimate/ratio-bounded",
            max(ratios) / min(ratios) <= 2.5 and np.isfinite(max(ratios)),
            f"misfit/deviation ratio inside [{min(ratios):.3f}, "
            f"{max(ratios):.3f}] over the eps ladder (spread factor <= 2.5)",
        )
    )
    assertions.append(
        Assertion(
            "main-estimate/centering-converged",
            all(r["center_converged"] for r in records),
            "the damped fixed-point centering converged at every sweep point",
        )
    )
    plot = (
        "eps",
        ["parametrization_misfit", "deviation_norm"],
        "quantitative estimate sides",
    )
    return records, assertions, plot


def _run_linearization(config: ExperimentConfig):
    F = _build_integrand(config)
    res = config.resolutions[-1]
    W = build_wulff(F, make_grid(config.n, res))
    op = StabilityOperator(W)
    eye = np.eye(config.n)

    def residual_for(u0, eps):
        Lt = op.apply_tensor(u0)
        surf = build_surface(WulffGraphChart(W, eps * u0))
        an = aniso_shape_operator(surf, F)
        data = an.S.data - eye + eps * Lt.data
        return _tensor_lp(W, data, "ud", config.p)

    records = []
    mode = _normalized_mode_field(W.grid, _modes(config))
    for eps in config.eps_ladder:
        records.append(
            {
                "kind": "mode",
                "eps": eps,
                "residual_lp": residual_for(mode, eps),
                "height_sobolev": w2p_norm(W, eps * mode, config.p),
            }
        )
    is_isotropic = str(config.integrand.get("family", "")).replace("-", "_") in (
        "constant_one",
        "",
    )
    if is_isotropic:
        direction = np.array([0.6, -0.3, 0.5, 0.2][: config.n + 1])
        direction = direction / np.linalg.norm(direction)
        trans = W.grid.nodes @ direction
        for eps in config.eps_ladder:
            records.append(
                {
                    "kind": "translation",
                    "eps": eps,
                    "residual_lp": residual_for(trans, eps),
                    "height_sobolev": w2p_norm(W, eps * trans, config.p),
                }
            )
    assertions = []
    fit_mode = fit_constant(
        [r for r in records if r["kind"] == "mode"], "eps", "residual_lp"
    )
    assertions.append(
        Assertion(
            "linearization/mode-slope",
            fit_mode.slope >= 1.4,
            f"residual slope {fit_mode.slope:.2f} in eps for the mode family "
            f"(threshold 1.4, r^2 {fit_mode.r_squared:.4f})",
        )
    )
    if is_isotropic:
        fit_trans = fit_constant(
            [r for r in records if r["kind"] == "translation"],
            "eps",
            "residual_lp",
        )
        assertions.append(
            Assertion(
                "linearization/translation-slope",
                fit_trans.slope >= 1.9,
                f"residual slope {fit_trans.slope:.2f} in eps for translation "
                f"heights (threshold 1.9, r^2 {fit_trans.r_squared:.4f})",
            )
        )
    plot = ("eps", ["residual_lp", "height_sobolev"], "linearization residual")
    return records, assertions, plot


def _run_expansion(config: ExperimentConfig):
    F = _build_integrand(config)
    res = config.resolutions[-1]
    W = build_wulff(F, make_grid(config.n, res))
    mode = _normalized_mode_field(W.grid, _modes(config))
    records = []
    for eps in config.eps_ladder:
        report = expansion_check(W, eps * mode)
        for name, entry in report.items():
            driver = entry["driver_sup"]
            records.append(
                {
                    "eps": eps,
                    "check": name,
                    "lhs_sup": entry["residual_sup"],
                    "driver_sup": driver,
                    "sqrt_ratio": entry["residual_sup"]
                    / (np.sqrt(eps) * driver),
                    "quadratic_ratio": entry["ratio"],
                }
            )
    assertions = []
    checks = sorted({r["check"] for r in records})
    for name in checks:
        rows = [r for r in records if r["check"] == name]
        rows.sort(key=lambda r: -r["eps"])
        ratios = [r["sqrt_ratio"] for r in rows]
        calibrated = 2.0 * max(ratios)
        holds = all(
            r["lhs_sup"] <= calibrated * np.sqrt(r["eps"]) * r["driver_sup"]
            for r in rows
        )
        assertions.append(
            Assertion(
                f"expansion/{name}/calibrated-bound",
                holds,
                f"lhs <= C sqrt(eps) driver with calibrated C = "
                f"{calibrated:.3e} (safety factor 2 over the pilot ladder)",
            )
        )
        monotone = all(
            ratios[i + 1] <= 1.1 * ratios[i] for i in range(len(ratios) - 1)
        )
        assertions.append(
            Assertion(
                f"expansion/{name}/ratio-non-increasing",
                monotone,
                "lhs/(sqrt(eps) driver) along decreasing eps: "
                + " -> ".join(f"{v:.3e}" for v in ratios)
                + " (10% noise allowed)",
            )
        )
    plot = ("eps", ["sqrt_ratio"], "expansion remainder ratios")
    return records, assertions, plot


def _run_centering(config: ExperimentConfig):
    F = _build_integrand(config)
    res = config.resolutions[-1]
    W = build_wulff(F, make_grid(config.n, res))
    mode = _normalized_mode_field(W.grid, _modes(config))
    rng = config.rng()
    direction = rng.standard_normal(config.n + 1)
    direction /= np.linalg.norm(direction)

    # pure translation recovery
    shift = 0.05 * W.diameter * direction
    translated = build_surface(WulffGraphChart(W, 0.0, center=shift))
    recovered = find_center(translated, W)
    recovery_err = float(np.linalg.norm(recovered.center - shift))

    records = [
        {
            "kind": "translation_recovery",
            "eps": 0.0,
            "value": recovery_err,
            "extra": float(np.linalg.norm(shift)),
        }
    ]
    for eps in config.eps_ladder:
        surf = build_surface(WulffGraphChart(W, eps * mode))
        phi0 = centering_map(surf, W, np.zeros(config.n + 1))
        c = 0.5 * eps * direction
        phic = centering_map(surf, W, c)
        residual = float(np.linalg.norm(phic - phi0 + c))
        center = find_center(surf, W)
        records.append(
            {
                "kind": "linearisation",
                "eps": eps,
                "value": residual,
                "extra": float(center.residual),
            }
        )
    assertions = [
        Assertion(
            "centering/translation-recovery",
            recovery_err <= 1e-6,
            f"recovered a pure translation to {recovery_err:.3e} "
            "(threshold 1e-6)",
        )
    ]
    lin = [r for r in records if r["kind"] == "linearisation"]
    fit = fit_constant(lin, "eps", "value")
    assertions.append(
        Assertion(
            "centering/linearisation-slope",
            fit.slope >= 1.4,
            f"||Phi(c) - Phi(0) + c|| scales with slope {fit.slope:.2f} "
            f"(threshold 1.4, r^2 {fit.r_squared:.4f})",
        )
    )
    worst_proj = max(r["extra"] for r in lin)
    assertions.append(
        Assertion(
            "centering/kernel-projection-after-centering",
            worst_proj <= 1e-8,
            f"max kernel projection after centering {worst_proj:.3e} "
            "(threshold 1e-8)",
        )
    )
    plot = ("eps", ["value"], "centering-map linearisation")
    return records, assertions, plot


def _ellipsoid_radius(grid, t: float, n: int) -> np.ndarray:
    axes = np.ones(n + 1)
    axes[-1] += t
    if n == 2:
        axes[1] += 0.5 * t
    quad = np.einsum("...d,d->...", grid.nodes ** 2, 1.0 / axes ** 2)
    return 1.0 / np.sqrt(quad)


def _run_fmp(config: ExperimentConfig):
    if len(config.resolutions) < 2:
        raise ConfigError("the fmp sweep compares two resolutions")
    F = _build_integrand(config)
    records = []
    for res in config.resolutions:
        grid = make_grid(config.n, res)
        wb = wulff_star_body(F, grid)
        mode = _normalized_mode_field(grid, _modes(config))
        families = {"perturbation": [], "eccentricity": []}
        for t in config.eps_ladder:
            families["perturbation"].append(
                (t, StarBody(grid, wb.radius * (1.0 + t * mode)))
            )
            families["eccentricity"].append(
                (t, StarBody(grid, wb.radius * _ellipsoid_radius(grid, t, config.n)))
            )
        for fam, bodies in families.items():
            for t, body in bodies:
                A = asymmetry_index(body, F)
                delta = isoperimetric_deficit(body, F)
                ratio = A / np.sqrt(delta) if delta > 0 else float("nan")
                records.append(
                    {
                        "family-id": fam,
                        "t": t,
                        "A": A,
                        "delta": delta,
                        "ratio": ratio,
                        "resolution": res,
                    }
                )
    # the minimizer itself, at the finest resolution only
    grid = make_grid(config.n, config.resolutions[-1])
    wb = wulff_star_body(F, grid)
    records.append(
        {
            "family-id": "wulff",
            "t": 0.0,
            "A": asymmetry_index(wb, F),
            "delta": isoperimetric_deficit(wb, F),
            "ratio": float("nan"),
            "resolution": config.resolutions[-1],
        }
    )
    assertions = []
    wrow = records[-1]
    assertions.append(
        Assertion(
            "fmp/minimizer-asymmetry",
            wrow["A"] <= 1e-6,
            f"asymmetry of the minimizer {wrow['A']:.3e} (threshold 1e-6)",
        )
    )
    assertions.append(
        Assertion(
            "fmp/minimizer-deficit",
            abs(wrow["delta"]) <= 1e-6,
            f"deficit of the minimizer {wrow['delta']:.3e} (threshold 1e-6)",
        )
    )
    sweep = [r for r in records if r["family-id"] != "wulff"]
    assertions.append(
        Assertion(
            "fmp/deficit-positive",
            all(r["delta"] > 0 for r in sweep),
            "every perturbed body has positive deficit",
        )
    )
    maxima = {
        res: max(
            r["ratio"]
            for r in sweep
            if r["resolution"] == res and np.isfinite(r["ratio"])
        )
        for res in config.resolutions
    }
    lo = maxima[config.resolutions[0]]
    hi = maxima[config.resolutions[-1]]
    assertions.append(
        Assertion(
            "fmp/ratio-stability",
            np.isfinite(lo) and np.isfinite(hi) and abs(hi - lo) <= 0.2 * lo,
            f"max A/sqrt(delta) = {lo:.3f} vs {hi:.3f} across resolutions "
            f"{config.resolutions[0]}/{config.resolutions[-1]} "
            "(drift <= 20%)",
        )
    )
    plot = ("delta", ["A"], "asymmetry vs deficit")
    return records, assertions, plot


def _run_qualitative(config: ExperimentConfig):
    F = _build_integrand(config)
    res = config.resolutions[-1]
    W = build_wulff(F, make_grid(config.n, res))
    mode = _normalized_mode_field(W.grid, _modes(config))
    records = []
    for eps in config.eps_ladder:
        surf = build_surface(WulffGraphChart(W, eps * mode))
        convex, margin = convexity_check(surf)
        scaled, _ = rescale_to_perimeter(surf, W.perimeter)
        an = aniso_shape_operator(scaled, F)
        center = find_center(scaled, W)
        matched = build_surface(WulffGraphChart(W, 0.0, center=center.center))
        dist = hausdorff_distance(scaled, matched)
        sup_u, sup_grad = c1_closeness_check(scaled, W, 2.0 * eps)
        records.append(
            {
                "eps": eps,
                "deviation_norm": an.s0_lp(config.p),
                "hausdorff_to_matched": dist,
                "sup_height": sup_u,
                "sup_gradient": sup_grad,
                "gradient_over_sqrt_eps": sup_grad / np.sqrt(eps),
                "convex_margin": margin,
                "convex": convex,
            }
        )
    assertions = []
    assertions.append(
        Assertion(
            "qualitative/all-convex",
            all(r["convex"] for r in records),
            "every sweep surface is convex",
        )
    )
    dists = [r["hausdorff_to_matched"] for r in records]
    assertions.append(
        Assertion(
            "qualitative/hausdorff-decreasing",
            all(b < a for a, b in zip(dists, dists[1:])),
            "hausdorff distance to the matched minimizer decreases along "
            "the ladder: " + " -> ".join(f"{d:.3e}" for d in dists),
        )
    )
    grads = [r["gradient_over_sqrt_eps"] for r in records]
    assertions.append(
        Assertion(
            "qualitative/c1-ratio-non-increasing",
            all(b <= 1.1 * a for a, b in zip(grads, grads[1:])),
            "sup|grad u|/sqrt(eps) along decreasing eps: "
            + " -> ".join(f"{v:.3e}" for v in grads)
            + " (10% noise allowed)",
        )
    )
    plot = (
        "eps",
        ["hausdorff_to_matched", "deviation_norm"],
        "qualitative closeness",
    )
    return records, assertions, plot


_RUNNERS: dict = {
    "rigidity": _run_rigidity,
    "kernel": _run_kernel,
    "oscillation": _run_oscillation,
    "main_estimate": _run_main_estimate,
    "linearization": _run_linearization,
    "expansion": _run_expansion,
    "centering": _run_centering,
    "fmp": _run_fmp,
    "qualitative": _run_qualitative,
}


# ---------------------------------------------------------------------------
# deterministic reports
# ---------------------------------------------------------------------------


def _format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12e}"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def write_records_csv(path, config: ExperimentConfig, records) -> None:
    """Write sweep records with a self-describing, byte-stable layout."""
    columns = sorted({key for rec in records for key in rec})
    rows = [[_format_cell(rec.get(col, "")) for col in columns] for rec in records]
    rows.sort()
    buf = io.StringIO()
    buf.write("# wulff-lab experiment table\n")
    buf.write(
        "# config: "
        + json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
        + "\n"
    )
    buf.write(f"# rng: {config.rng_name()}\n")
    buf.write(f"# norms: {NORM_CONVENTION}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    writer.writerows(rows)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def write_loglog_svg(path, records, x_col: str, y_cols, title: str) -> None:
    """Standalone log-log SVG plot of the named columns."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "wulff-lab"
    fig, ax = plt.subplots(figsize=(5.0, 3.6), constrained_layout=True)
    for y_col in y_cols:
        pts = [
            (float(r[x_col]), float(r[y_col]))
            for r in records
            if x_col in r and y_col in r
        ]
        pts = [(x, y) for x, y in pts if x > 0 and y > 0 and np.isfinite(x * y)]
        if not pts:
            continue
        pts.sort()
        xs, ys = zip(*pts)
        ax.loglog(xs, ys, marker="o", markersize=3.5, linewidth=1.0, label=y_col)
    ax.set_xlabel(x_col)
    ax.set_title(title)
    ax.grid(True, which="both", linewidth=0.3, alpha=0.5)
    ax.legend(fontsize=7)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def export_wulff_obj(wulff, path) -> None:
    """Write the shape's boundary mesh as a Wavefront OBJ file.

    Surfaces (n = 2) become a quad-dominant mesh with triangle fans closing
    the two polar caps; curves (n = 1) become a closed polyline.
    """
    lines = ["# wulff-lab shape export"]
    if wulff.n == 1:
        for x, y in wulff.positions:
            lines.append(f"v {x:.9e} {y:.9e} 0.0")
        count = wulff.positions.shape[0]
        loop = " ".join(str(i + 1) for i in range(count))
        lines.append(f"l {loop} 1")
    else:
        nlat, nlon = wulff.grid.shape
        for ring in wulff.positions.reshape(-1, 3):
            lines.append(f"v {ring[0]:.9e} {ring[1]:.9e} {ring[2]:.9e}")
        poles = wulff.integrand.xi(
            np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])
        )
        for pole in poles:
            lines.append(f"v {pole[0]:.9e} {pole[1]:.9e} {pole[2]:.9e}")
        north, south = nlat * nlon + 1, nlat * nlon + 2

        def vid(i, j):
            return i * nlon + (j % nlon) + 1

        for j in range(nlon):
            lines.append(f"f {north} {vid(0, j)} {vid(0, j + 1)}")
        for i in range(nlat - 1):
            for j in range(nlon):
                lines.append(
                    "f "
                    f"{vid(i, j)} {vid(i + 1, j)} "
                    f"{vid(i + 1, j + 1)} {vid(i, j + 1)}"
                )
        for j in range(nlon):
            lines.append(f"f {south} {vid(nlat - 1, j + 1)} {vid(nlat - 1, j)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def run_experiment(config: ExperimentConfig, out_dir=None) -> ExperimentResult:
    """Run one configured sweep and write its CSV, SVG, and summary files.

    Deterministic for a fixed config: the seed feeds a named 64-bit
    generator and the CSV layout is byte-stable.  The result carries every
    record and assertion; ``result.passed`` mirrors the CLI exit status.
    """
    runner = _RUNNERS[config.experiment]
    records, assertions, plot = runner(config)
    result = ExperimentResult(config=config, records=records, assertions=assertions)
    target = out_dir if out_dir is not None else config.out_dir
    if target is not None:
        target = Path(target)
        target.mkdir(parents=True, exist_ok=True)
        stem = config.experiment
        result.csv_path = str(target / f"{stem}.csv")
        write_records_csv(result.csv_path, config, records)
        x_col, y_cols, title = plot
        result.svg_path = str(target / f"{stem}.svg")
        write_loglog_svg(result.svg_path, records, x_col, y_cols, title)
        result.summary_path = str(target / f"{stem}_summary.txt")
        Path(result.summary_path).write_text(
            "\n".join(result.summary_lines()) + "\n", encoding="utf-8"
        )
    return result
