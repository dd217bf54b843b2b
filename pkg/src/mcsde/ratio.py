"""Specular/diffuse variance-ratio lower bound via hemisphere quadrature.

Under uniform hemisphere sampling with the incoming light separated out as
a constant, the per-sample specular variance is (L/(4 cos_o))^2 (2 pi J - I^2)
with I and J the first and second moments of the microfacet product over
the hemisphere, while the diffuse variance is bounded above by
(1 - m) c^2 L^2 / 3.  Their quotient

    3 / ((1 - m) (4 c cos_o)^2) * (2 pi J - I^2)

is a lower bound on the true specular/diffuse variance ratio; it diverges
as roughness -> 0 (J blows up while I stays finite) and as metallic -> 1.

The analysis is scalar: materials enter through the luminance of their
base reflectance, and metallic enters *only* through the (1 - m) factor,
matching the derivation rather than the renderer's metallic workflow.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .pathtracer.brdf import specular_dfg
from .pathtracer.material import Material
from .pathtracer.render import primary_hit_ids, render
from .pathtracer.scene import Scene

LUMA = np.array([0.2126, 0.7152, 0.0722])

GRID_CAP = (512, 1024)
_Z = np.array([0.0, 0.0, 1.0])


def luminance(rgb) -> float:
    return float(np.dot(np.asarray(rgb, dtype=np.float64), LUMA))


@dataclass(frozen=True)
class QuadratureGrid:
    """Product rule over the hemisphere: Gauss-Legendre in cos(theta),
    periodic trapezoid in phi, solid-angle measure."""

    n_theta: int
    n_phi: int
    directions: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        total = float(np.sum(self.weights))
        if abs(total - 2.0 * np.pi) > 1e-6 * 2.0 * np.pi:
            raise ValidationError(f"weights must sum to 2 pi, got {total}")


def make_grid(n_theta: int = 32, n_phi: int = 64) -> QuadratureGrid:
    if n_theta < 2 or n_phi < 2:
        raise ValidationError("grid needs at least 2 nodes per axis")
    x, w = np.polynomial.legendre.leggauss(n_theta)
    cos_t = (x + 1.0) / 2.0
    w_cos = w / 2.0
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    w_phi = 2.0 * np.pi / n_phi
    sin_t = np.sqrt(1.0 - cos_t**2)
    dirs = np.stack(
        [
            np.outer(sin_t, np.cos(phi)),
            np.outer(sin_t, np.sin(phi)),
            np.outer(cos_t, np.ones_like(phi)),
        ],
        axis=-1,
    ).reshape(-1, 3)
    weights = (np.outer(w_cos, np.full(n_phi, w_phi))).reshape(-1)
    return QuadratureGrid(n_theta=n_theta, n_phi=n_phi, directions=dirs, weights=weights)


def grid_integrate(grid: QuadratureGrid, values: np.ndarray) -> float:
    return float(np.sum(grid.weights * np.asarray(values, dtype=np.float64)))


def dfg(material: Material, wo, wi, n=_Z) -> np.ndarray | float:
    """Scalar microfacet product D*F*G at luminance-channel base reflectance.

    Metallic deliberately does not modulate the Fresnel term here; the ratio
    analysis keeps metallic in the (1 - m) prefactor only.
    """
    wo = np.asarray(wo, dtype=np.float64)
    wi = np.asarray(wi, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    if np.any(np.sum(n * wo, axis=-1) <= 0.0) or np.any(np.sum(n * wi, axis=-1) <= 0.0):
        raise ValidationError("dfg requires wo and wi above the hemisphere")
    f0_lum = luminance(material.f0)
    out = specular_dfg(material.roughness, f0_lum, material.geometry_k, n, wo, wi)
    return float(out) if np.ndim(out) == 0 else out


def integrate_I_J(material: Material, wo, grid: QuadratureGrid) -> tuple[float, float]:
    """First and second hemisphere moments of the microfacet product."""
    vals = dfg(material, np.asarray(wo, dtype=np.float64), grid.directions)
    i_val = grid_integrate(grid, vals)
    j_val = grid_integrate(grid, vals * vals)
    return i_val, j_val


@dataclass(frozen=True)
class IJResult:
    integral_i: float
    integral_j: float
    converged: bool
    rel_delta: float
    n_theta: int
    n_phi: int


def integrate_I_J_converged(
    material: Material,
    wo,
    start: tuple[int, int] = (32, 64),
    tol: float = 0.01,
    fail_tol: float = 0.05,
    cap: tuple[int, int] = GRID_CAP,
) -> IJResult:
    """Grid-doubling refinement until I and J move by less than ``tol``.

    Stops at the resolution cap; a final move above ``fail_tol`` marks the
    result as not converged (callers decide whether that is fatal).
    """
    n_theta, n_phi = start
    grid = make_grid(n_theta, n_phi)
    i_prev, j_prev = integrate_I_J(material, wo, grid)
    rel = np.inf
    while True:
        if n_theta >= cap[0] or n_phi >= cap[1]:
            break
        n_theta, n_phi = min(2 * n_theta, cap[0]), min(2 * n_phi, cap[1])
        grid = make_grid(n_theta, n_phi)
        i_new, j_new = integrate_I_J(material, wo, grid)
        rel = max(
            abs(i_new - i_prev) / max(abs(i_new), 1e-300),
            abs(j_new - j_prev) / max(abs(j_new), 1e-300),
        )
        i_prev, j_prev = i_new, j_new
        if rel < tol:
            break
    return IJResult(
        integral_i=i_prev,
        integral_j=j_prev,
        converged=bool(rel < fail_tol),
        rel_delta=float(rel),
        n_theta=n_theta,
        n_phi=n_phi,
    )


def sigma_d_bound_sq(metallic: float, albedo_lum: float, radiance: float) -> float:
    """Diffuse variance upper bound (1 - m) c^2 L^2 / 3; zero at m = 1."""
    if not (0.0 <= metallic <= 1.0):
        raise ValidationError(f"metallic must lie in [0, 1], got {metallic}")
    if albedo_lum <= 0.0 or radiance <= 0.0:
        raise ValidationError("albedo luminance and radiance must be positive")
    return (1.0 - metallic) * albedo_lum**2 * radiance**2 / 3.0


def ratio_bound_from_integrals(
    integral_i: float, integral_j: float, metallic: float, albedo_lum: float,
    cos_theta_o: float,
) -> float:
    """Assemble 3 ((2 pi J - I^2)) / ((1 - m)(4 c cos_o)^2)."""
    if metallic >= 1.0:
        raise ValidationError("ratio bound undefined at metallic = 1 (zero diffuse bound)")
    if cos_theta_o <= 1e-6:
        raise ValidationError("grazing view: cos_theta_o must exceed 1e-6")
    spread = 2.0 * np.pi * integral_j - integral_i**2
    return 3.0 * spread / ((1.0 - metallic) * (4.0 * albedo_lum * cos_theta_o) ** 2)


@dataclass(frozen=True)
class RatioReport:
    alpha: float
    metallic: float
    cos_theta_o: float
    integral_i: float
    integral_j: float
    sigma_d_bound_sq: float
    ratio_lower_bound: float
    converged: bool


def ratio_lower_bound(material: Material, wo, l_c: float = 1.0,
                      grid: QuadratureGrid | None = None) -> RatioReport:
    """Variance-ratio lower bound for one material and view direction."""
    wo = np.asarray(wo, dtype=np.float64)
    cos_o = float(np.dot(wo, _Z))
    if material.metallic >= 1.0:
        raise ValidationError("ratio bound undefined at metallic = 1 (zero diffuse bound)")
    if cos_o <= 1e-6:
        raise ValidationError("grazing view: cos_theta_o must exceed 1e-6")
    if grid is not None:
        i_val, j_val = integrate_I_J(material, wo, grid)
        converged = True
    else:
        res = integrate_I_J_converged(material, wo)
        i_val, j_val, converged = res.integral_i, res.integral_j, res.converged
    c_lum = luminance(material.albedo)
    bound = ratio_bound_from_integrals(i_val, j_val, material.metallic, c_lum, cos_o)
    return RatioReport(
        alpha=material.roughness,
        metallic=material.metallic,
        cos_theta_o=cos_o,
        integral_i=i_val,
        integral_j=j_val,
        sigma_d_bound_sq=sigma_d_bound_sq(material.metallic, c_lum, l_c)
        if material.metallic < 1.0
        else 0.0,
        ratio_lower_bound=bound,
        converged=converged,
    )


def sweep_ratio(alphas, metallics, cos_theta_o: float, f0: float = 0.04,
                albedo: float = 1.0, l_c: float = 1.0) -> list[RatioReport]:
    """Cartesian sweep of the ratio bound over roughness and metallic."""
    sin_o = float(np.sqrt(max(0.0, 1.0 - cos_theta_o**2)))
    wo = np.array([sin_o, 0.0, cos_theta_o])
    reports = []
    for alpha in alphas:
        if alpha < 0.01:
            raise ValidationError(f"alpha floor is 0.01, got {alpha}")
        for metallic in metallics:
            mat = Material(
                albedo=np.full(3, albedo), roughness=float(alpha),
                metallic=float(metallic), f0=np.full(3, f0),
            )
            reports.append(ratio_lower_bound(mat, wo, l_c=l_c))
    return reports


def write_sweep_csv(path, reports) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["alpha", "metallic", "cos_theta_o", "I", "J",
             "sigma_d_bound_sq", "ratio_bound", "converged"]
        )
        for r in reports:
            writer.writerow(
                [repr(r.alpha), repr(r.metallic), repr(r.cos_theta_o),
                 repr(r.integral_i), repr(r.integral_j),
                 repr(r.sigma_d_bound_sq), repr(r.ratio_lower_bound),
                 int(r.converged)]
            )


@dataclass(frozen=True)
class CrosscheckReport:
    """Measured renderer statistics against the analytic direction."""

    n_pixels: int
    fraction_specular_dominant: float
    median_ratio: float
    spp: int
    seed: int
    var_d_sum: np.ndarray
    var_s_sum: np.ndarray
    pixel_xy: np.ndarray


def default_glossy_predicate(material: Material) -> bool:
    return material.roughness <= 0.3 or material.metallic >= 0.5


def crosscheck_renderer(scene: Scene, spp: int, seed: int, predicate=None) -> CrosscheckReport:
    """Render and measure where specular variance beats the diffuse one.

    Only the ordering is compared against the analytic bound: the measured
    ratio uses the true diffuse variance while the bound divides by its
    upper bound, so magnitudes are not comparable.
    """
    predicate = predicate or default_glossy_predicate
    qualifying = {
        i for i, obj in enumerate(scene.objects)
        if predicate(scene.materials[obj.material])
    }
    if not qualifying:
        raise ValidationError("scene has no object matching the glossy predicate")
    _, stats = render(scene, spp=spp, rng_seed=seed)
    ids = primary_hit_ids(scene)
    mask = np.isin(ids, sorted(qualifying))
    ys, xs = np.nonzero(mask)
    var_d = stats.var_d[mask].sum(axis=-1)
    var_s = stats.var_s[mask].sum(axis=-1)
    dominant = var_s > var_d
    positive = var_d > 0.0
    median_ratio = float(np.median(var_s[positive] / var_d[positive])) if positive.any() else 0.0
    return CrosscheckReport(
        n_pixels=int(mask.sum()),
        fraction_specular_dominant=float(np.mean(dominant)) if dominant.size else 0.0,
        median_ratio=median_ratio,
        spp=spp,
        seed=seed,
        var_d_sum=var_d,
        var_s_sum=var_s,
        pixel_xy=np.stack([xs, ys], axis=-1),
    )


def write_crosscheck_csv(path, report: CrosscheckReport) -> None:
    """Per-pixel rows plus one trailing summary row."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "y", "var_d_sum", "var_s_sum", "specular_dominant"])
        for (x, y), vd, vs in zip(report.pixel_xy, report.var_d_sum, report.var_s_sum):
            writer.writerow([int(x), int(y), repr(float(vd)), repr(float(vs)), int(vs > vd)])
        writer.writerow(
            ["summary", report.n_pixels,
             repr(report.fraction_specular_dominant), repr(report.median_ratio), ""]
        )
