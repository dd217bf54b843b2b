"""Monte Carlo rendering with a separated diffuse/specular first bounce.

Each path samples one uniform-hemisphere direction per bounce; the first
bounce evaluates both BRDF lobes on the *same* sampled direction, so the
per-path diffuse and specular contributions share a common noise source and
their cross-covariance is meaningful.  Radiance from deeper bounces is
folded, unsplit, into the incoming radiance of the first bounce.

Reproducibility: every random draw is keyed by
(seed, pixel index, sample index, bounce, draw), so the result is a pure
function of (scene, spp, seed) no matter how pixels are chunked across
worker threads.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..errors import ValidationError
from ..rng import CounterRng
from .brdf import direction_from_uniforms, fresnel_schlick, specular_dfg
from .scene import Plane, Scene, Sphere
from .stats import PixelStats
from .vecmath import dot, normalize

_T_MIN = 1e-6
_COS_FLOOR = 1e-6
_SAMPLE_BLOCK = 32


@dataclass(frozen=True)
class PathSample:
    """Camera-bound radiance of one path, split at the first bounce."""

    f_diffuse: np.ndarray
    f_specular: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.f_diffuse + self.f_specular


class _CompiledScene:
    """Scene flattened into arrays for batched intersection and shading."""

    def __init__(self, scene: Scene):
        self.scene = scene
        spheres = [o for o in scene.objects if isinstance(o, Sphere)]
        planes = [o for o in scene.objects if isinstance(o, Plane)]
        self.sph_center = np.array([s.center for s in spheres]).reshape(-1, 3)
        self.sph_radius = np.array([s.radius for s in spheres])
        self.pln_point = np.array([p.point for p in planes]).reshape(-1, 3)
        self.pln_normal = np.array([p.normal for p in planes]).reshape(-1, 3)
        obj_index = {id(o): i for i, o in enumerate(scene.objects)}
        self.sph_obj = np.array([obj_index[id(s)] for s in spheres], dtype=np.int64)
        self.pln_obj = np.array([obj_index[id(p)] for p in planes], dtype=np.int64)

        mats = [scene.materials[o.material] for o in scene.objects]
        self.albedo = np.array([m.albedo for m in mats]).reshape(-1, 3)
        self.roughness = np.array([m.roughness for m in mats])
        self.metallic = np.array([m.metallic for m in mats])
        self.f0_eff = np.array([m.effective_f0 for m in mats]).reshape(-1, 3)
        self.kgeom = np.array([m.geometry_k for m in mats])
        self.spec_on = np.array([np.any(m.effective_f0 > 0.0) for m in mats], dtype=bool)

    def intersect(self, origins: np.ndarray, dirs: np.ndarray):
        """Nearest hit per ray: (t, object index or -1, point, shading normal)."""
        m = origins.shape[0]
        best_t = np.full(m, np.inf)
        best_obj = np.full(m, -1, dtype=np.int64)
        best_n = np.zeros((m, 3))

        if len(self.sph_radius):
            oc = origins[:, None, :] - self.sph_center[None, :, :]
            b = np.sum(oc * dirs[:, None, :], axis=-1)
            c = np.sum(oc * oc, axis=-1) - self.sph_radius[None, :] ** 2
            disc = b * b - c
            ok = disc >= 0.0
            sq = np.sqrt(np.where(ok, disc, 0.0))
            t_near = -b - sq
            t_far = -b + sq
            t = np.where(t_near > _T_MIN, t_near, t_far)
            t = np.where(ok & (t > _T_MIN), t, np.inf)
            j = np.argmin(t, axis=1)
            rows = np.arange(m)
            t_best = t[rows, j]
            upd = t_best < best_t
            best_t = np.where(upd, t_best, best_t)
            best_obj = np.where(upd, self.sph_obj[j], best_obj)
            t_fin = np.where(np.isfinite(t_best), t_best, 0.0)
            pts = origins + t_fin[:, None] * dirs
            n_sph = (pts - self.sph_center[j]) / self.sph_radius[j][:, None]
            best_n = np.where(upd[:, None], n_sph, best_n)

        if len(self.pln_obj):
            denom = dirs @ self.pln_normal.T
            num = np.sum(
                (self.pln_point[None, :, :] - origins[:, None, :]) * self.pln_normal[None, :, :],
                axis=-1,
            )
            with np.errstate(divide="ignore", invalid="ignore"):
                t = num / denom
            t = np.where((np.abs(denom) > 1e-12) & (t > _T_MIN), t, np.inf)
            j = np.argmin(t, axis=1)
            rows = np.arange(m)
            t_best = t[rows, j]
            upd = t_best < best_t
            best_t = np.where(upd, t_best, best_t)
            best_obj = np.where(upd, self.pln_obj[j], best_obj)
            best_n = np.where(upd[:, None], self.pln_normal[j], best_n)

        pts = origins + np.where(np.isfinite(best_t), best_t, 0.0)[:, None] * dirs
        # shading normal faces the incoming ray
        flip = np.sign(-np.sum(best_n * dirs, axis=-1))
        flip = np.where(flip == 0.0, 1.0, flip)
        return best_t, best_obj, pts, best_n * flip[:, None]

    def eval_brdf(self, obj: np.ndarray, n, wo, wi):
        """Split BRDF for per-ray object indices; returns (f_d, f_s), each (m, 3)."""
        alb = self.albedo[obj]
        met = self.metallic[obj][:, None]
        f0 = self.f0_eff[obj]
        h = normalize(wo + wi)
        fres = fresnel_schlick(f0, dot(h, wo)[:, None])
        f_d = (1.0 - fres) * (1.0 - met) * alb / np.pi
        denom = 4.0 * np.maximum(dot(n, wo), _COS_FLOOR) * np.maximum(dot(n, wi), _COS_FLOOR)
        dfg = specular_dfg(self.roughness[obj], f0, self.kgeom[obj], n, wo, wi)
        f_s = np.where(self.spec_on[obj][:, None], dfg / denom[:, None], 0.0)
        return f_d, f_s


def _incoming_radiance(comp, origins, dirs, rng, pix, samp, scatters_left, bounce0):
    """Radiance arriving along dirs, tracing up to scatters_left more bounces."""
    m = origins.shape[0]
    radiance = np.zeros((m, 3))
    throughput = np.ones((m, 3))
    active = np.ones(m, dtype=bool)
    cur_o = origins.copy()
    cur_d = dirs.copy()
    bounce = bounce0
    while np.any(active):
        idx = np.flatnonzero(active)
        t, obj, pts, nrm = comp.intersect(cur_o[idx], cur_d[idx])
        miss = obj < 0
        if np.any(miss):
            mi = idx[miss]
            radiance[mi] += throughput[mi] * comp.scene.environment.radiance_toward(cur_d[mi])
            active[mi] = False
        hit = ~miss
        if scatters_left <= 0:
            active[idx[hit]] = False
            continue
        if np.any(hit):
            hi = idx[hit]
            n = nrm[hit]
            wo = -cur_d[hi]
            u1 = rng.u01(pix[hi], samp[hi], bounce, 0)
            u2 = rng.u01(pix[hi], samp[hi], bounce, 1)
            wi = direction_from_uniforms(u1, u2, n)
            f_d, f_s = comp.eval_brdf(obj[hit], n, wo, wi)
            throughput[hi] *= (f_d + f_s) * (u1 * 2.0 * np.pi)[:, None]
            cur_o[hi] = pts[hit]
            cur_d[hi] = wi
        scatters_left -= 1
        bounce += 1
    return radiance


def _trace_batch(comp, origins, dirs, rng, pix, samp, max_depth):
    """Per-path split contributions for a batch of camera rays: (f_d, f_s)."""
    m = origins.shape[0]
    f_diffuse = np.zeros((m, 3))
    f_specular = np.zeros((m, 3))

    t, obj, pts, nrm = comp.intersect(origins, dirs)
    miss = obj < 0
    if np.any(miss):
        f_diffuse[miss] = comp.scene.environment.radiance_toward(dirs[miss])
    hit = ~miss
    if np.any(hit):
        hi = np.flatnonzero(hit)
        n = nrm[hit]
        wo = -dirs[hit]
        u1 = rng.u01(pix[hi], samp[hi], 0, 0)
        u2 = rng.u01(pix[hi], samp[hi], 0, 1)
        wi = direction_from_uniforms(u1, u2, n)
        f_d, f_s = comp.eval_brdf(obj[hit], n, wo, wi)
        li = _incoming_radiance(
            comp, pts[hit], wi, rng, pix[hi], samp[hi],
            scatters_left=max_depth - 1, bounce0=1,
        )
        weight = (u1 * 2.0 * np.pi)[:, None]  # cos(theta) / pdf
        f_diffuse[hi] = f_d * li * weight
        f_specular[hi] = f_s * li * weight
    return f_diffuse, f_specular


def trace_path(scene: Scene, origin, direction, rng: CounterRng, max_depth: int,
               pixel_index: int = 0, sample_index: int = 0) -> PathSample:
    """Trace a single path; the draw identity is (pixel_index, sample_index)."""
    if max_depth < 1:
        raise ValidationError("max_depth must be >= 1")
    comp = scene if isinstance(scene, _CompiledScene) else _CompiledScene(scene)
    o = np.asarray(origin, dtype=np.float64).reshape(1, 3)
    d = normalize(np.asarray(direction, dtype=np.float64).reshape(1, 3))
    f_d, f_s = _trace_batch(
        comp, o, d, rng,
        np.array([pixel_index], dtype=np.int64),
        np.array([sample_index], dtype=np.int64),
        max_depth,
    )
    return PathSample(f_diffuse=f_d[0], f_specular=f_s[0])


def primary_hit_ids(scene: Scene) -> np.ndarray:
    """Object index met by each camera ray (-1 for environment), shape (H, W)."""
    comp = _CompiledScene(scene)
    origins, dirs = scene.camera.primary_rays()
    _, obj, _, _ = comp.intersect(origins, dirs)
    return obj.reshape(scene.camera.height, scene.camera.width)


def _render_rows(comp, rng, rows, spp, max_depth):
    """Statistics for a contiguous row slab; pure function of its inputs."""
    scene = comp.scene
    w = scene.camera.width
    origins, dirs = scene.camera.primary_rays()
    row0, row1 = rows
    sel = slice(row0 * w, row1 * w)
    o = np.ascontiguousarray(origins[sel])
    d = np.ascontiguousarray(dirs[sel])
    pix = np.arange(row0 * w, row1 * w, dtype=np.int64)
    npx = o.shape[0]

    stats = PixelStats.zeros((npx,))
    for s0 in range(0, spp, _SAMPLE_BLOCK):
        s1 = min(s0 + _SAMPLE_BLOCK, spp)
        k = s1 - s0
        o_rep = np.repeat(o, k, axis=0)
        d_rep = np.repeat(d, k, axis=0)
        pix_rep = np.repeat(pix, k)
        samp_rep = np.tile(np.arange(s0, s1, dtype=np.int64), npx)
        f_d, f_s = _trace_batch(comp, o_rep, d_rep, rng, pix_rep, samp_rep, max_depth)
        block = PixelStats.from_samples(
            f_d.reshape(npx, k, 3).transpose(1, 0, 2),
            f_s.reshape(npx, k, 3).transpose(1, 0, 2),
        )
        stats = stats.merge(block)
    return stats


def render(scene: Scene, spp: int, rng_seed: int, max_depth: int = 2,
           threads: int | None = None):
    """Render the scene; returns (image, stats).

    image is linear radiance (H, W, 3) = stats.mean_d + stats.mean_s; stats
    is a PixelStats grid of shape (H, W).  Output is bit-identical for a
    fixed (scene, spp, rng_seed) at any thread count.
    """
    if spp < 1:
        raise ValidationError("spp must be >= 1")
    if scene.camera.width < 1 or scene.camera.height < 1:
        raise ValidationError("zero-dimension image rejected")
    if max_depth < 1:
        raise ValidationError("max_depth must be >= 1")
    comp = _CompiledScene(scene)
    rng = CounterRng(rng_seed)
    h, w = scene.camera.height, scene.camera.width

    n_workers = max(1, int(threads)) if threads else 1
    n_chunks = min(h, max(n_workers * 2, 1))
    bounds = np.linspace(0, h, n_chunks + 1, dtype=int)
    jobs = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]

    parts: list[PixelStats] = [None] * len(jobs)  # type: ignore[list-item]
    if n_workers == 1:
        for i, rows in enumerate(jobs):
            parts[i] = _render_rows(comp, rng, rows, spp, max_depth)
    else:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            futs = {pool.submit(_render_rows, comp, rng, rows, spp, max_depth): i
                    for i, rows in enumerate(jobs)}
            for fut, i in futs.items():
                parts[i] = fut.result()

    def cat(attr):
        return np.concatenate([getattr(p, attr) for p in parts], axis=0)

    stats = PixelStats(
        n=cat("n").reshape(h, w),
        mean_d=cat("mean_d").reshape(h, w, 3),
        mean_s=cat("mean_s").reshape(h, w, 3),
        m2_d=cat("m2_d").reshape(h, w, 3),
        m2_s=cat("m2_s").reshape(h, w, 3),
        c_ds=cat("c_ds").reshape(h, w, 3),
    )
    image = stats.mean_total
    return image, stats
