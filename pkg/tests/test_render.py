import math

import numpy as np
import pytest

from mcsde.errors import ValidationError
from mcsde.pathtracer import parse_scene, primary_hit_ids, render, trace_path
from mcsde.rng import CounterRng

from conftest import sphere_scene_text


def test_env_only_pixels_equal_environment(env_only_scene):
    img, stats = render(env_only_scene, spp=1, rng_seed=9)
    assert np.array_equal(img, np.full((6, 6, 3), 0.5))
    assert np.all(stats.mean_s == 0.0)
    assert np.all(stats.n == 1)


def test_miss_ray_returns_environment(diffuse_sphere_scene):
    sample = trace_path(
        diffuse_sphere_scene,
        origin=[0.0, 0.0, 4.0],
        direction=[0.0, 0.0, 1.0],
        rng=CounterRng(1),
        max_depth=2,
    )
    assert np.array_equal(sample.total, np.full(3, 0.5))
    assert np.all(sample.f_specular == 0.0)


def test_pure_lambert_scene_has_zero_specular(pure_lambert_scene):
    _, stats = render(pure_lambert_scene, spp=32, rng_seed=3)
    assert np.all(stats.mean_s == 0.0)
    assert np.all(stats.m2_s == 0.0)
    hits = primary_hit_ids(pure_lambert_scene) >= 0
    assert np.all(stats.mean_d[hits].sum(axis=-1) > 0.0)


def _oracle_radiance(albedo, roughness, metallic, f0, n, wo, l_env, n_cos=256, n_phi=512):
    """Deterministic quadrature of the reflection integral, transcribed
    independently of the production BRDF code."""
    alpha = roughness
    k = alpha * alpha / 2.0
    f0_eff = f0 * (1.0 - metallic) + albedo * metallic

    x, w = np.polynomial.legendre.leggauss(n_cos)
    cos_t = (x + 1.0) / 2.0
    w_cos = w / 2.0
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    w_phi = 2.0 * np.pi / n_phi

    # build a frame around n
    t = np.cross(n, [0.0, 1.0, 0.0])
    if np.linalg.norm(t) < 1e-8:
        t = np.cross(n, [1.0, 0.0, 0.0])
    t /= np.linalg.norm(t)
    b = np.cross(n, t)

    c_grid, p_grid = np.meshgrid(cos_t, phi, indexing="ij")
    s_grid = np.sqrt(1.0 - c_grid**2)
    wi = (
        s_grid[..., None] * np.cos(p_grid)[..., None] * t
        + s_grid[..., None] * np.sin(p_grid)[..., None] * b
        + c_grid[..., None] * n
    )
    h = wi + wo
    h /= np.linalg.norm(h, axis=-1, keepdims=True)
    nh = np.clip(h @ n, 0.0, 1.0)
    how = np.clip(np.sum(h * wo, axis=-1), 0.0, 1.0)
    ci = c_grid
    co = float(np.dot(n, wo))

    d_term = 4.0 * alpha**2 / (np.pi * ((alpha**2 - 1.0) * nh + 1.0) ** 2)
    fres = f0_eff + (1.0 - f0_eff) * (1.0 - how) ** 5
    g_term = (ci / (ci * (1.0 - k) + k)) * (co / (co * (1.0 - k) + k))
    f_s = fres * (d_term * g_term / (4.0 * co * np.maximum(ci, 1e-6)))
    f_d = (1.0 - fres) * (1.0 - metallic) * albedo / np.pi

    integrand = (f_d + f_s) * ci * l_env
    weights = w_cos[:, None] * w_phi
    return np.sum(integrand * weights)


@pytest.mark.parametrize("pixel", [(12, 12), (10, 14)])
def test_pixel_mean_matches_quadrature_oracle(diffuse_sphere_scene, pixel):
    scene = diffuse_sphere_scene
    img, _ = render(scene, spp=8192, rng_seed=21)
    y, x = pixel
    w = scene.camera.width
    origins, dirs = scene.camera.primary_rays()
    o = origins[y * w + x]
    d = dirs[y * w + x]
    # independent unit-sphere intersection
    b = float(np.dot(o, d))
    c = float(np.dot(o, o)) - 1.0
    disc = b * b - c
    assert disc > 0.0, "test pixel must hit the sphere"
    t_hit = -b - math.sqrt(disc)
    p = o + t_hit * d
    n = p / np.linalg.norm(p)
    wo = -d
    mat = scene.materials["main"]
    expected = _oracle_radiance(
        mat.albedo[0], mat.roughness, mat.metallic, mat.f0[0], n, wo, l_env=0.5
    )
    got = img[y, x, 0]
    assert abs(got - expected) <= 0.02 * expected


def test_bitwise_determinism_across_runs_and_threads(diffuse_sphere_scene):
    img1, st1 = render(diffuse_sphere_scene, spp=24, rng_seed=5, threads=1)
    img2, st2 = render(diffuse_sphere_scene, spp=24, rng_seed=5, threads=4)
    img3, st3 = render(diffuse_sphere_scene, spp=24, rng_seed=5)
    assert np.array_equal(img1, img2) and np.array_equal(img1, img3)
    for field in ("n", "mean_d", "mean_s", "m2_d", "m2_s", "c_ds"):
        assert np.array_equal(getattr(st1, field), getattr(st2, field))
        assert np.array_equal(getattr(st1, field), getattr(st3, field))


def test_seed_changes_output(diffuse_sphere_scene):
    img1, _ = render(diffuse_sphere_scene, spp=4, rng_seed=1)
    img2, _ = render(diffuse_sphere_scene, spp=4, rng_seed=2)
    assert not np.array_equal(img1, img2)


def test_glossy_sphere_specular_variance_dominates(glossy_sphere_scene):
    _, stats = render(glossy_sphere_scene, spp=128, rng_seed=8)
    mask = primary_hit_ids(glossy_sphere_scene) >= 0
    var_s = stats.var_s[mask].sum(axis=-1)
    var_d = stats.var_d[mask].sum(axis=-1)
    assert np.mean(var_s > var_d) >= 0.9


def test_invalid_spp_rejected(env_only_scene):
    with pytest.raises(ValidationError):
        render(env_only_scene, spp=0, rng_seed=1)


def test_plane_scene_renders():
    text = sphere_scene_text(0.5, 0.0) + """
[materials.floor]
albedo = 0.5 0.5 0.5
roughness = 0.9
metallic = 0.0

[objects.ground]
type = plane
point = 0 -1.2 0
normal = 0 1 0
material = floor
"""
    scene = parse_scene(text)
    img, _ = render(scene, spp=8, rng_seed=2)
    assert np.all(np.isfinite(img))
    ids = primary_hit_ids(scene)
    assert set(np.unique(ids)) == {-1, 0, 1}
