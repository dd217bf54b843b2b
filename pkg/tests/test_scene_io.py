import numpy as np
import pytest

from mcsde.errors import SceneParseError, ValidationError
from mcsde.pathtracer import Material, parse_scene
from mcsde.pathtracer.imageio import (
    read_ppm,
    read_stats_csv,
    write_png,
    write_ppm,
    write_stats_csv,
)
from mcsde.pathtracer.render import render

from conftest import ENV_ONLY_TEXT, sphere_scene_text


def test_full_scene_parses(tmp_path):
    scene = parse_scene(sphere_scene_text(roughness=0.2, metallic=0.5))
    assert scene.camera.width == 24
    assert len(scene.objects) == 1
    assert scene.materials["main"].roughness == 0.2


def test_missing_camera_names_section():
    text = "[environment]\nkind = constant\nradiance = 1 1 1\n"
    with pytest.raises(SceneParseError, match=r"\[camera\]"):
        parse_scene(text)


def test_missing_environment_names_section():
    text = sphere_scene_text(0.5, 0.0).split("[environment]")[0]
    with pytest.raises(SceneParseError, match=r"\[environment\]"):
        parse_scene(text)


def test_bad_vector_reports_location():
    text = sphere_scene_text(0.5, 0.0).replace("center = 0 0 0", "center = 0 zero 0")
    with pytest.raises(SceneParseError, match="center"):
        parse_scene(text)


def test_unknown_material_reference():
    text = sphere_scene_text(0.5, 0.0).replace("material = main", "material = nope")
    with pytest.raises(SceneParseError):
        parse_scene(text)


def test_material_range_validation():
    with pytest.raises(ValidationError):
        Material(albedo=np.array([1.2, 0.0, 0.0]), roughness=0.5, metallic=0.0)
    with pytest.raises(ValidationError):
        Material(albedo=np.zeros(3), roughness=0.0, metallic=0.0)  # singular at zero
    with pytest.raises(ValidationError):
        Material(albedo=np.zeros(3), roughness=0.5, metallic=1.5)


def test_dark_scene_rejected():
    text = sphere_scene_text(0.5, 0.0, env=0.0)
    with pytest.raises(SceneParseError, match="emitter"):
        parse_scene(text)


def test_zero_dimension_image_rejected():
    text = sphere_scene_text(0.5, 0.0).replace("width = 24", "width = 0")
    with pytest.raises(SceneParseError):
        parse_scene(text)


def test_ppm_roundtrip(tmp_path):
    img = np.linspace(0.0, 1.0, 5 * 4 * 3).reshape(5, 4, 3)
    path = tmp_path / "img.ppm"
    write_ppm(path, img)
    back = read_ppm(path)
    # 8-bit quantization in gamma space bounds the linear error
    assert back.shape == img.shape
    assert np.max(np.abs(back ** (1 / 2.2) - np.clip(img, 0, 1) ** (1 / 2.2))) <= 0.5 / 255 + 1e-9


def test_png_written(tmp_path):
    img = np.full((4, 4, 3), 0.25)
    path = tmp_path / "img.png"
    write_png(path, img)
    assert path.stat().st_size > 0


def test_stats_csv_roundtrip(tmp_path):
    scene = parse_scene(sphere_scene_text(0.3, 0.2, width=6, height=5))
    _, stats = render(scene, spp=8, rng_seed=4)
    path = tmp_path / "stats.csv"
    write_stats_csv(path, stats)
    n, cols = read_stats_csv(path)
    assert n.shape == (5, 6)
    assert np.array_equal(n, stats.n)
    assert np.array_equal(cols["mean_d"], stats.mean_d)
    assert np.array_equal(cols["var_s"], stats.var_s)
    assert np.array_equal(cols["cov_ds"], stats.cov_ds)
