"""Shared scene fixtures for the test suite."""

import numpy as np
import pytest

from mcsde.pathtracer import parse_scene

ENV_ONLY_TEXT = """
[camera]
position = 0 0 4
look_at = 0 0 0
fov_degrees = 35
width = 6
height = 6

[environment]
kind = constant
radiance = 0.5 0.5 0.5
"""


def sphere_scene_text(roughness, metallic, albedo=(0.7, 0.7, 0.7), f0=(0.04, 0.04, 0.04),
                      width=24, height=24, env=0.5):
    a = " ".join(str(v) for v in albedo)
    f = " ".join(str(v) for v in f0)
    return f"""
[camera]
position = 0 0 4
look_at = 0 0 0
fov_degrees = 35
width = {width}
height = {height}

[materials.main]
albedo = {a}
roughness = {roughness}
metallic = {metallic}
f0 = {f}

[objects.ball]
type = sphere
center = 0 0 0
radius = 1
material = main

[environment]
kind = constant
radiance = {env} {env} {env}
"""


@pytest.fixture
def env_only_scene():
    return parse_scene(ENV_ONLY_TEXT)


@pytest.fixture
def diffuse_sphere_scene():
    return parse_scene(sphere_scene_text(roughness=0.4, metallic=0.0))


@pytest.fixture
def pure_lambert_scene():
    return parse_scene(sphere_scene_text(roughness=0.4, metallic=0.0, f0=(0.0, 0.0, 0.0)))


@pytest.fixture
def glossy_sphere_scene():
    return parse_scene(sphere_scene_text(roughness=0.1, metallic=0.8, width=32, height=32))


@pytest.fixture
def mirror_sphere_scene():
    return parse_scene(sphere_scene_text(roughness=0.05, metallic=0.9, width=48, height=48))
