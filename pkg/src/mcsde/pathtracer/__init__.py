"""Analytic-scene path tracer with per-pixel diffuse/specular statistics."""

from .material import Material
from .brdf import brdf_eval, sample_hemisphere_uniform
from .scene import Camera, Environment, Plane, Scene, Sphere, load_scene, parse_scene
from .stats import PixelStats, welford_update
from .render import render, trace_path, primary_hit_ids
from . import imageio

__all__ = [
    "Material",
    "brdf_eval",
    "sample_hemisphere_uniform",
    "Camera",
    "Environment",
    "Plane",
    "Scene",
    "Sphere",
    "load_scene",
    "parse_scene",
    "PixelStats",
    "welford_update",
    "render",
    "trace_path",
    "primary_hit_ids",
    "imageio",
]
