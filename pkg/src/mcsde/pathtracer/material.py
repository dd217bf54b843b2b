"""Surface reflectance parameters for the microfacet + Lambertian model."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError

K_MODES = ("direct", "ibl")


def _as_rgb(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.shape != (3,):
        raise ValidationError(f"{name} must be an RGB triple, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} must be finite, got {arr}")
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValidationError(f"{name} channels must lie in [0, 1], got {arr}")
    return arr


@dataclass(frozen=True)
class Material:
    """Albedo, roughness, metallic and base reflectance of one surface.

    Roughness must be strictly positive: the microfacet lobe and the
    hemisphere quadrature built on it are singular at zero roughness.
    ``geometry_k_mode`` selects the shadowing constant k = roughness^2/2
    ("direct") or k = (roughness+1)^2/8 ("ibl").
    """

    albedo: np.ndarray
    roughness: float
    metallic: float
    f0: np.ndarray = field(default_factory=lambda: np.full(3, 0.04))
    geometry_k_mode: str = "direct"

    def __post_init__(self):
        object.__setattr__(self, "albedo", _as_rgb(self.albedo, "albedo"))
        object.__setattr__(self, "f0", _as_rgb(self.f0, "f0"))
        r = float(self.roughness)
        m = float(self.metallic)
        if not np.isfinite(r) or not (0.0 < r <= 1.0):
            raise ValidationError(f"roughness must lie in (0, 1], got {r}")
        if not np.isfinite(m) or not (0.0 <= m <= 1.0):
            raise ValidationError(f"metallic must lie in [0, 1], got {m}")
        if self.geometry_k_mode not in K_MODES:
            raise ValidationError(
                f"geometry_k_mode must be one of {K_MODES}, got {self.geometry_k_mode!r}"
            )
        object.__setattr__(self, "roughness", r)
        object.__setattr__(self, "metallic", m)

    @property
    def geometry_k(self) -> float:
        a = self.roughness
        return a * a / 2.0 if self.geometry_k_mode == "direct" else (a + 1.0) ** 2 / 8.0

    @property
    def effective_f0(self) -> np.ndarray:
        """Base reflectance after the metallic workflow: lerp(f0, albedo, metallic)."""
        return self.f0 * (1.0 - self.metallic) + self.albedo * self.metallic
