"""Microfacet + Lambertian BRDF and uniform hemisphere sampling.

The specular lobe is the product of a GGX-style normal distribution, a
Schlick Fresnel factor and a Smith-style visibility quotient, divided by
4 (n.wo)(n.wi).  The diffuse lobe is albedo/pi weighted by
k_d = (1 - F)(1 - metallic), so fully metallic surfaces have no diffuse
component at all.  Directions below the hemisphere must be culled by the
caller.
"""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError
from .material import Material
from .vecmath import dot, normalize, orthonormal_basis

INV_TWO_PI = 1.0 / (2.0 * np.pi)

# Grazing-angle guard: the specular denominator is singular at cos = 0.
_COS_FLOOR = 1e-6


def distribution_term(alpha, cos_nh):
    """Normal-distribution factor 4 a^2 / (pi [(a^2 - 1) cos_nh + 1]^2)."""
    alpha = np.asarray(alpha, dtype=np.float64)
    a2 = alpha * alpha
    denom = (a2 - 1.0) * np.asarray(cos_nh, dtype=np.float64) + 1.0
    return 4.0 * a2 / (np.pi * denom * denom)


def fresnel_schlick(f0, cos_ho):
    """Schlick reflectance f0 + (1 - f0)(1 - cos_ho)^5; f0 may be RGB."""
    c = np.clip(np.asarray(cos_ho, dtype=np.float64), 0.0, 1.0)
    return f0 + (1.0 - f0) * (1.0 - c) ** 5


def geometry_term(k, cos_ni, cos_no):
    """Smith-style visibility: product of c/(c(1-k)+k) for both directions."""
    k = np.asarray(k, dtype=np.float64)
    gi = cos_ni / (cos_ni * (1.0 - k) + k)
    go = cos_no / (cos_no * (1.0 - k) + k)
    return gi * go


def specular_dfg(alpha, f0, k, n, wo, wi):
    """D*F*G for unit vectors; broadcasts over leading axes, RGB if f0 is RGB."""
    h = normalize(np.asarray(wo, dtype=np.float64) + np.asarray(wi, dtype=np.float64))
    cos_nh = np.clip(dot(n, h), 0.0, 1.0)
    cos_ho = np.clip(dot(h, wo), 0.0, 1.0)
    cos_ni = np.clip(dot(n, wi), 0.0, 1.0)
    cos_no = np.clip(dot(n, wo), 0.0, 1.0)
    d = distribution_term(alpha, cos_nh)
    g = geometry_term(k, cos_ni, cos_no)
    f0 = np.asarray(f0, dtype=np.float64)
    if f0.ndim >= 1 and f0.shape[-1] == 3:  # RGB f0: channels on the last axis
        f = fresnel_schlick(f0, np.asarray(cos_ho)[..., None])
        return f * np.asarray(d * g)[..., None]
    return d * fresnel_schlick(f0, cos_ho) * g


def brdf_eval(material: Material, n, wo, wi):
    """Evaluate the split BRDF at unit vectors n, wo, wi.

    Returns (f_diffuse, f_specular) as RGB arrays.  Both directions must lie
    strictly above the surface; anything else is a caller bug and is
    rejected.  A material whose effective base reflectance is exactly zero
    is treated as pure Lambertian (the Schlick term would otherwise leak
    grazing energy into a lobe the material does not have).
    """
    n = np.asarray(n, dtype=np.float64)
    wo = np.asarray(wo, dtype=np.float64)
    wi = np.asarray(wi, dtype=np.float64)
    cos_no = dot(n, wo)
    cos_ni = dot(n, wi)
    if np.any(cos_no <= 0.0) or np.any(cos_ni <= 0.0):
        raise ValidationError("brdf_eval requires wo and wi above the hemisphere")

    f0_eff = material.effective_f0
    h = normalize(wo + wi)
    fres = fresnel_schlick(f0_eff, np.asarray(dot(h, wo))[..., None])  # (..., 3)
    k_d = (1.0 - fres) * (1.0 - material.metallic)
    f_diffuse = k_d * (material.albedo / np.pi)

    if np.all(f0_eff == 0.0):
        f_specular = np.zeros(f_diffuse.shape)
    else:
        denom = 4.0 * np.maximum(cos_no, _COS_FLOOR) * np.maximum(cos_ni, _COS_FLOOR)
        dfg = specular_dfg(material.roughness, f0_eff, material.geometry_k, n, wo, wi)
        f_specular = dfg / np.asarray(denom)[..., None]
    return f_diffuse, f_specular


def direction_from_uniforms(u1, u2, normal):
    """Map two uniforms to a direction on the hemisphere around ``normal``.

    cos(theta) = u1 gives the uniform solid-angle density 1/(2 pi).
    """
    u1 = np.asarray(u1, dtype=np.float64)
    u2 = np.asarray(u2, dtype=np.float64)
    cos_t = u1
    sin_t = np.sqrt(np.maximum(0.0, 1.0 - cos_t * cos_t))
    phi = 2.0 * np.pi * u2
    local = np.stack([sin_t * np.cos(phi), sin_t * np.sin(phi), cos_t], axis=-1)
    t, s = orthonormal_basis(np.asarray(normal, dtype=np.float64))
    return (
        local[..., 0:1] * t + local[..., 1:2] * s + local[..., 2:3] * np.asarray(normal)
    )


def sample_hemisphere_uniform(rng, normal, *key_words):
    """Uniform hemisphere sample around unit ``normal``.

    ``rng`` is a CounterRng; ``key_words`` identify the draw so repeated
    calls with the same key reproduce the same direction.  Returns
    (direction, pdf) with pdf = 1/(2 pi) exactly.
    """
    u1 = rng.u01(*key_words, 0)
    u2 = rng.u01(*key_words, 1)
    direction = direction_from_uniforms(u1, u2, normal)
    return direction, np.full(np.shape(u1), INV_TWO_PI) if np.shape(u1) else INV_TWO_PI
