"""Streaming per-pixel sample statistics for the diffuse/specular split.

Means, second moments and the diffuse-specular cross moment are tracked
per RGB channel with Welford-style updates.  ``merge`` is the associative
pairwise combine, so partial statistics accumulated by independent workers
can be joined in any grouping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class PixelStats:
    """Running statistics over any leading grid shape.

    Fields have shape ``shape + (3,)`` except ``n`` with shape ``shape``.
    Variances and the covariance are defined only for n >= 2 and use the
    n-1 normalization.
    """

    n: np.ndarray
    mean_d: np.ndarray
    mean_s: np.ndarray
    m2_d: np.ndarray
    m2_s: np.ndarray
    c_ds: np.ndarray

    @classmethod
    def zeros(cls, shape: tuple = ()) -> "PixelStats":
        shape = tuple(int(v) for v in shape)
        return cls(
            n=np.zeros(shape),
            mean_d=np.zeros(shape + (3,)),
            mean_s=np.zeros(shape + (3,)),
            m2_d=np.zeros(shape + (3,)),
            m2_s=np.zeros(shape + (3,)),
            c_ds=np.zeros(shape + (3,)),
        )

    def update(self, f_diffuse: np.ndarray, f_specular: np.ndarray) -> None:
        """Absorb one sample per grid cell (standard Welford recurrence)."""
        d = np.asarray(f_diffuse, dtype=np.float64)
        s = np.asarray(f_specular, dtype=np.float64)
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(s))):
            raise ValueError("samples must be finite")
        self.n = self.n + 1.0
        n = self.n[..., None] if self.n.ndim else self.n
        delta_d = d - self.mean_d
        delta_s = s - self.mean_s
        self.mean_d = self.mean_d + delta_d / n
        self.mean_s = self.mean_s + delta_s / n
        # delta uses the old mean, the second factor the updated one
        self.m2_d = self.m2_d + delta_d * (d - self.mean_d)
        self.m2_s = self.m2_s + delta_s * (s - self.mean_s)
        self.c_ds = self.c_ds + delta_d * (s - self.mean_s)

    def merge(self, other: "PixelStats") -> "PixelStats":
        """Associative parallel combine of two disjoint accumulations."""
        na, nb = self.n, other.n
        n = na + nb
        nax = na[..., None] if np.ndim(na) else na
        nbx = nb[..., None] if np.ndim(nb) else nb
        nx = n[..., None] if np.ndim(n) else n
        with np.errstate(invalid="ignore", divide="ignore"):
            w = np.where(nx > 0, nbx / np.where(nx == 0, 1.0, nx), 0.0)
            corr = np.where(nx > 0, nax * nbx / np.where(nx == 0, 1.0, nx), 0.0)
        delta_d = other.mean_d - self.mean_d
        delta_s = other.mean_s - self.mean_s
        return PixelStats(
            n=n,
            mean_d=self.mean_d + delta_d * w,
            mean_s=self.mean_s + delta_s * w,
            m2_d=self.m2_d + other.m2_d + delta_d**2 * corr,
            m2_s=self.m2_s + other.m2_s + delta_s**2 * corr,
            c_ds=self.c_ds + other.c_ds + delta_d * delta_s * corr,
        )

    @classmethod
    def from_samples(cls, f_diffuse: np.ndarray, f_specular: np.ndarray) -> "PixelStats":
        """Two-pass statistics over axis 0 of (k, ..., 3) sample blocks."""
        d = np.asarray(f_diffuse, dtype=np.float64)
        s = np.asarray(f_specular, dtype=np.float64)
        k = d.shape[0]
        mean_d = d.mean(axis=0)
        mean_s = s.mean(axis=0)
        dd = d - mean_d
        ds = s - mean_s
        return cls(
            n=np.full(d.shape[1:-1], float(k)),
            mean_d=mean_d,
            mean_s=mean_s,
            m2_d=np.sum(dd * dd, axis=0),
            m2_s=np.sum(ds * ds, axis=0),
            c_ds=np.sum(dd * ds, axis=0),
        )

    def _ratio(self, num: np.ndarray) -> np.ndarray:
        n = self.n[..., None] if np.ndim(self.n) else self.n
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(n >= 2, num / np.maximum(n - 1.0, 1.0), np.nan)

    @property
    def var_d(self) -> np.ndarray:
        return self._ratio(self.m2_d)

    @property
    def var_s(self) -> np.ndarray:
        return self._ratio(self.m2_s)

    @property
    def cov_ds(self) -> np.ndarray:
        return self._ratio(self.c_ds)

    @property
    def mean_total(self) -> np.ndarray:
        return self.mean_d + self.mean_s


def welford_update(stats: PixelStats, sample) -> PixelStats:
    """Functional single-sample update; ``sample`` has .f_diffuse/.f_specular."""
    out = PixelStats(
        n=np.array(stats.n, copy=True),
        mean_d=np.array(stats.mean_d, copy=True),
        mean_s=np.array(stats.mean_s, copy=True),
        m2_d=np.array(stats.m2_d, copy=True),
        m2_s=np.array(stats.m2_s, copy=True),
        c_ds=np.array(stats.c_ds, copy=True),
    )
    out.update(sample.f_diffuse, sample.f_specular)
    return out
