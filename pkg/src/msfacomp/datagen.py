"""Synthetic multispectral cubes with controllable Markov structure.

Stands in for captured test imagery. The Markov generator produces a
Gaussian field that is separable AR(1) in both spatial axes (lag-1
correlation rho_d) and AR(1) across bands with per-gap correlation
rho_f ** gap_nm, then maps the whole field affinely onto
[0.1 * peak, 0.9 * peak] and rounds. One global affine map keeps the
correlation structure intact.

Randomness comes from NumPy's Philox counter-based generator (Philox 4x64
with 10 rounds); the white-noise field of band b under seed s uses the
128-bit key s * 2^64 + b, so streams are reproducible sample-for-sample on
any platform and bands can be drawn independently.
"""

import numpy as np

from .core import SpectralCube, ValidationError


def _band_rng(seed: int, band: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=(int(seed) << 64) + band))


def _ar1_field(h: int, w: int, rho: float,
               rng: np.random.Generator) -> np.ndarray:
    """Unit-variance Gaussian field, AR(1) along both axes."""
    z = rng.standard_normal((h, w))
    c = np.sqrt(1.0 - rho * rho)
    out = np.empty_like(z)
    out[:, 0] = z[:, 0]
    for j in range(1, w):
        out[:, j] = rho * out[:, j - 1] + c * z[:, j]
    down = np.empty_like(out)
    down[0, :] = out[0, :]
    for i in range(1, h):
        down[i, :] = rho * down[i - 1, :] + c * out[i, :]
    return down


def _to_samples(fields: np.ndarray, bit_depth: int) -> np.ndarray:
    peak = (1 << bit_depth) - 1
    lo = fields.min()
    hi = fields.max()
    span = hi - lo if hi > lo else 1.0
    scaled = (fields - lo) / span * (0.8 * peak) + 0.1 * peak
    return np.rint(scaled).astype(np.uint16)


def generate_markov_cube(width: int, height: int, wavelengths, bit_depth: int,
                         rho_d: float, rho_f: float, seed: int) -> SpectralCube:
    if not (0.0 < rho_d < 1.0 and 0.0 < rho_f < 1.0):
        raise ValidationError("correlation coefficients must be in (0, 1)")
    if width < 1 or height < 1:
        raise ValidationError("cube dimensions must be >= 1")
    wavelengths = np.asarray(wavelengths, dtype=np.float64)
    n = wavelengths.size
    fields = np.empty((n, height, width))
    for b in range(n):
        g = _ar1_field(height, width, rho_d, _band_rng(seed, b))
        if b == 0:
            fields[b] = g
        else:
            r = rho_f ** (wavelengths[b] - wavelengths[b - 1])
            fields[b] = r * fields[b - 1] + np.sqrt(1.0 - r * r) * g
    return SpectralCube(samples=_to_samples(fields, bit_depth),
                        wavelengths=wavelengths, bit_depth=bit_depth)


def generate_edge_cube(width: int, height: int, wavelengths, bit_depth: int,
                       seed: int) -> SpectralCube:
    """Piecewise-smooth Voronoi regions with smooth per-region spectra.

    Stress content with real edges: each region draws a smooth random
    spectrum (quadratic in wavelength), and a small white jitter keeps the
    statistics non-degenerate without breaking inter-band correlation.
    """
    if width < 1 or height < 1:
        raise ValidationError("cube dimensions must be >= 1")
    wavelengths = np.asarray(wavelengths, dtype=np.float64)
    n = wavelengths.size
    rng = _band_rng(seed, 0xE09E)
    n_regions = min(max(4, (width * height) // 1024), 64)
    sites = np.stack([rng.uniform(0, height, n_regions),
                      rng.uniform(0, width, n_regions)], axis=1)
    yy, xx = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    d2 = (yy[..., None] - sites[:, 0]) ** 2 + (xx[..., None] - sites[:, 1]) ** 2
    labels = np.argmin(d2, axis=2)

    # per-region reflectance: random level plus gentle slope/curvature in
    # wavelength, so neighboring bands stay strongly correlated
    wl0 = wavelengths.mean()
    span = max(wavelengths.max() - wavelengths.min(), 1.0)
    t = (wavelengths - wl0) / span
    coeffs = rng.normal(0.0, 1.0, size=(n_regions, 3))
    spectra = (coeffs[:, 0:1] + 0.35 * coeffs[:, 1:2] * t[None, :]
               + 0.25 * coeffs[:, 2:3] * 0.5 * t[None, :] ** 2)

    fields = np.empty((n, height, width))
    for b in range(n):
        jitter = _band_rng(seed, b + 1).standard_normal((height, width))
        fields[b] = spectra[labels, b] + 0.02 * jitter
    return SpectralCube(samples=_to_samples(fields, bit_depth),
                        wavelengths=wavelengths, bit_depth=bit_depth)
