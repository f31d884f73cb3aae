"""Demosaicking: reconstruct a full-resolution cube from a mosaic.

Two interpolators: plain per-band separable bilinear, and a band-difference
variant that interpolates each band's deviation from an interpolated
reference band and adds the reference back (closer in spirit to published
MSFA demosaickers; the reference defaults to the median-wavelength band).
Both reproduce each band's own samples exactly and clamp/round once at the
end. Outside a band's sample hull the nearest lattice sample extends.
"""

import numpy as np

from .core import SpectralCube, ValidationError
from .msfa import MosaickedImage


def _axis_weights(length: int, origin: int, block: int, count: int):
    """Bilinear gather along one axis of a subsampled lattice.

    Returns (i0, i1, w1): indices into the lattice and the weight of the
    upper neighbor, with positions clamped to the lattice hull so boundary
    pixels take the nearest sample.
    """
    t = (np.arange(length, dtype=np.float64) - origin) / block
    t = np.clip(t, 0.0, count - 1.0)
    i0 = np.floor(t).astype(np.int64)
    i0 = np.minimum(i0, count - 1)
    i1 = np.minimum(i0 + 1, count - 1)
    return i0, i1, t - i0


def _interp_lattice(values: np.ndarray, origin_rc, block: int, out_shape):
    """Separable bilinear interpolation of one band's lattice samples."""
    h, w = out_shape
    r0, r1, wr = _axis_weights(h, origin_rc[0], block, values.shape[0])
    c0, c1, wc = _axis_weights(w, origin_rc[1], block, values.shape[1])
    rows0 = values[r0, :]
    rows1 = values[r1, :]
    vert = rows0 * (1.0 - wr)[:, None] + rows1 * wr[:, None]
    return vert[:, c0] * (1.0 - wc)[None, :] + vert[:, c1] * wc[None, :]


def _band_fields(m: MosaickedImage):
    """Per-band dense real-valued fields averaged over pattern occurrences."""
    pat = m.pattern
    b = pat.block_size
    shape = m.samples.shape
    raw = m.samples.astype(np.float64)
    fields = np.zeros((pat.bands,) + shape)
    for band in range(1, pat.bands + 1):
        occ = pat.positions(band)
        acc = np.zeros(shape)
        for (r, c) in occ:
            acc += _interp_lattice(raw[r::b, c::b], (r, c), b, shape)
        fields[band - 1] = acc / len(occ)
    return fields


def _restore_known(fields: np.ndarray, m: MosaickedImage):
    pat = m.pattern
    b = pat.block_size
    for band in range(1, pat.bands + 1):
        for (r, c) in pat.positions(band):
            fields[band - 1][r::b, c::b] = m.samples[r::b, c::b]
    return fields


def _finish(fields: np.ndarray, m: MosaickedImage) -> SpectralCube:
    peak = (1 << m.bit_depth) - 1
    # round half away from zero, in one place
    rounded = np.trunc(fields + np.copysign(0.5, fields))
    samples = np.clip(rounded, 0, peak).astype(np.uint16)
    return SpectralCube(samples=samples, wavelengths=m.pattern.wavelengths,
                        bit_depth=m.bit_depth)


def demosaic_bilinear(m: MosaickedImage) -> SpectralCube:
    """Separable bilinear interpolation on each band's sampling lattice."""
    fields = _restore_known(_band_fields(m), m)
    return _finish(fields, m)


def demosaic_band_difference(m: MosaickedImage,
                             reference_band: int | None = None) -> SpectralCube:
    """Interpolate per-band differences against an interpolated reference.

    reference_band is 1-based; None picks the band of median wavelength.
    """
    pat = m.pattern
    b = pat.block_size
    if reference_band is None:
        reference_band = (pat.bands + 1) // 2
    if not (1 <= reference_band <= pat.bands):
        raise ValidationError(
            f"reference band {reference_band} outside 1..{pat.bands}")
    raw = m.samples.astype(np.float64)
    shape = raw.shape
    occ_ref = pat.positions(reference_band)
    ref = np.zeros(shape)
    for (r, c) in occ_ref:
        ref += _interp_lattice(raw[r::b, c::b], (r, c), b, shape)
    ref /= len(occ_ref)
    fields = np.empty((pat.bands,) + shape)
    for band in range(1, pat.bands + 1):
        occ = pat.positions(band)
        acc = np.zeros(shape)
        for (r, c) in occ:
            diff = raw[r::b, c::b] - ref[r::b, c::b]
            acc += _interp_lattice(diff, (r, c), b, shape)
        fields[band - 1] = ref + acc / len(occ)
    fields = _restore_known(fields, m)
    return _finish(fields, m)


def demosaic(m: MosaickedImage, method: str = "banddiff",
             reference_band: int | None = None) -> SpectralCube:
    if method == "bilinear":
        return demosaic_bilinear(m)
    if method == "banddiff":
        return demosaic_band_difference(m, reference_band)
    raise ValidationError(f"unknown demosaicker {method!r}")
