"""End-to-end coding flows and rate-distortion evaluation.

Three flows over one cropped cube:

  eai:       mosaic -> demosaic -> KLT (trained on the demosaicked cube) ->
             codec -> inverse -> metrics
  ebi_*:     mosaic -> structure conversion -> spectral transform (data KLT
             or the fixed Markov-model transform) -> codec -> inverse chain
             -> demosaic -> metrics
  direct:    mosaic coded as one grayscale plane -> demosaic -> metrics

Rates are bits per pixel per band with denominator W'*H'*N for every mode,
so the EBI modes' 1/N sample advantage shows up on a comparable axis. Two
PSNRs: DPSNR against the uncompressed demosaicked cube (computable on a real
camera) and OPSNR against the pre-mosaic original (simulation only).
"""

from dataclasses import dataclass
import io
import time

import numpy as np

from .codec import decode_stream, encode_stream
from .core import SpectralCube, ValidationError
from .demosaic import demosaic
from .msfa import (MosaickedImage, MsfaPattern, PseudoMsi, inverse_convert,
                   mosaic, structure_convert)
from .spectral import (MarkovParams, apply_transform, fixed_transform,
                       identity_transform, invert_transform, klt_from_data)

DEFAULT_RATES = (0.05, 0.1, 0.25, 0.5, 1.0, 2.0)
EAI_LEVELS = 5
EBI_LEVELS = 3

CSV_HEADER = "mode,target_bpppb,achieved_bpppb,dpsnr_db,opsnr_db,wall_ms"


@dataclass
class RdPoint:
    mode: str
    target_bpppb: float
    achieved_bpppb: float
    dpsnr_db: float
    opsnr_db: float | None
    wall_ms: float
    saturated: bool = False     # achieved < target because lossless was hit


def psnr(reference: SpectralCube, test: SpectralCube,
         peak: int | None = None) -> float:
    """10*log10(peak^2 / MSE) with the MSE over all W*H*N samples."""
    if reference.samples.shape != test.samples.shape:
        raise ValidationError("cubes differ in shape")
    if peak is None:
        peak = reference.peak
    diff = reference.samples.astype(np.float64) - test.samples.astype(
        np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(peak * peak / mse)


def crop_to_blocks(cube: SpectralCube, pattern: MsfaPattern) -> SpectralCube:
    b = pattern.block_size
    h = (cube.height // b) * b
    w = (cube.width // b) * b
    if h == cube.height and w == cube.width:
        return cube
    return SpectralCube(samples=cube.samples[:, :h, :w].copy(),
                        wavelengths=cube.wavelengths, bit_depth=cube.bit_depth)


def select_bands(cube: SpectralCube, wavelengths) -> SpectralCube:
    """Band-subset view for the band-count studies, by exact wavelength."""
    wanted = np.asarray(wavelengths, dtype=np.float64)
    idx = []
    for wl in wanted:
        hits = np.nonzero(cube.wavelengths == wl)[0]
        if hits.size == 0:
            raise ValidationError(f"cube has no {wl} nm band")
        idx.append(int(hits[0]))
    return SpectralCube(samples=cube.samples[idx].copy(),
                        wavelengths=cube.wavelengths[idx].copy(),
                        bit_depth=cube.bit_depth)


def _round_to_cube(planes: np.ndarray, wavelengths, bit_depth: int) \
        -> SpectralCube:
    peak = (1 << bit_depth) - 1
    samples = np.clip(np.rint(planes), 0, peak).astype(np.uint16)
    return SpectralCube(samples=samples, wavelengths=wavelengths,
                        bit_depth=bit_depth)


def _round_to_planes(planes: np.ndarray, bit_depth: int) -> np.ndarray:
    peak = (1 << bit_depth) - 1
    return np.clip(np.rint(planes), 0, peak).astype(np.uint16)


def run_eai(cube: SpectralCube, pattern: MsfaPattern, target_bpppb: float,
            demosaic_method: str = "banddiff", levels: int = EAI_LEVELS):
    """Full-resolution flow: returns (decoded cube, RdPoint)."""
    t0 = time.perf_counter()
    cube = crop_to_blocks(cube, pattern)
    mos = mosaic(cube, pattern)
    demo = demosaic(mos, demosaic_method)
    transform = klt_from_data(demo)
    mid = float(1 << (cube.bit_depth - 1))
    y = apply_transform(demo.samples.astype(np.float64) - mid, transform)
    data, bits, saturated = encode_stream(
        list(y), "eai", pattern, transform, cube.bit_depth, target_bpppb,
        full_pixels=mos.height * mos.width, levels=levels)
    planes, header = decode_stream(data)
    x = invert_transform(planes, header.transform) + mid
    decoded = _round_to_cube(x, cube.wavelengths, cube.bit_depth)
    wall = (time.perf_counter() - t0) * 1e3
    point = RdPoint(
        mode="eai", target_bpppb=target_bpppb,
        achieved_bpppb=bits / (mos.height * mos.width * pattern.bands),
        dpsnr_db=psnr(demo, decoded), opsnr_db=psnr(cube, decoded),
        wall_ms=wall, saturated=saturated)
    return decoded, point


def run_ebi(cube: SpectralCube, pattern: MsfaPattern, target_bpppb: float,
            transform_kind: str = "fixed",
            params: MarkovParams | None = None,
            demosaic_method: str = "banddiff", levels: int = EBI_LEVELS):
    """Mosaic-domain flow with a spectral transform on the pseudo-MSI."""
    if transform_kind not in ("klt", "fixed", "identity"):
        raise ValidationError(f"unknown transform kind {transform_kind!r}")
    t0 = time.perf_counter()
    cube = crop_to_blocks(cube, pattern)
    mos = mosaic(cube, pattern)
    pm = structure_convert(mos)
    # EAI codes mosaic_pixels * N samples; this flow codes exactly 1/N of that
    assert pm.planes.size == mos.samples.size
    if transform_kind == "klt":
        transform = klt_from_data(pm)
        mode = "ebi_klt"
    elif transform_kind == "fixed":
        transform = fixed_transform(pattern, params or MarkovParams())
        mode = "ebi_fixed"
    else:
        transform = identity_transform(pm.bands)
        mode = "ebi_klt"        # container-wise identity rides the klt mode
    mid = float(1 << (cube.bit_depth - 1))
    y = apply_transform(pm.planes.astype(np.float64) - mid, transform)
    data, bits, saturated = encode_stream(
        list(y), mode, pattern, transform, cube.bit_depth, target_bpppb,
        full_pixels=mos.height * mos.width, levels=levels)
    planes, header = decode_stream(data)
    # invert with the header's copy: decoding must not need the image-side one
    x = invert_transform(planes, header.transform) + mid
    dec_planes = _round_to_planes(x, cube.bit_depth)
    dec_mos = inverse_convert(PseudoMsi(planes=dec_planes,
                                        bit_depth=cube.bit_depth,
                                        pattern=pattern))
    decoded = demosaic(dec_mos, demosaic_method)
    demo = demosaic(mos, demosaic_method)
    wall = (time.perf_counter() - t0) * 1e3
    point = RdPoint(
        mode=mode, target_bpppb=target_bpppb,
        achieved_bpppb=bits / (mos.height * mos.width * pattern.bands),
        dpsnr_db=psnr(demo, decoded), opsnr_db=psnr(cube, decoded),
        wall_ms=wall, saturated=saturated)
    return decoded, point


def run_direct(mos: MosaickedImage, target_bpppb: float,
               original: SpectralCube | None = None,
               demosaic_method: str = "banddiff", levels: int = EAI_LEVELS):
    """Code the mosaic as one grayscale plane; demosaic after decoding."""
    t0 = time.perf_counter()
    pattern = mos.pattern
    mid = float(1 << (mos.bit_depth - 1))
    plane = mos.samples.astype(np.float64) - mid
    data, bits, saturated = encode_stream(
        [plane], "direct", pattern, None, mos.bit_depth, target_bpppb,
        full_pixels=mos.height * mos.width, levels=levels)
    planes, header = decode_stream(data)
    dec = _round_to_planes(planes[0] + mid, mos.bit_depth)
    dec_mos = MosaickedImage(samples=dec, bit_depth=mos.bit_depth,
                             pattern=pattern)
    decoded = demosaic(dec_mos, demosaic_method)
    demo = demosaic(mos, demosaic_method)
    wall = (time.perf_counter() - t0) * 1e3
    opsnr = psnr(original, decoded) if original is not None else None
    point = RdPoint(
        mode="direct", target_bpppb=target_bpppb,
        achieved_bpppb=bits / (mos.height * mos.width * pattern.bands),
        dpsnr_db=psnr(demo, decoded), opsnr_db=opsnr,
        wall_ms=wall, saturated=saturated)
    return decoded, point


def run_mode(mode: str, cube: SpectralCube, pattern: MsfaPattern,
             target_bpppb: float, params: MarkovParams | None = None,
             demosaic_method: str = "banddiff"):
    if mode == "eai":
        return run_eai(cube, pattern, target_bpppb, demosaic_method)
    if mode == "ebi_klt":
        return run_ebi(cube, pattern, target_bpppb, "klt", params,
                       demosaic_method)
    if mode == "ebi_fixed":
        return run_ebi(cube, pattern, target_bpppb, "fixed", params,
                       demosaic_method)
    if mode == "direct":
        cropped = crop_to_blocks(cube, pattern)
        return run_direct(mosaic(cropped, pattern), target_bpppb,
                          original=cropped, demosaic_method=demosaic_method)
    raise ValidationError(f"unknown mode {mode!r}")


def rd_sweep(cube: SpectralCube, pattern: MsfaPattern, modes,
             targets=DEFAULT_RATES, params: MarkovParams | None = None,
             demosaic_method: str = "banddiff"):
    """Cross product of modes x targets, ordered by (mode, rate)."""
    points = []
    for mode in sorted(modes):
        for target in sorted(targets):
            _, point = run_mode(mode, cube, pattern, target, params,
                                demosaic_method)
            points.append(point)
    return points


def _fmt_db(v) -> str:
    if v is None:
        return ""
    if np.isinf(v):
        return "inf"
    return f"{v:.4f}"


def points_to_csv(points, include_timing: bool = True) -> str:
    """Render sweep points in the documented CSV schema.

    include_timing=False writes wall_ms as 0 so repeated runs are
    byte-identical (wall time is the one non-deterministic column).
    """
    out = io.StringIO()
    out.write(CSV_HEADER + "\n")
    for p in points:
        wall = f"{p.wall_ms:.1f}" if include_timing else "0"
        out.write(f"{p.mode},{p.target_bpppb:.6g},{p.achieved_bpppb:.6f},"
                  f"{_fmt_db(p.dpsnr_db)},{_fmt_db(p.opsnr_db)},{wall}\n")
    return out.getvalue()
