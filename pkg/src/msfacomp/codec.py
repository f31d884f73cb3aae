"""Spatial codec: quantization, rate control, and the MSCJ container.

Encoding pipeline per plane: L-level 9/7 DWT, dead-zone scalar quantization
with one step per subband, entropy coding per subband segment. Rate control
runs a bisection on a global step scale; per-subband steps are
scale / (plane_weight * subband_weight), so planes carrying more transform
energy are quantized more finely. Achieved size counts the whole container,
header included.

The container is self-describing: pattern, spectral transform matrix, and
quantizer steps all travel in the header (documented field by field in
docs/FORMATS.md). All integers little-endian, no implicit alignment.
"""

from dataclasses import dataclass, field
import struct

import numpy as np

from .core import FormatError, RateError, SpectralTransform, ValidationError
from .dwt import SubbandSet, dwt_forward, dwt_inverse
from .entropy import bitplane_count, entropy_encode, entropy_decode
from .msfa import MsfaPattern

MSCJ_MAGIC = b"MSCJ"
MSCJ_VERSION = 1

MODES = ("eai", "ebi_klt", "ebi_fixed", "direct")

#: Finest allowed quantizer step. At this step the reconstruction error per
#: coefficient is at most 1/128 sample units, far below integer rounding, so
#: rate control saturates at effectively lossless rather than running away.
MIN_STEP = 1.0 / 64.0
MAX_STEP = 1e9


def quantize(coeffs: np.ndarray, step: float) -> np.ndarray:
    """Dead-zone scalar quantizer: q = sign(c) * floor(|c| / step)."""
    if step <= 0:
        raise ValidationError("quantizer step must be positive")
    return (np.sign(coeffs) * np.floor(np.abs(coeffs) / step)).astype(np.int32)


def dequantize(q: np.ndarray, step: float) -> np.ndarray:
    """Midpoint reconstruction: sign(q) * (|q| + 0.5) * step, zero stays 0."""
    out = (np.abs(q) + 0.5) * step
    out[q == 0] = 0.0
    return np.sign(q) * out


def subband_shapes(height: int, width: int, levels: int):
    """Subband geometry in coding order for an (height, width) plane."""
    dims = [(height, width)]
    h, w = height, width
    for _ in range(levels):
        h, w = (h + 1) // 2, (w + 1) // 2
        dims.append((h, w))
    shapes = [dims[levels]]     # LL
    for lev in range(levels, 0, -1):
        lh, lw = dims[lev]
        ph, pw = dims[lev - 1]
        shapes.append((ph - lh, lw))        # LH: high rows, low cols
        shapes.append((lh, pw - lw))        # HL
        shapes.append((ph - lh, pw - lw))   # HH
    return shapes


@dataclass
class StreamHeader:
    mode: str
    width: int                  # cropped mosaic / full-resolution width
    height: int
    bit_depth: int
    levels: int
    plane_shape: tuple          # coded plane (h, w)
    n_planes: int
    pattern: MsfaPattern
    transform: SpectralTransform | None
    steps: np.ndarray           # (n_planes, 1 + 3 * levels) float64

    @property
    def peak(self) -> int:
        return (1 << self.bit_depth) - 1

    @property
    def mid(self) -> float:
        return float(1 << (self.bit_depth - 1))


@dataclass
class CodedStream:
    header: StreamHeader
    nplanes_bits: np.ndarray    # (n_planes, n_subbands) uint8
    segments: list = field(default_factory=list)  # bytes, plane-major

    def total_bytes(self) -> int:
        return len(serialize_stream(self))


def _pack_pattern(p: MsfaPattern) -> bytes:
    out = struct.pack("<II", p.block_size, p.bands)
    out += p.assignment.astype("<u2").tobytes()
    out += p.wavelengths.astype("<f8").tobytes()
    kind = p.kind.encode()[:15]
    out += struct.pack("<B", len(kind)) + kind
    return out


def _unpack_pattern(buf: memoryview, off: int):
    b, n = struct.unpack_from("<II", buf, off)
    off += 8
    grid = np.frombuffer(buf, dtype="<u2", count=b * b,
                         offset=off).astype(np.int64).reshape(b, b)
    off += b * b * 2
    wl = np.frombuffer(buf, dtype="<f8", count=n, offset=off).copy()
    off += n * 8
    (klen,) = struct.unpack_from("<B", buf, off)
    off += 1
    kind = bytes(buf[off:off + klen]).decode()
    off += klen
    try:
        pat = MsfaPattern(kind=kind, assignment=grid, wavelengths=wl)
    except ValidationError as exc:
        raise FormatError(f"stream carries an invalid pattern: {exc}")
    return pat, off


_KIND_CODE = {"klt": 0, "fixed": 1, "identity": 2}
_KIND_NAME = {v: k for k, v in _KIND_CODE.items()}


def serialize_stream(s: CodedStream) -> bytes:
    h = s.header
    out = bytearray()
    out += struct.pack("<4sHB", MSCJ_MAGIC, MSCJ_VERSION, MODES.index(h.mode))
    out += struct.pack("<IIIII", h.width, h.height, h.bit_depth, h.levels,
                       h.n_planes)
    out += struct.pack("<II", *h.plane_shape)
    out += _pack_pattern(h.pattern)
    if h.transform is None:
        out += struct.pack("<B", 0)
    else:
        out += struct.pack("<BIB", 1, h.transform.order,
                           _KIND_CODE[h.transform.kind])
        out += h.transform.matrix.astype("<f8").tobytes()
    out += h.steps.astype("<f8").tobytes()
    out += s.nplanes_bits.astype("u1").tobytes()
    out += struct.pack("<I", len(s.segments))
    for seg in s.segments:
        out += struct.pack("<I", len(seg))
        out += seg
    return bytes(out)


def deserialize_stream(data: bytes) -> CodedStream:
    buf = memoryview(data)
    try:
        magic, version, mode_code = struct.unpack_from("<4sHB", buf, 0)
        if magic != MSCJ_MAGIC:
            raise FormatError(f"bad magic {magic!r}")
        if version != MSCJ_VERSION:
            raise FormatError(f"unsupported stream version {version}")
        if mode_code >= len(MODES):
            raise FormatError(f"unknown mode code {mode_code}")
        off = 7
        width, height, bit_depth, levels, n_planes = struct.unpack_from(
            "<IIIII", buf, off)
        off += 20
        ph, pw = struct.unpack_from("<II", buf, off)
        off += 8
        pattern, off = _unpack_pattern(buf, off)
        (has_t,) = struct.unpack_from("<B", buf, off)
        off += 1
        transform = None
        if has_t:
            order, kcode = struct.unpack_from("<IB", buf, off)
            off += 5
            m = np.frombuffer(buf, dtype="<f8", count=order * order,
                              offset=off).reshape(order, order).copy()
            off += order * order * 8
            transform = SpectralTransform(matrix=m, kind=_KIND_NAME[kcode])
        nsub = 1 + 3 * levels
        steps = np.frombuffer(buf, dtype="<f8", count=n_planes * nsub,
                              offset=off).reshape(n_planes, nsub).copy()
        off += n_planes * nsub * 8
        npl = np.frombuffer(buf, dtype="u1", count=n_planes * nsub,
                            offset=off).reshape(n_planes, nsub).copy()
        off += n_planes * nsub
        (nseg,) = struct.unpack_from("<I", buf, off)
        off += 4
        segments = []
        for _ in range(nseg):
            (seglen,) = struct.unpack_from("<I", buf, off)
            off += 4
            if off + seglen > len(buf):
                raise FormatError(f"payload truncated at byte {off}")
            segments.append(bytes(buf[off:off + seglen]))
            off += seglen
    except struct.error as exc:
        raise FormatError(f"header truncated: {exc}") from exc
    header = StreamHeader(mode=MODES[mode_code], width=width, height=height,
                          bit_depth=bit_depth, levels=levels,
                          plane_shape=(ph, pw), n_planes=n_planes,
                          pattern=pattern, transform=transform, steps=steps)
    return CodedStream(header=header, nplanes_bits=npl, segments=segments)


def inspect_header(data: bytes) -> dict:
    """Header-only view of a serialized stream; payload is not decoded."""
    s = deserialize_stream(data)
    h = s.header
    return {
        "mode": h.mode,
        "width": h.width,
        "height": h.height,
        "bit_depth": h.bit_depth,
        "levels": h.levels,
        "coded_planes": h.n_planes,
        "plane_shape": list(h.plane_shape),
        "pattern_kind": h.pattern.kind,
        "pattern_block": h.pattern.block_size,
        "bands": h.pattern.bands,
        "transform": None if h.transform is None else h.transform.kind,
        "payload_segments": len(s.segments),
        "total_bytes": len(data),
    }


# ---------------------------------------------------------------------------
# rate allocation


def _encode_at_scale(subband_sets, weights, subband_weights, scale,
                     payload_budget=None):
    """Quantize + entropy-code everything at one global scale.

    Returns (steps, nplanes_bits, segments, payload_bytes), or None as soon
    as the running payload exceeds payload_budget (rate-search trials only
    care whether the scale overshoots, so finishing the encode is wasted
    work).
    """
    n_planes = len(subband_sets)
    nsub = 1 + 3 * subband_sets[0].levels
    steps = np.empty((n_planes, nsub))
    npl = np.zeros((n_planes, nsub), dtype=np.uint8)
    segments = []
    payload = 0
    for i, bands in enumerate(subband_sets):
        for j, (_, _, arr) in enumerate(bands.iter_subbands()):
            step = min(max(scale / (weights[i] * subband_weights[j]),
                           MIN_STEP), MAX_STEP)
            steps[i, j] = step
            q = quantize(arr, step)
            npl[i, j] = bitplane_count(q)
            seg = entropy_encode(q)
            segments.append(seg)
            payload += len(seg)
            if payload_budget is not None and payload > payload_budget:
                return None
    return steps, npl, segments, payload


def allocate_rate(subband_sets, target_bits: int, weights,
                  header_bytes: int, subband_weights=None):
    """Bisect a global quantizer scale until total bits land within 2%.

    target_bits covers header + payload. If even the coarsest scale
    overshoots, the target is infeasible; if the finest scale undershoots,
    the result saturates there (effectively lossless for integer sources).
    """
    nsub = 1 + 3 * subband_sets[0].levels
    if subband_weights is None:
        subband_weights = np.ones(nsub)
    weights = np.maximum(np.asarray(weights, dtype=np.float64), 1e-9)
    nseg = len(subband_sets) * nsub
    fixed_bits = (header_bytes + 4 + 4 * nseg) * 8
    budget_bytes = max(0, (target_bits - fixed_bits) // 8)

    def trial(scale):
        """Bits at this scale, or None when it surely overshoots."""
        res = _encode_at_scale(subband_sets, weights, subband_weights, scale,
                               payload_budget=budget_bytes)
        if res is None:
            return None, None
        steps, npl, segs, payload = res
        return fixed_bits + payload * 8, (steps, npl, segs)

    bits_hi, res_hi = trial(MAX_STEP)
    if bits_hi is None or bits_hi > target_bits:
        raise RateError(
            f"target {target_bits} bits below minimum stream size "
            f"{fixed_bits if bits_hi is None else bits_hi}")
    # Cheap pivot decides whether we are in the saturating regime before any
    # expensive near-lossless trial encode happens.
    pivot = 0.5
    bits_p, res_p = trial(pivot)
    if bits_p is not None and bits_p <= target_bits:
        bits_min, res_min = trial(MIN_STEP)
        if bits_min is not None and bits_min <= target_bits:
            return res_min, bits_min, True
        lo, hi = MIN_STEP, pivot
        best = (res_p, bits_p)
    else:
        lo, hi = pivot, MAX_STEP
        best = (res_hi, bits_hi)
    for _ in range(60):
        if target_bits - best[1] <= 0.02 * target_bits:
            break
        mid = float(np.sqrt(lo * hi))
        if mid <= lo or mid >= hi:
            break
        bits_mid, res_mid = trial(mid)
        if bits_mid is None or bits_mid > target_bits:
            lo = mid
        else:
            hi = mid
            if bits_mid > best[1]:
                best = (res_mid, bits_mid)
    return best[0], best[1], False


def _header_for(mode, width, height, bit_depth, levels, plane_shape,
                n_planes, pattern, transform):
    nsub = 1 + 3 * levels
    return StreamHeader(mode=mode, width=width, height=height,
                        bit_depth=bit_depth, levels=levels,
                        plane_shape=plane_shape, n_planes=n_planes,
                        pattern=pattern, transform=transform,
                        steps=np.zeros((n_planes, nsub)))


def encode_stream(planes, mode: str, pattern: MsfaPattern,
                  transform: SpectralTransform | None, bit_depth: int,
                  target_bpppb: float, full_pixels: int, levels: int):
    """Encode real-valued planes into a serialized MSCJ stream.

    full_pixels is the full-resolution pixel count W'*H'; the bit budget is
    target_bpppb * full_pixels * bands regardless of how many samples are
    actually coded, which is what makes rates comparable across modes.

    Returns (stream_bytes, achieved_bits, saturated).
    """
    if mode not in MODES:
        raise ValidationError(f"unknown mode {mode!r}")
    planes = [np.asarray(p, dtype=np.float64) for p in planes]
    n_planes = len(planes)
    plane_shape = planes[0].shape
    if any(p.shape != plane_shape for p in planes):
        raise ValidationError("all coded planes must share one shape")
    subband_sets = [dwt_forward(p, levels) for p in planes]
    # energy-proportional plane weights; the floor of one sample unit keeps
    # near-constant planes (tiny std, nonzero DC) finely quantized
    weights = [max(float(p.std()), 1.0) for p in planes]

    header = _header_for(mode, *_full_dims(plane_shape, pattern, mode),
                         bit_depth, levels, plane_shape, n_planes, pattern,
                         transform)
    header_bytes = len(serialize_stream(
        CodedStream(header=header,
                    nplanes_bits=np.zeros_like(header.steps, dtype=np.uint8),
                    segments=[]))) - 4
    target_bits = int(round(target_bpppb * full_pixels * pattern.bands))
    (steps, npl, segments), achieved, saturated = allocate_rate(
        subband_sets, target_bits, weights, header_bytes)
    header.steps = steps
    stream = CodedStream(header=header, nplanes_bits=npl, segments=segments)
    data = serialize_stream(stream)
    return data, len(data) * 8, saturated


def _full_dims(plane_shape, pattern, mode):
    b = pattern.block_size
    if mode in ("ebi_klt", "ebi_fixed"):
        return plane_shape[1] * b, plane_shape[0] * b
    return plane_shape[1], plane_shape[0]


def decode_stream(data: bytes):
    """Decode a serialized stream back to real-valued planes + header."""
    s = deserialize_stream(data)
    h = s.header
    shapes = subband_shapes(*h.plane_shape, h.levels)
    expected = h.n_planes * len(shapes)
    if len(s.segments) != expected:
        raise FormatError(
            f"expected {expected} payload segments, found {len(s.segments)}")
    planes = np.empty((h.n_planes,) + h.plane_shape, dtype=np.float64)
    k = 0
    for i in range(h.n_planes):
        arrays = []
        for j, shape in enumerate(shapes):
            q = entropy_decode(s.segments[k], shape, int(s.nplanes_bits[i, j]))
            arrays.append(dequantize(q, float(h.steps[i, j])))
            k += 1
        ll = arrays[0]
        details = []
        for lev in range(h.levels):
            lh, hl, hh = arrays[1 + 3 * lev: 4 + 3 * lev]
            details.append((lh, hl, hh))
        bands = SubbandSet(ll=ll, details=details, shape=h.plane_shape)
        planes[i] = dwt_inverse(bands)
    return planes, h
