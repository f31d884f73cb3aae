"""MSFA patterns, mosaicking, structure conversion, and filter geometry.

A pattern is a periodic BxB block of band indices. Mosaicking masks a cube
with the pattern; structure conversion permutes the mosaic into a pseudo-MSI
of N small planes (one per band) and back, losslessly.

The built-in 16-band grids are pinned by the coding-gain regression in the
acceptance suite: raster is row-major, zig-zag follows the diagonal scan
order familiar from DCT coefficient scanning, dither is the classic 4x4
ordered-dither index matrix. The 3x3 dither grid was fixed by an offline
exhaustive search maximizing the periodic distance between spectrally
adjacent bands (ties broken lexicographically) and is a constant here.
"""

from dataclasses import dataclass
import json
import math

import numpy as np

from .core import SpectralCube, ValidationError, FormatError, atomic_write

PATTERN_KINDS = ("raster", "zigzag", "dither", "bayer")

_DITHER_GRIDS = {
    2: [[1, 3],
        [4, 2]],
    3: [[1, 8, 3],
        [4, 2, 6],
        [7, 5, 9]],
    4: [[1, 9, 3, 11],
        [13, 5, 15, 7],
        [4, 12, 2, 10],
        [16, 8, 14, 6]],
}


@dataclass
class MsfaPattern:
    """Periodic BxB block of band indices plus per-band center wavelengths."""

    kind: str
    assignment: np.ndarray          # (B, B) of band indices in 1..N
    wavelengths: np.ndarray         # (N,) nm, strictly increasing

    def __post_init__(self):
        self.assignment = np.ascontiguousarray(self.assignment, dtype=np.int64)
        self.wavelengths = np.ascontiguousarray(self.wavelengths,
                                                dtype=np.float64)
        b = self.assignment.shape[0]
        if self.assignment.shape != (b, b) or b < 1:
            raise ValidationError("assignment must be a square BxB grid")
        n = self.wavelengths.size
        if n > 1 and not np.all(np.diff(self.wavelengths) > 0):
            raise ValidationError("pattern wavelengths must be increasing")
        counts = np.bincount(self.assignment.ravel(), minlength=n + 1)[1:]
        if self.assignment.min() < 1 or self.assignment.max() > n:
            raise ValidationError("assignment band indices outside 1..N")
        if counts.sum() != b * b or np.any(counts < 1):
            raise ValidationError("every band must occur in the block")

    @property
    def block_size(self) -> int:
        return self.assignment.shape[0]

    @property
    def bands(self) -> int:
        return self.wavelengths.size

    @property
    def one_occurrence(self) -> bool:
        return self.bands == self.block_size ** 2

    def positions(self, band: int):
        """Block positions (row, col) carrying the given 1-based band."""
        rs, cs = np.nonzero(self.assignment == band)
        return list(zip(rs.tolist(), cs.tolist()))

    def to_json_dict(self) -> dict:
        return {
            "kind": self.kind,
            "block_size": self.block_size,
            "assignment": self.assignment.ravel().tolist(),
            "wavelengths_nm": self.wavelengths.tolist(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "MsfaPattern":
        b = int(d["block_size"])
        flat = d["assignment"]
        if len(flat) != b * b:
            raise FormatError("assignment length does not match block size")
        return cls(kind=d.get("kind", "custom"),
                   assignment=np.asarray(flat, dtype=np.int64).reshape(b, b),
                   wavelengths=np.asarray(d["wavelengths_nm"]))

    def save(self, path) -> None:
        atomic_write(path, json.dumps(self.to_json_dict(), indent=2).encode())

    @classmethod
    def load(cls, path) -> "MsfaPattern":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                d = json.load(fh)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}: not valid pattern JSON") from exc
        return cls.from_json_dict(d)


@dataclass
class MosaickedImage:
    """Single-channel image where each pixel carries one band's sample."""

    samples: np.ndarray             # (H, W) uint16
    bit_depth: int
    pattern: MsfaPattern

    def __post_init__(self):
        self.samples = np.ascontiguousarray(self.samples, dtype=np.uint16)
        b = self.pattern.block_size
        h, w = self.samples.shape
        if h % b or w % b:
            raise ValidationError("mosaic dimensions must be block multiples")

    @property
    def height(self) -> int:
        return self.samples.shape[0]

    @property
    def width(self) -> int:
        return self.samples.shape[1]


@dataclass
class PseudoMsi:
    """Structure-converted mosaic: one small plane per band occurrence."""

    planes: np.ndarray              # (N', h, w) uint16
    bit_depth: int
    pattern: MsfaPattern

    @property
    def bands(self) -> int:
        return self.planes.shape[0]


def _zigzag_grid(b: int) -> np.ndarray:
    cells = []
    for s in range(2 * b - 1):
        diag = [(i, s - i) for i in range(b) if 0 <= s - i < b]
        if s % 2 == 0:
            diag.reverse()
        cells.extend(diag)
    grid = np.zeros((b, b), dtype=np.int64)
    for k, (r, c) in enumerate(cells):
        grid[r, c] = k + 1
    return grid


def build_pattern(kind: str, block_size: int, wavelengths) -> MsfaPattern:
    """Construct a built-in pattern.

    raster: row-major ascending band index. zigzag: diagonal scan order.
    dither: pinned dispersed grids (see module docstring). bayer: GRBG with
    3 bands ordered blue < green < red by wavelength.
    """
    wavelengths = np.asarray(wavelengths, dtype=np.float64)
    n = wavelengths.size
    if kind == "bayer":
        if block_size != 2 or n != 3:
            raise ValidationError("bayer pattern needs block 2 and 3 bands")
        grid = np.array([[2, 3], [1, 2]], dtype=np.int64)  # G R / B G
        return MsfaPattern(kind="bayer", assignment=grid,
                           wavelengths=wavelengths)
    if block_size not in (2, 3, 4):
        raise ValidationError(f"unsupported block size {block_size}")
    if n != block_size ** 2:
        raise ValidationError(
            f"{kind} {block_size}x{block_size} needs {block_size ** 2} "
            f"wavelengths, got {n}")
    if kind == "raster":
        grid = np.arange(1, n + 1, dtype=np.int64).reshape(block_size,
                                                           block_size)
    elif kind == "zigzag":
        grid = _zigzag_grid(block_size)
    elif kind == "dither":
        grid = np.asarray(_DITHER_GRIDS[block_size], dtype=np.int64)
    else:
        raise ValidationError(f"unknown pattern kind {kind!r}")
    return MsfaPattern(kind=kind, assignment=grid, wavelengths=wavelengths)


def mosaic(cube: SpectralCube, pattern: MsfaPattern) -> MosaickedImage:
    """Mask the cube with the pattern, cropping to block multiples first."""
    if cube.bands != pattern.bands:
        raise ValidationError(
            f"cube has {cube.bands} bands, pattern {pattern.bands}")
    if not np.array_equal(cube.wavelengths, pattern.wavelengths):
        raise ValidationError("cube and pattern wavelengths differ")
    b = pattern.block_size
    h = (cube.height // b) * b
    w = (cube.width // b) * b
    if h == 0 or w == 0:
        raise ValidationError("cube smaller than one pattern block")
    out = np.empty((h, w), dtype=np.uint16)
    for r in range(b):
        for c in range(b):
            band = pattern.assignment[r, c] - 1
            out[r::b, c::b] = cube.samples[band, r:h:b, c:w:b]
    return MosaickedImage(samples=out, bit_depth=cube.bit_depth,
                          pattern=pattern)


def expand_bayer(pattern: MsfaPattern) -> MsfaPattern:
    """One-occurrence view of a multi-occurrence pattern.

    Bands occurring k times are split into k virtual bands sharing a
    wavelength, so structure conversion and spectral transforms see B^2
    planes. Wavelength monotonicity is relaxed to non-decreasing here;
    callers treat the result as internal.
    """
    b = pattern.block_size
    grid = np.zeros((b, b), dtype=np.int64)
    wl = []
    virtual = {}
    k = 0
    for band in range(1, pattern.bands + 1):
        for (r, c) in pattern.positions(band):
            k += 1
            grid[r, c] = k
            wl.append(pattern.wavelengths[band - 1])
            virtual[k] = band
    p = MsfaPattern.__new__(MsfaPattern)
    p.kind = pattern.kind + "-expanded"
    p.assignment = grid
    p.wavelengths = np.asarray(wl, dtype=np.float64)
    p.source_bands = virtual
    return p


def _conversion_pattern(pattern: MsfaPattern) -> MsfaPattern:
    return pattern if pattern.one_occurrence else expand_bayer(pattern)


def structure_convert(m: MosaickedImage) -> PseudoMsi:
    """Gather each band's mosaic samples into its own small plane.

    Planes are ordered by ascending band index (ascending wavelength); the
    operation is a pure permutation of the mosaic samples.
    """
    pat = _conversion_pattern(m.pattern)
    b = pat.block_size
    h, w = m.samples.shape
    planes = np.empty((pat.bands, h // b, w // b), dtype=np.uint16)
    for band in range(1, pat.bands + 1):
        (r, c), = pat.positions(band)
        planes[band - 1] = m.samples[r::b, c::b]
    return PseudoMsi(planes=planes, bit_depth=m.bit_depth, pattern=m.pattern)


def inverse_convert(p: PseudoMsi) -> MosaickedImage:
    """Exact inverse of structure_convert."""
    pat = _conversion_pattern(p.pattern)
    if p.planes.shape[0] != pat.bands:
        raise ValidationError("plane count does not match pattern")
    b = pat.block_size
    _, hh, ww = p.planes.shape
    out = np.empty((hh * b, ww * b), dtype=np.uint16)
    for band in range(1, pat.bands + 1):
        (r, c), = pat.positions(band)
        out[r::b, c::b] = p.planes[band - 1]
    return MosaickedImage(samples=out, bit_depth=p.bit_depth,
                          pattern=p.pattern)


def filter_geometry(pattern: MsfaPattern, wrap: bool = False):
    """Pairwise filter distances D (pixels) and wavelength gaps F (nm).

    D[m, n] is the minimum Euclidean distance between any occurrence of band
    m and any occurrence of band n; with wrap=True occurrences are searched
    over a 3x3 periodic replication of the block (the physically adjacent
    block may hold the nearest neighbor). The within-block default is the
    convention pinned by the coding-gain regression.
    """
    n = pattern.bands
    b = pattern.block_size
    occ = {band: pattern.positions(band) for band in range(1, n + 1)}
    d = np.zeros((n, n))
    for m in range(1, n + 1):
        for k in range(m + 1, n + 1):
            best = math.inf
            for (r1, c1) in occ[m]:
                for (r2, c2) in occ[k]:
                    if wrap:
                        for dr in (-b, 0, b):
                            for dc in (-b, 0, b):
                                best = min(best, math.hypot(
                                    r1 - (r2 + dr), c1 - (c2 + dc)))
                    else:
                        best = min(best, math.hypot(r1 - r2, c1 - c2))
            d[m - 1, k - 1] = d[k - 1, m - 1] = best
    f = np.abs(pattern.wavelengths[:, None] - pattern.wavelengths[None, :])
    return d, f
