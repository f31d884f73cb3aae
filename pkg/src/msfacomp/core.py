"""Shared domain types, planar cube file I/O, and the symmetric eigensolver.

The cube container is deliberately dumb: N full planes of u16 samples plus
per-band center wavelengths in nanometers, band index ascending with
wavelength. Everything downstream (mosaicking, transforms, the codec)
consumes these types.
"""

from dataclasses import dataclass, field
import math
import os
import struct
import tempfile

import numpy as np


class MsfaError(Exception):
    """Base class for library errors."""


class ValidationError(MsfaError):
    """Inputs violate a documented precondition or type invariant."""


class FormatError(MsfaError):
    """A file or byte stream does not parse as the documented format."""


class StatisticsError(MsfaError):
    """Degenerate statistics (zero variance, non-positive correlation)."""


class RateError(MsfaError):
    """The requested bit budget cannot be met."""


MSC1_MAGIC = b"MSC1"


@dataclass
class SpectralCube:
    """Full-resolution multispectral image.

    samples: (bands, height, width) uint16, each value in [0, 2^bit_depth - 1].
    wavelengths: per-band filter center in nm, strictly increasing.
    """

    samples: np.ndarray
    wavelengths: np.ndarray
    bit_depth: int

    def __post_init__(self):
        self.samples = np.ascontiguousarray(self.samples, dtype=np.uint16)
        self.wavelengths = np.ascontiguousarray(self.wavelengths, dtype=np.float64)
        if self.samples.ndim != 3:
            raise ValidationError("cube samples must be (bands, height, width)")
        if not (8 <= self.bit_depth <= 16):
            raise ValidationError(f"bit depth {self.bit_depth} outside 8..16")
        n, h, w = self.samples.shape
        if h < 1 or w < 1 or n < 1:
            raise ValidationError("cube dimensions must be >= 1")
        if self.wavelengths.shape != (n,):
            raise ValidationError(
                f"{self.wavelengths.size} wavelengths for {n} bands")
        if n > 1 and not np.all(np.diff(self.wavelengths) > 0):
            raise ValidationError("wavelengths must be strictly increasing")
        peak = (1 << self.bit_depth) - 1
        if self.samples.max(initial=0) > peak:
            raise ValidationError(f"sample exceeds peak {peak}")

    @property
    def bands(self) -> int:
        return self.samples.shape[0]

    @property
    def height(self) -> int:
        return self.samples.shape[1]

    @property
    def width(self) -> int:
        return self.samples.shape[2]

    @property
    def peak(self) -> int:
        return (1 << self.bit_depth) - 1


@dataclass
class SpectralTransform:
    """Orthonormal band transform; eigenvectors stored as rows.

    Rows are ordered by descending eigenvalue of the source correlation
    matrix. kind records provenance: data-driven ("klt"), correlation-model
    ("fixed"), or passthrough ("identity").
    """

    matrix: np.ndarray
    kind: str
    params: dict = field(default_factory=dict)

    KINDS = ("klt", "fixed", "identity")

    def __post_init__(self):
        self.matrix = np.ascontiguousarray(self.matrix, dtype=np.float64)
        if self.kind not in self.KINDS:
            raise ValidationError(f"unknown transform kind {self.kind!r}")
        n = self.matrix.shape[0]
        if self.matrix.shape != (n, n):
            raise ValidationError("transform matrix must be square")
        gram = self.matrix @ self.matrix.T
        if np.abs(gram - np.eye(n)).max() > 1e-9:
            raise ValidationError("transform matrix is not orthonormal")

    @property
    def order(self) -> int:
        return self.matrix.shape[0]

    def to_json_dict(self) -> dict:
        return {
            "order": self.order,
            "kind": self.kind,
            "rows": self.matrix.tolist(),
            "params": self.params,
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "SpectralTransform":
        m = np.asarray(d["rows"], dtype=np.float64)
        if m.shape != (d["order"], d["order"]):
            raise FormatError("transform rows do not match declared order")
        return cls(matrix=m, kind=d["kind"], params=d.get("params", {}))


def check_symmetric(m: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValidationError("matrix must be square")
    if m.shape[0] >= 1 and np.abs(m - m.T).max(initial=0.0) > tol:
        raise ValidationError("matrix is not symmetric")
    return m


def fix_eigenvector_signs(rows: np.ndarray) -> np.ndarray:
    """Make each row's largest-magnitude entry non-negative (first on ties).

    The decomposition is sign-ambiguous; coding behavior is identical either
    way, but containers and tests need a deterministic representative.
    """
    out = rows.copy()
    for i in range(out.shape[0]):
        j = int(np.argmax(np.abs(out[i])))
        if out[i, j] < 0:
            out[i] = -out[i]
    return out


def symmetric_eigendecomposition(m: np.ndarray, tol: float = 1e-12,
                                 max_sweeps: int = 100):
    """Eigenvalues/eigenvectors of a symmetric matrix by cyclic Jacobi.

    Returns (eigenvalues descending, eigenvectors as rows). Deterministic:
    fixed sweep order, convergence on the off-diagonal Frobenius norm, sign
    convention via fix_eigenvector_signs, stable sort so equal eigenvalues
    keep their diagonal order. Orders here never exceed 32, so the O(n^3)
    sweeps are irrelevant to runtime.
    """
    a = check_symmetric(m).copy()
    n = a.shape[0]
    v = np.eye(n)
    if n == 1:
        return np.array([a[0, 0]]), np.array([[1.0]])
    for _ in range(max_sweeps):
        off_diag = a - np.diag(np.diag(a))
        off = math.sqrt(float((off_diag * off_diag).sum()))
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                # pivot too small to change the diagonal: zero it directly
                g = 100.0 * abs(apq)
                if abs(a[p, p]) + g == abs(a[p, p]) and \
                        abs(a[q, q]) + g == abs(a[q, q]):
                    a[p, q] = a[q, p] = 0.0
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:      # theta^2 would overflow
                    t = 1.0 / (2.0 * theta)
                else:
                    t = math.copysign(1.0, theta) / (
                        abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rot = np.array([[c, -s], [s, c]])
                a[[p, q], :] = rot @ a[[p, q], :]
                a[:, [p, q]] = a[:, [p, q]] @ rot.T
                a[p, q] = a[q, p] = 0.0   # pivot is exactly annihilated
                v[[p, q], :] = rot @ v[[p, q], :]
    else:
        raise MsfaError("Jacobi iteration did not converge")
    eigenvalues = np.diag(a).copy()
    order = np.argsort(-eigenvalues, kind="stable")
    return eigenvalues[order], fix_eigenvector_signs(v[order, :])


# ---------------------------------------------------------------------------
# MSC1 planar cube file format (little-endian):
#   magic "MSC1", u32 width, u32 height, u32 bands, u32 bit_depth,
#   bands * f64 wavelength_nm, bands planes of width*height u16 row-major.

_HEADER = struct.Struct("<4sIIII")


def store_cube(cube: SpectralCube, path) -> None:
    payload = bytearray()
    payload += _HEADER.pack(MSC1_MAGIC, cube.width, cube.height,
                            cube.bands, cube.bit_depth)
    payload += cube.wavelengths.astype("<f8").tobytes()
    payload += cube.samples.astype("<u2").tobytes()
    atomic_write(path, bytes(payload))


def load_cube(path) -> SpectralCube:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, w, h, n, depth = _HEADER.unpack_from(data, 0)
    if magic != MSC1_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    off = _HEADER.size
    need = n * 8
    if len(data) < off + need:
        raise FormatError(f"{path}: truncated wavelength table")
    wl = np.frombuffer(data, dtype="<f8", count=n, offset=off)
    off += need
    need = n * h * w * 2
    if len(data) < off + need:
        raise FormatError(f"{path}: truncated sample planes "
                          f"(expected {need} bytes, got {len(data) - off})")
    samples = np.frombuffer(data, dtype="<u2", count=n * h * w,
                            offset=off).reshape(n, h, w)
    try:
        return SpectralCube(samples=samples.copy(), wavelengths=wl.copy(),
                            bit_depth=depth)
    except ValidationError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def atomic_write(path, data: bytes) -> None:
    """Write via a temp file + rename so failures leave no partial output."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".msfa-tmp-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
