"""CDF 9/7 wavelet transform in lifting form.

Boundary handling is whole-sample symmetric extension, realized by clamping
the neighbor indices in each lifting step (the mirrored sample is always the
clamped one for this filter's one-tap reach). The scaling step uses
sqrt(2)/K with K = 1.230174105, which puts the one-dimensional lowpass DC
gain at sqrt(2) so a constant plane comes out of L two-dimensional levels as
value * 2^L in LL while every high-pass band vanishes.

Each level splits the current LL with ceil/floor dyadic sizes, so arbitrary
(including odd and degenerate) dimensions reconstruct exactly. A dimension
of 1 passes through untouched.

Row kernels exist in a pure-numpy form (vectorized over rows) and a numba
form (scalar loops); both evaluate the identical per-element expressions and
produce bit-identical output. Dispatch follows msfacomp.accel.
"""

from dataclasses import dataclass

import numpy as np

from . import accel
from .core import ValidationError

# standard lifting factorization constants (usually quoted rounded to nine
# digits: -1.586134342, -0.052980118, 0.882911076, 0.443506852, 1.230174105);
# full precision keeps the high-pass response of a constant signal at zero
# to machine accuracy instead of ~1e-8 per level
ALPHA = -1.586134342059924
BETA = -0.052980118572961
GAMMA = 0.882911075530934
DELTA = 0.443506852043971
K = 1.230174104914001
_SCALE_LOW = np.sqrt(2.0) / K
_SCALE_HIGH = K / np.sqrt(2.0)


def _forward_rows_numpy(x):
    """Analysis lifting along the last axis. x: (rows, n) float64, n >= 2."""
    s = np.ascontiguousarray(x[:, 0::2])
    d = np.ascontiguousarray(x[:, 1::2])
    ls = s.shape[1]
    ld = d.shape[1]
    idx_r = np.minimum(np.arange(ld) + 1, ls - 1)
    idx_l = np.maximum(np.arange(ls) - 1, 0)
    idx_c = np.minimum(np.arange(ls), ld - 1)
    d += ALPHA * (s[:, :ld] + s[:, idx_r])
    s += BETA * (d[:, idx_l] + d[:, idx_c])
    d += GAMMA * (s[:, :ld] + s[:, idx_r])
    s += DELTA * (d[:, idx_l] + d[:, idx_c])
    return s * _SCALE_LOW, d * _SCALE_HIGH


def _inverse_rows_numpy(s, d):
    ls = s.shape[1]
    ld = d.shape[1]
    n = ls + ld
    s = s / _SCALE_LOW
    d = d / _SCALE_HIGH
    idx_r = np.minimum(np.arange(ld) + 1, ls - 1)
    idx_l = np.maximum(np.arange(ls) - 1, 0)
    idx_c = np.minimum(np.arange(ls), ld - 1)
    s -= DELTA * (d[:, idx_l] + d[:, idx_c])
    d -= GAMMA * (s[:, :ld] + s[:, idx_r])
    s -= BETA * (d[:, idx_l] + d[:, idx_c])
    d -= ALPHA * (s[:, :ld] + s[:, idx_r])
    x = np.empty((s.shape[0], n), dtype=np.float64)
    x[:, 0::2] = s
    x[:, 1::2] = d
    return x


def _build_kernels(jit):
    alpha, beta, gamma, delta = ALPHA, BETA, GAMMA, DELTA
    scale_low, scale_high = _SCALE_LOW, _SCALE_HIGH

    @jit
    def forward_rows(x, s, d):
        rows, n = x.shape
        ls = s.shape[1]
        ld = d.shape[1]
        for r in range(rows):
            for i in range(ls):
                s[r, i] = x[r, 2 * i]
            for i in range(ld):
                d[r, i] = x[r, 2 * i + 1]
            for i in range(ld):
                j = i + 1 if i + 1 < ls else ls - 1
                d[r, i] += alpha * (s[r, i] + s[r, j])
            for i in range(ls):
                jl = i - 1 if i >= 1 else 0
                jc = i if i < ld else ld - 1
                s[r, i] += beta * (d[r, jl] + d[r, jc])
            for i in range(ld):
                j = i + 1 if i + 1 < ls else ls - 1
                d[r, i] += gamma * (s[r, i] + s[r, j])
            for i in range(ls):
                jl = i - 1 if i >= 1 else 0
                jc = i if i < ld else ld - 1
                s[r, i] += delta * (d[r, jl] + d[r, jc])
            for i in range(ls):
                s[r, i] = s[r, i] * scale_low
            for i in range(ld):
                d[r, i] = d[r, i] * scale_high

    @jit
    def inverse_rows(s, d, x):
        rows = s.shape[0]
        ls = s.shape[1]
        ld = d.shape[1]
        for r in range(rows):
            for i in range(ls):
                s[r, i] = s[r, i] / scale_low
            for i in range(ld):
                d[r, i] = d[r, i] / scale_high
            for i in range(ls):
                jl = i - 1 if i >= 1 else 0
                jc = i if i < ld else ld - 1
                s[r, i] -= delta * (d[r, jl] + d[r, jc])
            for i in range(ld):
                j = i + 1 if i + 1 < ls else ls - 1
                d[r, i] -= gamma * (s[r, i] + s[r, j])
            for i in range(ls):
                jl = i - 1 if i >= 1 else 0
                jc = i if i < ld else ld - 1
                s[r, i] -= beta * (d[r, jl] + d[r, jc])
            for i in range(ld):
                j = i + 1 if i + 1 < ls else ls - 1
                d[r, i] -= alpha * (s[r, i] + s[r, j])
            for i in range(ls):
                x[r, 2 * i] = s[r, i]
            for i in range(ld):
                x[r, 2 * i + 1] = d[r, i]

    return forward_rows, inverse_rows


_nb_forward = _nb_inverse = None
if accel.HAVE_NUMBA:
    _nb_forward, _nb_inverse = _build_kernels(accel.jit_compiler())


def _forward_rows(x):
    if x.shape[1] < 2:
        return x.copy(), np.empty((x.shape[0], 0), dtype=np.float64)
    if accel.numba_enabled():
        ls = (x.shape[1] + 1) // 2
        ld = x.shape[1] // 2
        s = np.empty((x.shape[0], ls), dtype=np.float64)
        d = np.empty((x.shape[0], ld), dtype=np.float64)
        _nb_forward(np.ascontiguousarray(x), s, d)
        return s, d
    return _forward_rows_numpy(x)


def _inverse_rows(s, d):
    n = s.shape[1] + d.shape[1]
    if n < 2:
        return s.copy()
    if accel.numba_enabled():
        x = np.empty((s.shape[0], n), dtype=np.float64)
        _nb_inverse(np.ascontiguousarray(s).copy(),
                    np.ascontiguousarray(d).copy(), x)
        return x
    return _inverse_rows_numpy(s, d)


def _forward_cols(x):
    s, d = _forward_rows(np.ascontiguousarray(x.T))
    return s.T, d.T


def _inverse_cols(s, d):
    return _inverse_rows(np.ascontiguousarray(s.T),
                         np.ascontiguousarray(d.T)).T


@dataclass
class SubbandSet:
    """Dyadic decomposition of one plane: deepest LL plus per-level details.

    details[k] = (LH, HL, HH) for level k+1 counted from the finest; the
    list is stored coarsest-first to match the coding order.
    """

    ll: np.ndarray
    details: list            # [(lh, hl, hh)] coarsest first
    shape: tuple

    @property
    def levels(self) -> int:
        return len(self.details)

    def iter_subbands(self):
        """(name, level, array) pairs in coding order: LL then coarse→fine."""
        yield "LL", self.levels, self.ll
        for k, (lh, hl, hh) in enumerate(self.details):
            level = self.levels - k
            yield "LH", level, lh
            yield "HL", level, hl
            yield "HH", level, hh


def dwt_forward(plane: np.ndarray, levels: int) -> SubbandSet:
    if levels < 1:
        raise ValidationError("levels must be >= 1")
    ll = np.asarray(plane, dtype=np.float64)
    if ll.ndim != 2:
        raise ValidationError("plane must be 2-D")
    details = []
    for _ in range(levels):
        s, d = _forward_rows(ll)                # split columns (along width)
        ll_s, lh_s = _forward_cols(s)           # split rows of the low half
        hl_s, hh_s = _forward_cols(d)
        details.append((np.ascontiguousarray(lh_s),
                        np.ascontiguousarray(hl_s),
                        np.ascontiguousarray(hh_s)))
        ll = np.ascontiguousarray(ll_s)
    details.reverse()
    return SubbandSet(ll=ll, details=details, shape=plane.shape)


def dwt_inverse(bands: SubbandSet) -> np.ndarray:
    ll = bands.ll
    for lh, hl, hh in bands.details:
        s = _inverse_cols(ll, lh)
        d = _inverse_cols(hl, hh)
        ll = _inverse_rows(s, d)
    if ll.shape != bands.shape:
        raise ValidationError("subband geometry inconsistent with shape")
    return ll
