"""Lossless coding of quantizer indices: bitplane scan + binary range coder.

Magnitudes are sent most-significant bitplane first. Per coefficient and
plane there is exactly one binary decision: a significance bit while the
coefficient has not yet become significant (context split on whether any of
its 8 neighbors already is), then a refinement bit. The sign follows the
first significant bit. Four adaptive contexts total: significance with/
without a significant neighbor, sign, refinement.

The arithmetic layer is a carry-propagating binary range coder with 11-bit
adaptive probabilities (shift-5 update), all integer arithmetic, so encoder
output is bit-identical across the numba and pure-Python paths. A segment is
self-terminating given the grid geometry and its bitplane count; both travel
in the container, not here.

Worst-case output is under 6.1 bits per decision (probabilities are bounded
by the update rule), which the buffer sizing below over-provisions.
"""

import numpy as np

from . import accel
from .core import FormatError

_PROB_BITS = 11
_PROB_INIT = 1 << (_PROB_BITS - 1)
_MOVE_BITS = 5
_TOP = 1 << 24
_NCTX = 4
_CTX_SIG0, _CTX_SIG1, _CTX_SIGN, _CTX_REF = 0, 1, 2, 3


def _build_kernels(jit):
    prob_bits = _PROB_BITS
    prob_init = _PROB_INIT
    move_bits = _MOVE_BITS
    top = _TOP
    nctx = _NCTX

    @jit
    def encode_grid(mag, neg, nplanes, out):
        """Encode magnitude/sign grids; returns bytes written."""
        h, w = mag.shape
        probs = np.full(nctx, prob_init, dtype=np.int64)
        sig = np.zeros((h, w), dtype=np.uint8)
        low = np.int64(0)
        rng = np.int64(0xFFFFFFFF)
        cache = np.int64(0)
        cache_size = np.int64(1)
        pos = np.int64(0)
        for p in range(nplanes - 1, -1, -1):
            for r in range(h):
                for c in range(w):
                    if sig[r, c]:
                        ctx = 3
                        bit = (mag[r, c] >> p) & 1
                    else:
                        ctx = 0
                        r0 = r - 1 if r > 0 else 0
                        r1 = r + 1 if r + 1 < h else h - 1
                        c0 = c - 1 if c > 0 else 0
                        c1 = c + 1 if c + 1 < w else w - 1
                        for rr in range(r0, r1 + 1):
                            for cc in range(c0, c1 + 1):
                                if sig[rr, cc]:
                                    ctx = 1
                        bit = (mag[r, c] >> p) & 1
                    # --- encode bit under probs[ctx]
                    bound = (rng >> prob_bits) * probs[ctx]
                    if bit == 0:
                        rng = bound
                        probs[ctx] += ((1 << prob_bits) - probs[ctx]) >> move_bits
                    else:
                        low += bound
                        rng -= bound
                        probs[ctx] -= probs[ctx] >> move_bits
                    while rng < top:
                        if low < 0xFF000000 or low > 0xFFFFFFFF:
                            carry = low >> 32
                            out[pos] = np.uint8(cache + carry)
                            pos += 1
                            while cache_size > 1:
                                out[pos] = np.uint8(0xFF & (0xFF + carry))
                                pos += 1
                                cache_size -= 1
                            cache = (low >> 24) & 0xFF
                        else:
                            cache_size += 1
                        low = (low << 8) & 0xFFFFFFFF
                        rng <<= 8
                    # --- sign and state on first significance
                    if ctx < 2 and bit == 1:
                        sig[r, c] = 1
                        sbit = neg[r, c]
                        bound = (rng >> prob_bits) * probs[2]
                        if sbit == 0:
                            rng = bound
                            probs[2] += ((1 << prob_bits) - probs[2]) >> move_bits
                        else:
                            low += bound
                            rng -= bound
                            probs[2] -= probs[2] >> move_bits
                        while rng < top:
                            if low < 0xFF000000 or low > 0xFFFFFFFF:
                                carry = low >> 32
                                out[pos] = np.uint8(cache + carry)
                                pos += 1
                                while cache_size > 1:
                                    out[pos] = np.uint8(0xFF & (0xFF + carry))
                                    pos += 1
                                    cache_size -= 1
                                cache = (low >> 24) & 0xFF
                            else:
                                cache_size += 1
                            low = (low << 8) & 0xFFFFFFFF
                            rng <<= 8
        for _ in range(5):
            if low < 0xFF000000 or low > 0xFFFFFFFF:
                carry = low >> 32
                out[pos] = np.uint8(cache + carry)
                pos += 1
                while cache_size > 1:
                    out[pos] = np.uint8(0xFF & (0xFF + carry))
                    pos += 1
                    cache_size -= 1
                cache = (low >> 24) & 0xFF
            else:
                cache_size += 1
            low = (low << 8) & 0xFFFFFFFF
        return pos

    @jit
    def decode_grid(data, h, w, nplanes, q):
        """Decode into q (int32, (h, w)); returns bytes consumed."""
        probs = np.full(nctx, prob_init, dtype=np.int64)
        sig = np.zeros((h, w), dtype=np.uint8)
        mag = np.zeros((h, w), dtype=np.int64)
        neg = np.zeros((h, w), dtype=np.uint8)
        n = data.shape[0]
        rng = np.int64(0xFFFFFFFF)
        code = np.int64(0)
        pos = np.int64(1)           # first byte is the encoder's zero cache
        for _ in range(4):
            byte = np.int64(data[pos]) if pos < n else np.int64(0)
            code = (code << 8) | byte
            pos += 1
        for p in range(nplanes - 1, -1, -1):
            for r in range(h):
                for c in range(w):
                    if sig[r, c]:
                        ctx = 3
                    else:
                        ctx = 0
                        r0 = r - 1 if r > 0 else 0
                        r1 = r + 1 if r + 1 < h else h - 1
                        c0 = c - 1 if c > 0 else 0
                        c1 = c + 1 if c + 1 < w else w - 1
                        for rr in range(r0, r1 + 1):
                            for cc in range(c0, c1 + 1):
                                if sig[rr, cc]:
                                    ctx = 1
                    bound = (rng >> prob_bits) * probs[ctx]
                    if code < bound:
                        bit = 0
                        rng = bound
                        probs[ctx] += ((1 << prob_bits) - probs[ctx]) >> move_bits
                    else:
                        bit = 1
                        code -= bound
                        rng -= bound
                        probs[ctx] -= probs[ctx] >> move_bits
                    while rng < top:
                        byte = np.int64(data[pos]) if pos < n else np.int64(0)
                        code = ((code << 8) | byte) & 0xFFFFFFFF
                        pos += 1
                        rng <<= 8
                    if bit:
                        mag[r, c] |= np.int64(1) << p
                    if ctx < 2 and bit == 1:
                        sig[r, c] = 1
                        bound = (rng >> prob_bits) * probs[2]
                        if code < bound:
                            sbit = 0
                            rng = bound
                            probs[2] += ((1 << prob_bits) - probs[2]) >> move_bits
                        else:
                            sbit = 1
                            code -= bound
                            rng -= bound
                            probs[2] -= probs[2] >> move_bits
                        while rng < top:
                            byte = np.int64(data[pos]) if pos < n else np.int64(0)
                            code = ((code << 8) | byte) & 0xFFFFFFFF
                            pos += 1
                            rng <<= 8
                        neg[r, c] = np.uint8(sbit)
        for r in range(h):
            for c in range(w):
                q[r, c] = np.int32(-mag[r, c] if neg[r, c] else mag[r, c])
        return pos

    return encode_grid, decode_grid


_py_encode, _py_decode = _build_kernels(lambda f: f)
_nb_encode = _nb_decode = None
if accel.HAVE_NUMBA:
    _nb_encode, _nb_decode = _build_kernels(accel.jit_compiler())


def _impl():
    if accel.numba_enabled():
        return _nb_encode, _nb_decode
    return _py_encode, _py_decode


def bitplane_count(q: np.ndarray) -> int:
    m = int(np.abs(q).max(initial=0))
    return m.bit_length()


def entropy_encode(q: np.ndarray) -> bytes:
    """Encode one integer grid; returns the self-contained segment payload.

    Empty grids produce an empty payload; an all-zero grid is just the
    (externally stored) zero bitplane count, so its payload is empty too.
    """
    q = np.ascontiguousarray(q, dtype=np.int32)
    if q.ndim != 2:
        raise ValueError("entropy_encode expects a 2-D grid")
    h, w = q.shape
    if h == 0 or w == 0:
        return b""
    nplanes = bitplane_count(q)
    if nplanes == 0:
        return b""
    mag = np.abs(q).astype(np.int64)
    neg = (q < 0).astype(np.uint8)
    out = np.empty(64 + h * w * (nplanes + 2), dtype=np.uint8)
    encode, _ = _impl()
    written = encode(mag, neg, nplanes, out)
    return out[:int(written)].tobytes()


def entropy_decode(payload: bytes, shape, nplanes: int) -> np.ndarray:
    """Inverse of entropy_encode given the grid shape and bitplane count."""
    h, w = shape
    q = np.zeros((h, w), dtype=np.int32)
    if h == 0 or w == 0 or nplanes == 0:
        return q
    data = np.frombuffer(payload, dtype=np.uint8)
    _, decode = _impl()
    consumed = decode(data, h, w, nplanes, q)
    if int(consumed) > data.shape[0] + 4:
        raise FormatError(
            f"entropy segment truncated at byte {data.shape[0]}")
    return q
