import numpy as np
import pytest

from msfacomp import ValidationError, dwt_forward, dwt_inverse
from msfacomp import accel
from msfacomp.codec import subband_shapes


class TestPerfectReconstruction:
    @pytest.mark.parametrize("shape", [(1, 1), (1, 17), (16, 1), (2, 2),
                                       (3, 3), (5, 64), (37, 29), (64, 64),
                                       (63, 61)])
    @pytest.mark.parametrize("levels", [1, 3, 5])
    def test_roundtrip(self, shape, levels):
        rng = np.random.default_rng(shape[0] * 100 + shape[1] + levels)
        plane = rng.uniform(-2048, 2048, shape)
        bands = dwt_forward(plane, levels)
        back = dwt_inverse(bands)
        assert np.abs(back - plane).max() < 1e-6

    def test_levels_validated(self):
        with pytest.raises(ValidationError):
            dwt_forward(np.zeros((4, 4)), 0)


class TestDcBehavior:
    def test_constant_plane(self):
        for levels in (1, 2, 3):
            bands = dwt_forward(np.full((32, 32), 7.0), levels)
            assert bands.ll == pytest.approx(7.0 * 2 ** levels, abs=1e-9)
            for lh, hl, hh in bands.details:
                for arr in (lh, hl, hh):
                    assert np.abs(arr).max() < 1e-9

    def test_impulse_linearity(self):
        plane = np.zeros((16, 16))
        plane[7, 4] = 1.0
        bands = dwt_forward(plane, 2)
        back = dwt_inverse(bands)
        assert np.abs(back - plane).max() < 1e-6


class TestGeometry:
    @pytest.mark.parametrize("shape,levels", [((37, 29), 3), ((64, 64), 5),
                                              ((5, 9), 2), ((1, 7), 1)])
    def test_subband_shapes_match(self, shape, levels):
        rng = np.random.default_rng(0)
        bands = dwt_forward(rng.random(shape), levels)
        expect = subband_shapes(*shape, levels)
        got = [arr.shape for (_, _, arr) in bands.iter_subbands()]
        assert got == expect


class TestDualPath:
    def test_paths_bit_identical(self):
        if not accel.HAVE_NUMBA:
            pytest.skip("numba unavailable")
        rng = np.random.default_rng(5)
        plane = rng.uniform(-100, 100, (37, 29))
        try:
            accel.set_numba(True)
            a = dwt_forward(plane, 3)
            ra = dwt_inverse(a)
            accel.set_numba(False)
            b = dwt_forward(plane, 3)
            rb = dwt_inverse(b)
        finally:
            accel.set_numba(True)
        assert np.array_equal(a.ll, b.ll)
        for (x, y) in zip(a.details, b.details):
            for u, v in zip(x, y):
                assert np.array_equal(u, v)
        assert np.array_equal(ra, rb)
