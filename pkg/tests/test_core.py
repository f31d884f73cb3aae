import numpy as np
import pytest

from msfacomp import (FormatError, MsfaError, SpectralCube, ValidationError,
                      load_cube, store_cube, symmetric_eigendecomposition)
from msfacomp.core import fix_eigenvector_signs

from conftest import FIG8, random_cube


class TestEigendecomposition:
    def test_identity(self):
        ev, v = symmetric_eigendecomposition(np.eye(3))
        assert np.allclose(ev, [1, 1, 1])
        assert np.array_equal(v, np.eye(3))

    def test_2x2_closed_form(self):
        ev, v = symmetric_eigendecomposition(np.array([[1.0, 0.5],
                                                       [0.5, 1.0]]))
        assert np.allclose(ev, [1.5, 0.5], atol=1e-12)
        r = 1 / np.sqrt(2)
        assert np.allclose(v[0], [r, r], atol=1e-12)
        assert np.allclose(v[1], [r, -r], atol=1e-12)

    def test_4x4_markov_matrix_vs_lapack(self):
        # the 2x2-pattern model matrix: independent LAPACK oracle for values
        rho_d, rho_f = 0.95, 0.995
        d = np.array([[0, 1, 1, np.sqrt(2)],
                      [1, 0, np.sqrt(2), 1],
                      [1, np.sqrt(2), 0, 1],
                      [np.sqrt(2), 1, 1, 0]])
        f = np.abs(np.subtract.outer([0, 10, 20, 30], [0, 10, 20, 30]))
        m = (rho_f ** f) * (rho_d ** d)
        ev, v = symmetric_eigendecomposition(m)
        oracle = np.sort(np.linalg.eigvalsh(m))[::-1]
        assert np.abs(ev - oracle).max() < 1e-9
        assert np.abs(v.T @ np.diag(ev) @ v - m).max() < 1e-9

    @pytest.mark.parametrize("n", [1, 2, 5, 16, 32])
    def test_reconstruction_random_psd(self, n):
        rng = np.random.default_rng(n)
        for _ in range(5):
            b = rng.standard_normal((n, n))
            m = b @ b.T / n
            ev, v = symmetric_eigendecomposition(m)
            assert np.abs(v.T @ np.diag(ev) @ v - m).max() < 1e-9
            assert np.all(np.diff(ev) <= 1e-12)
            assert np.abs(v @ v.T - np.eye(n)).max() < 1e-9

    def test_sign_convention(self):
        rows = np.array([[0.6, -0.8], [-0.8, -0.6]])
        fixed = fix_eigenvector_signs(rows)
        assert fixed[0, 1] > 0          # largest-magnitude entry positive
        assert fixed[1, 0] > 0

    def test_deterministic(self):
        rng = np.random.default_rng(7)
        b = rng.standard_normal((9, 9))
        m = b @ b.T
        ev1, v1 = symmetric_eigendecomposition(m)
        ev2, v2 = symmetric_eigendecomposition(m.copy())
        assert np.array_equal(ev1, ev2)
        assert np.array_equal(v1, v2)

    def test_rejects_non_symmetric(self):
        with pytest.raises(ValidationError):
            symmetric_eigendecomposition(np.array([[1.0, 2.0], [0.0, 1.0]]))


class TestCubeValidation:
    def test_wavelengths_must_increase(self):
        with pytest.raises(ValidationError):
            SpectralCube(samples=np.zeros((2, 2, 2), dtype=np.uint16),
                         wavelengths=[500.0, 450.0], bit_depth=12)

    def test_sample_range(self):
        with pytest.raises(ValidationError):
            SpectralCube(samples=np.full((1, 1, 1), 300, dtype=np.uint16),
                         wavelengths=[500.0], bit_depth=8)

    def test_wavelength_count(self):
        with pytest.raises(ValidationError):
            SpectralCube(samples=np.zeros((2, 2, 2), dtype=np.uint16),
                         wavelengths=[500.0], bit_depth=12)


class TestCubeIO:
    def test_tiny_zero_cube_roundtrip(self, tmp_path):
        cube = SpectralCube(samples=np.zeros((1, 2, 2), dtype=np.uint16),
                            wavelengths=[550.0], bit_depth=8)
        path = tmp_path / "z.msc1"
        store_cube(cube, path)
        back = load_cube(path)
        assert back.bands == 1 and back.width == 2 and back.height == 2
        assert np.array_equal(back.samples, cube.samples)

    def test_fig8_wavelengths_recorded(self, tmp_path):
        rng = np.random.default_rng(1)
        cube = random_cube(rng, 16, 4, 4, wavelengths=np.array(FIG8, float))
        path = tmp_path / "f.msc1"
        store_cube(cube, path)
        assert np.array_equal(load_cube(path).wavelengths, FIG8)

    def test_random_cube_bit_exact(self, tmp_path):
        rng = np.random.default_rng(2)
        cube = random_cube(rng, 9, 17, 33, bit_depth=12)
        path = tmp_path / "r.msc1"
        store_cube(cube, path)
        back = load_cube(path)
        assert np.array_equal(back.samples, cube.samples)
        assert back.bit_depth == 12
        store_cube(back, tmp_path / "r2.msc1")
        assert (tmp_path / "r.msc1").read_bytes() == \
            (tmp_path / "r2.msc1").read_bytes()

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.msc1"
        path.write_bytes(b"NOPE" + b"\0" * 64)
        with pytest.raises(FormatError):
            load_cube(path)

    def test_truncated_planes(self, tmp_path):
        rng = np.random.default_rng(3)
        cube = random_cube(rng, 2, 8, 8)
        path = tmp_path / "t.msc1"
        store_cube(cube, path)
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(FormatError, match="truncated"):
            load_cube(path)

    def test_errors_are_msfa_errors(self):
        assert issubclass(FormatError, MsfaError)
        assert issubclass(ValidationError, MsfaError)
