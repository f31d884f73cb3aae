import numpy as np
import pytest

from msfacomp import SpectralCube, build_pattern, generate_markov_cube

FIG8 = [424, 448, 469, 482, 500, 517, 535, 554, 566, 584, 602, 622,
        644, 666, 687, 720]


@pytest.fixture(scope="session")
def fig8():
    return list(FIG8)


@pytest.fixture(scope="session")
def small_markov_cube():
    """64x64x16 cube with the default Markov statistics."""
    return generate_markov_cube(64, 64, FIG8, 12, 0.95, 0.995, seed=11)


@pytest.fixture(scope="session")
def dither4(fig8):
    return build_pattern("dither", 4, fig8)


def random_cube(rng, bands, height, width, bit_depth=12, wavelengths=None):
    if wavelengths is None:
        wavelengths = 400.0 + 20.0 * np.arange(bands)
    peak = (1 << bit_depth) - 1
    samples = rng.integers(0, peak + 1, size=(bands, height, width),
                           dtype=np.uint16)
    return SpectralCube(samples=samples, wavelengths=wavelengths,
                        bit_depth=bit_depth)
