"""Mosaicked multispectral image compression toolkit."""

__version__ = "0.1.0"

from .core import (MsfaError, ValidationError, FormatError, StatisticsError,
                   RateError, SpectralCube, SpectralTransform,
                   symmetric_eigendecomposition, load_cube, store_cube)
from .msfa import (MsfaPattern, MosaickedImage, PseudoMsi, build_pattern,
                   mosaic, structure_convert, inverse_convert,
                   filter_geometry)
from .spectral import (MarkovParams, sample_correlation, klt_from_data,
                       spectral_corr_matrix, spatial_corr_matrix,
                       fixed_corr_matrix, fixed_transform, apply_transform,
                       invert_transform, coding_gain, pattern_coding_gain,
                       estimate_rho_d, estimate_rho_f, compare_correlations)
from .dwt import dwt_forward, dwt_inverse, SubbandSet
from .codec import (quantize, dequantize, encode_stream, decode_stream,
                    inspect_header, allocate_rate)
from .entropy import entropy_encode, entropy_decode
from .demosaic import demosaic, demosaic_bilinear, demosaic_band_difference
from .datagen import generate_markov_cube, generate_edge_cube
from .pipeline import (RdPoint, psnr, run_eai, run_ebi, run_direct, rd_sweep,
                       points_to_csv, select_bands, crop_to_blocks)
