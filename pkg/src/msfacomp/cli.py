"""msfa command line tool.

Subcommands: datagen, encode, decode, analyze, sweep, inspect. Exit codes:
0 success, 1 usage error, 2 data/format error. Diagnostics go to stderr;
results go to files or stdout. Output files are written atomically.
"""

import argparse
import json
import sys

import numpy as np

from . import __version__
from .codec import decode_stream, inspect_header
from .core import MsfaError, RateError, atomic_write, load_cube, store_cube
from .datagen import generate_edge_cube, generate_markov_cube
from .demosaic import demosaic
from .msfa import MosaickedImage, MsfaPattern, build_pattern, mosaic
from .pipeline import (DEFAULT_RATES, crop_to_blocks, points_to_csv, psnr,
                       rd_sweep, select_bands)
from .spectral import (MarkovParams, estimate_rho_d, estimate_rho_f,
                       fixed_transform, klt_from_data, pattern_coding_gain,
                       sample_correlation, compare_correlations,
                       fixed_corr_matrix)

WAVELENGTH_SETS = {
    "fig8": [424, 448, 469, 482, 500, 517, 535, 554, 566, 584, 602, 622,
             644, 666, 687, 720],
    "fig8-9band": [424, 469, 500, 535, 566, 584, 622, 666, 720],
    "ricefield16": [545, 550, 556, 661, 665, 670, 675, 680, 725, 730, 735,
                    791, 796, 801, 805, 810],
}

PATTERN_NAMES = {
    "raster4x4": ("raster", 4), "zigzag4x4": ("zigzag", 4),
    "dither4x4": ("dither", 4), "raster3x3": ("raster", 3),
    "zigzag3x3": ("zigzag", 3), "dither3x3": ("dither", 3),
    "raster2x2": ("raster", 2), "dither2x2": ("dither", 2),
    "bayer": ("bayer", 2),
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"msfa: usage: {message}", file=sys.stderr)
        raise SystemExit(1)


def _wavelengths(spec: str) -> np.ndarray:
    if spec in WAVELENGTH_SETS:
        return np.asarray(WAVELENGTH_SETS[spec], dtype=np.float64)
    try:
        return np.asarray([float(x) for x in spec.split(",")])
    except ValueError:
        raise MsfaError(f"unknown wavelength set {spec!r}; built-ins: "
                        f"{', '.join(WAVELENGTH_SETS)}")


def _pattern(spec: str, wavelengths) -> MsfaPattern:
    if spec in PATTERN_NAMES:
        kind, block = PATTERN_NAMES[spec]
        return build_pattern(kind, block, wavelengths)
    return MsfaPattern.load(spec)


def _build_parser() -> _Parser:
    p = _Parser(prog="msfa", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--config", help="JSON file of flag defaults")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("datagen", help="generate a synthetic cube")
    d.add_argument("--kind", choices=("markov", "edges"), default="markov")
    d.add_argument("--out", required=True)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--width", type=int, default=512)
    d.add_argument("--height", type=int, default=512)
    d.add_argument("--wavelengths", default="fig8")
    d.add_argument("--bit-depth", type=int, default=12)
    d.add_argument("--rho-d", type=float, default=0.95)
    d.add_argument("--rho-f", type=float, default=0.995)

    e = sub.add_parser("encode", help="compress a cube")
    e.add_argument("--in", dest="infile", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--mode", required=True,
                   choices=("eai", "ebi-klt", "ebi-fixed", "direct"))
    e.add_argument("--pattern", required=True,
                   help="named pattern or pattern JSON file")
    e.add_argument("--rate", type=float, required=True, help="target bpppb")
    e.add_argument("--rho-d", type=float, default=0.95)
    e.add_argument("--rho-f", type=float, default=0.995)
    e.add_argument("--demosaic", choices=("bilinear", "banddiff"),
                   default="banddiff")
    e.add_argument("--band-subset", default=None,
                   help="wavelength set to select before coding")
    e.add_argument("--transform", default=None,
                   help="transform JSON to use instead of computing one "
                        "(ebi modes)")

    dec = sub.add_parser("decode", help="decompress to a cube")
    dec.add_argument("--in", dest="infile", required=True)
    dec.add_argument("--out", required=True)
    dec.add_argument("--ref", default=None,
                     help="original cube for PSNR reporting")
    dec.add_argument("--demosaic", choices=("bilinear", "banddiff"),
                     default="banddiff")

    i = sub.add_parser("inspect", help="dump a stream header")
    i.add_argument("--in", dest="infile", required=True)

    a = sub.add_parser("analyze", help="model and data analysis")
    asub = a.add_subparsers(dest="analysis", required=True)
    g = asub.add_parser("coding-gain",
                        help="coding gain of a pattern's model correlation")
    g.add_argument("--pattern", required=True)
    g.add_argument("--wavelengths", default=None)
    g.add_argument("--rho-f", type=float, default=0.995)
    g.add_argument("--rho-d", type=float, default=0.95)
    g.add_argument("--gap-unit-nm", type=float, default=10.0,
                   help="nm per exponent unit in the spectral model")
    g.add_argument("--wrap", action="store_true",
                   help="periodic-tiling filter distances")
    r = asub.add_parser("rho", help="estimate correlation coefficients")
    r.add_argument("--in", dest="infile", required=True)
    t = asub.add_parser("export-transform", help="write a transform as JSON")
    t.add_argument("--out", required=True)
    t.add_argument("--kind", choices=("fixed", "klt"), default="fixed")
    t.add_argument("--pattern", default=None)
    t.add_argument("--wavelengths", default=None)
    t.add_argument("--in", dest="infile", default=None,
                   help="cube for klt training or ebi klt")
    t.add_argument("--rho-f", type=float, default=0.995)
    t.add_argument("--rho-d", type=float, default=0.95)
    c = asub.add_parser("compare-corr",
                        help="empirical vs model correlation of a cube")
    c.add_argument("--in", dest="infile", required=True)
    c.add_argument("--pattern", required=True)
    c.add_argument("--wavelengths", default=None)
    c.add_argument("--rho-f", type=float, default=0.995)
    c.add_argument("--rho-d", type=float, default=0.95)

    s = sub.add_parser("sweep", help="rate-distortion sweep to CSV")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--pattern", required=True)
    s.add_argument("--modes", default="eai,ebi_klt,ebi_fixed,direct")
    s.add_argument("--rates", default=",".join(str(r) for r in DEFAULT_RATES))
    s.add_argument("--rho-d", type=float, default=0.95)
    s.add_argument("--rho-f", type=float, default=0.995)
    s.add_argument("--demosaic", choices=("bilinear", "banddiff"),
                   default="banddiff")
    s.add_argument("--band-subset", default=None)
    s.add_argument("--no-timing", action="store_true",
                   help="write wall_ms as 0 for reproducible output")
    s.add_argument("--plot", default=None, help="optional SVG plot path")
    return p


def _apply_config(parser, argv):
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    try:
        path = argv[idx + 1]
    except IndexError:
        raise MsfaError("--config needs a path")
    with open(path, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise MsfaError(f"{path}: config must be a JSON object")
    extra = []
    for key, value in cfg.items():
        flag = "--" + key.replace("_", "-")
        if flag in argv:
            continue
        if isinstance(value, bool):
            if value:
                extra.append(flag)
        else:
            extra.extend([flag, str(value)])
    # config-sourced flags go after the subcommand, before explicit ones
    for i, tok in enumerate(argv):
        if not tok.startswith("-") and tok != path:
            return argv[:i + 1] + extra + argv[i + 1:]
    return argv + extra


def _cmd_datagen(args) -> int:
    wl = _wavelengths(args.wavelengths)
    if args.kind == "markov":
        cube = generate_markov_cube(args.width, args.height, wl,
                                    args.bit_depth, args.rho_d, args.rho_f,
                                    args.seed)
    else:
        cube = generate_edge_cube(args.width, args.height, wl,
                                  args.bit_depth, args.seed)
    store_cube(cube, args.out)
    print(f"wrote {args.out}: {cube.bands}x{cube.height}x{cube.width} "
          f"@{cube.bit_depth}bit", file=sys.stderr)
    return 0


def _cmd_encode(args) -> int:
    cube = load_cube(args.infile)
    if args.band_subset:
        cube = select_bands(cube, _wavelengths(args.band_subset))
    pattern = _pattern(args.pattern, cube.wavelengths) \
        if args.pattern in PATTERN_NAMES else MsfaPattern.load(args.pattern)
    mode = args.mode.replace("-", "_")
    params = MarkovParams(rho_f=args.rho_f, rho_d=args.rho_d)
    from .codec import encode_stream
    from .msfa import structure_convert
    from .spectral import apply_transform
    cube = crop_to_blocks(cube, pattern)
    mos = mosaic(cube, pattern)
    mid = float(1 << (cube.bit_depth - 1))
    if mode == "eai":
        demo = demosaic(mos, args.demosaic)
        transform = klt_from_data(demo)
        planes = apply_transform(demo.samples.astype(np.float64) - mid,
                                 transform)
        levels = 5
    elif mode in ("ebi_klt", "ebi_fixed"):
        pm = structure_convert(mos)
        if args.transform:
            from .core import SpectralTransform
            with open(args.transform, "r", encoding="utf-8") as fh:
                transform = SpectralTransform.from_json_dict(json.load(fh))
            if transform.order != pm.bands:
                raise MsfaError(
                    f"transform order {transform.order} does not match "
                    f"{pm.bands} converted planes")
        elif mode == "ebi_klt":
            transform = klt_from_data(pm)
        else:
            transform = fixed_transform(pattern, params)
        planes = apply_transform(pm.planes.astype(np.float64) - mid,
                                 transform)
        levels = 3
    else:
        transform = None
        planes = [mos.samples.astype(np.float64) - mid]
        levels = 5
    data, bits, saturated = encode_stream(
        list(planes), mode, pattern, transform, cube.bit_depth, args.rate,
        full_pixels=mos.height * mos.width, levels=levels)
    atomic_write(args.out, data)
    achieved = bits / (mos.height * mos.width * pattern.bands)
    note = " (rate saturated)" if saturated else ""
    print(f"wrote {args.out}: {len(data)} bytes, "
          f"{achieved:.4f} bpppb{note}", file=sys.stderr)
    return 0


def _cmd_decode(args) -> int:
    with open(args.infile, "rb") as fh:
        data = fh.read()
    from .codec import deserialize_stream
    from .msfa import PseudoMsi, inverse_convert
    from .spectral import invert_transform
    planes, header = decode_stream(data)
    mid = float(1 << (header.bit_depth - 1))
    peak = (1 << header.bit_depth) - 1
    pattern = header.pattern
    if header.mode == "eai":
        x = invert_transform(planes, header.transform) + mid
        samples = np.clip(np.rint(x), 0, peak).astype(np.uint16)
        from .core import SpectralCube
        decoded = SpectralCube(samples=samples,
                               wavelengths=pattern.wavelengths,
                               bit_depth=header.bit_depth)
    else:
        if header.transform is not None:
            planes = invert_transform(planes, header.transform)
        if header.mode == "direct":
            dec = np.clip(np.rint(planes[0] + mid), 0, peak).astype(np.uint16)
        else:
            dec_planes = np.clip(np.rint(planes + mid), 0,
                                 peak).astype(np.uint16)
            dec = inverse_convert(PseudoMsi(planes=dec_planes,
                                            bit_depth=header.bit_depth,
                                            pattern=pattern)).samples
        mosd = MosaickedImage(samples=dec, bit_depth=header.bit_depth,
                              pattern=pattern)
        decoded = demosaic(mosd, args.demosaic)
    store_cube(decoded, args.out)
    print(f"wrote {args.out}", file=sys.stderr)
    if args.ref:
        ref = crop_to_blocks(load_cube(args.ref), pattern)
        demo_ref = demosaic(mosaic(ref, pattern), args.demosaic)
        print(f"dpsnr_db={psnr(demo_ref, decoded):.4f} "
              f"opsnr_db={psnr(ref, decoded):.4f}")
    return 0


def _cmd_inspect(args) -> int:
    with open(args.infile, "rb") as fh:
        data = fh.read()
    print(json.dumps(inspect_header(data), indent=2))
    return 0


def _cmd_analyze(args) -> int:
    if args.analysis == "coding-gain":
        wl = _wavelengths(args.wavelengths) if args.wavelengths else None
        if wl is None:
            raise MsfaError("coding-gain needs --wavelengths")
        pattern = _pattern(args.pattern, wl)
        params = MarkovParams(rho_f=args.rho_f, rho_d=args.rho_d)
        gain = pattern_coding_gain(pattern, params, wrap=args.wrap,
                                   gap_unit_nm=args.gap_unit_nm)
        print(f"{gain:.3f}")
        return 0
    if args.analysis == "rho":
        cube = load_cube(args.infile)
        print(f"rho_d={estimate_rho_d(cube):.4f}")
        print(f"rho_f={estimate_rho_f(cube):.4f}")
        return 0
    if args.analysis == "export-transform":
        if args.kind == "fixed":
            if not (args.pattern and args.wavelengths):
                raise MsfaError("fixed transform export needs --pattern "
                                "and --wavelengths")
            pattern = _pattern(args.pattern, _wavelengths(args.wavelengths))
            t = fixed_transform(pattern,
                                MarkovParams(rho_f=args.rho_f,
                                             rho_d=args.rho_d))
        else:
            if not args.infile:
                raise MsfaError("klt export needs --in cube")
            t = klt_from_data(load_cube(args.infile))
        atomic_write(args.out,
                     json.dumps(t.to_json_dict(), indent=2).encode())
        print(f"wrote {args.out}", file=sys.stderr)
        return 0
    if args.analysis == "compare-corr":
        cube = load_cube(args.infile)
        wl = _wavelengths(args.wavelengths) if args.wavelengths \
            else cube.wavelengths
        pattern = _pattern(args.pattern, wl)
        from .msfa import structure_convert
        pm = structure_convert(mosaic(crop_to_blocks(cube, pattern), pattern))
        empirical = sample_correlation(pm)
        params = MarkovParams(rho_f=args.rho_f, rho_d=args.rho_d)
        model = fixed_corr_matrix(pattern, params)
        mse, pearson = compare_correlations(empirical, model)
        print(f"mse={mse:.6f} pearson={pearson:.4f}")
        return 0
    raise MsfaError(f"unknown analysis {args.analysis!r}")


def _cmd_sweep(args) -> int:
    cube = load_cube(args.infile)
    if args.band_subset:
        cube = select_bands(cube, _wavelengths(args.band_subset))
    pattern = _pattern(args.pattern, cube.wavelengths) \
        if args.pattern in PATTERN_NAMES else MsfaPattern.load(args.pattern)
    modes = [m.strip().replace("-", "_") for m in args.modes.split(",") if m]
    rates = [float(r) for r in args.rates.split(",") if r]
    params = MarkovParams(rho_f=args.rho_f, rho_d=args.rho_d)
    points = rd_sweep(cube, pattern, modes, rates, params, args.demosaic)
    csv_text = points_to_csv(points, include_timing=not args.no_timing)
    atomic_write(args.out, csv_text.encode())
    print(f"wrote {args.out}: {len(points)} points", file=sys.stderr)
    if args.plot:
        _write_plot(points, args.plot)
        print(f"wrote {args.plot}", file=sys.stderr)
    return 0


def _write_plot(points, path) -> None:
    import matplotlib
    matplotlib.use("svg")
    import matplotlib.pyplot as plt
    fig, ax = plt.subplots(figsize=(6, 4))
    modes = sorted({p.mode for p in points})
    for mode in modes:
        pts = [p for p in points if p.mode == mode]
        xs = [p.achieved_bpppb for p in pts]
        ys = [p.dpsnr_db for p in pts]
        ax.plot(xs, ys, marker="o", label=mode)
    ax.set_xlabel("bit rate [bpppb]")
    ax.set_ylabel("DPSNR [dB]")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


_COMMANDS = {
    "datagen": _cmd_datagen,
    "encode": _cmd_encode,
    "decode": _cmd_decode,
    "inspect": _cmd_inspect,
    "analyze": _cmd_analyze,
    "sweep": _cmd_sweep,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        argv = _apply_config(parser, argv)
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else int(exc.code)
    except RateError as exc:
        print(f"msfa: rate: {exc}", file=sys.stderr)
        return 2
    except MsfaError as exc:
        print(f"msfa: data: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"msfa: data: missing file: {exc.filename}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
