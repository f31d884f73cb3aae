import json

import numpy as np
import pytest

from msfacomp import load_cube
from msfacomp.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture()
def small_cube_file(tmp_path, capsys):
    path = tmp_path / "cube.msc1"
    code, _, _ = run(capsys, "datagen", "--kind", "markov", "--out",
                     str(path), "--seed", "5", "--width", "64", "--height",
                     "64", "--wavelengths", "fig8")
    assert code == 0
    return path


class TestDatagen:
    def test_writes_cube(self, tmp_path, capsys):
        out = tmp_path / "c.msc1"
        code, _, err = run(capsys, "datagen", "--out", str(out), "--seed",
                           "1", "--width", "32", "--height", "16",
                           "--wavelengths", "fig8-9band")
        assert code == 0
        assert "wrote" in err
        cube = load_cube(out)
        assert cube.bands == 9 and cube.width == 32 and cube.height == 16

    def test_deterministic(self, tmp_path, capsys):
        a, b = tmp_path / "a.msc1", tmp_path / "b.msc1"
        for out in (a, b):
            run(capsys, "datagen", "--out", str(out), "--seed", "3",
                "--width", "16", "--height", "16", "--wavelengths",
                "ricefield16")
        assert a.read_bytes() == b.read_bytes()

    def test_edges_kind(self, tmp_path, capsys):
        out = tmp_path / "e.msc1"
        code, _, _ = run(capsys, "datagen", "--kind", "edges", "--out",
                         str(out), "--seed", "2", "--width", "32",
                         "--height", "32", "--wavelengths", "fig8")
        assert code == 0
        assert load_cube(out).bands == 16


class TestEncodeDecode:
    def test_roundtrip_reports_dpsnr(self, small_cube_file, tmp_path, capsys):
        stream = tmp_path / "s.mscj"
        code, _, err = run(capsys, "encode", "--mode", "ebi-fixed", "--in",
                           str(small_cube_file), "--pattern", "dither4x4",
                           "--rate", "1.0", "--out", str(stream))
        assert code == 0, err
        assert stream.exists()
        dec = tmp_path / "dec.msc1"
        code, out, err = run(capsys, "decode", "--in", str(stream), "--out",
                             str(dec), "--ref", str(small_cube_file))
        assert code == 0, err
        assert "dpsnr_db=" in out and "opsnr_db=" in out
        assert load_cube(dec).bands == 16

    def test_eai_and_direct_roundtrip(self, small_cube_file, tmp_path,
                                      capsys):
        for mode in ("eai", "direct"):
            stream = tmp_path / f"{mode}.mscj"
            code, _, err = run(capsys, "encode", "--mode", mode, "--in",
                               str(small_cube_file), "--pattern",
                               "dither4x4", "--rate", "2.0", "--out",
                               str(stream))
            assert code == 0, err
            dec = tmp_path / f"{mode}.msc1"
            code, _, err = run(capsys, "decode", "--in", str(stream),
                               "--out", str(dec))
            assert code == 0, err

    def test_infeasible_rate_exit_2(self, small_cube_file, tmp_path, capsys):
        code, _, err = run(capsys, "encode", "--mode", "ebi-fixed", "--in",
                           str(small_cube_file), "--pattern", "dither4x4",
                           "--rate", "0.001", "--out",
                           str(tmp_path / "x.mscj"))
        assert code == 2
        assert err.startswith("msfa: rate:")
        assert not (tmp_path / "x.mscj").exists()     # no partial output


class TestInspect:
    def test_header_dump(self, small_cube_file, tmp_path, capsys):
        stream = tmp_path / "s.mscj"
        run(capsys, "encode", "--mode", "ebi-klt", "--in",
            str(small_cube_file), "--pattern", "raster4x4", "--rate", "1.0",
            "--out", str(stream))
        code, out, _ = run(capsys, "inspect", "--in", str(stream))
        assert code == 0
        info = json.loads(out)
        assert info["mode"] == "ebi_klt"
        assert info["pattern_kind"] == "raster"
        assert info["bands"] == 16


class TestAnalyze:
    def test_coding_gain_matches_published(self, capsys):
        code, out, _ = run(capsys, "analyze", "coding-gain", "--pattern",
                           "raster4x4", "--wavelengths", "fig8", "--rho-f",
                           "0.995", "--rho-d", "0.95")
        assert code == 0
        assert abs(float(out.strip()) - 9.441) <= 0.02

    def test_rho_estimates(self, small_cube_file, capsys):
        code, out, _ = run(capsys, "analyze", "rho", "--in",
                           str(small_cube_file))
        assert code == 0
        assert "rho_d=" in out and "rho_f=" in out

    def test_export_fixed_transform(self, tmp_path, capsys):
        out_path = tmp_path / "t.json"
        code, _, _ = run(capsys, "analyze", "export-transform", "--kind",
                         "fixed", "--pattern", "dither4x4", "--wavelengths",
                         "fig8", "--out", str(out_path))
        assert code == 0
        d = json.loads(out_path.read_text())
        assert d["order"] == 16 and d["kind"] == "fixed"
        m = np.asarray(d["rows"])
        assert np.abs(m @ m.T - np.eye(16)).max() < 1e-9

    def test_compare_corr(self, small_cube_file, capsys):
        code, out, _ = run(capsys, "analyze", "compare-corr", "--in",
                           str(small_cube_file), "--pattern", "dither4x4")
        assert code == 0
        assert "mse=" in out and "pearson=" in out

    def test_encode_with_imported_transform(self, small_cube_file, tmp_path,
                                            capsys):
        tpath = tmp_path / "t.json"
        run(capsys, "analyze", "export-transform", "--kind", "fixed",
            "--pattern", "dither4x4", "--wavelengths", "fig8", "--out",
            str(tpath))
        stream = tmp_path / "s.mscj"
        code, _, err = run(capsys, "encode", "--mode", "ebi-fixed", "--in",
                           str(small_cube_file), "--pattern", "dither4x4",
                           "--rate", "1.0", "--transform", str(tpath),
                           "--out", str(stream))
        assert code == 0, err
        code, out, _ = run(capsys, "inspect", "--in", str(stream))
        assert json.loads(out)["transform"] == "fixed"


class TestSweep:
    def test_csv_written_and_reproducible(self, small_cube_file, tmp_path,
                                          capsys):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for out in (a, b):
            code, _, err = run(capsys, "sweep", "--in", str(small_cube_file),
                               "--pattern", "dither4x4", "--modes",
                               "ebi_fixed,direct", "--rates", "1.0,2.0",
                               "--out", str(out), "--no-timing")
            assert code == 0, err
        assert a.read_bytes() == b.read_bytes()
        text = a.read_text()
        lines = text.strip().splitlines()
        assert lines[0] == "mode,target_bpppb,achieved_bpppb,dpsnr_db," \
                           "opsnr_db,wall_ms"
        assert len(lines) == 5
        assert ",inf," in text      # lossless points use the inf literal


class TestErrors:
    def test_unknown_flag_exit_1(self, capsys):
        code, _, err = run(capsys, "datagen", "--no-such-flag")
        assert code == 1
        assert "usage" in err

    def test_missing_file_exit_2(self, tmp_path, capsys):
        code, _, err = run(capsys, "analyze", "rho", "--in",
                           str(tmp_path / "absent.msc1"))
        assert code == 2
        assert err.startswith("msfa: data:")

    def test_bad_cube_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.msc1"
        bad.write_bytes(b"garbage")
        code, _, err = run(capsys, "analyze", "rho", "--in", str(bad))
        assert code == 2
        assert err.startswith("msfa: data:")


class TestConfig:
    def test_config_file_provides_defaults(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"width": 16, "height": 16,
                                   "wavelengths": "fig8", "seed": 9}))
        out = tmp_path / "c.msc1"
        code, _, _ = run(capsys, "--config", str(cfg), "datagen", "--out",
                         str(out))
        assert code == 0
        cube = load_cube(out)
        assert cube.width == 16 and cube.height == 16

    def test_explicit_flag_wins(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"width": 16, "height": 16,
                                   "wavelengths": "fig8", "seed": 9}))
        out = tmp_path / "c.msc1"
        code, _, _ = run(capsys, "--config", str(cfg), "datagen", "--out",
                         str(out), "--width", "32")
        assert code == 0
        assert load_cube(out).width == 32
