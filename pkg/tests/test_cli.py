"""CLI contract tests: exit codes, reports, artifact generation."""

import json

import numpy as np
import pytest

from rhoraw import cli
from rhoraw.bayer import BayerRaw, RgbImage
from rhoraw.fileio import read_braw, read_ppm, write_braw, write_ppm
from rhoraw.rawstats import synth_night_raw_image

from conftest import make_meta, random_raw


def run_cli(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


@pytest.fixture
def braw_file(tmp_path, rng):
    path = tmp_path / "img.braw"
    write_braw(path, random_raw(rng, 32, 32))
    return path


@pytest.fixture
def smooth_braw_file(tmp_path):
    meta = make_meta()
    yy, xx = np.mgrid[0:64, 0:64]
    wave = (np.sin(xx / 9.0) + np.sin(yy / 11.0) + 2.0) / 4.0
    samples = (meta.black_lev + wave * meta.span * 0.9).astype(np.uint16)
    path = tmp_path / "smooth.braw"
    write_braw(path, BayerRaw(meta=meta, samples=samples))
    return path


class TestRoundtripCommand:
    def test_reports_lossless(self, capsys, braw_file):
        before = braw_file.read_bytes()
        code, out, _ = run_cli(capsys, "roundtrip", "--in", str(braw_file))
        assert code == 0
        report = json.loads(out)
        assert report["lossless"] is True
        assert report["bpp"] > 0
        assert braw_file.read_bytes() == before  # inputs are never mutated

    def test_missing_file_is_data_error(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "roundtrip", "--in", str(tmp_path / "no.braw"))
        assert code == 3
        assert "error" in err

    def test_unknown_flag_is_usage_error(self, capsys, braw_file):
        with pytest.raises(SystemExit) as exc:
            cli.main(["roundtrip", "--in", str(braw_file), "--bogus"])
        assert exc.value.code == 2


class TestEncodeDecodeCommands:
    def test_encode_then_decode(self, capsys, tmp_path, braw_file):
        ric_path = tmp_path / "img.ric"
        out_path = tmp_path / "round.braw"
        code, out, _ = run_cli(capsys, "encode", "--in", str(braw_file), "--out", str(ric_path))
        assert code == 0 and ric_path.exists()
        code, out, _ = run_cli(
            capsys, "decode", "--in", str(ric_path), "--out", str(out_path)
        )
        assert code == 0
        np.testing.assert_array_equal(
            read_braw(out_path).samples, read_braw(braw_file).samples
        )

    def test_preview_dims_quarter_at_scale_2(self, capsys, tmp_path, braw_file):
        ric_path = tmp_path / "img.ric"
        run_cli(capsys, "encode", "--in", str(braw_file), "--out", str(ric_path))
        preview = tmp_path / "p.ppm"
        code, out, _ = run_cli(
            capsys, "decode", "--in", str(ric_path), "--scale", "2",
            "--preview", str(preview),
        )
        assert code == 0
        img = read_ppm(preview)
        # planes are 16x16 at full scale; quarter per side at scale 2.
        assert (img.width, img.height) == (4, 4)


class TestAnalyzeCommand:
    def test_gamma_report_on_u_shaped_image(self, capsys, tmp_path):
        meta = make_meta()
        image = synth_night_raw_image(256, 256, seed=3)
        samples = (meta.black_lev + image * meta.span).astype(np.uint16)
        path = tmp_path / "u.braw"
        write_braw(path, BayerRaw(meta=meta, samples=samples))
        code, out, _ = run_cli(capsys, "analyze", "--in", str(path), "--gamma")
        assert code == 0
        report = json.loads(out)
        assert report["k_before"] > report["k_after"]

    def test_plain_fit(self, capsys, braw_file):
        # 32x32 image needs patch size 2 to reach the 100-patch minimum.
        code, out, _ = run_cli(capsys, "analyze", "--in", str(braw_file), "--patch-size", "2")
        assert code == 0
        assert "k" in json.loads(out)


class TestBnsimCommand:
    def test_writes_csv(self, capsys, tmp_path):
        out_csv = tmp_path / "bn.csv"
        code, out, _ = run_cli(
            capsys, "bnsim", "--k", "0..4", "--k-step", "2",
            "--batches", "50", "--repeats", "20", "--out", str(out_csv),
        )
        assert code == 0
        lines = out_csv.read_text().strip().splitlines()
        assert lines[0] == "k,var_ybn_over_a2"
        assert len(lines) == 4  # header + k in {0, 2, 4}


class TestLossesCommand:
    def test_json_report(self, capsys, tmp_path, rng):
        a, b = tmp_path / "a.ppm", tmp_path / "b.ppm"
        pixels = rng.random((8, 8, 3)) * 0.5
        write_ppm(a, RgbImage(pixels=pixels))
        write_ppm(b, RgbImage(pixels=pixels + 0.1))
        latents = tmp_path / "latents.json"
        latents.write_text(json.dumps(
            {"theta1": 1.0, "phi1": 0.5, "theta2": 0.0, "phi2": 0.0,
             "d_real": 0.8, "d_fake": 0.3}
        ))
        code, out, _ = run_cli(
            capsys, "losses", "--a", str(a), "--b", str(b), "--latents", str(latents)
        )
        assert code == 0
        report = json.loads(out)
        assert report["cycle"] == pytest.approx(0.1, abs=2e-4)
        assert report["var"] < 0
        assert report["adv_discriminator"] == pytest.approx(0.13)


class TestInvispCommands:
    def test_invisp_generates_n_files(self, capsys, tmp_path, rng):
        ppm = tmp_path / "in.ppm"
        write_ppm(ppm, RgbImage(pixels=rng.random((16, 16, 3))))
        out_dir = tmp_path / "sim"
        code, out, _ = run_cli(
            capsys, "invisp", "--in", str(ppm), "--n", "3", "--seed", "11",
            "--out-dir", str(out_dir),
        )
        assert code == 0
        assert len(list(out_dir.glob("*.braw"))) == 3
        manifest = json.loads((out_dir / "manifest.json").read_text())
        assert len(manifest["entries"]) == 3

    def test_simraw_batch(self, capsys, tmp_path, rng):
        in_dir = tmp_path / "in"
        in_dir.mkdir()
        write_ppm(in_dir / "x.ppm", RgbImage(pixels=rng.random((8, 8, 3))))
        code, out, _ = run_cli(
            capsys, "simraw", "--in-dir", str(in_dir), "--out-dir",
            str(tmp_path / "out"), "--n-per-image", "2", "--seed", "4",
        )
        assert code == 0
        assert len(json.loads(out)["entries"]) == 2


class TestIspCommand:
    def test_forward_isp_writes_ppm(self, capsys, tmp_path, braw_file):
        out = tmp_path / "img.ppm"
        code, _, _ = run_cli(capsys, "isp", "--in", str(braw_file), "--out", str(out), "--auto")
        assert code == 0
        img = read_ppm(out)
        assert (img.width, img.height) == (32, 32)


class TestSelftestCommand:
    def test_passes_and_is_deterministic(self, capsys):
        code1, out1, err1 = run_cli(capsys, "--seed", "5", "selftest")
        code2, out2, err2 = run_cli(capsys, "--seed", "5", "selftest")
        assert code1 == code2 == 0
        assert out1 == out2
        assert "[PASS]" in err1

    def test_corrupted_table_fails_loudly(self, capsys, monkeypatch):
        from rhoraw import selftest as st

        bad = st.SIGMOID_Q16.copy()
        bad[100:200] = bad[100:200][::-1]  # break monotonicity
        monkeypatch.setattr(st, "SIGMOID_TABLE", bad)
        report = st.run_selftest(seed=0)
        assert not report["passed"]
        failed = [c for c in report["checks"] if not c["passed"]]
        assert any(c["name"] == "pmf_normalization" for c in failed)


class TestReportOutput:
    def test_report_to_file(self, capsys, tmp_path, braw_file):
        report_path = tmp_path / "report.json"
        code, out, _ = run_cli(
            capsys, "--report", str(report_path), "roundtrip", "--in", str(braw_file)
        )
        assert code == 0
        assert out == ""
        assert json.loads(report_path.read_text())["lossless"] is True

    def test_human_rendering(self, capsys, braw_file):
        code, out, _ = run_cli(capsys, "--human", "roundtrip", "--in", str(braw_file))
        assert code == 0
        assert "lossless: True" in out
