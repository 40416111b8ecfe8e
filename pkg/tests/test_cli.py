"""End-to-end CLI tests through cli.main()."""

import json

import numpy as np
import pytest

from conftest import random_image
from uwie import imgio
from uwie.cli import main


def write_png(path, img):
    path.parent.mkdir(parents=True, exist_ok=True)
    imgio.save_png(img, path)


def quantized(img):
    """The image as it survives an 8-bit PNG round trip."""
    return np.clip(np.floor(img * 255.0 + 0.5), 0, 255) / 255.0


@pytest.fixture
def weight_dir(tmp_path):
    d = tmp_path / "wts"
    assert main(["weights", "init", str(d), "--seed", "7", "--channel-width", "4"]) == 0
    return d


class TestEnhance:
    def test_fpp_only_constant_identity(self, tmp_path):
        img = np.full((3, 16, 16), 0.5)
        write_png(tmp_path / "in" / "flat.png", img)
        out = tmp_path / "out"
        code = main(
            ["enhance", str(tmp_path / "in" / "flat.png"), str(out), "--fpp-only",
             "--lambda-bem", "0.5"]
        )
        assert code == 0
        result = imgio.load_image(out / "flat.png")
        np.testing.assert_array_equal(result, quantized(img))

    def test_mode_required(self, tmp_path, capsys):
        write_png(tmp_path / "in" / "a.png", random_image(1))
        assert main(["enhance", str(tmp_path / "in"), str(tmp_path / "out")]) == 1
        assert "fpp-only" in capsys.readouterr().err

    def test_both_modes_rejected(self, tmp_path, weight_dir):
        write_png(tmp_path / "in" / "a.png", random_image(2))
        code = main(
            ["enhance", str(tmp_path / "in"), str(tmp_path / "out"),
             "--fpp-only", "--weights", str(weight_dir)]
        )
        assert code == 1

    def test_network_mode_pads_and_crops(self, tmp_path, weight_dir):
        img = random_image(3, h=20, w=28)
        write_png(tmp_path / "in" / "odd.png", img)
        out = tmp_path / "out"
        code = main(["enhance", str(tmp_path / "in"), str(out), "--weights", str(weight_dir)])
        assert code == 0
        assert imgio.load_image(out / "odd.png").shape == (3, 20, 28)

    def test_seeded_runs_byte_identical(self, tmp_path, weight_dir):
        for i in range(3):
            write_png(tmp_path / "in" / f"img{i}.png", random_image(10 + i, h=16, w=16))
        out1, out2 = tmp_path / "o1", tmp_path / "o2"
        args = ["enhance", str(tmp_path / "in"), None, "--weights", str(weight_dir), "--seed", "7"]
        for out in (out1, out2):
            args[2] = str(out)
            assert main(args) == 0
        for i in range(3):
            name = f"img{i}.png"
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_parallelism_matches_serial(self, tmp_path, weight_dir):
        for i in range(4):
            write_png(tmp_path / "in" / f"img{i}.png", random_image(20 + i, h=16, w=16))
        serial, parallel = tmp_path / "s", tmp_path / "p"
        base = ["enhance", str(tmp_path / "in"), None, "--weights", str(weight_dir), "--seed", "3"]
        base[2] = str(serial)
        assert main(base + ["--jobs", "1"]) == 0
        base[2] = str(parallel)
        assert main(base + ["--jobs", "4"]) == 0
        for i in range(4):
            name = f"img{i}.png"
            assert (serial / name).read_bytes() == (parallel / name).read_bytes()

    def test_sidecar_sorted_entries(self, tmp_path):
        for name in ("zeta", "alpha", "mid"):
            write_png(tmp_path / "in" / f"{name}.png", random_image(5, h=16, w=16))
        out = tmp_path / "out"
        assert main(["enhance", str(tmp_path / "in"), str(out), "--fpp-only", "--jobs", "3"]) == 0
        sidecar = json.loads((out / "enhance_report.json").read_text())
        assert [e["image"] for e in sidecar["images"]] == ["alpha.png", "mid.png", "zeta.png"]
        assert all(e["status"] == "ok" for e in sidecar["images"])
        assert all("seconds" in e for e in sidecar["images"])
        assert sidecar["config"]["fpp"]["lambda_bem"] == 0.5

    def test_unreadable_file_recorded(self, tmp_path, capsys):
        write_png(tmp_path / "in" / "good.png", random_image(6, h=16, w=16))
        (tmp_path / "in" / "bad.png").write_text("this is not a png")
        out = tmp_path / "out"
        code = main(["enhance", str(tmp_path / "in"), str(out), "--fpp-only"])
        assert code == 1
        assert (out / "good.png").exists()
        sidecar = json.loads((out / "enhance_report.json").read_text())
        statuses = {e["image"]: e["status"] for e in sidecar["images"]}
        assert statuses["good.png"] == "ok"
        assert statuses["bad.png"].startswith("error")


class TestEvaluate:
    def make_pairs(self, tmp_path, n=4):
        test_dir, ref_dir = tmp_path / "test", tmp_path / "ref"
        for i in range(n):
            img = random_image(30 + i, h=16, w=16)
            write_png(test_dir / f"img{i}.png", img)
            write_png(ref_dir / f"img{i}.png", img)
        return test_dir, ref_dir

    def test_identical_pairs_aggregate(self, tmp_path):
        test_dir, ref_dir = self.make_pairs(tmp_path)
        out = tmp_path / "report.csv"
        code = main(
            ["evaluate", str(test_dir), "--ref", str(ref_dir),
             "--metrics", "psnr,ssim", "-o", str(out)]
        )
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "image,psnr,ssim"
        assert len(lines) == 6  # header + 4 rows + aggregate
        agg = lines[-1].split(",")
        assert agg[0] == "AGGREGATE"
        assert float(agg[1]) == 100.0
        assert float(agg[2]) == pytest.approx(1.0, abs=1e-9)

    def test_csv_roundtrip_aggregate(self, tmp_path):
        test_dir, _ = self.make_pairs(tmp_path)
        out = tmp_path / "report.csv"
        assert main(["evaluate", str(test_dir), "--metrics", "uiqm,uciqe", "-o", str(out)]) == 0
        lines = out.read_text().splitlines()
        rows = [line.split(",") for line in lines[1:-1]]
        agg = lines[-1].split(",")
        for col in (1, 2):
            recomputed = np.mean([float(r[col]) for r in rows])
            assert float(agg[col]) == pytest.approx(recomputed, abs=1e-9)

    def test_gray_images_score_zero(self, tmp_path):
        test_dir = tmp_path / "gray"
        for i in range(3):
            write_png(test_dir / f"g{i}.png", np.full((3, 16, 16), 0.5))
        out = tmp_path / "report.csv"
        assert main(["evaluate", str(test_dir), "--metrics", "uiqm", "-o", str(out)]) == 0
        lines = out.read_text().splitlines()
        for line in lines[1:]:
            assert float(line.split(",")[1]) == pytest.approx(0.0, abs=1e-9)

    def test_unpairable_goes_to_stderr(self, tmp_path, capsys):
        test_dir, ref_dir = self.make_pairs(tmp_path, n=3)
        write_png(test_dir / "lonely.png", random_image(40, h=16, w=16))
        out = tmp_path / "report.csv"
        code = main(
            ["evaluate", str(test_dir), "--ref", str(ref_dir), "--metrics", "psnr",
             "-o", str(out)]
        )
        assert code == 1  # a skipped unit of work fails the run
        err = capsys.readouterr().err
        assert "lonely" in err
        body = out.read_text()
        assert "lonely" not in body
        assert len(body.splitlines()) == 5  # header + 3 rows + aggregate

    def test_empty_dir_fails(self, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert main(["evaluate", str(empty)]) == 1

    def test_json_format(self, tmp_path):
        test_dir, _ = self.make_pairs(tmp_path, n=2)
        out = tmp_path / "report.json"
        assert main(
            ["evaluate", str(test_dir), "--metrics", "uiqm,uciqe", "--format", "json",
             "-o", str(out)]
        ) == 0
        payload = json.loads(out.read_text())
        assert [row["image"] for row in payload["rows"]] == ["img0", "img1"]
        assert set(payload["aggregate"]) == {"uiqm", "uciqe"}
        assert any("opponent-space" in note for note in payload["notes"])

    def test_determinism_and_jobs(self, tmp_path):
        test_dir, ref_dir = self.make_pairs(tmp_path)
        outs = []
        for jobs in ("1", "4", "1"):
            out = tmp_path / f"report{len(outs)}.csv"
            assert main(
                ["evaluate", str(test_dir), "--ref", str(ref_dir), "-o", str(out),
                 "--jobs", jobs]
            ) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1] == outs[2]


class TestGradcheck:
    def test_report_written(self, tmp_path):
        write_png(tmp_path / "img.png", random_image(50, h=16, w=16, lo=0.1, hi=0.9))
        out = tmp_path / "grad.json"
        code = main(
            ["gradcheck", str(tmp_path / "img.png"), "--component", "coi",
             "--samples", "4", "-o", str(out)]
        )
        assert code == 0
        payload = json.loads(out.read_text())
        assert payload["finite"] is True
        diag = [payload["angle_matrix"][i][i] for i in range(3)]
        assert all(d is None or abs(d - 1.0) < 1e-9 for d in diag)

    def test_zero_weight_override_zeroes_gradients(self, tmp_path):
        write_png(tmp_path / "img.png", random_image(51, h=16, w=16, lo=0.1, hi=0.9))
        config = tmp_path / "zero.json"
        config.write_text(json.dumps({"c1": 0.0, "c2": 0.0, "c3": 0.0}))
        out = tmp_path / "grad.json"
        code = main(
            ["gradcheck", str(tmp_path / "img.png"), "--component", "abl",
             "--samples", "3", "--config", str(config), "-o", str(out)]
        )
        assert code == 0
        payload = json.loads(out.read_text())
        assert np.array(payload["gradients_h1"]).max() == 0.0
        assert np.array(payload["gradients_h2"]).max() == 0.0

    def test_degenerate_image_fails(self, tmp_path, capsys):
        write_png(tmp_path / "black.png", np.zeros((3, 8, 8)))
        assert main(["gradcheck", str(tmp_path / "black.png")]) == 1
        assert "interior" in capsys.readouterr().err

    def test_unknown_config_key_rejected(self, tmp_path, capsys):
        write_png(tmp_path / "img.png", random_image(52, h=16, w=16))
        config = tmp_path / "bad.json"
        config.write_text(json.dumps({"c1": 0.0, "mystery": 1}))
        assert main(["gradcheck", str(tmp_path / "img.png"), "--config", str(config)]) == 1
        assert "mystery" in capsys.readouterr().err


class TestWeights:
    def test_init_deterministic_checksum(self, tmp_path, capsys):
        assert main(["weights", "init", str(tmp_path / "a"), "--seed", "9",
                     "--channel-width", "4"]) == 0
        first = capsys.readouterr().out
        assert main(["weights", "init", str(tmp_path / "b"), "--seed", "9",
                     "--channel-width", "4"]) == 0
        second = capsys.readouterr().out
        sha1 = [l for l in first.splitlines() if "sha256" in l]
        sha2 = [l for l in second.splitlines() if "sha256" in l]
        assert sha1 == sha2

    def test_inspect_lists_paper_width_shapes(self, tmp_path, capsys):
        assert main(["weights", "init", str(tmp_path / "w"), "--channel-width", "64"]) == 0
        capsys.readouterr()
        assert main(["weights", "inspect", str(tmp_path / "w")]) == 0
        out = capsys.readouterr().out
        assert "channel_width 64" in out
        assert "enc1.conv1.weight  shape=[64, 3, 3, 3]" in out
        assert "enc2.conv2.weight  shape=[64, 64, 3, 3]" in out
        assert "head.conv.weight  shape=[3, 128, 3, 3]" in out

    def test_inspect_truncated_payload_fails(self, tmp_path, capsys):
        d = tmp_path / "w"
        assert main(["weights", "init", str(d), "--channel-width", "4"]) == 0
        capsys.readouterr()
        payload = d / "weights.bin"
        payload.write_bytes(payload.read_bytes()[:100])
        assert main(["weights", "inspect", str(d)]) == 1
        err = capsys.readouterr().err
        assert "enc1" in err  # names the first tensor that no longer fits


class TestStats:
    def test_breakdown_printed(self, tmp_path, capsys):
        write_png(tmp_path / "img.png", random_image(60, h=16, w=16))
        assert main(["stats", str(tmp_path / "img.png"), "--blocks", "4x4"]) == 0
        payload = json.loads(capsys.readouterr().out)
        for key in ("color", "sharpness", "contrast", "score", "chroma_shift", "chroma_spread"):
            assert key in payload
        assert payload["config"]["eme_blocks"] == [4, 4]
        assert payload["score"] == pytest.approx(
            0.029 * payload["color"]
            + 0.295 * payload["sharpness"]
            + 3.550 * payload["contrast"],
            abs=1e-12,
        )

    def test_config_precedence(self, tmp_path, capsys):
        write_png(tmp_path / "img.png", random_image(61, h=16, w=16))
        config = tmp_path / "conf.json"
        config.write_text(json.dumps({"trim": 0.2, "alpha": 2.0}))
        assert main(
            ["stats", str(tmp_path / "img.png"), "--config", str(config), "--alpha", "3.0"]
        ) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["config"]["trim"] == 0.2  # from file
        assert payload["config"]["alpha"] == 3.0  # flag wins
