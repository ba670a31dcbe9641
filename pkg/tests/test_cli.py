import numpy as np
import pytest

from evrecover.cli import build_parser, main
from evrecover.formats import (DatasetLayout, read_events, read_image, write_image,
                               write_kernels)
from evrecover.sparse import dct_bank


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def toy(tmp_path_factory):
    """Sharp frames, their events and the averaged blurry frame."""
    root = tmp_path_factory.mktemp("toy")
    assert main(["sample", str(root / "frames"), "--count", "17", "--size", "32"]) == 0
    assert main(["simulate", "--input", str(root / "frames"), "--out", str(root / "ev.txt"),
                 "--blur", str(root / "blur.png")]) == 0
    return root


def test_sample_writes_frames(toy):
    names = sorted(p.name for p in (toy / "frames").iterdir())
    assert len(names) == 17 and names[0] == "frame_000000.png"


def test_simulate_outputs(toy):
    ev = read_events(toy / "ev.txt")
    assert ev.shape == (32, 32)
    assert len(ev) > 0
    assert ev.duration == pytest.approx(16 / 960)
    assert read_image(toy / "blur.png").shape == (32, 32)


def test_reconstruct_edi(toy, tmp_path, capsys):
    out = tmp_path / "rec.png"
    code, _, err = run(capsys, "reconstruct", "--method", "edi", "--image", toy / "blur.png",
                       "--events", toy / "ev.txt", "--out", out)
    assert code == 0
    assert out.exists()
    assert read_image(out).shape == (32, 32)
    assert "method = edi" in err


def test_reconstruct_esl_with_exports(toy, tmp_path, capsys):
    write_kernels(tmp_path / "bank.txt", dct_bank())
    code, _, _ = run(capsys, "reconstruct", "--image", toy / "blur.png", "--events",
                     toy / "ev.txt", "--out", tmp_path / "hr.png", "--dict", tmp_path / "bank.txt",
                     "--scale", "2", "--time", "0.5", "--export-bins", tmp_path / "bins.npy",
                     "--bins", "4", "--export-integral", tmp_path / "E.txt",
                     "--figure", tmp_path / "fig.png")
    assert code == 0
    assert read_image(tmp_path / "hr.png").shape == (64, 64)
    assert np.load(tmp_path / "bins.npy").shape == (9, 32, 32)
    E = np.loadtxt(tmp_path / "E.txt")
    assert E.shape == (32, 32) and E.min() > 0
    assert (tmp_path / "fig.png").stat().st_size > 0


def test_unknown_flag_prints_usage(capsys):
    with pytest.raises(SystemExit) as info:
        main(["reconstruct", "--no-such-flag"])
    assert info.value.code != 0
    assert "usage:" in capsys.readouterr().err


def test_missing_required(capsys):
    code, _, err = run(capsys, "reconstruct", "--method", "edi")
    assert code == 2
    assert "--image" in err


def test_bad_input_is_one_line_error(tmp_path, capsys):
    (tmp_path / "ev.txt").write_text("# window 0 1\n# sensor 2 2\n0.5 0 0 7\n")
    write_image(tmp_path / "y.png", np.zeros((2, 2)))
    code, _, err = run(capsys, "reconstruct", "--image", tmp_path / "y.png", "--events",
                       tmp_path / "ev.txt", "--out", tmp_path / "o.png")
    assert code == 1
    diag = [l for l in err.splitlines() if "error" in l]
    assert len(diag) == 1 and "ev.txt:3" in diag[0]


def test_video(toy, tmp_path, capsys):
    code, _, _ = run(capsys, "video", "--method", "edi", "--image", toy / "blur.png",
                     "--events", toy / "ev.txt", "--out", tmp_path / "vid", "--frames", "21",
                     "--figure", tmp_path / "montage.png")
    assert code == 0
    frames = sorted((tmp_path / "vid").glob("frame_*.png"))
    assert len(frames) == 21
    stamps = np.loadtxt(tmp_path / "vid" / "timestamps.txt")
    np.testing.assert_allclose(stamps[:, 1], np.arange(21) * (16 / 960) / 20, atol=1e-12)
    assert (tmp_path / "montage.png").exists()


def degrade_run(capsys, frames, out, *extra):
    return run(capsys, "degrade", "--input", frames, "--out", out, "--scale", "2", *extra)


def test_degrade_recipe(toy, tmp_path, capsys):
    assert degrade_run(capsys, toy / "frames", tmp_path / "noisy", "--sigma", "4",
                       "--noise-events", "0.3", "--seed", "5")[0] == 0
    assert degrade_run(capsys, toy / "frames", tmp_path / "clean", "--sigma", "0",
                       "--noise-events", "0", "--seed", "5")[0] == 0
    noisy, clean = DatasetLayout(tmp_path / "noisy"), DatasetLayout(tmp_path / "clean")
    assert noisy.indices() == [0]
    hr, lr, blur, ev = noisy.read_sample(0)
    _, lr0, blur0, ev0 = clean.read_sample(0)
    assert hr.shape == (32, 32) and lr.shape == blur.shape == (16, 16)
    np.testing.assert_array_equal(lr, lr0)
    assert len(ev) == len(ev0) + int(0.3 * len(ev0))
    # 8-bit quantization adds ~1/sqrt(12) LSB of error on top of sigma = 4
    assert (blur - blur0).std() * 255 == pytest.approx(4.0, rel=0.2)


def dataset_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.is_file()}


def test_degrade_is_deterministic(toy, tmp_path, capsys):
    for name, seed in [("a", 3), ("b", 3), ("c", 4)]:
        assert degrade_run(capsys, toy / "frames", tmp_path / name, "--seed", seed)[0] == 0
    a, b, c = (dataset_bytes(tmp_path / n) for n in "abc")
    assert a == b
    assert a != c


def test_config_precedence(toy, tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# defaults for this run\nmethod = edi\ntime = 0.5\nlambda =\n")
    base = ["reconstruct", "--config", cfg, "--image", toy / "blur.png", "--events",
            toy / "ev.txt", "--out", tmp_path / "o.png"]
    code, _, err = run(capsys, *base)
    assert code == 0
    assert "method = edi" in err and "time = 0.5" in err and "lambda = 0.01" in err
    code, _, err = run(capsys, *base, "--time", "0.25")
    assert "time = 0.25" in err
    cfg.write_text("colour = blue\n")
    code, _, err = run(capsys, *base)
    assert code == 1 and "colour" in err


def test_evaluate(toy, tmp_path, capsys):
    ref = toy / "frames"
    pred = tmp_path / "pred"
    pred.mkdir()
    for i, f in enumerate(sorted(ref.iterdir())):
        img = read_image(f)
        write_image(pred / f.name, img if i % 2 == 0 else np.clip(img + 0.1, 0, 1))
    code, out, _ = run(capsys, "evaluate", "--pred", pred, "--ref", ref, "--range", "2:4",
                       "--figure", tmp_path / "metrics.png")
    assert code == 0
    lines = [l.split("\t") for l in out.strip().splitlines()]
    assert lines[0] == ["frame", "psnr", "ssim"]
    assert [l[0] for l in lines[1:]] == ["2", "3", "4", "mean"]
    assert float(lines[2][1]) == 99.0 and float(lines[2][2]) == 1.0
    assert float(lines[1][1]) < 40
    assert (tmp_path / "metrics.png").exists()


def test_same_arguments_same_bytes(toy, tmp_path, capsys):
    outs = []
    for name in ["x", "y"]:
        run(capsys, "simulate", "--input", toy / "frames", "--out", tmp_path / f"{name}.txt",
            "--noise-events", "0.3", "--seed", "9")
        outs.append((tmp_path / f"{name}.txt").read_bytes())
    assert outs[0] == outs[1]


def test_every_command_has_help():
    parser = build_parser()
    for cmd in ["sample", "simulate", "degrade", "reconstruct", "video", "evaluate"]:
        with pytest.raises(SystemExit) as info:
            parser.parse_args([cmd, "--help"])
        assert info.value.code == 0
