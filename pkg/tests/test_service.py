import numpy as np
import pytest
from fastapi.testclient import TestClient

from helpers import textured_frame
from vsrkit import Frame, Sequence
from vsrkit.pngio import read_frame_dir, write_frame_dir
from vsrkit.service import create_app


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


@pytest.fixture
def hr_dir(tmp_path, rng):
    d = tmp_path / "hr"
    seq = Sequence(tuple(textured_frame(s, h=32, w=32) for s in range(3)))
    write_frame_dir(d, seq, bit_depth=16)
    return d


def test_health(client):
    r = client.get("/health")
    assert r.status_code == 200
    body = r.json()
    assert body["status"] == "ok"


def test_degrade_endpoint(client, hr_dir, tmp_path):
    out = tmp_path / "lr"
    r = client.post(
        "/degrade",
        json={
            "input_dir": str(hr_dir),
            "output_dir": str(out),
            "config": {"scale": "2", "degrade.kernel": "gaussian:1.2", "seed": "5"},
        },
    )
    assert r.status_code == 200
    body = r.json()
    assert body["frames_written"] == 3
    assert body["seed"] == 5
    assert body["resolved_config"]["scale"] == "2"
    seq = read_frame_dir(out)
    assert seq[0].shape == (16, 16, 3)
    assert (out / "run.cfg").is_file()
    assert (out / "kernel.txt").is_file()


def test_estimate_kernel_endpoint(client, hr_dir, tmp_path):
    lr = tmp_path / "lrp"
    r = client.post(
        "/degrade",
        json={
            "input_dir": str(hr_dir),
            "output_dir": str(lr),
            "config": {"scale": "2", "degrade.kernel": "gaussian:1.0", "png_bits": "16"},
        },
    )
    assert r.status_code == 200
    pairs = tmp_path / "pairs"
    (pairs / "hr").mkdir(parents=True)
    (pairs / "lr").mkdir()
    for f in hr_dir.glob("*.png"):
        (pairs / "hr" / f.name).write_bytes(f.read_bytes())
    for f in lr.glob("*.png"):
        (pairs / "lr" / f.name).write_bytes(f.read_bytes())
    r = client.post(
        "/estimate-kernel",
        json={
            "pairs_dir": str(pairs),
            "output_kernel_path": str(tmp_path / "est.txt"),
            "config": {"scale": "2", "estimator.max_iters": "40"},
        },
    )
    assert r.status_code == 200
    body = r.json()
    assert body["best_loss"] <= body["initial_loss"]
    assert (tmp_path / "est.txt").is_file()
    csv_lines = open(body["loss_csv_path"]).read().splitlines()
    assert csv_lines[0] == "iteration,objective"
    assert len(csv_lines) == body["iterations"] + 2

    # kernel-accuracy against the same pairs
    r = client.post(
        "/kernel-accuracy",
        json={
            "hr_dir": str(pairs / "hr"),
            "lr_dir": str(pairs / "lr"),
            "kernel_path": str(tmp_path / "est.txt"),
            "scale": 2,
        },
    )
    assert r.status_code == 200
    assert r.json()["summary_psnr_db"] > 30.0


def test_superresolve_endpoint(client, tmp_path, rng):
    lr_dir = tmp_path / "in"
    seq = Sequence(tuple(textured_frame(70 + s, h=16, w=16) for s in range(2)))
    write_frame_dir(lr_dir, seq)
    out = tmp_path / "sr"
    r = client.post(
        "/superresolve",
        json={
            "input_dir": str(lr_dir),
            "output_dir": str(out),
            "config": {"scale": "2", "estimator.max_iters": "10"},
        },
    )
    assert r.status_code == 200
    body = r.json()
    assert body["frames_written"] == 2
    sr = read_frame_dir(out)
    assert sr[0].shape == (32, 32, 3)
    assert (out / "kernel.txt").is_file()
    assert (out / "run.log").is_file()


def test_evaluate_endpoint_identical(client, hr_dir):
    r = client.post("/evaluate", json={"pred_dir": str(hr_dir), "truth_dir": str(hr_dir)})
    assert r.status_code == 200
    body = r.json()
    assert body["summary_psnr_db"] is None  # infinite PSNR sentinel on the wire
    assert body["summary_ssim"] == 1.0
    assert body["csv"].splitlines()[-1] == "summary,inf,1.000000"


def test_evaluate_count_mismatch(client, hr_dir, tmp_path, rng):
    other = tmp_path / "other"
    write_frame_dir(other, Sequence((Frame(rng.random((32, 32, 3))),)))
    r = client.post("/evaluate", json={"pred_dir": str(hr_dir), "truth_dir": str(other)})
    assert r.status_code == 400
    assert r.json()["detail"]["kind"] == "io"


def test_config_error_payload(client, hr_dir, tmp_path):
    r = client.post(
        "/degrade",
        json={
            "input_dir": str(hr_dir),
            "output_dir": str(tmp_path / "x"),
            "config": {"bogus": "1"},
        },
    )
    assert r.status_code == 400
    detail = r.json()["detail"]
    assert detail["kind"] == "config"
    assert "bogus" in detail["message"]


def test_io_error_payload(client, tmp_path):
    r = client.post(
        "/degrade",
        json={"input_dir": str(tmp_path / "absent"), "output_dir": str(tmp_path / "y")},
    )
    assert r.status_code == 400
    assert r.json()["detail"]["kind"] == "io"
