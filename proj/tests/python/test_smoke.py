import json
import math
from pathlib import Path

import numpy as np
import pytest

import qpat

ROOT = Path(__file__).resolve().parents[2]


def test_version():
    assert qpat.__version__ == "0.1.0"


def test_h_of_g_closed_form_and_inverse():
    for g in (0.0, 0.3, 0.8):
        h = qpat.h_of_g(g, 2)
        assert h == pytest.approx((1 + g * g) / (math.pi * (1 - g * g)), rel=1e-14)
        assert qpat.invert_h(h, 2) == pytest.approx(g, abs=1e-12)
    assert qpat.h_of_g(0.0, 3) == pytest.approx(0.25, rel=1e-14)


def test_hg_phase_normalised():
    lam = np.cos(np.linspace(0, 2 * np.pi, 4001)[:-1])
    vals = [qpat.hg_phase(x, 0.6, 0.8, 2) for x in lam]
    assert np.mean(vals) * 2 * np.pi == pytest.approx(0.8, rel=1e-10)
    with pytest.raises(ValueError):
        qpat.hg_phase(0.0, 1.0, 1.0, 2)


def test_pgrid_round_trip(tmp_path):
    a = np.array([[0.25, -0.0], [1e-300, 3.0 / 7.0]])
    p = tmp_path / "a.pgrid"
    qpat.write_pgrid(str(p), a, [-1.0, 1.0, -1.0, 1.0])
    back, extent = qpat.read_pgrid(str(p))
    assert back.shape == (2, 2)
    assert back.tobytes() == a.tobytes()
    assert extent == [-1.0, 1.0, -1.0, 1.0]


def test_fnv1a():
    assert qpat.fnv1a(b"a") == 0xAF63DC4C8601EC8C


def test_forward_constant_is_positive_and_symmetric():
    r = qpat.forward_constant(0.5, 0.3, 0.0, cells=16, angles=16)
    h = r["H"]
    inside = h > 0
    assert inside.sum() > 100
    assert np.allclose(h, h.T, rtol=1e-6, atol=1e-12)
    assert r["integral"] > 0
    assert r["order_norms"][-1] < r["order_norms"][0]


def test_scattering_free_recovery():
    ts = np.linspace(0, 2, 500)
    sigma = qpat.sigma_a_scattering_free(ts, 0.7 * np.exp(-0.7 * ts), 2.0)
    assert np.max(np.abs(sigma - 0.7)) < 1e-6


def test_config_errors_have_lines():
    with pytest.raises(qpat.ConfigError, match="line 2"):
        qpat.check_config('{\n  "task": "teleport"\n}')


def test_run_selftest(tmp_path):
    code = qpat.run_experiment(str(ROOT / "configs" / "selftest.json"), str(tmp_path))
    assert code == 0
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["task"] == "selftest"
    assert {o["file"] for o in manifest["outputs"]} >= {"selftest.csv", "result.json"}


def test_run_missing_input_exits_2(tmp_path):
    assert qpat.run_experiment(str(ROOT / "configs" / "bad_missing_medium_file.json"), str(tmp_path)) == 2
