import math
from pathlib import Path

import numpy as np
import pytest

import edrkit

DATA = Path(__file__).resolve().parents[2] / "tests" / "data"


def test_synth_ecg_shapes():
    rec = edrkit.synth_ecg(duration_s=60, resp_rate=18, seed=3)
    assert rec["sample_rate"] == 120.0
    assert sorted(rec["leads"]) == ["I", "II", "III", "V"]
    assert rec["leads"]["II"].shape == (7200,)
    assert np.all(rec["rr_truth"] == 18.0)


def test_accept_label_boundaries():
    assert edrkit.accept_label(12, 15, 18, 1.5) == (True, "none")
    ok, reason = edrkit.accept_label(10, 15, 20, 1.0)
    assert not ok and reason == "spread"


def test_statistics():
    assert edrkit.student_t_sf(1.0, 1.0) == pytest.approx(0.25, abs=1e-12)
    r = edrkit.one_sample_ttest([1.1, 1.2, 1.3])
    assert r["t"] == pytest.approx(2 * math.sqrt(3), rel=1e-12)
    assert r["p"] == pytest.approx(0.0742, abs=1e-4)
    assert edrkit.one_sample_ttest([1.0, 1.0]) is None
    assert edrkit.resp_failure(7.4, 95, 40) is True
    assert edrkit.resp_failure(None, 95, 40) is None


def test_model_accounting_and_prediction(tmp_path):
    assert edrkit.count_layers("paper") == 60
    assert edrkit.count_params("desk") == 44641
    m = edrkit.Model("desk", seed=1)
    x = np.random.default_rng(0).standard_normal((2, m.input_length)).astype(np.float32)
    y = m.predict(x)
    assert len(y) == 2 and all(np.isfinite(y))
    m.save(tmp_path / "ckpt")
    back = edrkit.Model.load(tmp_path / "ckpt")
    assert back.predict(x) == y


def test_gradcheck_and_errors():
    err, _, checked = edrkit.grad_check("tiny", 2)
    assert checked > 0 and err < 1e-4
    with pytest.raises(edrkit.PrerequisiteError):
        edrkit.Model.load("/nonexistent/checkpoint")


def test_external_record():
    rec = edrkit.read_wfdb(DATA / "ext212.hea")
    assert rec["sample_rate"] == 250.0
    assert rec["leads"]["II"].shape == (1500,)
