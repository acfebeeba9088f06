import numpy as np
import pytest

from wafergpt.data import LabeledSequence
from wafergpt.errors import InvalidProfile, MissingManifest, SpecOutOfBounds
from wafergpt.faults import (
    FAULT_KINDS, FaultSpec, TraceProfile, clean_trace, cvd_replica, default_fault_specs,
    generate_normal, inject_fault, read_manifest, write_manifest,
)

PROFILE = TraceProfile()


def _host():
    return generate_normal(PROFILE, 1, seed=7)[0]


def test_generate_sizes():
    seqs = generate_normal(TraceProfile(seq_len=53), 9)
    assert len(seqs) == 9
    assert all(len(s.values) == 53 and s.label == "normal" for s in seqs)


def test_generate_deterministic():
    a = generate_normal(PROFILE, 3, seed=4)
    b = generate_normal(PROFILE, 3, seed=4)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.values, y.values)


def test_generate_seed_changes_noise():
    a = generate_normal(PROFILE, 1, seed=4)[0].values
    b = generate_normal(PROFILE, 1, seed=5)[0].values
    assert not np.array_equal(a, b)


def test_clean_trace_shape():
    x = clean_trace(PROFILE)
    assert x[0] == 0.0 and x[-1] == 0.0
    assert np.all(x[PROFILE.hold] == PROFILE.setpoint)


def test_invalid_profile():
    with pytest.raises(InvalidProfile):
        generate_normal(TraceProfile(ramp_len=40), 1)
    with pytest.raises(InvalidProfile):
        generate_normal(PROFILE, 0)


def test_micro_arcing_scale():
    host = _host()
    T = PROFILE.seq_len
    bad = inject_fault(host, FaultSpec("MicroArcing", 0.015, T // 2), PROFILE)
    np.testing.assert_array_equal(bad.values[:T // 2], host.values[:T // 2])
    np.testing.assert_allclose(bad.values[T // 2:], 0.985 * host.values[T // 2:], rtol=0, atol=1e-15)


def test_peripheral_point_single_index():
    host = _host()
    bad = inject_fault(host, FaultSpec("PeripheralPoint", 0.05, 30), PROFILE)
    assert np.nonzero(bad.values != host.values)[0].tolist() == [30]


def test_bias_shifts_hold_mean():
    host = _host()
    h = PROFILE.hold
    bad = inject_fault(host, FaultSpec("Bias", 0.05, h.start), PROFILE)
    shift = bad.values[h].mean() - host.values[h].mean()
    assert shift == pytest.approx(0.05 * PROFILE.setpoint, abs=1e-12)


@pytest.mark.parametrize("kind", FAULT_KINDS)
def test_fault_label_and_id(kind):
    spec = next(s for s in default_fault_specs(PROFILE) if s.kind == kind)
    bad = inject_fault(_host(), spec, PROFILE)
    assert bad.label == "abnormal" and bad.id.endswith(kind)
    assert not np.array_equal(bad.values, _host().values)


@pytest.mark.parametrize("kind", ["TemporaryChange", "SinusoidalDisturbance", "OutletValveLeak",
                                  "NoiseDisturbance"])
def test_windowed_faults_stay_local(kind):
    host = _host()
    spec = FaultSpec(kind, 0.03, 20, 8, seed=1)
    diff = np.nonzero(inject_fault(host, spec, PROFILE).values != host.values)[0]
    assert diff.min() >= 20 and diff.max() < 28


@pytest.mark.parametrize("kind", FAULT_KINDS)
def test_deviation_grows_with_magnitude(kind):
    host = _host()
    dev = [np.abs(inject_fault(host, FaultSpec(kind, m, 12, 20, seed=2), PROFILE).values - host.values).max()
           for m in (0.01, 0.02, 0.04)]
    assert dev[0] < dev[1] < dev[2]


def test_spec_bounds():
    host = _host()
    with pytest.raises(SpecOutOfBounds):
        inject_fault(host, FaultSpec("Bias", 0.06, 10), PROFILE)
    with pytest.raises(SpecOutOfBounds):
        inject_fault(host, FaultSpec("TemporaryChange", 0.01, 50, 10), PROFILE)
    with pytest.raises(SpecOutOfBounds):
        inject_fault(host, FaultSpec("Unknown", 0.01, 10), PROFILE)
    with pytest.raises(SpecOutOfBounds):
        inject_fault(LabeledSequence("x", np.ones(10), None), FaultSpec("Bias", 0.01, 5), PROFILE)


def test_replica_sizes_and_manifest(tmp_path):
    rep = cvd_replica(seed=1)
    assert rep.train.n == 9 and rep.test.n == 567 + 8
    assert rep.test.label_counts() == {"normal": 567, "abnormal": 8, None: 0}
    assert [f["kind"] for f in rep.manifest["faults"]] == list(FAULT_KINDS)
    assert {f["id"] for f in rep.manifest["faults"]} <= set(rep.test.ids)
    write_manifest(rep.manifest, tmp_path / "m.json")
    assert read_manifest(tmp_path / "m.json") == rep.manifest
    with pytest.raises(MissingManifest):
        read_manifest(tmp_path / "absent.json")


def test_replica_deterministic():
    a, b = cvd_replica(seed=2), cvd_replica(seed=2)
    np.testing.assert_array_equal(a.test.values(), b.test.values())
    np.testing.assert_array_equal(a.train.values(), b.train.values())
