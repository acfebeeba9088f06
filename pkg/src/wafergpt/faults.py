"""Synthetic MFC-style wafer traces and fault injection.

Normal traces ramp up linearly, hold at a setpoint with Gaussian noise and ramp
back down. Faults are applied on top of a clean trace; everything outside the
targeted window is copied through unchanged.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .data import ABNORMAL, NORMAL, Dataset, LabeledSequence
from .errors import InvalidProfile, MissingManifest, SpecOutOfBounds

FAULT_KINDS = (
    "Bias",
    "TemporaryChange",
    "NoiseDisturbance",
    "SinusoidalDisturbance",
    "PeripheralPoint",
    "MicroArcing",
    "InletValveLeak",
    "OutletValveLeak",
)
# kinds whose effect runs past start + duration
PERSISTENT_KINDS = ("Bias", "MicroArcing", "InletValveLeak")

MAX_MAGNITUDE = 0.05


@dataclass(frozen=True)
class TraceProfile:
    seq_len: int = 53
    ramp_len: int = 5
    setpoint: float = 1.0
    noise_sigma: float = 0.001
    seed: int = 0

    def validate(self):
        if self.seq_len < 3:
            raise InvalidProfile(f"seq_len must be >= 3, got {self.seq_len}")
        if not 0 < self.ramp_len < self.seq_len / 2:
            raise InvalidProfile(f"ramp_len must satisfy 0 < ramp_len < T/2, got {self.ramp_len}")
        if not self.setpoint > 0:
            raise InvalidProfile("setpoint must be positive")
        if not self.noise_sigma >= 0:
            raise InvalidProfile("noise_sigma must be >= 0")
        if self.seed < 0:
            raise InvalidProfile("seed must be unsigned")

    @property
    def hold(self) -> slice:
        return slice(self.ramp_len, self.seq_len - self.ramp_len)


@dataclass(frozen=True)
class FaultSpec:
    """One injected fault.

    ``magnitude`` is a fraction of the setpoint. ``sign`` flips the direction
    of the additive kinds (Bias, TemporaryChange, SinusoidalDisturbance,
    PeripheralPoint, OutletValveLeak); MicroArcing and InletValveLeak always
    pull the signal down and NoiseDisturbance is symmetric. ``cycles`` is the
    number of oscillations across the window and ``time_constant`` the decay
    length in steps (``None`` picks a third of the affected span).
    """

    kind: str
    magnitude: float
    start: int
    duration: int = 1
    seed: int = 0
    sign: int = 1
    cycles: float = 3.0
    time_constant: Optional[float] = None


def clean_trace(profile: TraceProfile) -> np.ndarray:
    profile.validate()
    T, k, sp = profile.seq_len, profile.ramp_len, profile.setpoint
    t = np.arange(T, dtype=np.float64)
    trace = np.full(T, sp)
    trace[:k] = sp * t[:k] / k
    trace[T - k:] = sp * (T - 1 - t[T - k:]) / k
    return trace


def generate_normal(profile: TraceProfile, n: int, seed: int = 0) -> list:
    """``n`` normal traces; identical ``(profile, seed)`` gives identical output."""
    profile.validate()
    if n < 1:
        raise InvalidProfile(f"n must be >= 1, got {n}")
    rng = np.random.default_rng([profile.seed, seed])
    base = clean_trace(profile)
    hold = profile.hold
    width = hold.stop - hold.start
    out = []
    for i in range(n):
        values = base.copy()
        values[hold] += rng.normal(0.0, profile.noise_sigma * profile.setpoint, width)
        out.append(LabeledSequence(f"normal-{seed}-{i}", values, NORMAL))
    return out


def _check_spec(spec: FaultSpec, T: int, max_magnitude: float):
    if spec.kind not in FAULT_KINDS:
        raise SpecOutOfBounds(f"unknown fault kind {spec.kind!r}")
    if not 0 < spec.magnitude <= max_magnitude:
        raise SpecOutOfBounds(f"magnitude {spec.magnitude} outside (0, {max_magnitude}]")
    if spec.start < 0 or spec.duration < 1 or spec.start + spec.duration > T:
        raise SpecOutOfBounds(f"window [{spec.start}, {spec.start + spec.duration}) outside [0, {T})")
    if spec.sign not in (-1, 1):
        raise SpecOutOfBounds("sign must be +1 or -1")
    if spec.time_constant is not None and not spec.time_constant > 0:
        raise SpecOutOfBounds("time_constant must be positive")


def inject_fault(seq: LabeledSequence, spec: FaultSpec, profile: TraceProfile,
                 max_magnitude: float = MAX_MAGNITUDE) -> LabeledSequence:
    """Return a copy of ``seq`` with ``spec`` applied, labeled abnormal."""
    T = len(seq.values)
    if T != profile.seq_len:
        raise SpecOutOfBounds(f"sequence length {T} != profile seq_len {profile.seq_len}")
    _check_spec(spec, T, max_magnitude)
    x = seq.values.copy()
    amp = spec.magnitude * profile.setpoint
    s, e = spec.start, spec.start + spec.duration
    hold_end = profile.hold.stop
    kind = spec.kind

    if kind == "Bias":
        if s >= hold_end:
            raise SpecOutOfBounds("Bias must start inside the hold")
        x[s:hold_end] += spec.sign * amp
    elif kind == "TemporaryChange":
        x[s:e] += spec.sign * amp
    elif kind == "NoiseDisturbance":
        rng = np.random.default_rng(spec.seed)
        x[s:e] += amp * rng.standard_normal(e - s)
    elif kind == "SinusoidalDisturbance":
        phase = np.arange(e - s) / (e - s)
        x[s:e] += spec.sign * amp * np.sin(2 * np.pi * spec.cycles * phase)
    elif kind == "PeripheralPoint":
        x[s] += spec.sign * amp
    elif kind == "MicroArcing":
        x[s:] *= 1.0 - spec.magnitude
    elif kind == "InletValveLeak":
        tau = spec.time_constant or (T - s) / 3.0
        steps = np.arange(1, T - s + 1)
        x[s:] *= 1.0 - spec.magnitude * (1.0 - np.exp(-steps / tau))
    elif kind == "OutletValveLeak":
        tau = spec.time_constant or (e - s) / 3.0
        steps = np.arange(e - s)
        wave = np.exp(-steps / tau) * np.cos(2 * np.pi * spec.cycles * steps / (e - s))
        x[s:e] += spec.sign * amp * wave
    return LabeledSequence(f"{seq.id}:{kind}", x, ABNORMAL)


def default_fault_specs(profile: TraceProfile, seed: int = 0) -> list:
    """One spec per fault kind, scaled to the profile's hold region."""
    profile.validate()
    T = profile.seq_len
    h0, h1 = profile.hold.start, profile.hold.stop
    hold_len = h1 - h0
    at = lambda frac: h0 + int(round(frac * hold_len))  # noqa: E731
    return [
        FaultSpec("Bias", 0.03, at(0.35), 1, seed, sign=-1),
        FaultSpec("TemporaryChange", 0.03, at(0.3), max(2, hold_len // 5), seed, sign=-1),
        FaultSpec("NoiseDisturbance", 0.02, at(0.25), max(2, hold_len // 3), seed),
        FaultSpec("SinusoidalDisturbance", 0.03, h0, hold_len, seed, cycles=3.0),
        FaultSpec("PeripheralPoint", 0.05, at(0.6), 1, seed, sign=-1),
        FaultSpec("MicroArcing", 0.015, T // 2, 1, seed),
        FaultSpec("InletValveLeak", 0.05, h0, 1, seed),
        FaultSpec("OutletValveLeak", 0.05, h0, max(2, hold_len * 3 // 5), seed, sign=-1),
    ]


@dataclass
class CvdReplica:
    train: Dataset
    test: Dataset
    manifest: dict


def cvd_replica(seed: int = 0, profile: Optional[TraceProfile] = None, n_train: int = 9,
                n_test_normal: int = 567, specs: Optional[list] = None) -> CvdReplica:
    """Synthetic stand-in for the CVD experiment: 9 train normals, 567 test normals, 8 faults."""
    profile = profile or TraceProfile()
    base = 3 * seed
    train = generate_normal(profile, n_train, base)
    test = generate_normal(profile, n_test_normal, base + 1)
    hosts = generate_normal(profile, len(FAULT_KINDS), base + 2)
    specs = specs if specs is not None else default_fault_specs(profile, seed)
    faults = []
    for host, spec in zip(hosts, specs):
        bad = inject_fault(host, spec, profile)
        test.append(bad)
        faults.append({"id": bad.id, **asdict(spec)})
    manifest = {"seed": seed, "profile": asdict(profile), "faults": faults}
    return CvdReplica(Dataset(train, profile.seq_len, "train"),
                      Dataset(test, profile.seq_len, "test"), manifest)


def write_manifest(manifest: dict, path) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def read_manifest(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise MissingManifest(f"{path} not found")
    manifest = json.loads(path.read_text(encoding="utf-8"))
    if "faults" not in manifest:
        raise MissingManifest(f"{path}: no 'faults' entry")
    return manifest

