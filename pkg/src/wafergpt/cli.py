"""``wafergpt`` command line: gen-data, train, score, evaluate, ablate, visualize.

Exit codes: 0 success, 1 usage/config error, 2 data error, 3 numeric failure.
Log verbosity comes from the ``TRACE_LOG`` environment variable.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import data as D
from .detector import (fit_threshold_three_sigma, read_scores_csv, score_dataset,
                       write_scores_csv)
from .errors import ConfigError, DataError, NumericError
from .experiments import ABLATIONS, CVD_EPOCHS, ablation_config, run_experiment
from .faults import TraceProfile, cvd_replica, read_manifest, write_manifest
from .metrics import average_metrics, evaluate, format_table, metrics_at, per_fault_breakdown, write_roc_csv
from .model import ModelConfig, forward, load_checkpoint, save_checkpoint, softmax_probs
from .train import TrainConfig, train
from . import viz

log = logging.getLogger("wafergpt")

COMMANDS = ("gen-data", "train", "score", "evaluate", "ablate", "visualize")
THRESHOLD_CHOICES = ("three-sigma", "eer")


class UsageError(Exception):
    pass


@dataclass
class GeneratorConfig:
    seq_len: int = 53
    ramp_len: int = 5
    setpoint: float = 1.0
    noise_sigma: float = 0.001
    n_train: int = 9
    n_test_normal: int = 567

    def profile(self, seed: int) -> TraceProfile:
        return TraceProfile(self.seq_len, self.ramp_len, self.setpoint, self.noise_sigma, seed)


@dataclass
class RunConfig:
    data: Optional[str] = None
    test: Optional[str] = None
    checkpoint: Optional[str] = None
    manifest: Optional[str] = None
    scores: Optional[str] = None
    train_scores: Optional[str] = None
    out: str = "out"
    seed: int = 0
    index: int = 0
    threshold_method: str = "three-sigma"
    model: dict = field(default_factory=dict)
    train: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=CVD_EPOCHS))
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)

    def model_config(self, seq_len: int) -> ModelConfig:
        return ModelConfig(seq_len=seq_len, seed=self.seed, **self.model)


_MODEL_KEYS = {f.name for f in fields(ModelConfig)} - {"seq_len", "seed"}
_TRAIN_KEYS = {f.name for f in fields(TrainConfig)} - {"seed"}
_GEN_KEYS = {f.name for f in fields(GeneratorConfig)}
_TOP_KEYS = {f.name for f in fields(RunConfig)}


def _section(doc, name, allowed):
    sec = doc.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(name, "must be an object")
    for k in sec:
        if k not in allowed:
            raise ConfigError(f"{name}.{k}", "unknown key")
    return dict(sec)


def parse_config(path=None, overrides: Optional[dict] = None) -> RunConfig:
    """Load a JSON run configuration and apply flag overrides on top.

    ``overrides`` uses flat keys (``epochs``, ``lr``, ``resolution``,
    ``no_pe``...) as produced by the argument parser. Unknown keys anywhere
    raise ``ConfigError`` naming the offending field.
    """
    doc = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError("config", f"cannot read {path}: {exc}") from None
        if text.strip():
            try:
                doc = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError("config", f"invalid JSON: {exc}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config", "top level must be an object")
    for k in doc:
        if k not in _TOP_KEYS:
            raise ConfigError(k, "unknown key")
    model = _section(doc, "model", _MODEL_KEYS)
    tr = _section(doc, "train", _TRAIN_KEYS)
    gen = _section(doc, "generator", _GEN_KEYS)
    top = {k: v for k, v in doc.items() if k not in ("model", "train", "generator")}

    ov = dict(overrides or {})
    for key in ("data", "test", "checkpoint", "manifest", "scores", "train_scores", "out", "seed", "index"):
        if ov.get(key) is not None:
            top[key] = ov[key]
    if ov.get("threshold_method") is not None:
        top["threshold_method"] = ov["threshold_method"]
    if ov.get("epochs") is not None:
        tr["epochs"] = ov["epochs"]
    if ov.get("lr") is not None:
        tr["step_size"] = ov["lr"]
    if ov.get("batch_size") is not None:
        tr["batch_size"] = ov["batch_size"]
    if ov.get("resolution") is not None:
        model["resolution"] = ov["resolution"]
    for flag, key in (("no_pe", "use_pe"), ("no_tcn", "use_tcn"), ("no_transformer", "use_transformer")):
        if ov.get(flag):
            model[key] = False

    seed = top.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("seed", "must be a non-negative integer")
    if top.get("threshold_method", "three-sigma") not in THRESHOLD_CHOICES:
        raise ConfigError("threshold_method", f"must be one of {THRESHOLD_CHOICES}")
    # validate the model section now; seq_len is only known once data is loaded
    try:
        ModelConfig(seq_len=2, seed=seed, **model)
    except ConfigError:
        raise
    except TypeError as exc:
        raise ConfigError("model", str(exc)) from None
    try:
        tr.setdefault("epochs", CVD_EPOCHS)
        train_cfg = TrainConfig(seed=seed, **tr)
        gen_cfg = GeneratorConfig(**gen)
        gen_cfg.profile(seed).validate()
    except ConfigError:
        raise
    except (TypeError, DataError) as exc:
        raise ConfigError("generator" if gen else "train", str(exc)) from None
    return RunConfig(model=model, train=train_cfg, generator=gen_cfg, **top)


# -- helpers ----------------------------------------------------------------

def _resolve(path, split: str) -> Path:
    """A file is used as-is; a directory is searched for ``{split}.csv`` or ``*_{SPLIT}.tsv``."""
    if path is None:
        raise UsageError(f"--data is required to locate the {split} split")
    p = Path(path)
    if p.is_dir():
        for cand in [p / f"{split}.csv", *sorted(p.glob(f"*_{split.upper()}.tsv"))]:
            if cand.exists():
                return cand
        raise DataError(f"no {split} file in {p}")
    if not p.exists():
        raise DataError(f"{p} not found")
    return p


def _write_json(path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _out(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _fault_kinds(manifest, ids):
    by_id = {f["id"]: f["kind"] for f in manifest["faults"]} if manifest else {}
    return [by_id.get(i) for i in ids]


# -- commands ---------------------------------------------------------------

def cmd_gen_data(cfg: RunConfig) -> int:
    out = _out(cfg)
    g = cfg.generator
    rep = cvd_replica(cfg.seed, g.profile(cfg.seed), g.n_train, g.n_test_normal)
    D.write_csv(rep.train, out / "train.csv")
    D.write_csv(rep.test, out / "test.csv")
    write_manifest(rep.manifest, out / "manifest.json")
    log.info("wrote %d train / %d test sequences to %s", rep.train.n, rep.test.n, out)
    return 0


def cmd_train(cfg: RunConfig) -> int:
    out = _out(cfg)
    train_set = D.load_any(_resolve(cfg.data, "train"), split="train")
    norm = D.fit_normalizer(train_set)
    mc = cfg.model_config(train_set.seq_len)
    values = D.prepare(train_set, norm)
    params, record = train(values, mc, cfg.train)
    meta = {"normalization": {"min": norm.min, "max": norm.max}, "train_config": cfg.train.to_dict()}
    ckpt = out / "checkpoint.bin"
    save_checkpoint(ckpt, params, mc, meta)
    tau = fit_threshold_three_sigma(record.sequence_totals)
    scores = score_dataset(params, mc, train_set, norm)
    write_scores_csv(scores, out / "train_scores.csv")
    _write_json(out / "report.json", {
        "seed": cfg.seed,
        "model_config": mc.to_dict(),
        "train_config": cfg.train.to_dict(),
        "normalization": meta["normalization"],
        "epoch_losses": record.epoch_means,
        "sequence_totals": record.sequence_totals.tolist(),
        "three_sigma": {"threshold": tau.value, **tau.provenance, "degenerate": tau.degenerate},
    })
    log.info("trained %d epochs; final mean loss %.5f; checkpoint %s",
             cfg.train.epochs, record.epoch_means[-1], ckpt)
    return 0


def _load_model(cfg: RunConfig):
    if cfg.checkpoint is None:
        ckpt = Path(cfg.out) / "checkpoint.bin"
        if not ckpt.exists():
            raise UsageError("--checkpoint is required")
    else:
        ckpt = Path(cfg.checkpoint)
    params, mc, meta = load_checkpoint(ckpt)
    n = meta.get("normalization")
    if not n:
        raise DataError(f"{ckpt}: no normalization parameters stored")
    return params, mc, D.NormalizationParams(n["min"], n["max"])


def cmd_score(cfg: RunConfig) -> int:
    out = _out(cfg)
    params, mc, norm = _load_model(cfg)
    test_set = D.load_any(_resolve(cfg.test or cfg.data, "test"), split="test")
    scores = score_dataset(params, mc, test_set, norm)
    write_scores_csv(scores, out / "scores.csv")
    log.info("scored %d sequences -> %s", len(scores), out / "scores.csv")
    return 0


def cmd_evaluate(cfg: RunConfig) -> int:
    out = _out(cfg)
    scores = read_scores_csv(cfg.scores or out / "scores.csv")
    totals = [s.total for s in scores]
    labels = [s.label for s in scores]
    ev = evaluate(totals, labels)
    result = {"n": len(scores), "n_abnormal": int(sum(lab == "abnormal" for lab in labels)), **ev.to_dict()}
    rows = {"at EER": ev.at_eer}
    train_scores = cfg.train_scores
    if train_scores is None and (out / "train_scores.csv").exists():
        train_scores = out / "train_scores.csv"
    tau = None
    if train_scores is not None:
        tau = fit_threshold_three_sigma([s.total for s in read_scores_csv(train_scores)])
        m3 = metrics_at(totals, labels, tau.value)
        result["three_sigma"] = {"threshold": tau.value, **tau.provenance,
                                 "degenerate": tau.degenerate, "metrics": m3.to_dict()}
        rows["at 3-sigma"] = m3
    elif cfg.threshold_method == "three-sigma":
        log.warning("no training scores given; three-sigma metrics skipped")
    result["threshold_method"] = cfg.threshold_method
    result["metrics"] = (result["three_sigma"]["metrics"]
                         if cfg.threshold_method == "three-sigma" and tau is not None else result["at_eer"])
    if cfg.manifest:
        result["breakdown"] = per_fault_breakdown({s.id: s.total for s in scores}, read_manifest(cfg.manifest),
                                                  tau.value if tau else ev.eer.threshold)
    _write_json(out / "metrics.json", result)
    write_roc_csv(ev.curve, out / "roc.csv")
    print(format_table(rows, color=sys.stdout.isatty()))
    print(f"AUC {ev.auc:.4f}  EER {ev.eer.eer:.4f} at threshold {ev.eer.threshold:.6g}")
    return 0


def cmd_ablate(cfg: RunConfig) -> int:
    out = _out(cfg)
    train_set = D.load_any(_resolve(cfg.data, "train"), split="train")
    test_set = D.load_any(_resolve(cfg.test or cfg.data, "test"), split="test")
    manifest = read_manifest(cfg.manifest) if cfg.manifest else None
    base = cfg.model_config(train_set.seq_len)
    rows, report = {}, {}
    for variant in ABLATIONS:
        res = run_experiment(train_set, test_set, ablation_config(base, variant), cfg.train, manifest)
        rows[variant] = res.evaluation.at_eer
        report[variant] = {"auc": res.evaluation.auc, "at_eer": res.evaluation.at_eer.to_dict(),
                           "three_sigma": res.three_sigma.value}
        log.info("%s: F1 at EER %.3f, AUC %.4f", variant, res.evaluation.at_eer.f1, res.evaluation.auc)
    report["average"] = average_metrics(list(rows.values()))
    _write_json(out / "ablation.json", report)
    print(format_table(rows, color=sys.stdout.isatty()))
    return 0


def cmd_visualize(cfg: RunConfig) -> int:
    out = _out(cfg)
    params, mc, norm = _load_model(cfg)
    test_set = D.load_any(_resolve(cfg.test or cfg.data, "test"), split="test")
    if not 0 <= cfg.index < test_set.n:
        raise DataError(f"--index {cfg.index} outside [0, {test_set.n})")
    seq = test_set.sequences[cfg.index]
    values = D.normalize(seq, norm)
    fo = forward(values[:-1], params, mc)
    viz.export_probability_heatmap(softmax_probs(fo.logits), values, out / "probabilities")
    if mc.use_transformer and mc.n_layers:
        viz.export_attention_maps(fo.attentions, out / "attention")
    scores = read_scores_csv(cfg.scores) if cfg.scores else score_dataset(params, mc, test_set, norm)
    totals = [s.total for s in scores]
    labels = [s.label for s in scores]
    if cfg.train_scores:
        train_totals = [s.total for s in read_scores_csv(cfg.train_scores)]
    else:
        train_set = D.load_any(_resolve(cfg.data, "train"), split="train")
        train_totals = [s.total for s in score_dataset(params, mc, train_set, norm)]
    tau = fit_threshold_three_sigma(train_totals)
    manifest = read_manifest(cfg.manifest) if cfg.manifest else None
    viz.export_loss_histogram(train_totals, totals, labels, tau.value, out / "loss_histogram",
                              fault_kinds=_fault_kinds(manifest, [s.id for s in scores]) if manifest else None)
    if any(lab == "abnormal" for lab in labels) and any(lab == "normal" for lab in labels):
        ev = evaluate(totals, labels)
        viz.export_roc(ev.curve, ev.auc, out / "roc")
    log.info("wrote visualizations for %s to %s", seq.id, out)
    return 0


HANDLERS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "score": cmd_score,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "visualize": cmd_visualize,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="wafergpt", description="Unsupervised wafer-trace anomaly detection.")
    parser.add_argument("command", choices=COMMANDS, metavar="command",
                        help="one of: " + ", ".join(COMMANDS))
    parser.add_argument("--config", help="JSON run configuration")
    parser.add_argument("--data", help="training data file or directory")
    parser.add_argument("--test", help="test data file (defaults to the test split next to --data)")
    parser.add_argument("--checkpoint")
    parser.add_argument("--manifest", help="fault manifest JSON from gen-data")
    parser.add_argument("--scores", help="score CSV for evaluate / visualize")
    parser.add_argument("--train-scores", dest="train_scores", help="training score CSV (three-sigma threshold)")
    parser.add_argument("--out")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--lr", type=float)
    parser.add_argument("--batch-size", dest="batch_size", type=int)
    parser.add_argument("--resolution", type=int)
    parser.add_argument("--index", type=int, help="test sequence to visualize")
    parser.add_argument("--threshold-method", dest="threshold_method", choices=THRESHOLD_CHOICES)
    parser.add_argument("--no-pe", dest="no_pe", action="store_true")
    parser.add_argument("--no-tcn", dest="no_tcn", action="store_true")
    parser.add_argument("--no-transformer", dest="no_transformer", action="store_true")
    return parser


def _setup_logging():
    level = os.environ.get("TRACE_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")


def run_command(argv=None) -> int:
    _setup_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = parse_config(args.config, vars(args))
        with np.errstate(over="raise", invalid="raise", divide="raise", under="ignore"):
            return HANDLERS[args.command](cfg)
    except (UsageError, ConfigError) as exc:
        print(f"wafergpt: error: {exc}", file=sys.stderr)
        print(parser.format_usage(), file=sys.stderr, end="")
        return 1
    except (NumericError, FloatingPointError) as exc:
        print(f"wafergpt: numeric failure: {exc}", file=sys.stderr)
        return 3
    except (DataError, OSError, ValueError) as exc:
        print(f"wafergpt: data error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run_command())


if __name__ == "__main__":
    main()
