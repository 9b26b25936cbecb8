"""Command-line entry point: ``train``, ``predict``, ``compare``, ``gen-synthetic``.

Exit codes: 0 success, 1 runtime or data error, 2 configuration error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .dataframe import DEFAULT_SCHEMA, ScalerParams, TimeSeriesFrame, invert_scaler, load_csv
from .ensemble import EnsembleConfig, EnsembleModel, fit_ensemble, predict_ensemble
from .errors import ConfigError, ConfigInvalid, EmptyInput, HybridcastError, SchemaMismatch
from .learners import BASE_KINDS, Forecaster, config_from_dict, fit_forecaster
from .metrics import MetricsReport, build_report, reports_to_csv, reports_to_json, sort_reports
from .pipeline import PipelineSpec, Prepared, prepare, windows_for
from .synthetic import SyntheticSpec, gen_synthetic

CONFIG_VERSION = 1
ENSEMBLE_KIND = "ensemble"
MODEL_KINDS = BASE_KINDS + (ENSEMBLE_KIND,)
DEFAULT_MODELS = ("gbdt-oblivious", "gbdt-leafwise", "lstm", "ensemble")

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


@dataclass(frozen=True)
class RunConfig:
    seed: int
    data_path: str | None = None
    synthetic: SyntheticSpec | None = None
    schema: tuple[str, ...] = DEFAULT_SCHEMA
    pipeline: PipelineSpec = PipelineSpec()
    model: str = "ensemble"
    models: tuple[str, ...] = DEFAULT_MODELS
    params: dict = field(default_factory=dict)  # kind -> BoostConfig / LstmConfig
    ensemble: EnsembleConfig = EnsembleConfig()
    out: str = "run"
    threads: int = 1
    workers: int = 1

    def base_config(self, kind: str):
        return self.params.get(kind) or config_from_dict(kind, None)

    def ensemble_config(self) -> EnsembleConfig:
        return EnsembleConfig(self.ensemble.k_folds, self.ensemble.meta, self.ensemble.meta_lookback,
                              {k: self.base_config(k) for k in BASE_KINDS})

    def to_dict(self) -> dict:
        """Everything that determines the results (output location and parallelism excluded)."""
        ens = self.ensemble.to_dict()
        ens.pop("base")
        return {
            "version": CONFIG_VERSION,
            "seed": self.seed,
            "data": ({"path": self.data_path} if self.data_path is not None
                     else {"synthetic": self.synthetic.to_dict()}),
            "schema": list(self.schema),
            "pipeline": self.pipeline.to_dict(),
            "model": self.model,
            "models": list(self.models),
            "params": {k: self.base_config(k).to_dict() for k in BASE_KINDS},
            "ensemble": ens,
        }

    def digest(self) -> str:
        return hashlib.sha256(canonical_json(self.to_dict()).encode()).hexdigest()


def canonical_json(doc) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def _check_kind(kind: str) -> str:
    if kind not in MODEL_KINDS:
        raise ConfigInvalid(f"unknown model {kind!r}; choose from {', '.join(MODEL_KINDS)}")
    return kind


def parse_run_config(doc: dict) -> RunConfig:
    """Validate a merged config document (file values plus flag overrides)."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    known = {"version", "seed", "data", "schema", "pipeline", "model", "models", "params",
             "ensemble", "out", "threads", "workers"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(sorted(unknown))}")
    version = doc.get("version", CONFIG_VERSION)
    if version != CONFIG_VERSION:
        raise ConfigError(f"unsupported config version {version!r}")
    if doc.get("seed") is None:
        raise ConfigError("a seed is required (config 'seed' or --seed)")
    seed = doc["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")

    data = doc.get("data") or {}
    has_path, has_synth = data.get("path") is not None, data.get("synthetic") is not None
    if has_path == has_synth:
        raise ConfigError("exactly one data source is required: data.path or data.synthetic")
    try:
        pipeline = PipelineSpec.from_dict(doc.get("pipeline") or {})
        synthetic = None
        if has_synth:
            synthetic = SyntheticSpec.from_dict(data["synthetic"]).validate(pipeline.lookback)
        model = _check_kind(doc.get("model", "ensemble"))
        models = tuple(_check_kind(m) for m in doc.get("models", DEFAULT_MODELS))
        if len(models) != len(set(models)):
            raise ConfigInvalid("models must not repeat")
        params = doc.get("params") or {}
        bad = set(params) - set(BASE_KINDS)
        if bad:
            raise ConfigInvalid(f"params for unknown model(s): {', '.join(sorted(bad))}")
        resolved = {k: config_from_dict(k, params.get(k)) for k in BASE_KINDS}
        ensemble = EnsembleConfig.from_dict(doc.get("ensemble") or {})
    except TypeError as exc:
        raise ConfigInvalid(str(exc)) from None
    threads, workers = int(doc.get("threads", 1)), int(doc.get("workers", 1))
    if threads < 1 or workers < 1:
        raise ConfigInvalid("threads and workers must be >= 1")
    return RunConfig(seed, data.get("path"), synthetic, tuple(doc.get("schema", DEFAULT_SCHEMA)),
                     pipeline, model, models, resolved, ensemble, str(doc.get("out", "run")),
                     threads, workers)


# --- file output --------------------------------------------------------------

def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()


def atomic_write(path: Path, text: str) -> None:
    """Write via a temporary sibling file and rename over the target."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Outputs:
    """Collects files in memory and writes them together at the end of a run."""

    def __init__(self, root: Path):
        self.root = root
        self.files: dict[str, str] = {}

    def add(self, rel: str, text: str) -> str:
        self.files[rel] = text
        return rel

    def digests(self) -> dict[str, str]:
        return {rel: sha256_text(text) for rel, text in sorted(self.files.items())}

    def flush(self) -> None:
        for rel, text in sorted(self.files.items()):
            atomic_write(self.root / rel, text)


# --- pipeline plumbing -------------------------------------------------------

def load_frame(config: RunConfig) -> tuple[TimeSeriesFrame, str | None]:
    """The run's frame, plus the generated csv text for synthetic sources."""
    if config.data_path is not None:
        path = Path(config.data_path)
        if not path.is_file():
            raise FileNotFoundError(f"data file not found: {path}")
        return load_csv(path, config.schema, config.pipeline.target), None
    text = gen_synthetic(config.synthetic)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "synthetic.csv"
        path.write_text(text)
        frame = load_csv(path, DEFAULT_SCHEMA, config.pipeline.target)
    return frame, text


def pipeline_doc(prep: Prepared, schema) -> dict:
    return {"spec": prep.spec.to_dict(), "scaler": prep.scaler.to_dict(),
            "features": list(prep.dataset.feature_names), "schema": list(schema)}


def base_model_doc(forecaster: Forecaster, prep: Prepared, schema) -> str:
    doc = {"format_version": 1, "kind": "forecaster", "pipeline": pipeline_doc(prep, schema),
           "forecaster": forecaster.to_dict()}
    return canonical_json(doc)


def ensemble_doc(model: EnsembleModel, prep: Prepared, schema, base_refs: dict) -> str:
    doc = {"format_version": 1, "kind": "ensemble-run", "pipeline": pipeline_doc(prep, schema),
           "ensemble": model.to_dict(base_docs=base_refs)}
    return canonical_json(doc)


def predictions_csv(dates, actual, predicted, weights=None) -> str:
    lines = ["date,actual,predicted" + (",alpha,beta,gamma" if weights is not None else "")]
    for k in range(len(dates)):
        row = [str(dates[k]), repr(float(actual[k])), repr(float(predicted[k]))]
        if weights is not None:
            row += [repr(float(v)) for v in weights[k]]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _improvement(reports: list[MetricsReport]) -> dict | None:
    ens = next((r for r in reports if r.model_name == ENSEMBLE_KIND and r.error is None), None)
    bases = [r for r in reports if r.model_name in BASE_KINDS and r.error is None]
    if ens is None or not bases:
        return None
    best = max(bases, key=lambda r: r.r2)
    return {
        "best_base": best.model_name,
        "r2_delta": ens.r2 - best.r2,
        "mae_reduction_pct": 100.0 * (best.mae - ens.mae) / best.mae if best.mae else 0.0,
        "rmse_reduction_pct": 100.0 * (best.rmse - ens.rmse) / best.rmse if best.rmse else 0.0,
    }


@dataclass
class RunResult:
    reports: list[MetricsReport]
    outputs: Outputs
    manifest: dict
    weights: np.ndarray | None = None


def _train_models(config: RunConfig, prep: Prepared, wanted: tuple[str, ...], outputs: Outputs,
                  timings: dict):
    """Fit every requested model, record reports and stage files; failures become rows."""
    target = prep.spec.target
    test = prep.test
    need_bases = set(wanted) & set(BASE_KINDS)
    if ENSEMBLE_KIND in wanted:
        need_bases = set(BASE_KINDS)
    bases: dict[str, Forecaster] = {}
    failures: dict[str, str] = {}
    reports: dict[str, MetricsReport] = {}
    refs: dict[str, dict] = {}
    for kind in BASE_KINDS:
        if kind not in need_bases:
            continue
        start = time.perf_counter()
        try:
            model = fit_forecaster(kind, prep.train, config.base_config(kind), config.seed,
                                   config.threads)
            pred = model.predict(test.inputs)
            reports[kind] = build_report(pred, test.targets, kind, prep.scaler, target)
        except (HybridcastError, ValueError, ArithmeticError) as exc:
            failures[kind] = f"{type(exc).__name__}: {exc}"
            reports[kind] = MetricsReport.failed(kind, failures[kind])
            continue
        finally:
            timings[f"fit_{kind}"] = time.perf_counter() - start
        bases[kind] = model
        rel = outputs.add(f"models/{kind}.json", base_model_doc(model, prep, config.schema))
        refs[kind] = {"path": Path(rel).name, "sha256": sha256_text(outputs.files[rel])}
        outputs.add(f"predictions/{kind}.csv", predictions_csv(
            test.sample_timestamps, invert_scaler(test.targets, prep.scaler, target),
            invert_scaler(pred, prep.scaler, target)))

    weights = None
    if ENSEMBLE_KIND in wanted:
        start = time.perf_counter()
        try:
            if failures:
                raise HybridcastError(f"base model failed: {', '.join(sorted(failures))}")
            ens = fit_ensemble(prep.train, config.ensemble_config(), config.seed, bases,
                               config.workers, config.threads)
            res = predict_ensemble(ens, test)
            reports[ENSEMBLE_KIND] = build_report(res.predictions, test.targets, ENSEMBLE_KIND,
                                                  prep.scaler, target)
            weights = res.weights.values
            outputs.add("models/ensemble.json", ensemble_doc(ens, prep, config.schema, refs))
            outputs.add("predictions/ensemble.csv", predictions_csv(
                test.sample_timestamps, invert_scaler(test.targets, prep.scaler, target),
                invert_scaler(res.predictions, prep.scaler, target), weights))
        except (HybridcastError, ValueError, ArithmeticError) as exc:
            reports[ENSEMBLE_KIND] = MetricsReport.failed(ENSEMBLE_KIND, f"{type(exc).__name__}: {exc}")
        finally:
            timings["fit_ensemble"] = time.perf_counter() - start
    return [reports[k] for k in wanted if k in reports], weights


def _manifest(command: str, config: RunConfig, reports, outputs: Outputs, timings: dict,
              extra: dict | None = None) -> dict:
    doc = {
        "command": command,
        "version": __version__,
        "config": config.to_dict(),
        "config_hash": config.digest(),
        "seed": config.seed,
        "metrics": [r.to_dict() for r in reports],
        "outputs": outputs.digests(),
        "runtime": {"timings_s": {k: round(v, 4) for k, v in sorted(timings.items())},
                    "backend": kernels.BACKEND, "threads": config.threads,
                    "workers": config.workers},
    }
    doc.update(extra or {})
    return doc


def _run(command: str, config: RunConfig, wanted: tuple[str, ...]) -> RunResult:
    timings: dict[str, float] = {}
    start = time.perf_counter()
    frame, synthetic_text = load_frame(config)
    prep = prepare(frame, config.pipeline)
    timings["prepare"] = time.perf_counter() - start
    outputs = Outputs(Path(config.out))
    if synthetic_text is not None:
        outputs.add("data.csv", synthetic_text)
    reports, weights = _train_models(config, prep, wanted, outputs, timings)
    extra = {}
    if command == "compare":
        ordered = sort_reports(reports)
        outputs.add("comparison.csv", reports_to_csv(ordered))
        outputs.add("comparison.json", reports_to_json(ordered))
        extra["improvement"] = _improvement(reports)
        reports = ordered
    if weights is not None:
        extra["weights_simplex_ok"] = bool(
            np.all(weights >= 0) and np.all(np.abs(weights.sum(axis=1) - 1.0) <= 1e-9))
    timings["total"] = time.perf_counter() - start
    manifest = _manifest(command, config, reports, outputs, timings, extra)
    outputs.add("manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    outputs.flush()
    return RunResult(reports, outputs, manifest, weights)


def cmd_train(config: RunConfig) -> RunResult:
    """Fit ``config.model`` and write its documents, test predictions and manifest."""
    result = _run("train", config, (config.model,))
    failed = [r for r in result.reports if r.error is not None]
    if failed:
        raise HybridcastError(failed[0].error)
    return result


def cmd_compare(config: RunConfig) -> RunResult:
    """Fit every listed model on one split and seed; write the sorted metrics table."""
    if len(config.models) < 2:
        raise ConfigInvalid("compare needs at least two models")
    return _run("compare", config, config.models)


# --- prediction from saved documents -----------------------------------------

def _load_base(path: Path) -> tuple[dict, Forecaster]:
    doc = json.loads(path.read_text())
    if doc.get("kind") != "forecaster":
        raise SchemaMismatch(f"{path}: not a base model document")
    return doc["pipeline"], Forecaster.from_dict(doc["forecaster"])


def load_model(path) -> tuple[dict, Forecaster | EnsembleModel]:
    """Pipeline section and model from a saved base or ensemble document."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"model file not found: {path}")
    doc = json.loads(path.read_text())
    if doc.get("kind") == "forecaster":
        return doc["pipeline"], Forecaster.from_dict(doc["forecaster"])
    if doc.get("kind") != "ensemble-run":
        raise SchemaMismatch(f"{path}: unrecognised model document")
    ens_doc = doc["ensemble"]
    bases = {}
    for kind, ref in ens_doc["base"].items():
        if "path" in ref:
            base_path = path.parent / ref["path"]
            if not base_path.is_file():
                raise FileNotFoundError(f"base model file not found: {base_path}")
            text = base_path.read_text()
            if "sha256" in ref and sha256_text(text) != ref["sha256"]:
                raise SchemaMismatch(f"{base_path}: content does not match the ensemble document")
            _, bases[kind] = _load_base(base_path)
        else:
            bases[kind] = Forecaster.from_dict(ref)
    return doc["pipeline"], EnsembleModel.from_dict(ens_doc, bases)


def cmd_predict(model_path, data_path, out_path) -> Path:
    """Write ``date,actual,predicted`` (plus weights for ensembles) for every forecastable step."""
    pipe, model = load_model(model_path)
    spec = PipelineSpec.from_dict(pipe["spec"])
    scaler = ScalerParams.from_dict(pipe["scaler"])
    names = tuple(pipe["features"])
    data_path = Path(data_path)
    if not data_path.is_file():
        raise FileNotFoundError(f"data file not found: {data_path}")
    frame = load_csv(data_path, tuple(pipe.get("schema", DEFAULT_SCHEMA)), spec.target)
    ds = windows_for(frame, spec, scaler, names)
    if len(ds) == 0:
        raise EmptyInput("no forecastable steps in the data")
    actual = invert_scaler(ds.targets, scaler, spec.target)
    if isinstance(model, EnsembleModel):
        res = predict_ensemble(model, ds)
        text = predictions_csv(ds.sample_timestamps, actual,
                               invert_scaler(res.predictions, scaler, spec.target),
                               res.weights.values)
    else:
        text = predictions_csv(ds.sample_timestamps, actual,
                               invert_scaler(model.predict(ds.inputs), scaler, spec.target))
    out_path = Path(out_path)
    if out_path.is_dir() or str(out_path).endswith(os.sep):
        out_path = out_path / "predictions.csv"
    atomic_write(out_path, text)
    return out_path


# --- argument handling --------------------------------------------------------

def _kebab_overrides(args) -> dict:
    doc: dict = {}
    if args.seed is not None:
        doc["seed"] = args.seed
    if getattr(args, "out", None) is not None:
        doc["out"] = args.out
    if getattr(args, "data", None) is not None:
        doc["data"] = {"path": args.data}
    pipe = {}
    for key in ("lookback", "train_fraction", "target", "missing_policy"):
        value = getattr(args, key, None)
        if value is not None:
            pipe[key] = value
    if pipe:
        doc["pipeline"] = pipe
    for key in ("threads", "workers", "model"):
        value = getattr(args, key, None)
        if value is not None:
            doc[key] = value
    if getattr(args, "models", None):
        doc["models"] = [m.strip() for m in args.models.split(",") if m.strip()]
    return doc


def merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for key, value in over.items():
        if key == "data":
            out[key] = value  # a flag data source replaces the file's
        elif isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = merge(out[key], value)
        else:
            out[key] = value
    return out


def read_config(path) -> dict:
    if path is None:
        return {"version": CONFIG_VERSION}
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hybridcast", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"hybridcast {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_help):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--seed", type=int, help="random seed (unsigned 64-bit)")
        p.add_argument("--out", help=out_help)

    def run_flags(p):
        p.add_argument("--data", help="input CSV (replaces the config's data source)")
        p.add_argument("--lookback", type=int)
        p.add_argument("--train-fraction", type=float)
        p.add_argument("--target")
        p.add_argument("--missing-policy", choices=("forward_fill", "drop_row"))
        p.add_argument("--threads", type=int, help="histogram threads per boosting fit")
        p.add_argument("--workers", type=int, help="base models trained concurrently per fold")

    p = sub.add_parser("train", help="fit one model and save it")
    common(p, "output directory")
    run_flags(p)
    p.add_argument("--model", choices=MODEL_KINDS)

    p = sub.add_parser("compare", help="fit several models on one split and tabulate metrics")
    common(p, "output directory")
    run_flags(p)
    p.add_argument("--models", help="comma-separated model list")

    p = sub.add_parser("predict", help="forecast with a saved model")
    common(p, "output CSV path or directory")
    p.add_argument("--model", dest="model_path", required=True, help="saved model document")
    p.add_argument("--data", required=True, help="input CSV")

    p = sub.add_parser("gen-synthetic", help="write a seeded synthetic OHLCV CSV")
    common(p, "output CSV path")
    p.add_argument("--n-points", type=int)
    p.add_argument("--trend", type=float)
    p.add_argument("--amplitude", type=float)
    p.add_argument("--period", type=float)
    p.add_argument("--noise-std", type=float)
    p.add_argument("--level", type=float)
    return parser


def _synthetic_spec(args) -> SyntheticSpec:
    doc = read_config(args.config)
    spec = dict(((doc.get("data") or {}).get("synthetic")) or doc.get("synthetic") or {})
    for key in ("n_points", "trend", "amplitude", "period", "noise_std", "level"):
        value = getattr(args, key)
        if value is not None:
            spec[key] = value
    if args.seed is not None:
        spec["seed"] = args.seed
    elif "seed" not in spec and doc.get("seed") is not None:
        spec["seed"] = doc["seed"]
    return SyntheticSpec.from_dict(spec).validate()


def _summary(result: RunResult) -> str:
    lines = [f"{'model':<16}{'r2':>10}{'mae':>12}{'rmse':>12}{'n':>6}"]
    for r in result.reports:
        if r.error is not None:
            lines.append(f"{r.model_name:<16}  ERROR {r.error}")
        else:
            lines.append(f"{r.model_name:<16}{r.r2:>10.4f}{r.mae:>12.4f}{r.rmse:>12.4f}{r.n:>6}")
    imp = result.manifest.get("improvement")
    if imp:
        lines.append(f"ensemble vs best base ({imp['best_base']}): r2 {imp['r2_delta']:+.4f}, "
                     f"rmse {imp['rmse_reduction_pct']:+.2f}%")
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "gen-synthetic":
            spec = _synthetic_spec(args)
            out = Path(args.out or "synthetic.csv")
            atomic_write(out, gen_synthetic(spec))
            print(f"wrote {out} ({spec.n_points} rows)")
            return EXIT_OK
        if args.command == "predict":
            out = cmd_predict(args.model_path, args.data, args.out or "predictions.csv")
            print(f"wrote {out}")
            return EXIT_OK
        config = parse_run_config(merge(read_config(args.config), _kebab_overrides(args)))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (HybridcastError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    try:
        result = cmd_train(config) if args.command == "train" else cmd_compare(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (HybridcastError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(_summary(result))
    print(f"outputs in {config.out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
