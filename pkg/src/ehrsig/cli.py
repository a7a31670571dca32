"""Command-line pipeline: ``ehrsig <stage> [--config F] [--seed N] [--jobs N] [--out DIR]``.

Stages read and write under the work directory::

    synth/      events.jsonl demographics.csv labels.csv truth.{npz,json}
    ingest/     cohort.json manifest.json
    curves/     medians.json last.{npy,json} [export/<patient>.csv]
    sample/     cross_sections.{npy,json} standardizer.json
    ica/        model.{npz,json}
    train/      design.json design_<rep>.npy model_<name>.json tuning_<name>.json
    eval/       evaluation.json
    explain/    <name>.json <name>_importance.npy
    diagram/    S-<j>.json [S-<j>.svg]
    manifests/  <stage>.json
    run_manifest.json

Each stage is keyed by a hash of its config section, seed, package
versions and the digests of its input files. A rerun with an unchanged key
and intact outputs is skipped.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import platform
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__, curvegen, diagram, evaluation, explain, ica, kernels, sampler, supervised, synthgen
from ._util import atomic_write_bytes, atomic_write_text, derive_rng, file_digest
from .config import ConfigError, load_config, stage_seed
from .ehr_model import ParseError, filter_channels, load_cohort, cohort_manifest, read_cohort, save_cohort
from .sampler import CrossSectionMatrix, Standardizer

log = logging.getLogger("ehrsig")

EXIT_OK, EXIT_CONFIG, EXIT_MISSING, EXIT_NUMERIC = 0, 2, 3, 4
STAGES = ("synth", "ingest", "curves", "sample", "ica", "train", "eval", "explain", "diagram")
PIPELINE = STAGES[1:]


class MissingArtifact(FileNotFoundError):
    def __init__(self, path):
        super().__init__(f"missing artifact: {path}")
        self.path = str(path)


class NumericalFailure(RuntimeError):
    pass


def _versions() -> dict:
    import scipy
    import statsmodels

    return {
        "ehrsig": __version__,
        "backend": kernels.BACKEND,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "statsmodels": statsmodels.__version__,
    }


def _dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, allow_nan=True)


def _write_json(path, obj) -> None:
    atomic_write_text(path, _dumps(obj) + "\n")


def _write_npy(path, arr) -> None:
    buf = io.BytesIO()
    np.save(buf, np.asarray(arr))
    atomic_write_bytes(path, buf.getvalue())


def _model_names(cfg) -> list:
    return [f"{f}_{r}" for r in cfg["train"]["representations"] for f in cfg["train"]["families"]]


# -- stage context -----------------------------------------------------------

@dataclass
class Context:
    cfg: dict
    work: Path

    def path(self, *parts) -> Path:
        return self.work.joinpath(*parts)

    def source(self, key: str, default_parts) -> Path:
        """Configured input path, or the synth stage output when unset."""
        given = self.cfg["paths"][key]
        return Path(given) if given else self.path(*default_parts)


@dataclass(frozen=True)
class Stage:
    name: str
    sections: tuple
    inputs: Callable  # ctx -> {logical name: Path}
    run: Callable  # ctx, inputs -> list of output Paths


# -- synth -------------------------------------------------------------------

def _synth_inputs(ctx):
    return {}


def _synth_run(ctx, inputs):
    s = ctx.cfg["synth"]
    cohort = synthgen.generate_cohort(
        p=s["p"], k=s["k"], n_patients=s["n_patients"], years_mean=s["years_mean"],
        seed=stage_seed(ctx.cfg, "synth"), n_designated=s["n_designated"], beta=s["beta"],
    )
    paths = cohort.write(ctx.path("synth"))
    log.info("synth: %d patients, %d events, Bayes AUROC %.3f", s["n_patients"], len(cohort.events),
             cohort.truth.bayes_auroc)
    return [paths["events"], paths["demographics"], paths["labels"],
            paths["truth"].with_suffix(".npz"), paths["truth"].with_suffix(".json")]


# -- ingest ------------------------------------------------------------------

def _ingest_inputs(ctx):
    out = {"events": ctx.source("events", ("synth", "events.jsonl"))}
    demo = ctx.source("demographics", ("synth", "demographics.csv"))
    if ctx.cfg["paths"]["demographics"] or demo.exists():
        out["demographics"] = demo
    return out


def _ingest_run(ctx, inputs):
    cohort = read_cohort(inputs["events"], inputs.get("demographics"))
    raw_p = cohort.p
    cohort = filter_channels(cohort, ctx.cfg["ingest"]["min_events"], ctx.cfg["ingest"]["min_records"])
    if cohort.p == 0:
        raise NumericalFailure("no channel passes the frequency filter")
    out = ctx.path("ingest")
    cohort_path, manifest_path = out / "cohort.json", out / "manifest.json"
    save_cohort(cohort, cohort_path)
    _write_json(manifest_path, cohort_manifest(cohort))
    log.info("ingest: %d records, %d of %d channels kept", len(cohort.records), cohort.p, raw_p)
    return [cohort_path, manifest_path]


# -- curves ------------------------------------------------------------------

def _curve_params(cfg) -> curvegen.CurveParams:
    c = cfg["curves"]
    return curvegen.CurveParams(c["n_histograms"], c["neighbor_rank"], c["min_bandwidth"], c["max_bandwidth"],
                                c["intensity_floor"], stage_seed(cfg, "curves"))


def _curves_inputs(ctx):
    return {"cohort": ctx.path("ingest", "cohort.json")}


def _iter_curvesets(cohort, medians, params):
    for rec in cohort.records:
        yield curvegen.build_curveset(rec, cohort.catalog, medians, params)


def _curves_run(ctx, inputs):
    cohort = load_cohort(inputs["cohort"])
    medians = curvegen.population_medians(cohort)
    params = _curve_params(ctx.cfg)
    export = set(ctx.cfg["curves"]["export"])
    unknown = export - {r.patient_id for r in cohort.records}
    if unknown:
        raise ConfigError("curves.export", f"unknown patient ids {sorted(unknown)}")
    out = ctx.path("curves")
    outputs = []
    last, pids, days = [], [], []
    for cs in _iter_curvesets(cohort, medians, params):
        last.append(sampler.last_cross_section(cs))
        pids.append(cs.patient_id)
        days.append(cs.start_day + cs.tau - 1)
        if cs.patient_id in export:
            dest = out / "export" / f"{cs.patient_id}.csv"
            dest.parent.mkdir(parents=True, exist_ok=True)
            curvegen.write_curveset_csv(cs, dest)
            outputs += [dest, dest.with_suffix(".csv.channels")]
    X = CrossSectionMatrix(np.column_stack(last), tuple(pids), np.asarray(days, dtype=np.int64), cohort.catalog)
    sampler.save_cross_sections(X, out / "last")
    _write_json(out / "medians.json", medians)
    log.info("curves: %d curvesets over %d channels", len(pids), cohort.p)
    return [out / "medians.json", out / "last.npy", out / "last.json"] + outputs


# -- sample ------------------------------------------------------------------

def _sample_inputs(ctx):
    return {"cohort": ctx.path("ingest", "cohort.json"), "medians": ctx.path("curves", "medians.json")}


def _sample_run(ctx, inputs):
    cohort = load_cohort(inputs["cohort"])
    medians = json.loads(Path(inputs["medians"]).read_text())
    # curvesets are rebuilt deterministically rather than stored
    stream = _iter_curvesets(cohort, medians, _curve_params(ctx.cfg))
    X = sampler.sample_cross_sections(stream, ctx.cfg["sample"]["density"], stage_seed(ctx.cfg, "sample"))
    std = sampler.fit_standardizer(X, cohort.catalog, ctx.cfg["curves"]["intensity_floor"])
    out = ctx.path("sample")
    sampler.save_cross_sections(X, out / "cross_sections")
    std.save(out / "standardizer.json")
    log.info("sample: %d cross-sections of %d channels", X.shape[1], X.shape[0])
    return [out / "cross_sections.npy", out / "cross_sections.json", out / "standardizer.json"]


# -- ica ---------------------------------------------------------------------

def _ica_inputs(ctx):
    return {"cross_sections": ctx.path("sample", "cross_sections.npy"),
            "cross_sections_meta": ctx.path("sample", "cross_sections.json"),
            "standardizer": ctx.path("sample", "standardizer.json")}


def _ica_run(ctx, inputs):
    X = sampler.load_cross_sections(ctx.path("sample", "cross_sections"))
    std = Standardizer.load(inputs["standardizer"])
    c = ctx.cfg["ica"]
    try:
        model = ica.fit_ica(std.apply(X.data), k=c["k"], seed=stage_seed(ctx.cfg, "ica"), tol=c["tol"],
                            max_iter=c["max_iter"])
    except ValueError as exc:
        raise NumericalFailure(str(exc)) from None
    if not model.converged:
        log.warning("ica: not converged after %d iterations (tol reached %.3g)", model.n_iter, model.final_tol)
    model.save(ctx.path("ica", "model"))
    log.info("ica: k=%d, %d iterations", model.k, model.n_iter)
    return [ctx.path("ica", "model.npz"), ctx.path("ica", "model.json")]


# -- train -------------------------------------------------------------------

def read_labels(path) -> dict:
    out = {}
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.DictReader(fh), start=2):
            try:
                pid, lab = str(row["patient_id"]), int(row["label"])
            except (KeyError, ValueError, TypeError) as exc:
                raise ParseError(f"bad label row: {exc}", i) from None
            if lab not in (0, 1):
                raise ParseError("label must be 0 or 1", i)
            out[pid] = lab
    return out


def stratified_split(y, test_fraction: float, seed: int) -> np.ndarray:
    """Boolean test mask with ``round(test_fraction * n_c)`` per class."""
    y = np.asarray(y)
    rng = derive_rng(seed, "split")
    test = np.zeros(y.size, dtype=bool)
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        n_test = int(round(test_fraction * idx.size))
        test[rng.permutation(idx)[:n_test]] = True
    return test


def _train_inputs(ctx):
    return {"last": ctx.path("curves", "last.npy"), "last_meta": ctx.path("curves", "last.json"),
            "standardizer": ctx.path("sample", "standardizer.json"),
            "ica": ctx.path("ica", "model.npz"), "ica_meta": ctx.path("ica", "model.json"),
            "labels": ctx.source("labels", ("synth", "labels.csv"))}


def _train_run(ctx, inputs):
    cfg, t = ctx.cfg, ctx.cfg["train"]
    seed = stage_seed(cfg, "train")
    last = sampler.load_cross_sections(ctx.path("curves", "last"))
    std = Standardizer.load(inputs["standardizer"])
    model = ica.ICAModel.load(ctx.path("ica", "model"))
    labels = read_labels(inputs["labels"])
    keep = [i for i, pid in enumerate(last.patient_ids) if pid in labels]
    if len(keep) < 2 * t["folds"]:
        raise NumericalFailure(f"only {len(keep)} labeled records")
    pids = [last.patient_ids[i] for i in keep]
    y = np.array([labels[p] for p in pids], dtype=np.int64)
    if y.min() == y.max():
        raise NumericalFailure("labels contain a single class")
    L = std.apply(last.data[:, keep])  # p x n
    designs = {
        "channels": (L.T, [c.key for c in last.channels]),
        "signatures": (ica.express(model, L).T, [f"S-{j}" for j in range(model.k)]),
    }
    test = stratified_split(y, t["test_fraction"], seed)
    out = ctx.path("train")
    outputs = []
    meta = {"patient_ids": pids, "labels": y.tolist(), "test": test.tolist(), "features": {}}
    for rep in t["representations"]:
        Z, ids = designs[rep]
        _write_npy(out / f"design_{rep}.npy", Z)
        outputs.append(out / f"design_{rep}.npy")
        meta["features"][rep] = ids
    _write_json(out / "design.json", meta)
    outputs.append(out / "design.json")
    train = ~test
    for rep in t["representations"]:
        Z, ids = designs[rep]
        for fam in t["families"]:
            name = f"{fam}_{rep}"
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                report = supervised.tune(
                    fam, Z[train], y[train], budget=t["budget"], alpha_filter=t["alpha_filter"],
                    B_oob=t["B_oob"], seed=seed, folds=t["folds"], space=t["spaces"].get(fam),
                    feature_ids=ids, representation=rep, n_jobs=cfg["jobs"],
                )
            _write_json(out / f"tuning_{name}.json", report.to_dict())
            _write_json(out / f"model_{name}.json", report.model.to_dict())
            outputs += [out / f"tuning_{name}.json", out / f"model_{name}.json"]
            log.info("train: %s OOB AUROC %.3f, %d survivors, %d nonzero weights", name,
                     report.training_auroc["point"], len(report.survivors), report.model.support.size)
    return outputs


# -- eval --------------------------------------------------------------------

def _design_inputs(ctx):
    d = {"design": ctx.path("train", "design.json")}
    for rep in ctx.cfg["train"]["representations"]:
        d[f"design_{rep}"] = ctx.path("train", f"design_{rep}.npy")
    return d


def _eval_inputs(ctx):
    d = {}
    for name in _model_names(ctx.cfg):
        d[f"model_{name}"] = ctx.path("train", f"model_{name}.json")
        d[f"tuning_{name}"] = ctx.path("train", f"tuning_{name}.json")
    d.update(_design_inputs(ctx))
    return d


def _load_design(ctx):
    meta = json.loads(ctx.path("train", "design.json").read_text())
    y = np.asarray(meta["labels"], dtype=np.int64)
    test = np.asarray(meta["test"], dtype=bool)
    Z = {rep: np.load(ctx.path("train", f"design_{rep}.npy")) for rep in ctx.cfg["train"]["representations"]}
    return meta, y, test, Z


def _load_model(ctx, name) -> supervised.LogisticModel:
    return supervised.LogisticModel.from_dict(json.loads(ctx.path("train", f"model_{name}.json").read_text()))


def _eval_run(ctx, inputs):
    e = ctx.cfg["eval"]
    _, y, test, Z = _load_design(ctx)
    preds, training = {}, {}
    for name in _model_names(ctx.cfg):
        m = _load_model(ctx, name)
        preds[name] = m.predict_proba(Z[m.representation][test])
        training[name] = json.loads(ctx.path("train", f"tuning_{name}.json").read_text())["training_auroc"]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        report = evaluation.evaluation_report(preds, y[test], B=e["B"], level=e["level"],
                                              seed=stage_seed(ctx.cfg, "eval"), threshold=e["threshold"])
    report["training_auroc"] = training
    dest = ctx.path("eval", "evaluation.json")
    _write_json(dest, report)
    for name, m in report["models"].items():
        a = m["auroc_delong"]
        log.info("eval: %s test AUROC %.3f [%.3f, %.3f]", name, a["point"], a["lower"], a["upper"])
    return [dest]


# -- explain -----------------------------------------------------------------

def _explain_run(ctx, inputs):
    x = ctx.cfg["explain"]
    seed = stage_seed(ctx.cfg, "explain")
    meta, y, test, Z = _load_design(ctx)
    train = ~test
    pids = np.asarray(meta["patient_ids"])[test]
    outputs = []
    for name in _model_names(ctx.cfg):
        m = _load_model(ctx, name)
        fam = "adanet" if m.adaptive else "enet"
        Ztr, Zte = Z[m.representation][train], Z[m.representation][test]
        mu = Ztr.mean(axis=0)
        phi = explain.shap_matrix(m, Zte, mu)
        importance = explain.global_importance(m, Zte, mu)

        def refit(Xb, yb, fam=fam, m=m):
            return supervised.fit_family(fam, Xb, yb, m.params, feature_ids=m.feature_ids,
                                         representation=m.representation)

        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            dist = explain.importance_distribution(refit, (Ztr, y[train]), Zte, B=x["B"], seed=seed)
        records = []
        for i in range(Zte.shape[0]):
            expl = explain.linear_shap(m, Zte[i], mu)
            causes = explain.root_cause_report(expl, x["tau_inert"])[: x["top_m"]]
            records.append({"patient_id": str(pids[i]), "label": int(y[test][i]), "log_odds": expl.output,
                            "root_causes": [c.__dict__ for c in causes]})
        order = np.argsort(-m.decision_function(Zte), kind="stable")[: x["n_waterfalls"]]
        waterfalls = {str(pids[i]): explain.waterfall_data(explain.linear_shap(m, Zte[i], mu), x["top_m"])
                      for i in order}
        summary = dist.to_dict()
        summary.pop("samples")
        doc = {
            "model": name, "representation": m.representation, "base_value": float(m.intercept + m.weights @ mu),
            "feature_ids": list(m.feature_ids), "global_importance": importance.tolist(),
            "importance_distribution": summary, "records": records, "waterfalls": waterfalls,
            "shap": phi.tolist(),
        }
        dest = ctx.path("explain", f"{name}.json")
        _write_json(dest, doc)
        _write_npy(ctx.path("explain", f"{name}_importance.npy"), dist.samples)
        outputs += [dest, ctx.path("explain", f"{name}_importance.npy")]
        top = np.argsort(-importance, kind="stable")[:3]
        log.info("explain: %s top features %s", name, ", ".join(m.feature_ids[j] for j in top))
    return outputs


def _explain_inputs(ctx):
    d = {f"model_{name}": ctx.path("train", f"model_{name}.json") for name in _model_names(ctx.cfg)}
    d.update(_design_inputs(ctx))
    return d


# -- diagram -----------------------------------------------------------------

def _diagram_inputs(ctx):
    d = {"ica": ctx.path("ica", "model.npz"), "ica_meta": ctx.path("ica", "model.json"),
         "standardizer": ctx.path("sample", "standardizer.json"),
         "cross_sections": ctx.path("sample", "cross_sections.npy")}
    if "signatures" in ctx.cfg["train"]["representations"]:
        for fam in ctx.cfg["train"]["families"]:
            d[f"explain_{fam}"] = ctx.path("explain", f"{fam}_signatures.json")
    return d


def _ranked_signatures(ctx, k: int) -> list:
    """Signatures ordered by their largest importance in any signature model."""
    if "signatures" not in ctx.cfg["train"]["representations"]:
        return list(range(k))
    best = np.zeros(k)
    for fam in ctx.cfg["train"]["families"]:
        doc = json.loads(ctx.path("explain", f"{fam}_signatures.json").read_text())
        best = np.maximum(best, np.asarray(doc["global_importance"]))
    order = np.argsort(-best, kind="stable")
    return [int(j) for j in order if best[j] > 0]


def _diagram_run(ctx, inputs):
    d = ctx.cfg["diagram"]
    model = ica.ICAModel.load(ctx.path("ica", "model"))
    std = Standardizer.load(inputs["standardizer"])
    X = sampler.load_cross_sections(ctx.path("sample", "cross_sections"))
    S = ica.source_matrix(model, std.apply(X.data))
    chosen = _ranked_signatures(ctx, model.k)[: d["n_signatures"]]
    outputs = []
    index = []
    for j in chosen:
        dg = diagram.signature_diagram(model, std, S[j], j, top_m=d["top_m"])
        dest = ctx.path("diagram", f"S-{j}.json")
        _write_json(dest, dg.to_dict())
        outputs.append(dest)
        if d["svg"]:
            svg = ctx.path("diagram", f"S-{j}.svg")
            atomic_write_text(svg, diagram.render_svg(dg, d["cutoff"]))
            outputs.append(svg)
        index.append(j)
    _write_json(ctx.path("diagram", "index.json"), {"signatures": index})
    outputs.append(ctx.path("diagram", "index.json"))
    log.info("diagram: %d signatures", len(index))
    return outputs


STAGE_TABLE = {
    "synth": Stage("synth", ("synth",), _synth_inputs, _synth_run),
    "ingest": Stage("ingest", ("ingest",), _ingest_inputs, _ingest_run),
    "curves": Stage("curves", ("curves",), _curves_inputs, _curves_run),
    "sample": Stage("sample", ("sample", "curves"), _sample_inputs, _sample_run),
    "ica": Stage("ica", ("ica",), _ica_inputs, _ica_run),
    "train": Stage("train", ("train",), _train_inputs, _train_run),
    "eval": Stage("eval", ("eval", "train"), _eval_inputs, _eval_run),
    "explain": Stage("explain", ("explain", "train"), _explain_inputs, _explain_run),
    "diagram": Stage("diagram", ("diagram", "train"), _diagram_inputs, _diagram_run),
}


# -- runner ------------------------------------------------------------------

def _stage_key(ctx, stage, digests) -> tuple[str, dict]:
    cfg = ctx.cfg
    section = {s: cfg[s] for s in stage.sections}
    seeds = {s: stage_seed(cfg, s) for s in stage.sections if "seed" in cfg[s]}
    payload = {"stage": stage.name, "config": section, "seeds": seeds, "inputs": digests,
               "versions": _versions()}
    key = hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()
    return key, payload


def _rel(ctx, p: Path) -> str:
    try:
        return str(p.relative_to(ctx.work))
    except ValueError:
        return p.name


def _is_current(ctx, stage, key) -> bool:
    mpath = ctx.path("manifests", f"{stage.name}.json")
    if not mpath.exists():
        return False
    try:
        old = json.loads(mpath.read_text())
    except json.JSONDecodeError:
        return False
    if old.get("input_hash") != key:
        return False
    for rel, digest in old.get("outputs", {}).items():
        p = ctx.path(rel)
        if not p.exists() or file_digest(p) != digest:
            return False
    return True


def run_stage(name: str, cfg: dict, work=None) -> str:
    """Run one stage; returns ``"ran"`` or ``"skipped"``."""
    stage = STAGE_TABLE[name]
    ctx = Context(cfg, Path(work if work is not None else cfg["paths"]["work"]))
    inputs = stage.inputs(ctx)
    for p in inputs.values():
        if not Path(p).exists():
            raise MissingArtifact(p)
    digests = {k: file_digest(p) for k, p in sorted(inputs.items())}
    key, payload = _stage_key(ctx, stage, digests)
    if _is_current(ctx, stage, key):
        log.info("%s: up to date", name)
        status = "skipped"
    else:
        with np.errstate(over="ignore", under="ignore"):
            outputs = stage.run(ctx, inputs)
        manifest = dict(payload, input_hash=key,
                        outputs={_rel(ctx, Path(p)): file_digest(p) for p in sorted(map(Path, outputs))})
        _write_json(ctx.path("manifests", f"{name}.json"), manifest)
        status = "ran"
    _write_run_manifest(ctx)
    return status


def _write_run_manifest(ctx) -> None:
    stages = {}
    for name in STAGES:
        p = ctx.path("manifests", f"{name}.json")
        if p.exists():
            m = json.loads(p.read_text())
            stages[name] = {"input_hash": m["input_hash"], "seeds": m["seeds"], "outputs": m["outputs"]}
    cfg = {k: v for k, v in ctx.cfg.items() if k not in ("jobs",)}
    _write_json(ctx.path("run_manifest.json"), {"versions": _versions(), "config": cfg, "stages": stages})


def run(command: str, cfg: dict, work=None) -> dict:
    names = PIPELINE if command == "pipeline" else (command,)
    return {n: run_stage(n, cfg, work) for n in names}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ehrsig", description="Latent signature pipeline for EHR event logs.")
    ap.add_argument("command", choices=STAGES + ("pipeline",))
    ap.add_argument("--config", help="YAML config file")
    ap.add_argument("--seed", type=int, help="global seed (overrides config)")
    ap.add_argument("--jobs", type=int, help="worker processes for tuning")
    ap.add_argument("--out", help="work directory (overrides paths.work)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.jobs is not None:
        overrides["jobs"] = args.jobs
    if args.out is not None:
        overrides["paths.work"] = args.out
    try:
        cfg = load_config(args.config, overrides)
        run(args.command, cfg)
    except (ConfigError, ParseError) as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except MissingArtifact as exc:
        log.error("%s", exc)
        return EXIT_MISSING
    except (NumericalFailure, FloatingPointError, np.linalg.LinAlgError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
