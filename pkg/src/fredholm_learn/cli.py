"""
Command-line experiment runner.

Subcommands
-----------
bench           per-dataset, per-method best AUC table plus per-cell fold logs
stability       lambda sweep (AUC and alpha' K alpha) and the linear-model demo
learning-curve  best AUC per training fraction, with the winning MSDF pair
vmatrix         dump one V-matrix of a point file as CSV

Every run is driven by one JSON config (schema in ``docs/config.md``) and
writes into ``--out``.  Result files carry a ``run_id`` derived from the
config snapshot, the seed, the dataset fingerprints and the package version,
and ``manifest.json`` records those inputs together with wall-clock
timestamps.  Result files never contain timestamps, so a rerun with the same
inputs (and any ``--jobs``) rewrites them byte for byte.  Timestamps honour
``SOURCE_DATE_EPOCH`` when it is set.

The exit status is 0 when every dataset/method/fraction item succeeded and 1
otherwise; failures are listed on stderr.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .data import Dataset, DatasetEntry, load_manifest, split
from .evaluation import CVResult, ExperimentConfig, grid_search, heldout_auc
from .kernels import point_set_id, resolve_sigma
from .methods import METHODS
from .vmatrix import V_KINDS, build_vmatrix, cdf_indicator_v

logger = logging.getLogger("fredholm_learn")

DEFAULT_SPLIT = (0.25, 0.5, 0.25)


# ---------------------------------------------------------------- output


def _num(x) -> str:
    """Shortest round-trip text for a float; ints stay ints."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if x.is_integer() and abs(x) < 1e16:
            return str(int(x))
        return repr(x)
    return str(x)


def write_atomic(path: Path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows, comment: str | None = None) -> str:
    buf = io.StringIO()
    if comment is not None:
        buf.write(f"# {comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_num(v) for v in r])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return None if math.isnan(x) or math.isinf(x) else x
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def json_text(doc) -> str:
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        t = _dt.datetime.fromtimestamp(int(epoch), tz=_dt.timezone.utc)
    else:
        t = _dt.datetime.now(tz=_dt.timezone.utc)
    return t.strftime("%Y-%m-%dT%H:%M:%SZ")


# ---------------------------------------------------------------- config


class ConfigError(ValueError):
    pass


@dataclass
class Run:
    """State shared by one invocation: inputs, outputs and failures."""

    command: str
    config: dict
    base: Path
    out: Path
    seed: int
    jobs: int
    started: str = field(default_factory=_timestamp)
    fingerprints: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    errors: list = field(default_factory=list)

    @property
    def run_id(self) -> str:
        doc = {
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "datasets": self.fingerprints,
            "version": __version__,
        }
        blob = json.dumps(_jsonable(doc), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def path(self, rel: str) -> Path:
        return self.base / rel

    def write(self, rel: str, text: str) -> None:
        write_atomic(self.out / rel, text)
        self.outputs.append(rel)

    def fail(self, item: str, exc: BaseException | str) -> None:
        msg = f"{item}: {exc}"
        logger.error(msg)
        self.errors.append(msg)

    def write_manifest(self) -> None:
        doc = {
            "run_id": self.run_id,
            "command": self.command,
            "version": __version__,
            "seed": self.seed,
            "config": self.config,
            "datasets": self.fingerprints,
            "outputs": sorted(self.outputs),
            "errors": self.errors,
            "started": self.started,
            "finished": _timestamp(),
        }
        write_atomic(self.out / "manifest.json", json_text(doc))


def _read_config(path: str | None) -> tuple[dict, Path]:
    if path is None:
        return {}, Path.cwd()
    p = Path(path)
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file {p} not found") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {p} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return doc, p.resolve().parent


def _dataset_entries(run: Run, names) -> list[DatasetEntry]:
    """Resolve dataset references: names in the manifest, or inline objects."""
    manifest = run.config.get("manifest")
    catalogue = {}
    if manifest is not None:
        for e in load_manifest(run.path(manifest)):
            catalogue[e.name] = e
    out = []
    for ref in names:
        if isinstance(ref, str):
            if ref not in catalogue:
                raise ConfigError(f"dataset {ref!r} is not in the manifest")
            out.append(catalogue[ref])
        elif isinstance(ref, dict):
            try:
                out.append(DatasetEntry(ref["name"], str(run.path(ref["path"])), ref["label_column"],
                                        ref["positive"], ref.get("rule", "value"),
                                        ref.get("drop_columns", [])))
            except KeyError as exc:
                raise ConfigError(f"inline dataset is missing key {exc}") from None
        else:
            raise ConfigError(f"bad dataset reference {ref!r}")
    return out


def _methods(names) -> list[str]:
    out = []
    for m in names:
        mu = str(m).upper()
        if mu not in METHODS:
            raise ConfigError(f"unknown method {m!r}; expected some of {list(METHODS)}")
        out.append(mu)
    if not out:
        raise ConfigError("method list is empty")
    return out


def _experiment(run: Run, method: str, **extra) -> ExperimentConfig:
    doc = dict(run.config.get("experiment", {}))
    doc.update(run.config.get("method_overrides", {}).get(method, {}))
    doc.update(extra)
    doc["method"] = method
    doc["seed"] = run.seed
    try:
        return ExperimentConfig.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"experiment settings for {method}: {exc}") from None


def _load(run: Run, entry: DatasetEntry) -> Dataset | None:
    try:
        ds = entry.load()
    except (OSError, ValueError) as exc:
        run.fail(f"dataset {entry.name}", exc)
        return None
    run.fingerprints[entry.name] = {
        "fingerprint": ds.fingerprint(),
        "n": ds.n,
        "d": ds.d,
        "dropped_rows": ds.n_dropped,
    }
    return ds


# ---------------------------------------------------------------- cell logs


_CELL_HEADER = ["run_id", "dataset", "method", "cell_id", "lambda", "kernel", "operator", "data",
                "pair", "c1", "sigma_v", "repeat", "fold", "auc", "accuracy", "penalty"]


def _cell_rows(run_id, dataset, res: CVResult, folds_per_repeat: int):
    for rec in res.records:
        c = rec.cell
        n = len(rec.fold_auc)
        pen = rec.fold_penalty if len(rec.fold_penalty) == n else [float("nan")] * n
        per = folds_per_repeat if n % folds_per_repeat == 0 and res.mode == "cv" else 1
        for k in range(n):
            yield [run_id, dataset, c.method, c.cell_id, c.lam, c.kernel.label,
                   c.operator.label if c.operator else "", c.data.label if c.data else "",
                   c.pair, c.c1, c.sigma_v, k // per, k % per, rec.fold_auc[k],
                   rec.fold_accuracy[k], pen[k]]


def _best_summary(res: CVResult) -> dict:
    b = res.best_cell
    if b is None:
        return {"status": "no cell produced a finite AUC"}
    return {
        "cell_id": b.cell.cell_id,
        "params": b.cell.params(),
        "mean_auc": b.mean_auc,
        "std_auc": b.std_auc,
        "mean_accuracy": b.mean_accuracy,
        "n_cells": len(res.records),
        "n_evaluations": len(b.fold_auc),
    }


def _pair_table(res: CVResult) -> dict:
    """Best mean AUC of every MSDF operator/data pair over the remaining grid."""
    best: dict = {}
    for rec in res.records:
        p = rec.cell.pair
        m = rec.mean_auc
        if not p or math.isnan(m):
            continue
        if p not in best or m > best[p][0]:
            best[p] = (m, rec.cell.cell_id)
    return dict(sorted(best.items()))


# ---------------------------------------------------------------- bench


def cmd_bench(run: Run) -> None:
    cfg = run.config
    entries = _dataset_entries(run, cfg.get("datasets", []))
    if not entries:
        raise ConfigError("bench needs a non-empty 'datasets' list")
    methods = _methods(cfg.get("methods", METHODS))
    proportions = tuple(cfg.get("split", DEFAULT_SPLIT))
    mode = cfg.get("evaluation", "cv")
    if mode not in ("cv", "holdout"):
        raise ConfigError(f"evaluation must be 'cv' or 'holdout', got {mode!r}")
    for m in methods:
        _experiment(run, m)

    loaded = [(e, _load(run, e)) for e in entries]
    rid = run.run_id
    summary: dict = {"run_id": rid, "manifest": "manifest.json", "evaluation": mode,
                     "labeled_fraction": proportions[0], "split": list(proportions), "datasets": {}}
    table_main, table_test, pair_rows = [], [], []
    for entry, ds in loaded:
        if ds is None:
            continue
        dsum = {"n": ds.n, "d": ds.d, "methods": {}}
        try:
            sp = split(ds, proportions, seed=run.seed)
        except ValueError as exc:
            run.fail(f"dataset {entry.name}: split", exc)
            continue
        dsum.update(n_labeled=int(sp.labeled_idx.size), n_unlabeled=int(sp.unlabeled_idx.size),
                    n_test=int(sp.test_idx.size))
        row_main, row_test = [rid, entry.name, proportions[0]], [rid, entry.name, proportions[0]]
        for m in methods:
            item = f"{entry.name}/{m}"
            config = _experiment(run, m, proportions=list(proportions))
            try:
                res = grid_search(config, ds, sp if mode == "cv" else None, mode=mode,
                                  jobs=run.jobs)
            except (ValueError, np.linalg.LinAlgError) as exc:
                run.fail(item, exc)
                row_main.append(float("nan"))
                row_test.append(float("nan"))
                dsum["methods"][m] = {"status": f"error: {exc}"}
                continue
            run.write(f"cells/bench/{entry.name}__{m}.csv",
                      csv_text(_CELL_HEADER, _cell_rows(rid, entry.name, res, config.folds)))
            msum = _best_summary(res)
            if res.best_cell is None:
                run.fail(item, "no cell produced a finite AUC")
                test = float("nan")
            elif mode == "cv":
                test = heldout_auc(config, ds, sp, res.best_cell.cell)
            else:
                test = res.best_cell.mean_auc
            msum["test_auc"] = test
            row_main.append(res.best_cell.mean_auc if res.best_cell else float("nan"))
            row_test.append(test)
            if m == "MSDF":
                pairs = _pair_table(res)
                msum["pairs"] = {p: {"mean_auc": v, "cell_id": cid} for p, (v, cid) in pairs.items()}
                for p, (v, cid) in pairs.items():
                    pair_rows.append([rid, entry.name, p, v, cid])
            dsum["methods"][m] = msum
            logger.info("%s: %s AUC %.4f", item, mode, row_main[-1])
        table_main.append(row_main)
        table_test.append(row_test)
        summary["datasets"][entry.name] = dsum

    header = ["run_id", "dataset", "labeled_fraction"] + methods
    run.write(f"bench_{mode}_auc.csv", csv_text(header, table_main))
    if mode == "cv":
        run.write("bench_test_auc.csv", csv_text(header, table_test))
    if "MSDF" in methods:
        run.write("bench_msdf_pairs.csv",
                  csv_text(["run_id", "dataset", "pair", "mean_auc", "cell_id"], pair_rows))
    summary["errors"] = run.errors
    run.write("bench_summary.json", json_text(summary))


# ---------------------------------------------------------------- stability


def linear_demo(n: int = 20, repetitions: int = 500, beta: float = 1.0, lam: float = 0.1,
                seed: int = 0) -> dict:
    """Spread of the slope estimate of V-matrix regression and of ridge.

    Each repetition draws ``x ~ N(0, 1)``, ``y = x beta + eps`` with
    ``eps ~ N(0, 1)`` and fits the slope without intercept by

    * ridge: ``(x'x + lam)^-1 x'y``
    * V-matrix regression: ``(x'Vx + lam)^-1 x'Vy`` with the CDF indicator
      V-matrix of the sample.
    """
    if n < 2 or repetitions < 2:
        raise ValueError("linear demo needs n >= 2 and at least 2 repetitions")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xF1]))
    b_v = np.empty(repetitions)
    b_r = np.empty(repetitions)
    for k in range(repetitions):
        x = rng.standard_normal(n)
        y = x * beta + rng.standard_normal(n)
        V = cdf_indicator_v(x[:, None]).values
        b_v[k] = (x @ V @ y) / (x @ V @ x + lam)
        b_r[k] = (x @ y) / (x @ x + lam)
    var_v = float(b_v.var(ddof=1))
    var_r = float(b_r.var(ddof=1))
    return {
        "n": n,
        "repetitions": repetitions,
        "beta": beta,
        "lambda": lam,
        "beta_vmatrix": b_v,
        "beta_rls": b_r,
        "mean_vmatrix": float(b_v.mean()),
        "mean_rls": float(b_r.mean()),
        "var_vmatrix": var_v,
        "var_rls": var_r,
        "vmatrix_var_le_rls": var_v <= var_r,
    }


def _sweep_best(res: CVResult, lams):
    """Per lambda, the cell with the highest mean AUC over the other parameters."""
    out = []
    for lam in lams:
        recs = [r for r in res.records if r.cell.lam == lam and not math.isnan(r.mean_auc)]
        if not recs:
            out.append((lam, None))
            continue
        out.append((lam, max(recs, key=lambda r: (r.mean_auc, r.cell.cell_id))))
    return out


def cmd_stability(run: Run) -> None:
    cfg = run.config
    st = cfg.get("stability", {})
    lam_min = float(st.get("lambda_min", 1e-4))
    lam_max = float(st.get("lambda_max", 1e2))
    num = int(st.get("num", 7))
    if not (0 < lam_min <= lam_max) or num < 1:
        raise ConfigError("stability needs 0 < lambda_min <= lambda_max and num >= 1")
    lams = [lam_min] if num == 1 else [float(v) for v in np.logspace(math.log10(lam_min),
                                                                    math.log10(lam_max), num)]
    methods = _methods(st.get("methods", cfg.get("methods", METHODS)))
    entries = _dataset_entries(run, st.get("datasets", cfg.get("datasets", [])))
    proportions = tuple(cfg.get("split", DEFAULT_SPLIT))
    demo_cfg = st.get("linear_demo", {})
    for m in methods:
        _experiment(run, m, lambda_grid=lams)

    loaded = [(e, _load(run, e)) for e in entries]
    rid = run.run_id
    rows = []
    summary: dict = {"run_id": rid, "manifest": "manifest.json", "lambdas": lams,
                     "labeled_fraction": proportions[0], "datasets": {}}
    for entry, ds in loaded:
        if ds is None:
            continue
        try:
            sp = split(ds, proportions, seed=run.seed)
        except ValueError as exc:
            run.fail(f"dataset {entry.name}: split", exc)
            continue
        dsum = {}
        for m in methods:
            item = f"{entry.name}/{m}"
            config = _experiment(run, m, lambda_grid=lams, proportions=list(proportions))
            try:
                res = grid_search(config, ds, sp, mode="cv", jobs=run.jobs)
            except (ValueError, np.linalg.LinAlgError) as exc:
                run.fail(item, exc)
                continue
            run.write(f"cells/stability/{entry.name}__{m}.csv",
                      csv_text(_CELL_HEADER, _cell_rows(rid, entry.name, res, config.folds)))
            aucs = []
            for lam, rec in _sweep_best(res, lams):
                if rec is None:
                    rows.append([rid, entry.name, m, lam, float("nan"), float("nan"),
                                 float("nan"), ""])
                    continue
                aucs.append(rec.mean_auc)
                rows.append([rid, entry.name, m, lam, rec.mean_auc, rec.std_auc,
                             rec.mean_penalty, rec.cell.cell_id])
            if len(aucs) < len(lams):
                run.fail(item, f"{len(lams) - len(aucs)} lambda value(s) gave no finite AUC")
            dsum[m] = {
                "auc_min": min(aucs) if aucs else float("nan"),
                "auc_max": max(aucs) if aucs else float("nan"),
                "auc_spread": (max(aucs) - min(aucs)) if aucs else float("nan"),
            }
        summary["datasets"][entry.name] = dsum

    run.write("stability.csv", csv_text(
        ["run_id", "dataset", "method", "lambda", "mean_auc", "std_auc", "mean_penalty", "cell_id"],
        rows))

    if demo_cfg is not None and demo_cfg is not False:
        demo = linear_demo(int(demo_cfg.get("n", 20)), int(demo_cfg.get("repetitions", 500)),
                           float(demo_cfg.get("beta", 1.0)), float(demo_cfg.get("lambda", 0.1)),
                           seed=run.seed)
        run.write("linear_demo.csv", csv_text(
            ["run_id", "repetition", "beta_vmatrix", "beta_rls"],
            ([rid, k, bv, br] for k, (bv, br) in enumerate(zip(demo["beta_vmatrix"],
                                                                demo["beta_rls"])))))
        summary["linear_demo"] = {k: v for k, v in demo.items()
                                  if k not in ("beta_vmatrix", "beta_rls")}
        if not demo["vmatrix_var_le_rls"]:
            logger.warning("linear demo: V-matrix slope variance %.4g exceeds ridge %.4g",
                           demo["var_vmatrix"], demo["var_rls"])
    summary["errors"] = run.errors
    run.write("stability_summary.json", json_text(summary))


# ---------------------------------------------------------------- learning curve


def cmd_learning_curve(run: Run) -> None:
    cfg = run.config
    lc = cfg.get("learning_curve", {})
    fractions = [float(f) for f in lc.get("fractions", (0.01, 0.25, 0.5, 0.75))]
    test_fraction = float(lc.get("test_fraction", 0.25))
    if not fractions:
        raise ConfigError("learning_curve.fractions is empty")
    if not 0 < test_fraction < 1:
        raise ConfigError("learning_curve.test_fraction must lie in (0, 1)")
    methods = _methods(lc.get("methods", cfg.get("methods", METHODS)))
    entries = _dataset_entries(run, lc.get("datasets", cfg.get("datasets", [])))
    for m in methods:
        _experiment(run, m)

    loaded = [(e, _load(run, e)) for e in entries]
    rid = run.run_id
    rows = []
    header = ["run_id", "dataset", "fraction", "method", "n_labeled", "n_unlabeled", "auc",
              "std_auc", "lambda", "kernel", "pair", "operator", "data", "cell_id", "status"]
    for entry, ds in loaded:
        if ds is None:
            continue
        for f in fractions:
            props = (f, max(0.0, 1.0 - test_fraction - f), test_fraction)
            for m in methods:
                item = f"{entry.name}/f={_num(f)}/{m}"
                config = _experiment(run, m, proportions=list(props))
                try:
                    res = grid_search(config, ds, None, mode="holdout", jobs=run.jobs)
                except (ValueError, np.linalg.LinAlgError) as exc:
                    run.fail(item, exc)
                    rows.append([rid, entry.name, f, m, "", "", float("nan"), float("nan"),
                                 "", "", "", "", "", "", f"error: {exc}"])
                    continue
                run.write(f"cells/learning_curve/{entry.name}__f{_num(f)}__{m}.csv",
                          csv_text(_CELL_HEADER, _cell_rows(rid, entry.name, res, 1)))
                b = res.best_cell
                if b is None:
                    run.fail(item, "no cell produced a finite AUC")
                    rows.append([rid, entry.name, f, m, res.n_labeled, res.n_unlabeled,
                                 float("nan"), float("nan"), "", "", "", "", "", "",
                                 "error: no finite AUC"])
                    continue
                c = b.cell
                rows.append([rid, entry.name, f, m, res.n_labeled, res.n_unlabeled, b.mean_auc,
                             b.std_auc, c.lam, c.kernel.label, c.pair,
                             c.operator.label if c.operator else "",
                             c.data.label if c.data else "", c.cell_id, "ok"])
    run.write("learning_curve.csv", csv_text(header, rows))


# ---------------------------------------------------------------- vmatrix


def read_points(path, drop_columns=()) -> tuple[np.ndarray, list[str]]:
    """Numeric point file with a header row; ``drop_columns`` are skipped."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    keep = [i for i, h in enumerate(header) if h not in set(drop_columns)]
    if not keep:
        raise ValueError(f"{path}: no feature columns left")
    try:
        X = np.array([[float(r[i]) for i in keep] for r in rows], dtype=float).reshape(-1, len(keep))
    except (ValueError, IndexError):
        raise ValueError(f"{path}: non-numeric or ragged rows") from None
    if X.shape[0] == 0:
        raise ValueError(f"{path}: no rows")
    return X, [header[i] for i in keep]


def cmd_vmatrix(run: Run) -> None:
    vc = run.config.get("vmatrix", {})
    data = vc.get("data")
    kind = vc.get("kind")
    if data is None or kind is None:
        raise ConfigError("vmatrix needs a point file and a kind (--data/--kind or config)")
    kind = str(kind).replace("-", "_")
    if kind not in V_KINDS:
        raise ConfigError(f"unknown V-matrix kind {kind!r}; expected one of {list(V_KINDS)}")
    drop = vc.get("drop_columns", [])
    X_l, cols = read_points(run.path(data), drop)
    X_all = X_l
    if vc.get("unlabeled"):
        X_u, _ = read_points(run.path(vc["unlabeled"]), drop)
        if X_u.shape[1] != X_l.shape[1]:
            raise ConfigError("labeled and unlabeled point files differ in dimension")
        X_all = np.vstack([X_l, X_u])
    run.fingerprints["points"] = {"labeled": point_set_id(X_l), "anchors": point_set_id(X_all),
                                  "n": int(X_l.shape[0]), "d": int(X_l.shape[1]),
                                  "n_anchors": int(X_all.shape[0])}
    sigma = vc.get("sigma")
    if isinstance(sigma, str):
        sigma = resolve_sigma(sigma, X_l.shape[1])
    V = build_vmatrix(kind, X_l, X_all, sigma=sigma)
    s = V.spec
    anchors = s.anchor_points or "labeled"
    comment = (f"V-matrix kind={s.kind} n_labeled={V.values.shape[0]} n_anchors={s.n_anchors} "
               f"sigma={_num(s.sigma)} anchors={anchors} columns={'|'.join(cols)} "
               f"run_id={run.run_id}")
    header = [f"v{j}" for j in range(V.values.shape[1])]
    name = vc.get("output", f"vmatrix_{kind}.csv")
    run.write(name, csv_text(header, V.values.tolist(), comment=comment))


# ---------------------------------------------------------------- entry point


COMMANDS = {
    "bench": cmd_bench,
    "stability": cmd_stability,
    "learning-curve": cmd_learning_curve,
    "vmatrix": cmd_vmatrix,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment config")
    common.add_argument("--out", default="results", help="output directory (default: results)")
    common.add_argument("--seed", type=int, help="top-level seed; overrides the config's")
    common.add_argument("--jobs", type=int, default=1, help="worker processes (default: 1)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="fredholm-learn", description=__doc__.split("\n\n")[0].strip())
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("bench", parents=[common], help="method x dataset AUC table")
    sub.add_parser("stability", parents=[common], help="lambda sweep and linear demo")
    sub.add_parser("learning-curve", parents=[common], help="AUC per training fraction")
    vm = sub.add_parser("vmatrix", parents=[common], help="dump a V-matrix as CSV")
    vm.add_argument("--data", help="point CSV with a header row")
    vm.add_argument("--unlabeled", help="extra anchor points for the semi-supervised kinds")
    vm.add_argument("--kind", help=f"one of {', '.join(V_KINDS)}")
    vm.add_argument("--sigma", help="Gaussian V-matrix width (number or expression in d)")
    vm.add_argument("--drop-column", action="append", default=None,
                    help="column to ignore, e.g. the label (repeatable)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2) if args.verbose else logging.INFO,
        format="%(levelname)s %(message)s",
        stream=sys.stderr,
    )
    try:
        config, base = _read_config(args.config)
        if args.command == "vmatrix":
            vc = dict(config.get("vmatrix", {}))
            cwd = Path.cwd()
            for key in ("data", "unlabeled"):
                val = getattr(args, key)
                if val is not None:
                    vc[key] = str((cwd / val).resolve())
            if args.kind is not None:
                vc["kind"] = args.kind
            if args.sigma is not None:
                try:
                    vc["sigma"] = float(args.sigma)
                except ValueError:
                    vc["sigma"] = args.sigma
            if args.drop_column is not None:
                vc["drop_columns"] = args.drop_column
            config = {**config, "vmatrix": vc}
        if args.jobs < 1:
            raise ConfigError("--jobs must be >= 1")
        seed = args.seed if args.seed is not None else int(config.get("seed", 0))
        config = {k: v for k, v in config.items() if k != "seed"}
        run = Run(args.command, config, base, Path(args.out), seed, args.jobs)
        COMMANDS[args.command](run)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    run.write_manifest()
    if run.errors:
        print(f"{len(run.errors)} item(s) failed:", file=sys.stderr)
        for e in run.errors:
            print(f"  - {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
