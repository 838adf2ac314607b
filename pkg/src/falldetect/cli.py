"""Command-line surface: synth, ingest, run, report.

A single JSON config document can set every knob; command-line flags
override config keys, which override built-in defaults.  Every command
writes a run.json capturing the merged config, tool version, and input
digests, and all outputs are written atomically so interrupted runs never
leave corrupt files.  Exit codes: 0 success, 1 experiment-cell failure,
2 input error.
"""

import argparse
import hashlib
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__, synth
from .errors import FalldetectError
from .evaluation import (
    GridConfig,
    report_from_dict,
    run_experiment,
    save_report_json,
    summary_row,
    write_roc_csv,
)
from .features import LtpParams
from .ingest import (
    _atomic_write_text,
    build_collection,
    collection_from_manifest,
    parse_dataset1,
    parse_dataset2,
    save_manifest,
)

COLLECTION_ORDER = ("C1", "C2", "C3")
FEATURE_ORDER = ("RAW", "MAGNITUDE", "ACCEL_FEATURES", "LTP")
WINDOW_ORDER = (51, 128)
CLASSIFIER_ORDER = ("OC_KNN", "TC_KNN", "OC_SVM", "TC_SVM")

_CONFIG_DEFAULTS = {
    "dataset1": None,
    "dataset2": None,
    "collections": None,
    "features": list(FEATURE_ORDER),
    "windows": list(WINDOW_ORDER),
    "classifiers": list(CLASSIFIER_ORDER),
    "seed": 0,
    "out": "out",
    "jobs": 1,
    "adl": 200,
    "falls": 20,
    "k_grid": None,
    "c_grid": None,
    "gamma_grid": None,
    "nu_grid": None,
    "inner_folds": 10,
    "svm_tol": None,
    "svm_max_iter": None,
    "ltp_neighbours": 6,
    "ltp_step": 1.0,
}


@dataclass
class ExperimentConfig:
    """Merged settings for one CLI invocation (flags > config file > defaults)."""

    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def grid_config(self):
        kwargs = {}
        if self.values.get("k_grid"):
            kwargs["k_grid"] = tuple(int(k) for k in self.values["k_grid"])
        if self.values.get("c_grid"):
            kwargs["c_grid"] = tuple(float(c) for c in self.values["c_grid"])
        if self.values.get("gamma_grid"):
            kwargs["gamma_grid"] = tuple(
                g if g == "auto" else float(g) for g in self.values["gamma_grid"]
            )
        if self.values.get("nu_grid"):
            kwargs["nu_grid"] = tuple(float(v) for v in self.values["nu_grid"])
        if self.values.get("inner_folds"):
            kwargs["inner_folds"] = int(self.values["inner_folds"])
        if self.values.get("svm_tol") is not None:
            kwargs["svm_tol"] = float(self.values["svm_tol"])
        if self.values.get("svm_max_iter") is not None:
            kwargs["svm_max_iter"] = int(self.values["svm_max_iter"])
        kwargs["ltp_params"] = LtpParams(
            num_neighbours=int(self.values.get("ltp_neighbours", 6)),
            step=float(self.values.get("ltp_step", 1.0)),
        )
        return GridConfig(**kwargs)


def _norm_collections(raw):
    if raw is None:
        return None
    items = [raw] if isinstance(raw, str) else list(raw)
    out = []
    for item in items:
        for piece in str(item).replace(",", " ").split():
            up = piece.upper()
            if up == "ALL":
                return list(COLLECTION_ORDER)
            if up not in COLLECTION_ORDER:
                raise ValueError(f"unknown collection {piece!r}")
            if up not in out:
                out.append(up)
    return out


def _norm_choices(raw, universe, what):
    if raw is None:
        return None
    items = [raw] if isinstance(raw, (str, int)) else list(raw)
    out = []
    for item in items:
        for piece in str(item).replace(",", " ").split():
            up = piece.upper()
            if up == "ALL":
                return list(universe)
            match = None
            for u in universe:
                if str(u).upper() == up:
                    match = u
            if match is None:
                raise ValueError(f"unknown {what} {piece!r}")
            if match not in out:
                out.append(match)
    return out


def _norm_windows(raw):
    if raw is None:
        return None
    items = [raw] if isinstance(raw, (str, int)) else list(raw)
    out = []
    for item in items:
        for piece in str(item).replace(",", " ").split():
            if piece.upper() == "ALL":
                return list(WINDOW_ORDER)
            n = int(piece)
            if n not in WINDOW_ORDER:
                raise ValueError(f"window length must be one of {WINDOW_ORDER}, got {n}")
            if n not in out:
                out.append(n)
    return out


def load_config(args):
    """Merge defaults, the optional config file, and command-line flags."""
    merged = dict(_CONFIG_DEFAULTS)
    if getattr(args, "config", None):
        doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        # a stored run.json nests the actual config under "config"
        if isinstance(doc.get("config"), dict):
            doc = doc["config"]
        unknown = set(doc) - set(_CONFIG_DEFAULTS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        merged.update(doc)
    for key in _CONFIG_DEFAULTS:
        flag = getattr(args, key, None)
        if flag is not None:
            merged[key] = flag
    merged["collections"] = _norm_collections(merged["collections"])
    merged["features"] = _norm_choices(merged["features"], FEATURE_ORDER, "feature")
    merged["windows"] = _norm_windows(merged["windows"])
    merged["classifiers"] = _norm_choices(merged["classifiers"], CLASSIFIER_ORDER, "classifier")
    merged["seed"] = int(merged["seed"])
    merged["jobs"] = max(1, int(merged["jobs"]))
    return ExperimentConfig(merged)


# ---------------------------------------------------------------------------
# run.json and digests


def _digest_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _digest_tree(path):
    path = Path(path)
    if path.is_file():
        return _digest_file(path)
    h = hashlib.sha256()
    for f in sorted(p for p in path.rglob("*") if p.is_file()):
        h.update(str(f.relative_to(path)).encode())
        h.update(_digest_file(f).encode())
    return h.hexdigest()


def _write_run_json(out_dir, command, config, inputs):
    doc = {
        "command": command,
        "version": __version__,
        "config": config.values,
        "inputs": {str(k): v for k, v in inputs.items()},
    }
    _atomic_write_text(Path(out_dir) / "run.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Subcommands


def cmd_synth(config):
    out = Path(config["out"])
    out.mkdir(parents=True, exist_ok=True)
    manifest = synth.generate_dataset(
        out, n_adl=int(config["adl"]), n_falls=int(config["falls"]), seed=config["seed"]
    )
    _write_run_json(out, "synth", config, {})
    print(f"wrote {manifest['counts']['ADL']} ADL + {manifest['counts']['FALL']} FALL "
          f"windows to {out}")
    return 0


def _load_datasets(config, need_d1, need_d2):
    d1 = d2 = None
    if need_d1:
        if not config["dataset1"]:
            raise FileNotFoundError("dataset1 path required but not configured")
        d1 = parse_dataset1(config["dataset1"])
        if not d1:
            raise FileNotFoundError(f"no instances found in {config['dataset1']}")
    if need_d2:
        if not config["dataset2"]:
            raise FileNotFoundError("dataset2 path required but not configured")
        d2 = parse_dataset2(config["dataset2"])
        if not d2:
            raise FileNotFoundError(f"no instances found in {config['dataset2']}")
    return d1, d2


def _wanted_collections(config):
    wanted = config["collections"]
    if wanted is None:
        # default to what the configured dataset paths can support
        wanted = ["C1"]
        if config["dataset2"]:
            wanted = list(COLLECTION_ORDER)
    return wanted


def cmd_ingest(config):
    out = Path(config["out"])
    out.mkdir(parents=True, exist_ok=True)
    wanted = _wanted_collections(config)
    need_d2 = any(c in ("C2", "C3") for c in wanted)
    d1, d2 = _load_datasets(config, need_d1=True, need_d2=need_d2)
    inputs = {config["dataset1"]: _digest_tree(config["dataset1"])}
    if need_d2:
        inputs[config["dataset2"]] = _digest_tree(config["dataset2"])
    for cid in wanted:
        collection = build_collection(cid, d1, d2, seed=config["seed"])
        save_manifest(collection, out / f"collection_{cid}.json")
        counts = collection.counts()
        parts = ", ".join(f"{label} {src}: {n}" for (label, src), n in sorted(counts.items()))
        print(f"{cid}: {len(collection)} instances ({parts})")
    _write_run_json(out, "ingest", config, inputs)
    return 0


def _cell_key(cid, feature, window, classifier):
    return f"{cid}_{feature}_{window}_{classifier}"


def _execute_cell(collection, feature, window, classifier, grid_cfg):
    return run_experiment(collection, feature, window, classifier, grid_cfg)


def _summary_lines(rows):
    header = "collection,feature,window,classifier,auc,se,sp,gm,status,error"
    lines = [header]
    for r in rows:
        if r.get("status") == "ok":
            lines.append(
                f"{r['collection']},{r['feature']},{r['window']},{r['classifier']},"
                f"{r['auc']!r},{r['se']!r},{r['sp']!r},{r['gm']!r},ok,"
            )
        else:
            lines.append(
                f"{r['collection']},{r['feature']},{r['window']},{r['classifier']},"
                f",,,,error,{r['error']}"
            )
    return "\n".join(lines) + "\n"


def _sorted_rows(rows):
    def key(r):
        return (
            COLLECTION_ORDER.index(r["collection"]),
            FEATURE_ORDER.index(r["feature"]),
            WINDOW_ORDER.index(int(r["window"])),
            CLASSIFIER_ORDER.index(r["classifier"]),
        )

    return sorted(rows, key=key)


def _write_summary(out, rows):
    rows = _sorted_rows(rows)
    _atomic_write_text(out / "summary.csv", _summary_lines(rows))
    _atomic_write_text(
        out / "summary.json", json.dumps(rows, indent=2, sort_keys=True) + "\n"
    )
    return rows


def cmd_run(config):
    out = Path(config["out"])
    out.mkdir(parents=True, exist_ok=True)
    wanted = config["collections"]
    if wanted is None:
        wanted = [c for c in COLLECTION_ORDER if (out / f"collection_{c}.json").is_file()]
        if not wanted:
            raise FileNotFoundError(f"no collection manifests in {out}; run ingest first")
    manifests = {}
    inputs = {}
    for cid in wanted:
        mpath = out / f"collection_{cid}.json"
        if not mpath.is_file():
            raise FileNotFoundError(f"missing manifest {mpath}; run ingest first")
        manifests[cid] = json.loads(mpath.read_text(encoding="utf-8"))
        inputs[str(mpath)] = _digest_file(mpath)

    need_d2 = any(
        entry["source_dataset"] == "D2"
        for cid in wanted
        for entry in manifests[cid]["instances"]
    )
    d1, d2 = _load_datasets(config, need_d1=True, need_d2=need_d2)
    collections = {
        cid: collection_from_manifest(manifests[cid], d1, d2) for cid in wanted
    }

    grid_cfg = config.grid_config()
    cells = [
        (cid, feature, window, classifier)
        for cid in wanted
        for feature in config["features"]
        for window in config["windows"]
        for classifier in config["classifiers"]
    ]
    results = {}
    if config["jobs"] > 1:
        with ProcessPoolExecutor(max_workers=config["jobs"]) as pool:
            futures = {
                pool.submit(
                    _execute_cell, collections[cid], feature, window, classifier, grid_cfg
                ): (cid, feature, window, classifier)
                for cid, feature, window, classifier in cells
            }
            for fut, cell in futures.items():
                try:
                    results[cell] = ("ok", fut.result())
                except FalldetectError as exc:
                    results[cell] = ("error", str(exc))
    else:
        for cell in cells:
            cid, feature, window, classifier = cell
            try:
                report = _execute_cell(collections[cid], feature, window, classifier, grid_cfg)
                results[cell] = ("ok", report)
            except FalldetectError as exc:
                results[cell] = ("error", str(exc))

    rows = []
    failed = 0
    for cell in cells:
        cid, feature, window, classifier = cell
        status, payload = results[cell]
        key = _cell_key(cid, feature, window, classifier)
        if status == "ok":
            save_report_json(payload, out / f"report_{key}.json")
            write_roc_csv(payload.averaged_curve, out / f"roc_{key}.csv")
            row = {k: v for k, v in summary_row(payload).items()}
            row["status"] = "ok"
            rows.append(row)
        else:
            failed += 1
            rows.append(
                {
                    "collection": cid,
                    "feature": feature,
                    "window": int(window),
                    "classifier": classifier,
                    "status": "error",
                    "error": payload.replace(",", ";").replace("\n", " "),
                }
            )
    rows = _write_summary(out, rows)
    _write_run_json(out, "run", config, inputs)
    for r in rows:
        if r["status"] == "ok":
            print(
                f"{r['collection']} {r['feature']} {r['window']} {r['classifier']}: "
                f"AUC {r['auc']:.3f} SE {r['se']:.3f} SP {r['sp']:.3f}"
            )
        else:
            print(
                f"{r['collection']} {r['feature']} {r['window']} {r['classifier']}: "
                f"ERROR {r['error']}"
            )
    return 1 if failed else 0


def cmd_report(config):
    out = Path(config["out"])
    reports = sorted(out.glob("report_*.json"))
    if not reports:
        raise FileNotFoundError(f"no reports found in {out}")
    rows = []
    for path in reports:
        report = report_from_dict(json.loads(path.read_text(encoding="utf-8")))
        row = summary_row(report)
        row["status"] = "ok"
        rows.append(row)
    rows = _write_summary(out, rows)
    for r in rows:
        print(
            f"{r['collection']} {r['feature']} {r['window']} {r['classifier']}: "
            f"AUC {r['auc']:.3f} SE {r['se']:.3f} SP {r['sp']:.3f} GM {r['gm']:.3f}"
        )
    return 0


# ---------------------------------------------------------------------------
# Argument parsing


def build_parser():
    parser = argparse.ArgumentParser(
        prog="falldetect",
        description="Fall-detection experiments on triaxial accelerometer windows.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override its keys")
        p.add_argument("--seed", type=int, help="master seed (default 0)")
        p.add_argument("--out", help="output directory (default ./out)")

    p_synth = sub.add_parser("synth", help="generate a synthetic windowed dataset")
    common(p_synth)
    p_synth.add_argument("--adl", type=int, help="number of ADL windows (default 200)")
    p_synth.add_argument("--falls", type=int, help="number of fall windows (default 20)")
    p_synth.set_defaults(func=cmd_synth)

    p_ingest = sub.add_parser("ingest", help="parse datasets and write collection manifests")
    common(p_ingest)
    p_ingest.add_argument("--dataset1", help="dataset1-style directory (adl/, fall/, manifest)")
    p_ingest.add_argument("--dataset2", help="dataset2-style directory (x/y/z/labels files)")
    p_ingest.add_argument("--collection", dest="collections", action="append",
                          help="collection id (C1/C2/C3 or all); repeatable")
    p_ingest.set_defaults(func=cmd_ingest)

    p_run = sub.add_parser("run", help="run experiment cells from stored manifests")
    common(p_run)
    p_run.add_argument("--dataset1", help="dataset1-style directory")
    p_run.add_argument("--dataset2", help="dataset2-style directory")
    p_run.add_argument("--collection", dest="collections", action="append",
                       help="collection id (C1/C2/C3 or all); repeatable")
    p_run.add_argument("--feature", dest="features", action="append",
                       help="feature kind (RAW/MAGNITUDE/ACCEL_FEATURES/LTP or all)")
    p_run.add_argument("--window", dest="windows", action="append",
                       help="window length (51/128 or all)")
    p_run.add_argument("--classifier", dest="classifiers", action="append",
                       help="classifier (OC_KNN/TC_KNN/OC_SVM/TC_SVM or all)")
    p_run.add_argument("--jobs", type=int, help="parallel experiment cells (default 1)")
    p_run.set_defaults(func=cmd_run)

    p_report = sub.add_parser("report", help="re-render the summary from stored reports")
    common(p_report)
    p_report.set_defaults(func=cmd_report)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args)
    except (OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return args.func(config)
    except (FalldetectError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
