"""``hotspot`` command line: generate, impute, analyze, forecast, report.

Each command reads its inputs from and writes its outputs under one output
root (``--out``, else the config's ``output``, else ``$HOTSPOT_HOME``, else
``./hotspot_out``):

    dataset/   generate   synthetic telemetry, scoring, ground truth
    imputed/   impute     filtered and imputed telemetry, loss trace
    analysis/  analyze    histograms, census, consistency, spatial tables
    forecast/  forecast   one JSON record per grid cell
    report/    report     lift/delta tables, stability, importance maps

Exit codes: 0 success, 2 configuration error, 3 missing or invalid data.
"""

from __future__ import annotations

import argparse
import logging
import shutil
import sys
from pathlib import Path

import numpy as np

from . import dynamics, evaluation, features, formats, impute, plotting
from .autoencoder import save_network
from .config import ConfigError, config_to_dict, load_config, resolve_seeds
from .core import compute_scores
from .synthgen import generate_dataset

log = logging.getLogger("hotspot")

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3


class DataError(Exception):
    pass


def _stage_dir(root: Path, name: str) -> Path:
    d = root / name
    d.mkdir(parents=True, exist_ok=True)
    return d


def _require(path: Path, what: str) -> Path:
    if not path.exists():
        raise DataError(f"{what} not found at {path}; run the upstream command first")
    return path


def _write_provenance(directory: Path, cfg, command: str):
    formats.write_json(directory / "run.json", {"command": command, "config": config_to_dict(cfg)})


def cmd_generate(cfg, root: Path, args) -> None:
    out = _stage_dir(root, "dataset")
    data, truth, scoring = generate_dataset(cfg.generator)
    formats.write_dataset(data, out, scoring)
    formats.write_json(
        out / "ground_truth.json",
        {
            "latent_hotness": ["".join("1" if v else "0" for v in row) for row in truth.latent_hotness],
            "assigned_pattern": list(truth.assigned_pattern),
            "emerging_events": [{"sector": s, "onset_day": d} for s, d in truth.emerging_events],
            "persistent_sectors": np.flatnonzero(truth.persistent_sectors).tolist(),
            "tower_of_sector": truth.tower_of_sector.tolist(),
            "kpi_groups": list(truth.kpi_groups),
        },
    )
    _write_provenance(out, cfg, "generate")
    log.info("wrote %d sectors x %d hours x %d KPIs to %s", *data.kpi.shape, out)


def cmd_impute(cfg, root: Path, args) -> None:
    src = _require(root / "dataset", "dataset")
    out = _stage_dir(root, "imputed")
    data = formats.read_dataset(src)
    filtered, discarded = impute.filter_sectors(data)
    if filtered.n_sectors == 0:
        raise DataError("every sector was discarded by the missing-data filter")
    n_missing = int(filtered.missing_mask.sum())
    rows = []
    if cfg.imputation.method == "autoencoder":
        rng = np.random.default_rng(cfg.imputation.seed)
        model = impute.train_autoencoder(filtered, cfg.imputation.spec(filtered.l_kpis), rng)
        result = impute.impute_missing(filtered, model)
        save_network(model.network, out / "autoencoder.bin",
                     {"norm_mean": model.normalization.mean, "norm_std": model.normalization.std})
        rows = [{"batch": k, "loss": v} for k, v in enumerate(model.loss_trace)]
        plotting.loss_trace(model.loss_trace, out / "loss_trace.svg")
    else:
        result = impute.carry_forward_impute(filtered)
    formats.write_table(out / "loss_trace.tsv", rows, ["batch", "loss"])
    formats.write_dataset(result, out)
    shutil.copyfile(src / "scoring.json", out / "scoring.json")
    formats.write_table(out / "discarded_sectors.tsv", [{"sector_id": s} for s in discarded], ["sector_id"])
    formats.write_json(out / "imputation.json", {
        "method": cfg.imputation.method,
        "sectors_in": data.n_sectors,
        "sectors_kept": filtered.n_sectors,
        "missing_entries_imputed": n_missing,
        "missing_fraction_before_filter": float(data.missing_mask.mean()),
    })
    _write_provenance(out, cfg, "impute")
    log.info("kept %d of %d sectors, imputed %d entries", filtered.n_sectors, data.n_sectors, n_missing)


def _load_imputed(root: Path):
    src = _require(root / "imputed", "imputed dataset")
    data = formats.read_dataset(src)
    if data.missing_mask.any():
        raise DataError(f"{src} still has missing entries")
    scoring = formats.read_scoring(src / "scoring.json")
    if scoring.weights.size != data.l_kpis:
        raise DataError("scoring.json does not match the number of KPIs")
    return data, scoring


def cmd_analyze(cfg, root: Path, args) -> None:
    data, scoring = _load_imputed(root)
    out = _stage_dir(root, "analysis")
    s = compute_scores(data, scoring)
    a = cfg.analysis

    duty = dynamics.duty_histograms(s.y_hour, s.y_day, s.y_week)
    for name, hist in duty.items():
        formats.write_table(out / f"duty_{name}.tsv", [{"bin": k, "frequency": v} for k, v in enumerate(hist)])
        plotting.histogram(hist, out / f"duty_{name}.svg", name.replace("_", " "))

    for name, counter in dynamics.run_length_histograms(s.y_hour, s.y_day).items():
        total = sum(counter.values())
        rows = [{"length": k, "count": c, "frequency": c / total} for k, c in sorted(counter.items())]
        formats.write_table(out / f"runs_{name}.tsv", rows, ["length", "count", "frequency"])
        longest = max(counter, default=0)
        freq = np.zeros(longest + 1)
        for k, c in counter.items():
            freq[k] = c / total
        plotting.histogram(freq, out / f"runs_{name}.svg", name.replace("_", " "))

    first_weekday = int(data.calendar[0, 1])
    census = dynamics.weekly_pattern_census(s.y_day, first_weekday, a.exclude_never_hot)
    formats.write_table(out / "weekly_patterns.tsv", [vars(r) for r in census], ["rank", "pattern", "count", "share"])
    plotting.census_bars(census, out / "weekly_patterns.svg")

    wc = dynamics.weekly_consistency(s.y_day)
    rows = [{"statistic": f"p{p}", "value": v} for p, v in wc["percentiles"].items()]
    rows += [{"statistic": "mean", "value": wc["mean"]},
             {"statistic": "excluded_sectors", "value": wc["n_excluded_sectors"]}]
    formats.write_table(out / "weekly_consistency.tsv", rows, ["statistic", "value"])

    buckets = dynamics.DistanceBuckets.logarithmic(a.bucket_low_km, a.bucket_high_km, a.n_buckets)
    for mode in a.spatial_modes:
        res = dynamics.spatial_correlation(s.y_hour, data.sector_coords, mode, buckets, a.n_nearest, a.n_top)
        rows = [{"bucket": b, **st} for b, st in zip(res["buckets"], res["stats"])]
        formats.write_table(out / f"spatial_{mode}.tsv", rows,
                            ["bucket", "count", "min", "q1", "median", "q3", "max", "mean"])
        formats.write_json(out / f"spatial_{mode}.json", {k: res[k] for k in
                           ("mode", "assigned", "excluded_constant", "excluded_distance", "neighbors")})
        plotting.bucket_boxes(res, out / f"spatial_{mode}.svg")
    _write_provenance(out, cfg, "analyze")


def cmd_forecast(cfg, root: Path, args) -> None:
    data, scoring = _load_imputed(root)
    out = _stage_dir(root, "forecast")
    s = compute_scores(data, scoring)
    x = features.assemble_input_tensor(data, s)
    result = evaluation.run_grid(data, s, x, cfg.grid, record_timing=args.record_timing)
    if not result.records:
        raise DataError("no grid cell could be evaluated; check t/h/w against the data length")
    formats.write_jsonl(out / "results.jsonl", result.records)
    formats.write_jsonl(out / "skipped.jsonl", result.skipped)
    names = list(x.layout.names)
    for (target, h, w), mat in sorted(result.importances.items()):
        rows = [{"hour": k, **dict(zip(names, row))} for k, row in enumerate(mat)]
        formats.write_table(out / f"importance_{target}_h{h}_w{w}.tsv", rows, ["hour"] + names)
    _write_provenance(out, cfg, "forecast")
    log.info("%d cells evaluated, %d skipped", len(result.records), len(result.skipped))


def cmd_report(cfg, root: Path, args) -> None:
    src = _require(root / "forecast", "forecast results")
    records = formats.read_jsonl(_require(src / "results.jsonl", "results.jsonl"))
    out = _stage_dir(root, "report")
    result = evaluation.GridResult(records=records)
    rw, rh = cfg.report.reference_w, cfg.report.reference_h
    cols = ["target", "model", "h", "w", "mean", "ci_low", "ci_high", "count"]
    for target in sorted({r["target"] for r in records}):
        for field_name, label in (("lift", "lift"), ("delta", "delta")):
            by_h = result.summary(field_name, by=("target", "model", "h"), target=target, w=rw)
            by_w = result.summary(field_name, by=("target", "model", "w"), target=target, h=rh)
            formats.write_table(out / f"{label}_by_h_{target}.tsv", [{**r, "w": rw} for r in by_h], cols)
            formats.write_table(out / f"{label}_by_w_{target}.tsv", [{**r, "h": rh} for r in by_w], cols)
            if field_name == "lift":
                if by_h:
                    plotting.lift_curves(by_h, "h", out / f"lift_by_h_{target}.svg", f"{target}, w={rw}")
                if by_w:
                    plotting.lift_curves(by_w, "w", out / f"lift_by_w_{target}.svg", f"{target}, h={rh}")

    stab = evaluation.temporal_stability(result)
    formats.write_table(out / "stability.tsv", stab["rows"], ["target", "model", "h", "w", "d", "p",
                                                             "n_first", "n_second"])
    formats.write_table(out / "stability_summary.tsv", [
        {"statistic": "combinations", "value": stab["n"]},
        {"statistic": "fraction_p_below_0.01", "value": stab["frac_below_0.01"]},
        {"statistic": "fraction_p_below_0.05", "value": stab["frac_below_0.05"]},
    ], ["statistic", "value"])

    for path in sorted(src.glob("importance_*.tsv")):
        table = formats.read_table(path)
        names = [c for c in table.columns if c != "hour"]
        mat = table[names].to_numpy(dtype=np.float64)
        formats.write_table(out / path.name.replace("importance_", "importance_by_channel_"),
                            [{"channel": c, "importance": v} for c, v in zip(names, mat.sum(axis=0))],
                            ["channel", "importance"])
        plotting.importance_map(mat, names, out / path.with_suffix(".svg").name, path.stem)
    _write_provenance(out, cfg, "report")


COMMANDS = {
    "generate": (cmd_generate, "generate a synthetic dataset"),
    "impute": (cmd_impute, "filter sectors and impute missing KPIs"),
    "analyze": (cmd_analyze, "exploratory hot spot statistics"),
    "forecast": (cmd_forecast, "run the forecasting experiment grid"),
    "report": (cmd_report, "aggregate grid results into tables and plots"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hotspot", description="Cellular hot spot forecasting pipeline")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="YAML config file, or a bundled name (tiny, default)")
        p.add_argument("--seed", type=int, help="global seed; re-derives every stage seed")
        p.add_argument("--out", help="output root directory")
        p.add_argument("--threads", type=int, help="worker threads (never changes results)")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "forecast":
            p.add_argument("--record-timing", action="store_true",
                           help="store per-cell wall time (makes output non-reproducible)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be >= 1")
            cfg.threads = args.threads
        if args.seed is not None:
            resolve_seeds(cfg, override=args.seed)
        cfg.grid.threads = cfg.threads
        root = cfg.output_root(args.out)
        root.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command][0](cfg, root, args)
    except ConfigError as e:
        print(f"hotspot: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, formats.SchemaError) as e:
        print(f"hotspot: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
