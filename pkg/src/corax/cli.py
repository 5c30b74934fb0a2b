"""Batch command line: dataset generation, pipeline runs, report rendering,
and the review service.

Exit codes: 0 success, 1 usage error, 2 a metric was undefined (outputs
are still written), 3 I/O failure.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from corax.errors import CoraxError, IOFailure, UndefinedMetricError, ValidationError
from corax.errorsim import ErrorSpec, inject_errors
from corax.images import frame_to_u8, write_png
from corax.labeling import ACTIVE_LABELS, Abnormality
from corax.metrics import build_report, exceedance_from_cdf
from corax.oracle import GroundTruthBackend, PriorDwellBackend
from corax.priors import load_atlas
from corax.referral import GrounderConfig, RoiMode, analyze_case, decide, simulated_decision
from corax.synth import generate_dataset, load_dataset

SIMULATED_ACTOR = "simulated-oracle"

# options that honor the flag > env > config-file precedence in `run`
_LAYERED_OPTIONS = {
    "backend": "CORAX_BACKEND",
    "grounder": "CORAX_GROUNDER",
    "roi": "CORAX_ROI",
    "prior_threshold": "CORAX_PRIOR_THRESHOLD",
    "window_ms": "CORAX_WINDOW_MS",
    "stride_ms": "CORAX_STRIDE_MS",
}


def _layered(ctx: click.Context, config: dict, name: str, flag_value):
    """Resolve one option: explicit flag, then env var, then config file."""
    from click.core import ParameterSource

    if ctx.get_parameter_source(name) == ParameterSource.COMMANDLINE:
        return flag_value
    env = os.environ.get(_LAYERED_OPTIONS[name])
    if env is not None:
        return type(flag_value)(env) if not isinstance(flag_value, str) else env
    if name in config:
        return config[name]
    return flag_value


def _parse_positives(spec: str) -> dict[Abnormality, int]:
    out = {}
    for part in spec.split(","):
        name, _, count = part.partition("=")
        try:
            out[Abnormality(name.strip())] = int(count)
        except ValueError as exc:
            raise click.UsageError(f"bad positives entry {part!r}: {exc}") from None
    return out


@click.group()
def cli():
    """Collaborative chest X-ray miss-detection pipeline."""


@cli.command("gen-synthetic")
@click.option("--cases", "n_cases", type=int, required=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--positives", default=None,
              help="Exact per-label positive counts, e.g. 'cardiomegaly=65,edema=54'.")
@click.option("--image-size", type=int, default=128, show_default=True)
@click.option("--min-labels", type=int, default=0, show_default=True)
def gen_synthetic(n_cases, seed, out_dir, positives, image_size, min_labels):
    """Write N internally consistent synthetic case bundles."""
    if n_cases < 1:
        raise click.UsageError("--cases must be at least 1")
    pos = _parse_positives(positives) if positives else None
    try:
        manifest = generate_dataset(out_dir, n_cases, seed, pos, image_size, min_labels)
    except OSError as exc:
        raise IOFailure(f"cannot write dataset to {out_dir}: {exc}") from exc
    click.echo(f"wrote {manifest['cases']} cases to {out_dir}")
    for label, count in sorted(manifest["positives"].items()):
        click.echo(f"  {label}: {count} positive")
    click.echo(f"  total positive slots: {manifest['total_positive_slots']}")
    return 0


@cli.command("run")
@click.option("--in", "in_dir", type=click.Path(exists=True), required=True)
@click.option("--error-spec", "spec_path", type=click.Path(exists=True), required=True)
@click.option("--backend", type=click.Choice(["gt", "prior"]), default="gt", show_default=True)
@click.option("--grounder", type=click.Choice(["dwell", "transcript"]), default="transcript",
              show_default=True)
@click.option("--roi", type=click.Choice(["mean", "static"]), default="mean", show_default=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.option("--atlas", "atlas_dir", type=click.Path(exists=True), default=None,
              help="Prior atlas directory (defaults to the bundled atlas).")
@click.option("--prior-threshold", type=float, default=0.15, show_default=True)
@click.option("--window-ms", type=float, default=2000.0, show_default=True)
@click.option("--stride-ms", type=float, default=250.0, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="Pipeline config JSON; flags and CORAX_* env vars take precedence.")
@click.pass_context
def run(ctx, in_dir, spec_path, backend, grounder, roi, out_dir, atlas_dir,
        prior_threshold, window_ms, stride_ms, config_path):
    """Inject errors, analyze every case, review with the scripted oracle,
    and write the metrics report plus CSV exports."""
    config_path = config_path or os.environ.get("CORAX_CONFIG")
    try:
        config = (
            json.loads(Path(config_path).read_text(encoding="utf-8")) if config_path else {}
        )
        cases = load_dataset(in_dir)
        spec = ErrorSpec.from_doc(json.loads(Path(spec_path).read_text(encoding="utf-8")))
    except (OSError, json.JSONDecodeError) as exc:
        raise IOFailure(f"cannot load inputs: {exc}") from exc
    except (KeyError, ValueError) as exc:
        raise ValidationError("error_spec", f"malformed spec: {exc}") from exc

    backend = _layered(ctx, config, "backend", backend)
    grounder = _layered(ctx, config, "grounder", grounder)
    roi = _layered(ctx, config, "roi", roi)
    prior_threshold = float(_layered(ctx, config, "prior_threshold", prior_threshold))
    window_ms = float(_layered(ctx, config, "window_ms", window_ms))
    stride_ms = float(_layered(ctx, config, "stride_ms", stride_ms))
    for name, value, allowed in (
        ("backend", backend, ("gt", "prior")),
        ("grounder", grounder, ("dwell", "transcript")),
        ("roi", roi, ("mean", "static")),
    ):
        if value not in allowed:
            raise ValidationError(name, f"{value!r} is not one of {allowed}")

    altered, records = inject_errors(cases, spec)

    atlas = load_atlas(atlas_dir) if atlas_dir else None
    oracle = (
        GroundTruthBackend()
        if backend == "gt"
        else PriorDwellBackend(atlas=atlas, threshold=prior_threshold)
    )
    grounder_cfg = GrounderConfig(
        kind=grounder, window_ms=window_ms, stride_ms=stride_ms, atlas=atlas
    )
    roi_mode = RoiMode.MEAN_IMAGE if roi == "mean" else RoiMode.STATIC_HEATMAP

    analyses = []
    for case in altered:
        analysis = analyze_case(case, oracle, grounder_cfg, roi_mode)
        for referral in analysis.referrals:
            decision = simulated_decision(
                referral, case.ground_truth.labels, analysis.set_a
            )
            decide(referral, decision, SIMULATED_ACTOR)
        analyses.append(analysis)

    report = build_report(
        cases={c.case_id: c for c in altered},
        analyses=analyses,
        provenance={
            "backend": oracle.provenance(),
            "grounder": grounder_cfg.provenance(),
            "roi_mode": roi_mode.value,
            "error_spec": spec.to_doc(),
            "dataset": str(in_dir),
        },
        error_records=records,
    )

    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        report.write_json(out / "metrics.json")
        report.write_csvs(out)
        with (out / "error_records.jsonl").open("w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec.to_doc(), sort_keys=True) + "\n")
        roi_dir = out / "rois"
        if any(a.referrals for a in analyses):
            roi_dir.mkdir(exist_ok=True)
        with (out / "analyses.jsonl").open("w", encoding="utf-8") as fh:
            for analysis in analyses:
                doc = analysis.to_doc()
                for referral, rdoc in zip(analysis.referrals, doc["referrals"]):
                    path = f"rois/{referral.referral_id}.png"
                    (out / path).write_bytes(write_png(frame_to_u8(referral.roi)))
                    rdoc["roi_path"] = path
                fh.write(json.dumps(doc, sort_keys=True) + "\n")
    except OSError as exc:
        raise IOFailure(f"cannot write outputs to {out_dir}: {exc}") from exc

    inter = report.interactions
    click.echo(
        f"{inter['cases']} cases: {len(records)} injected misses, "
        f"{inter['referrals_total']} referrals "
        f"({inter['referrals_accepted']} accepted, {inter['referrals_rejected']} rejected)"
    )
    if report.undefined:
        click.echo(f"undefined metrics: {', '.join(report.undefined)}", err=True)
        return 2
    return 0


def _fmt(value) -> str:
    return "" if value is None else f"{value:.4f}"


def _report_lines(doc: dict, fmt: str) -> list[str]:
    inter = doc["interactions"]
    if inter["cases"] == 0:
        return ["no data"]

    header = ["abnormality", "tr", "fd", "pecr", "fr", "td", "oder"]
    rows = []
    for name, m in sorted(doc["per_abnormality"].items()):
        c = m["counts"]
        rows.append([
            name, str(c["tr"]), str(c["fd"]), _fmt(m["pecr"]),
            str(c["fr"]), str(c["td"]), _fmt(m["oder"]),
        ])

    n_ru = len(doc["ru_samples"])
    ru_gt_02 = exceedance_from_cdf([tuple(p) for p in doc["cdf_ru"]], n_ru, 0.2) if n_ru else 0
    n_tu = len(doc["tu_samples"])
    tu_gt_04 = exceedance_from_cdf([tuple(p) for p in doc["cdf_tu"]], n_tu, 0.4) if n_tu else 0

    summary = [
        ("ru_true_mean", _fmt(doc["ru_true_mean"])),
        ("ru_true_ci_low", _fmt(doc["ru_true_ci"][0]) if doc["ru_true_ci"] else ""),
        ("ru_true_ci_high", _fmt(doc["ru_true_ci"][1]) if doc["ru_true_ci"] else ""),
        ("ru_true_n", str(doc["ru_true_n"])),
        ("referrals_over_0.2", f"{ru_gt_02}/{n_ru}"),
        ("interactions_over_0.4", f"{tu_gt_04}/{n_tu}"),
        ("deferral_cases", f"{inter['deferral_correct']}+{inter['deferral_missed']}"
                           f"/{inter['cases']}"),
        ("referral_cases", f"{inter['referral_cases']}/{inter['cases']}"),
    ]

    if fmt == "md":
        lines = ["| " + " | ".join(header) + " |",
                 "|" + "---|" * len(header)]
        lines += ["| " + " | ".join(r) + " |" for r in rows]
        lines.append("")
        lines += [f"- {k}: {v}" for k, v in summary]
    else:
        lines = [",".join(header)]
        lines += [",".join(r) for r in rows]
        lines.append("")
        lines.append("metric,value")
        lines += [f"{k},{v}" for k, v in summary]
    return lines


@cli.command("report")
@click.option("--metrics", "metrics_path", type=click.Path(), required=True)
@click.option("--format", "fmt", type=click.Choice(["md", "csv"]), default="md",
              show_default=True)
def report(metrics_path, fmt):
    """Render a per-abnormality table plus distribution summary lines."""
    path = Path(metrics_path)
    if not path.exists():
        raise IOFailure(f"metrics file {metrics_path} not found")
    doc = json.loads(path.read_text(encoding="utf-8"))
    for line in _report_lines(doc, fmt):
        click.echo(line)
    return 0


@cli.command("serve")
@click.option("--port", type=int, default=None, help="Defaults to CORAX_PORT or 8741.")
@click.option("--data-dir", type=click.Path(), default=None,
              help="Defaults to CORAX_DATA_DIR or ./corax-data.")
@click.option("--backend", type=click.Choice(["gt", "prior"]), default="gt", show_default=True)
@click.option("--grounder", type=click.Choice(["auto", "dwell", "transcript"]),
              default="auto", show_default=True)
def serve(port, data_dir, backend, grounder):
    """Run the review service."""
    import uvicorn

    from corax.service import DEFAULT_PORT, create_app
    from corax.store import CaseStore

    port = port or int(os.environ.get("CORAX_PORT", DEFAULT_PORT))
    data_dir = data_dir or os.environ.get("CORAX_DATA_DIR", "./corax-data")
    app = create_app(CaseStore(data_dir), {"backend": backend, "grounder": grounder})
    uvicorn.run(app, host="127.0.0.1", port=port)
    return 0


def main(argv: list[str] | None = None) -> int:
    try:
        result = cli.main(args=argv, standalone_mode=False)
        return int(result) if isinstance(result, int) else 0
    except click.UsageError as exc:
        click.echo(f"usage error: {exc.format_message()}", err=True)
        return 1
    except click.Abort:
        return 1
    except UndefinedMetricError as exc:
        click.echo(f"undefined metric: {exc}", err=True)
        return 2
    except IOFailure as exc:
        click.echo(f"i/o error: {exc}", err=True)
        return 3
    except OSError as exc:
        click.echo(f"i/o error: {exc}", err=True)
        return 3
    except CoraxError as exc:
        click.echo(f"error: {exc}", err=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
