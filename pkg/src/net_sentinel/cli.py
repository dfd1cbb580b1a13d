"""Command-line entry point: ``net-sentinel <command>``."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import click

from . import pipeline
from .errors import NetSentinelError
from .synth import SCENARIOS, ScenarioScript, generate
from .transformer import OptimizerSettings, TransformerConfig


def _split(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    return json.loads(Path(path).read_text())


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose: bool):
    """Transformer-based network traffic anomaly detection."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")


def _run(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except NetSentinelError as exc:
        raise click.ClickException(f"{type(exc).__name__}: {exc}") from exc


@main.command()
@click.option("--scenario", type=click.Choice(SCENARIOS), required=True)
@click.option("--duration", type=float, default=300.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Output PCAP; labels go to <stem>.labels.json.")
@click.option("--window", type=float, default=30.0, show_default=True)
@click.option("--stride", type=float, default=None)
@click.option("--pps", type=float, default=2000.0, show_default=True, help="Flood rate.")
def synth(scenario, duration, seed, out, window, stride, pps):
    """Generate a labelled synthetic capture."""
    cap = generate(ScenarioScript(scenario, duration, seed, flood_pps=pps))
    pcap, labels = cap.write(out, window, stride)
    click.echo(f"{pcap} ({len(cap.records)} packets), {labels}")


@main.command()
@click.option("--pcap", "pcaps", multiple=True, required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--schema", type=click.Choice(["tcp", "byte"]), default="tcp", show_default=True)
@click.option("--window", type=float, default=30.0, show_default=True)
@click.option("--stride", type=float, default=None, help="Defaults to the window length.")
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--max-edge-len", type=int, default=256, show_default=True)
@click.option("--cache", "cache_dir", type=click.Path(file_okay=False), default=None)
def preprocess(pcaps, schema, window, stride, workers, max_edge_len, cache_dir):
    """Window, dissect and encode captures into the tensor cache."""
    cfg = pipeline.PipelineConfig(window_len=window, stride=stride, schema=schema, workers=workers,
                                  max_edge_len=max_edge_len)
    cache = _run(pipeline.preprocess, pcaps, cfg, cache_dir)
    click.echo(f"cache ready at {cache.root} ({len(cache.captures())} captures)")


@main.command()
@click.option("--cache", "cache_dir", type=click.Path(file_okay=False), default=None)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help='JSON with optional "transformer" and "optimizer" objects.')
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@click.option("--captures", default=None, help="Comma-separated capture ids to train on.")
@click.option("--allow-mixed", is_flag=True, help="Skip attack-labelled windows instead of refusing.")
@click.option("--max-sequences", type=int, default=None)
def train(cache_dir, config_path, seed, out, captures, allow_mixed, max_sequences):
    """Train the Transformer on normal windows."""
    raw = _load_config(config_path)
    tcfg = TransformerConfig(**raw.get("transformer", {}))
    opt = raw.get("optimizer", {})
    if seed is not None:
        opt["seed"] = seed
    settings = OptimizerSettings(**opt)
    path, history = _run(pipeline.train_cmd, cache_dir, tcfg, settings, out,
                         _split(captures) if captures else None, allow_mixed, max_sequences)
    click.echo(f"model written to {path}; final loss {history[-1]:.6f}")


@main.command()
@click.option("--cache", "cache_dir", type=click.Path(file_okay=False), default=None)
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), required=True)
def extract(cache_dir, model_path):
    """Compute hierarchical features for every cached window."""
    version = _run(pipeline.extract_cmd, cache_dir, model_path)
    click.echo(f"features version {version}")


@main.command("fit-detectors")
@click.option("--cache", "cache_dir", type=click.Path(file_okay=False), default=None)
@click.option("--levels", default="global,node,edge", show_default=True)
@click.option("--detector", "kind", type=click.Choice(["lof", "ocsvm", "ae"]), default="ae", show_default=True)
@click.option("--target-fpr", type=float, default=None)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None)
@click.option("--features", "version", default=None, help="Feature version (defaults to the only one present).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--captures", default=None, help="Comma-separated capture ids to fit on.")
@click.option("--allow-mixed", is_flag=True)
def fit_detectors(cache_dir, levels, kind, target_fpr, out_dir, version, seed, captures, allow_mixed):
    """Fit and calibrate one detector per hierarchy level."""
    paths = _run(pipeline.fit_detectors, cache_dir, _split(levels), kind, target_fpr, out_dir, version, seed,
                 _split(captures) if captures else None, allow_mixed)
    for level, p in paths.items():
        click.echo(f"{level}: {p}")


@main.command()
@click.option("--cache", "cache_dir", type=click.Path(file_okay=False), default=None)
@click.option("--detectors", "detectors_dir", type=click.Path(exists=True, file_okay=False), required=True)
@click.option("--levels", default=None, help="Restrict to these levels (all present by default).")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def detect(cache_dir, detectors_dir, levels, out):
    """Score every window and write a JSONL verdict stream."""
    path = _run(pipeline.detect_cmd, cache_dir, detectors_dir, out, _split(levels) if levels else None)
    click.echo(f"verdicts written to {path}")


@main.command()
@click.option("--verdicts", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--labels", type=click.Path(exists=True, dir_okay=False), default=None,
              help="labels.json from the cache directory.")
@click.option("--out", "out_dir", type=click.Path(file_okay=False), required=True)
def report(verdicts, labels, out_dir):
    """Metrics, per-device and per-edge anomaly counts, and a 2-D projection."""
    rep = _run(pipeline.report_cmd, verdicts, labels, out_dir)
    click.echo(rep.to_json())


@main.command()
@click.option("--cache", "cache_dir", type=click.Path(file_okay=False), default=None)
@click.option("--detector", "kind", type=click.Choice(["lof", "ocsvm", "ae"]), default="ae", show_default=True)
@click.option("--target-fpr", type=float, default=None)
@click.option("--folds", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--captures", default=None, help="Capture ids supplying normal windows.")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def crossval(cache_dir, kind, target_fpr, folds, seed, captures, out):
    """k-fold FPR on normal windows and per-scenario ADR."""
    rep = _run(pipeline.crossval, cache_dir, kind, target_fpr, folds, "global", None, seed,
               _split(captures) if captures else None)
    text = rep.to_json()
    if out:
        Path(out).write_text(text + "\n")
    click.echo(text)


if __name__ == "__main__":
    main()
