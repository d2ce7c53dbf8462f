"""Operator CLI: crawl, topup, filter, train, evaluate, serve, export.

Every command is a thin wrapper over the library; `train` runs multiple
variant configs in parallel tasks (one log file each) while each variant
itself stays single-threaded and deterministic.
"""

from __future__ import annotations

import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import requests

from . import dataset as ds_ops
from .models import (
    EvalReport,
    TrainingConfig,
    evaluate as evaluate_op,
    load_model,
    save_model,
    train_mf,
    train_multvae,
)
from .scrobble import CrawlPlan, ScrobbleApiConfig, ScrobbleClient, ScrobbleError


def _fail(stage: str, exc: Exception) -> None:
    click.echo(f"error in {stage}: {exc}", err=True)
    sys.exit(1)


def format_filter_report(report: ds_ops.FilterReport) -> str:
    return (
        f"min_le: {report.min_le}\n"
        f"tracks: {report.tracks_before} -> {report.tracks_after}"
        f" ({report.track_reduction_pct:.2f}% removed)\n"
        f"events: {report.events_before} -> {report.events_after}"
        f" ({report.event_reduction_pct:.2f}% removed)"
    )


def format_eval_report(report: EvalReport) -> str:
    return (
        f"recall@{report.k}: {report.recall_at_k:.4f}\n"
        f"ndcg@{report.k}: {report.ndcg_at_k:.4f}\n"
        f"users evaluated: {report.n_eval_users}"
    )


@click.group()
def main():
    """Live music-recommendation study platform."""


@main.command()
@click.option("--base-url", required=True, help="Scrobble API base URL.")
@click.option("--api-key", default=None)
@click.option("--seed-user", "seed_users", multiple=True, required=True)
@click.option("--target-users", type=int, required=True)
@click.option("--seed", type=int, default=0, show_default=True, help="RNG seed for the crawl.")
@click.option("--max-friends", type=int, default=100, show_default=True)
@click.option("--page-size", type=int, default=200, show_default=True)
@click.option("--min-interval-ms", type=float, default=0.0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Events TSV to write.")
def crawl(base_url, api_key, seed_users, target_users, seed, max_friends, page_size, min_interval_ms, out):
    """Crawl the friends graph and collect the crawled users' histories."""
    try:
        client = ScrobbleClient(
            ScrobbleApiConfig(
                base_url=base_url,
                api_key=api_key,
                page_size=page_size,
                min_request_interval_ms=min_interval_ms,
            )
        )
        plan = CrawlPlan(
            seed_usernames=tuple(seed_users),
            target_user_count=target_users,
            rng_seed=seed,
            max_friends_per_user=max_friends,
        )
        result = client.crawl_social_graph(plan)
        click.echo(
            f"crawled {len(result.usernames)} users"
            + (" (graph exhausted)" if result.exhausted else "")
        )
        events = []
        for username in result.usernames:
            try:
                events.extend(client.fetch_user_history(username))
            except ScrobbleError as exc:
                click.echo(f"skipping {username}: {exc}", err=True)
        merged = ds_ops.Dataset.from_events(events)
        ds_ops.write_events_file(merged, out)
        click.echo(f"wrote {merged.n_events} events ({merged.n_users} users, {merged.n_tracks} tracks) to {out}")
    except ScrobbleError as exc:
        _fail("crawl", exc)
    except OSError as exc:
        _fail("crawl output", exc)


@main.command()
@click.option("--base", "base_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--fresh", "fresh_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--seed", type=int, default=0, show_default=True, help="User-order shuffle seed.")
def topup(base_path, fresh_path, out, seed):
    """Merge freshly crawled events into a base dataset and randomize."""
    try:
        base, _ = ds_ops.read_events_file(base_path)
        fresh, _ = ds_ops.read_events_file(fresh_path)
        merged = ds_ops.top_up_merge(base, fresh, seed=seed)
        ds_ops.write_events_file(merged, out)
        click.echo(
            f"merged {base.n_events} + {fresh.n_events} -> {merged.n_events} events"
            f" ({merged.n_users} users, {merged.n_tracks} tracks)"
        )
    except (OSError, ds_ops.TooManyMalformed) as exc:
        _fail("topup", exc)


@main.command("filter")
@click.option("--min-le", type=int, required=True, help="Tracks with this many events or fewer are removed.")
@click.option("--in", "in_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def filter_cmd(min_le, in_path, out):
    """Drop rarely-played tracks and report both reduction percentages."""
    try:
        dataset, report = ds_ops.read_events_file(in_path)
        if report.malformed:
            click.echo(f"{len(report.malformed)} malformed records skipped", err=True)
        filtered, freport = ds_ops.filter_min_interactions(dataset, min_le)
        ds_ops.write_events_file(filtered, out)
        click.echo(format_filter_report(freport))
    except (OSError, ds_ops.TooManyMalformed, ValueError) as exc:
        _fail("filter", exc)


def _load_variant(path) -> tuple[str, str, TrainingConfig]:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    kind = data.pop("kind")
    if kind not in ("mf", "multvae"):
        raise ValueError(f"{path}: kind must be 'mf' or 'multvae', got {kind!r}")
    name = data.pop("name", Path(path).stem)
    return name, kind, TrainingConfig(**data)


def _train_variant(dataset, name, kind, cfg, out_dir) -> str:
    """Train one variant; returns the model path.  No state shared across variants."""
    log_path = Path(out_dir) / f"{name}.log"
    model_path = Path(out_dir) / f"{name}.lrs1"
    catalog = tuple((k.artist_name, k.track_title) for k in dataset.track_index)
    with open(log_path, "w", encoding="utf-8") as log_fh:
        if kind == "mf":
            matrix = ds_ops.build_interaction_matrix(dataset, binarize=False)
            model = train_mf(
                matrix, cfg,
                iteration_callback=lambda it, obj: log_fh.write(f"iteration {it} objective {obj:.6f}\n"),
            )
        else:
            matrix = ds_ops.build_interaction_matrix(dataset, binarize=True)
            model = train_multvae(
                matrix, cfg,
                epoch_callback=lambda ep, loss: log_fh.write(f"epoch {ep} loss {loss:.6f}\n"),
            )
    model.item_catalog = catalog
    save_model(model, model_path)
    return str(model_path)


@main.command()
@click.option("--in", "in_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--variant", "variants", multiple=True, required=True,
              type=click.Path(exists=True, dir_okay=False),
              help="Variant config JSON; repeat to train several concurrently.")
@click.option("--out-dir", type=click.Path(file_okay=False), required=True)
@click.option("--seed", type=int, default=None, help="Override every variant's rng_seed.")
@click.option("--sequential", is_flag=True, help="Run variants one after another.")
def train(in_path, variants, out_dir, seed, sequential):
    """Train model variants concurrently on CPU, one log file each."""
    try:
        dataset, _ = ds_ops.read_events_file(in_path)
        if dataset.n_events == 0:
            raise ValueError("no events to train on")
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        specs = [_load_variant(v) for v in variants]
        if seed is not None:
            from dataclasses import replace

            specs = [(n, k, replace(c, rng_seed=seed)) for n, k, c in specs]
    except (OSError, ValueError, KeyError, ds_ops.TooManyMalformed) as exc:
        _fail("train setup", exc)
        return
    try:
        if sequential or len(specs) == 1:
            paths = [_train_variant(dataset, n, k, c, out_dir) for n, k, c in specs]
        else:
            with ThreadPoolExecutor(max_workers=len(specs)) as pool:
                futures = [pool.submit(_train_variant, dataset, n, k, c, out_dir) for n, k, c in specs]
                paths = [f.result() for f in futures]
        for path in paths:
            click.echo(f"wrote {path}")
    except Exception as exc:
        _fail("train", exc)


@main.command()
@click.option("--in", "in_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Evaluate an existing model file against a fresh holdout split.")
@click.option("--variant", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Or: split first, train this variant on the train part, then evaluate.")
@click.option("--k", type=int, default=10, show_default=True)
@click.option("--validation-fraction", type=float, default=0.2, show_default=True)
@click.option("--holdout-fraction", type=float, default=0.2, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def evaluate(in_path, model_path, variant, k, validation_fraction, holdout_fraction, seed):
    """Offline recall@k / NDCG@k on a strong-generalization split."""
    if (model_path is None) == (variant is None):
        raise click.UsageError("provide exactly one of --model or --variant")
    try:
        dataset, _ = ds_ops.read_events_file(in_path)
        if model_path is not None:
            model = load_model(model_path)
            if model.item_catalog is None:
                raise ValueError(f"{model_path} has no item catalog")
            track_index = {
                ds_ops.TrackKey(a, t): i for i, (a, t) in enumerate(model.item_catalog)
            }
            matrix = ds_ops.build_matrix_against_index(dataset, track_index, binarize=True)
            split = ds_ops.split_holdout(matrix, validation_fraction, holdout_fraction, seed)
        else:
            name, kind, cfg = _load_variant(variant)
            matrix = ds_ops.build_interaction_matrix(dataset, binarize=True)
            split = ds_ops.split_holdout(matrix, validation_fraction, holdout_fraction, seed)
            train_fn = train_mf if kind == "mf" else train_multvae
            model = train_fn(split.train, cfg)
        report = evaluate_op(model, split, k)
        click.echo(format_eval_report(report))
    except Exception as exc:
        _fail("evaluate", exc)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--port", type=int, default=None, help="Override the configured port.")
@click.option("--host", default="127.0.0.1", show_default=True)
def serve(config_path, port, host):
    """Run the study web service."""
    import uvicorn

    from .service import ServiceConfig, create_app

    try:
        config = ServiceConfig.load(config_path)
    except Exception as exc:
        _fail("serve config", exc)
        return
    app = create_app(config)
    uvicorn.run(app, host=host, port=port or config.port, log_level="info")


@main.command()
@click.option("--base-url", required=True, help="Running study service, e.g. http://localhost:8000")
@click.option("--token", required=True, help="Admin token.")
@click.option("--from", "from_ts", default=None, help="Only responses at/after this unix time.")
@click.option("--to", "to_ts", default=None, help="Only responses before this unix time.")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="File instead of stdout.")
def export(base_url, token, from_ts, to_ts, out):
    """Download the response export (NDJSON) from a running service."""
    try:
        params = {}
        if from_ts is not None:
            params["from"] = from_ts
        if to_ts is not None:
            params["to"] = to_ts
        resp = requests.get(
            f"{base_url.rstrip('/')}/api/export",
            params=params,
            headers={"Authorization": f"Bearer {token}"},
            timeout=60,
        )
        if resp.status_code == 401:
            raise ValueError("unauthorized: check --token")
        resp.raise_for_status()
        if out:
            Path(out).write_text(resp.text, encoding="utf-8")
            click.echo(f"wrote {len(resp.text.splitlines())} records to {out}")
        else:
            click.echo(resp.text, nl=False)
    except (requests.RequestException, ValueError, OSError) as exc:
        _fail("export", exc)


if __name__ == "__main__":
    main()
