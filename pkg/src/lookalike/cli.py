"""Command-line pipeline: generate, simulate, mine, train, evaluate, serve.

Each stage reads and writes the JSONL/CSV/JSON formats of the library
modules, accepts --seed, and is deterministic under it: rerunning a command
with identical flags reproduces byte-identical outputs. Exit codes: 0 on
success, 1 on validation or runtime failure, 2 on usage errors.
"""

import functools
import sys

import click
import numpy as np

from . import aggregation, binning, evaluation, synthetic
from .errors import LookalikeError
from .projection import load_head, save_head
from .store import load_embeddings, save_embeddings
from .tasks import build_ranking_tasks, load_tasks, sample_query_ids, save_tasks
from .trainer import TrainConfig, save_loss_curve, train


def pipeline_command(func):
    """Uniform error handling: domain errors exit 1 with a diagnostic."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (LookalikeError, FileNotFoundError, OSError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)

    return wrapper


@click.group()
def main():
    """Perceptual face-similarity toolkit."""


@main.command("gen-synthetic")
@click.option("--n", type=int, default=600, show_default=True, help="Number of items.")
@click.option("--dim", type=int, default=32, show_default=True, help="Embedding dimension.")
@click.option("--identities", type=int, default=None,
              help="Number of identity labels (default: one per item).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(), help="Embeddings JSONL to write.")
@click.option("--metric-out", type=click.Path(), default=None,
              help="Write the hidden ground-truth metric JSON here.")
@click.option("--metric-dim", type=int, default=None,
              help="Rows of the hidden transform (default: dim).")
@pipeline_command
def gen_synthetic(n, dim, identities, seed, out, metric_out, metric_dim):
    """Generate synthetic embeddings and an optional hidden metric."""
    emb = synthetic.gen_embeddings(n, dim, identities if identities else n, seed=seed)
    save_embeddings(emb, out)
    click.echo(f"wrote {len(emb)} embeddings (dim {emb.dim}) to {out}")
    if metric_out:
        metric = synthetic.gen_metric(dim, d_prime=metric_dim, seed=seed + 1)
        synthetic.save_metric(metric, metric_out)
        click.echo(f"wrote hidden metric {metric.transform.shape} to {metric_out}")


@main.command("build-tasks")
@click.option("--embeddings", "embeddings_path", required=True, type=click.Path(exists=True))
@click.option("--num-queries", type=int, default=500, show_default=True)
@click.option("--candidates", "n_candidates", type=int, default=6, show_default=True,
              help="Candidates per task.")
@click.option("--holdout", type=int, default=0, show_default=True,
              help="Reserve this many tasks (disjoint query identities) for testing.")
@click.option("--holdout-out", type=click.Path(), default=None,
              help="Where to write the held-out tasks (required with --holdout).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
@pipeline_command
def build_tasks(embeddings_path, num_queries, n_candidates, holdout, holdout_out, seed, out):
    """Build ranking tasks: each query plus its nearest cross-identity faces."""
    if holdout and not holdout_out:
        raise click.UsageError("--holdout requires --holdout-out")
    if holdout >= num_queries:
        raise click.UsageError("--holdout must be smaller than --num-queries")
    emb = load_embeddings(embeddings_path)
    queries = sample_query_ids(emb, num_queries, seed=seed)
    tasks = build_ranking_tasks(emb, queries, n_candidates=n_candidates, seed=seed)
    if holdout:
        save_tasks(tasks[: num_queries - holdout], out)
        save_tasks(tasks[num_queries - holdout :], holdout_out)
        click.echo(
            f"wrote {num_queries - holdout} training tasks to {out} and "
            f"{holdout} held-out tasks to {holdout_out}"
        )
    else:
        save_tasks(tasks, out)
        click.echo(f"wrote {len(tasks)} tasks to {out}")


@main.command("simulate-workers")
@click.option("--embeddings", "embeddings_path", required=True, type=click.Path(exists=True))
@click.option("--metric", "metric_path", required=True, type=click.Path(exists=True),
              help="Hidden ground-truth metric JSON.")
@click.option("--tasks", "tasks_path", required=True, type=click.Path(exists=True))
@click.option("--workers", type=int, default=10, show_default=True)
@click.option("--noise-sigma", type=float, default=0.3, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path())
@pipeline_command
def simulate_workers(embeddings_path, metric_path, tasks_path, workers, noise_sigma, seed, out):
    """Simulate noisy workers ranking every task."""
    emb = load_embeddings(embeddings_path)
    metric = synthetic.load_metric(metric_path)
    tasks = load_tasks(tasks_path)
    rankings = synthetic.simulate_workforce(tasks, emb, metric, workers, noise_sigma, seed=seed)
    aggregation.save_rankings(rankings, out)
    click.echo(f"wrote {len(rankings)} rankings ({workers} workers x {len(tasks)} tasks) to {out}")


@main.command("filter-workers")
@click.option("--tasks", "tasks_path", required=True, type=click.Path(exists=True))
@click.option("--rankings", "rankings_path", required=True, type=click.Path(exists=True))
@click.option("--min-rearranged", type=float, default=1.5, show_default=True,
              help="Minimum mean images rearranged per task.")
@click.option("--seed", type=int, default=0, show_default=True, help="Unused; accepted for uniformity.")
@click.option("--out", required=True, type=click.Path())
@pipeline_command
def filter_workers(tasks_path, rankings_path, min_rearranged, seed, out):
    """Drop all work from lazy annotators."""
    tasks = load_tasks(tasks_path)
    rankings = aggregation.load_rankings(rankings_path)
    kept = aggregation.filter_lazy_workers(rankings, tasks, min_avg_rearranged=min_rearranged)
    aggregation.save_rankings(kept, out)
    removed_workers = len({r.worker_id for r in rankings}) - len({r.worker_id for r in kept})
    click.echo(
        f"kept {len(kept)}/{len(rankings)} rankings; removed {removed_workers} lazy workers"
    )


@main.command("mine-triplets")
@click.option("--tasks", "tasks_path", required=True, type=click.Path(exists=True))
@click.option("--rankings", "rankings_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=0, show_default=True, help="Unused; accepted for uniformity.")
@click.option("--out", required=True, type=click.Path())
@pipeline_command
def mine_triplets(tasks_path, rankings_path, seed, out):
    """Extract confidence-weighted hard triplets from worker rankings."""
    tasks = load_tasks(tasks_path)
    rankings = aggregation.load_rankings(rankings_path)
    ranked_tasks = {r.task_id for r in rankings}
    triplets = []
    skipped = 0
    for task in tasks:
        if task.task_id not in ranked_tasks:
            skipped += 1
            continue
        triplets.extend(aggregation.extract_hard_triplets(task, rankings))
    if not triplets:
        raise LookalikeError("no triplets mined; are the rankings empty?")
    aggregation.save_triplets(triplets, out)
    msg = f"mined {len(triplets)} hard triplets from {len(tasks) - skipped} tasks to {out}"
    if skipped:
        msg += f" ({skipped} tasks had no rankings)"
    click.echo(msg)


@main.command("train")
@click.option("--embeddings", "embeddings_path", required=True, type=click.Path(exists=True))
@click.option("--triplets", "triplets_path", required=True, type=click.Path(exists=True))
@click.option("--tasks", "tasks_path", type=click.Path(exists=True), default=None,
              help="Ranking tasks for easy-triplet sampling (needed when --easy-prob > 0).")
@click.option("--alpha", type=float, default=0.05, show_default=True, help="Triplet margin.")
@click.option("--learning-rate", type=float, default=1e-4, show_default=True)
@click.option("--batch-size", type=int, default=32, show_default=True)
@click.option("--easy-prob", type=float, default=0.5, show_default=True,
              help="Probability a batch slot uses a sampled easy triplet.")
@click.option("--epochs", type=int, default=30, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--d-out", type=int, default=None, help="Output dimension (default: input dim).")
@click.option("--normalize/--no-normalize", "normalize_output", default=True,
              show_default=True, help="Unit-normalize head outputs.")
@click.option("--out", required=True, type=click.Path(), help="Trained head JSON.")
@click.option("--loss-out", type=click.Path(), default=None, help="Loss curve CSV.")
@pipeline_command
def train_command(embeddings_path, triplets_path, tasks_path, alpha, learning_rate,
                  batch_size, easy_prob, epochs, seed, d_out, normalize_output, out, loss_out):
    """Train the projection head with the triplet hinge loss."""
    emb = load_embeddings(embeddings_path)
    triplets = aggregation.load_triplets(triplets_path)
    tasks = load_tasks(tasks_path) if tasks_path else []
    config = TrainConfig(
        alpha=alpha,
        learning_rate=learning_rate,
        batch_size=batch_size,
        easy_prob=easy_prob,
        epochs=epochs,
        seed=seed,
        d_out=d_out,
        normalize_output=normalize_output,
    )
    head, curve = train(emb, triplets, tasks, config)
    save_head(head, out)
    if loss_out:
        save_loss_curve(curve, loss_out)
    final = f"{curve[-1]:.6f}" if curve else "n/a"
    click.echo(f"trained {epochs} epochs on {len(triplets)} hard triplets; "
               f"final mean loss {final}; head written to {out}")


@main.command("evaluate")
@click.option("--embeddings", "embeddings_path", required=True, type=click.Path(exists=True))
@click.option("--head", "head_path", type=click.Path(exists=True), default=None,
              help="Trained head JSON (omit to score the raw base embedding).")
@click.option("--tasks", "tasks_path", required=True, type=click.Path(exists=True),
              help="Held-out ranking tasks.")
@click.option("--rankings", "rankings_path", required=True, type=click.Path(exists=True),
              help="(Filtered) worker rankings for the held-out tasks.")
@click.option("--triplets", "triplets_path", required=True, type=click.Path(exists=True),
              help="Hard triplets mined from the held-out tasks.")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed for sampling the easy test triplets.")
@click.option("--out", required=True, type=click.Path(), help="Report JSON.")
@click.option("--csv-dir", type=click.Path(), default=None,
              help="Also emit the report tables as CSV files here.")
@pipeline_command
def evaluate_command(embeddings_path, head_path, tasks_path, rankings_path, triplets_path,
                     seed, out, csv_dir):
    """Run the full metric suite on held-out tasks."""
    emb = load_embeddings(embeddings_path)
    head = load_head(head_path) if head_path else None
    tasks = load_tasks(tasks_path)
    rankings = aggregation.load_rankings(rankings_path)
    hard = aggregation.load_triplets(triplets_path)
    ranked = {r.task_id for r in rankings}
    usable = [t for t in tasks if t.task_id in ranked]
    if not usable:
        raise LookalikeError("no held-out task has rankings")
    aggregated = [aggregation.average_positions(t, rankings) for t in usable]
    easy = aggregation.sample_easy_triplets(usable, emb, count=len(hard), seed=seed)
    report = evaluation.build_eval_report(head, emb, hard, easy, aggregated)
    evaluation.save_report(report, out)
    if csv_dir:
        evaluation.write_report_csvs(report, csv_dir)
    click.echo(f"hard accuracy:  {report.hard_accuracy:.4f} ({len(hard)} triplets)")
    click.echo(f"easy accuracy:  {report.easy_accuracy:.4f} ({len(easy)} triplets)")
    click.echo(f"total:          {report.total:.4f}")
    click.echo(f"mean NDCG:      {report.mean_ndcg:.4f} over {len(aggregated)} tasks")
    for k, rate in sorted(report.precision_at_k.items()):
        click.echo(f"precision@{k}:   {rate:.4f}")
    if report.precision_skipped:
        click.echo(f"(skipped {report.precision_skipped} tasks with tied ground-truth top)")
    click.echo(f"report written to {out}")


@main.command("bin-analysis")
@click.option("--embeddings", "embeddings_path", required=True, type=click.Path(exists=True))
@click.option("--bins", type=int, default=10, show_default=True,
              help="Number of equal-count distance bins.")
@click.option("--edges", type=str, default=None,
              help="Comma-separated explicit bin edges (overrides --bins).")
@click.option("--per-cell", type=int, default=100, show_default=True,
              help="Pair-of-pairs tasks per bin pair.")
@click.option("--votes", "votes_path", type=click.Path(exists=True), default=None,
              help="Ingest real votes JSONL instead of simulating.")
@click.option("--metric", "metric_path", type=click.Path(exists=True), default=None,
              help="Hidden metric for simulated voters (default: base distance).")
@click.option("--workers", type=int, default=10, show_default=True)
@click.option("--noise-sigma", type=float, default=0.0, show_default=True)
@click.option("--threshold", type=float, default=0.8, show_default=True,
              help="Agreement threshold for counting a task.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--matrix-out", required=True, type=click.Path(), help="Bin matrix CSV.")
@click.option("--tasks-out", type=click.Path(), default=None,
              help="Persist the generated pair-of-pairs tasks.")
@click.option("--votes-out", type=click.Path(), default=None,
              help="Persist the simulated votes.")
@click.option("--accuracy-subset", type=str, default=None,
              help="Comma-separated bin indices for an extra triangle accuracy.")
@pipeline_command
def bin_analysis(embeddings_path, bins, edges, per_cell, votes_path, metric_path, workers,
                 noise_sigma, threshold, seed, matrix_out, tasks_out, votes_out,
                 accuracy_subset):
    """Bin cross-identity pairs by distance and score agreement with voters."""
    emb = load_embeddings(embeddings_path)
    if edges:
        edge_list = [float(x) for x in edges.split(",")]
    else:
        edge_list = binning.decile_edges(emb, n_bins=bins)
    binned = binning.bin_pairs(emb, edge_list)
    tasks = binning.build_pair_comparison_tasks(binned, per_cell=per_cell, seed=seed)
    if tasks_out:
        binning.save_pair_tasks(tasks, tasks_out)
    if votes_path:
        votes = binning.load_pair_votes(votes_path)
    else:
        if metric_path:
            metric = synthetic.load_metric(metric_path)
        else:
            metric = synthetic.GroundTruthMetric(np.eye(emb.dim))
        votes = synthetic.simulate_pair_votes(tasks, emb, metric, workers, noise_sigma,
                                              seed=seed)
        if votes_out:
            binning.save_pair_votes(votes, votes_out)
    matrix = binning.aggregate_pair_votes(tasks, votes, agreement_threshold=threshold,
                                          tasks_per_cell=per_cell, edges=edge_list)
    matrix.to_csv(matrix_out)
    click.echo(f"{len(tasks)} pair-of-pairs tasks across {len(edge_list) - 1} bins")
    click.echo(f"bin matrix written to {matrix_out}")
    click.echo(f"triangle accuracy (all bins): {binning.triangle_accuracy(matrix):.4f}")
    if accuracy_subset:
        subset = [int(x) for x in accuracy_subset.split(",")]
        click.echo(
            f"triangle accuracy (bins {subset}): "
            f"{binning.triangle_accuracy(matrix, subset):.4f}"
        )


@main.command("serve")
@click.option("--embeddings", "embeddings_path", required=True, type=click.Path(exists=True))
@click.option("--tasks", "tasks_path", required=True, type=click.Path(exists=True))
@click.option("--rankings-out", required=True, type=click.Path(),
              help="Append-only JSONL the collected rankings go to.")
@click.option("--head", "head_path", type=click.Path(exists=True), default=None)
@click.option("--static-dir", type=click.Path(exists=True), default=None,
              help="Directory with the annotation UI to serve at /.")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8000, show_default=True)
@click.option("--quota", type=int, default=10, show_default=True,
              help="Maximum tasks dispensed per worker.")
@click.option("--seed", type=int, default=0, show_default=True, help="Unused; accepted for uniformity.")
@pipeline_command
def serve(embeddings_path, tasks_path, rankings_out, head_path, static_dir, host, port,
          quota, seed):
    """Serve lookalike retrieval, task dispatch and ranking collection."""
    import uvicorn

    from .service import ServiceConfig, create_app

    app = create_app(
        ServiceConfig(
            embeddings_path=embeddings_path,
            tasks_path=tasks_path,
            rankings_out_path=rankings_out,
            head_path=head_path,
            static_dir=static_dir,
            worker_quota=quota,
        )
    )
    uvicorn.run(app, host=host, port=port)


if __name__ == "__main__":
    main()
