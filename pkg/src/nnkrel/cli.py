"""Command line entry point: ``nnkrel <command>``."""

from __future__ import annotations

import csv
import logging
from pathlib import Path

import click
import numpy as np

from .clustering import fit_supervised, fit_unsupervised
from .embeddings import DatasetError, l2_normalize, load_dataset, save_dataset, write_labels
from .geometry import DEFAULT_K_INIT, KernelConfig, default_bandwidth
from .harness import BASELINE, ExperimentConfig, ExperimentError, run_experiment
from .inference import knn_baseline, predict_many
from .nnk import query_neighborhoods
from .noise import (
    ASYMMETRIC_RATES,
    CIFAR10_ASYMMETRIC,
    SYMMETRIC_RATES,
    format_mapping,
    inject_asymmetric,
    inject_symmetric,
    parse_mapping,
    write_flip_mask_csv,
)
from .reliability import (
    METHODS,
    knn_reliability,
    nnk_diameter_ratio_reliability,
    nnk_weights_reliability,
    read_reliability_csv,
    supervised_kmeans_reliability,
    unsupervised_kmeans_reliability,
    write_reliability_csv,
)
from .report import FORMATS, emit_report, load_report
from .synthetic import generate_synthetic

NOISE_KINDS = {"sym": "symmetric", "asym": "asymmetric"}
_PARAM_ALIASES = {"format": "fmt", "from": "source"}


def read_config_file(path) -> dict:
    """Flat ``key=value`` file; ``#`` starts a comment, dashes and underscores are interchangeable."""
    out = {}
    for n, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise click.BadParameter(f"line {n}: expected key=value, got {line!r}", param_hint="--config")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        out[_PARAM_ALIASES.get(key, key)] = value
    return out


def _load_config(ctx, param, value):
    if value:
        ctx.default_map = {**(ctx.default_map or {}), **read_config_file(value)}
    return value


config_option = click.option(
    "--config", type=click.Path(exists=True, dir_okay=False), callback=_load_config, is_eager=True,
    expose_value=False, help="Flat key=value config file; flags override it.",
)


def _floats(text):
    return tuple(float(t) for t in str(text).replace(";", ",").split(",") if t.strip())


def _names(text):
    return tuple(t.strip() for t in str(text).split(",") if t.strip())


def _load(embeddings, labels, fmt, classes=None):
    try:
        return l2_normalize(load_dataset(embeddings, labels, fmt, classes))
    except DatasetError as exc:
        raise click.ClickException(str(exc)) from exc


def _kernel(ds, sigma, k_init):
    return KernelConfig(sigma if sigma is not None else default_bandwidth(ds.dim), k_init)


embeddings_opts = [
    click.option("--embeddings", required=True, type=click.Path(exists=True, dir_okay=False)),
    click.option("--labels", type=click.Path(exists=True, dir_okay=False), default=None),
    click.option("--format", "fmt", type=click.Choice(["binary", "csv"]), default="binary", show_default=True),
]


def with_embeddings(fn):
    for opt in reversed(embeddings_opts):
        fn = opt(fn)
    return fn


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
def main(verbose):
    """Reliability-weighted NNK classification under label noise."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(levelname)s %(message)s")


@main.command("gen-synthetic")
@config_option
@click.option("--classes", type=int, default=10, show_default=True)
@click.option("--per-class", type=int, default=200, show_default=True, help="Samples per class before the half/half split.")
@click.option("--dim", type=int, default=32, show_default=True)
@click.option("--separation", type=float, default=20.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["binary", "csv"]), default="binary", show_default=True)
@click.option("--out", type=click.Path(file_okay=False), required=True)
def gen_synthetic(classes, per_class, dim, separation, seed, fmt, out):
    """Write a Gaussian-blob train/test pair."""
    try:
        train, test = generate_synthetic(classes, per_class, dim, separation, seed)
    except ValueError as exc:
        raise click.ClickException(str(exc)) from exc
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    ext = "emb" if fmt == "binary" else "csv"
    for name, ds in (("train", train), ("test", test)):
        save_dataset(ds, out / f"{name}.{ext}", out / f"{name}.labels", fmt)
    click.echo(f"wrote {len(train)} train / {len(test)} test samples to {out}")


@main.command("inject-noise")
@config_option
@with_embeddings
@click.option("--noise", type=click.Choice(sorted(NOISE_KINDS)), default="sym", show_default=True)
@click.option("--rate", type=float, required=True)
@click.option("--mapping", default=format_mapping(CIFAR10_ASYMMETRIC), show_default=True,
              help="Asymmetric source:target pairs in raw label values.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Noisy label file.")
@click.option("--mask-out", type=click.Path(dir_okay=False), default=None, help="Optional flip-mask CSV.")
def inject_noise(embeddings, labels, fmt, noise, rate, mapping, seed, out, mask_out):
    """Corrupt training labels and write the noisy label file."""
    ds = _load(embeddings, labels, fmt)
    try:
        if noise == "sym":
            noisy, mask = inject_symmetric(ds.labels, rate, ds.num_classes, seed)
        else:
            index = {v: i for i, v in enumerate(ds.label_values)}
            dense = {index[s]: index[d] for s, d in parse_mapping(mapping).items() if s in index and d in index}
            noisy, mask = inject_asymmetric(ds.labels, rate, dense, seed)
    except ValueError as exc:
        raise click.ClickException(str(exc)) from exc
    values = ds.label_values
    write_labels(out, [values[c] for c in noisy])
    if mask_out:
        write_flip_mask_csv(mask_out, ds.ids, [values[c] for c in ds.labels], [values[c] for c in noisy], mask)
    click.echo(f"flipped {int(mask.sum())} of {len(ds)} labels")


def compute_reliability(method, ds, kernel, knn_k, kc, m_clusters, seed):
    if method == "knn":
        return knn_reliability(ds, knn_k)
    if method == "nnk_weights":
        return nnk_weights_reliability(ds, kernel)
    if method == "nnk_diam_ratio":
        return nnk_diameter_ratio_reliability(ds, kernel)
    if method == "kmeans_supervised":
        return supervised_kmeans_reliability(ds, fit_supervised(ds, kc, seed))
    return unsupervised_kmeans_reliability(ds, fit_unsupervised(ds, m_clusters or 3 * ds.num_classes, seed))


@main.command()
@config_option
@with_embeddings
@click.option("--method", type=click.Choice(METHODS), required=True)
@click.option("--k-init", type=int, default=DEFAULT_K_INIT, show_default=True)
@click.option("--sigma", type=float, default=None, help="Kernel bandwidth [default: 100*sqrt(d)].")
@click.option("--knn-k", type=int, default=50, show_default=True)
@click.option("--kc", type=int, default=1, show_default=True)
@click.option("--m-clusters", type=int, default=None, help="Unsupervised clusters [default: 3*C].")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def score(embeddings, labels, fmt, method, k_init, sigma, knn_k, kc, m_clusters, seed, out):
    """Estimate per-sample reliability; writes ``id,score,method`` CSV."""
    ds = _load(embeddings, labels, fmt)
    try:
        rel = compute_reliability(method, ds, _kernel(ds, sigma, k_init), knn_k, kc, m_clusters, seed)
    except ValueError as exc:
        raise click.ClickException(str(exc)) from exc
    write_reliability_csv(out, ds, rel)
    click.echo(f"{method}: mean reliability {float(np.mean(rel.scores)):.4f} over {len(ds)} samples")


@main.command()
@config_option
@with_embeddings
@click.option("--test-embeddings", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--test-labels", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--scores", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Reliability CSV from `score`; omit for the k-NN baseline.")
@click.option("--voting", type=click.Choice(["w", "uw"]), default="w", show_default=True)
@click.option("--k-init", type=int, default=DEFAULT_K_INIT, show_default=True)
@click.option("--sigma", type=float, default=None)
@click.option("--knn-k", type=int, default=50, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
def classify(embeddings, labels, fmt, test_embeddings, test_labels, scores, voting, k_init, sigma, knn_k, out):
    """Predict test labels; prints accuracy when test labels are available."""
    train = _load(embeddings, labels, fmt)
    test = _load(test_embeddings, test_labels, fmt, classes=train.label_values)
    if scores is None:
        pred = np.array([knn_baseline(x, train, knn_k) for x in test.vectors])
        how = f"{BASELINE} k={knn_k}"
    else:
        rel = read_reliability_csv(scores)
        if len(rel) != len(train):
            raise click.ClickException(f"{len(rel)} scores for {len(train)} training samples")
        nbs = query_neighborhoods(train, test.vectors, _kernel(train, sigma, k_init))
        mode = "weighted" if voting == "w" else "unweighted"
        pred = predict_many(nbs, train, rel, mode)
        how = f"{rel.method} ({mode})"
    with open(out, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "predicted"])
        for i, p in zip(test.ids, pred):
            w.writerow([int(i), train.label_values[p]])
    acc = float(np.mean(pred == test.labels))
    click.echo(f"{how}: accuracy {acc:.4f} on {len(test)} test samples")


@main.command()
@config_option
@click.option("--embeddings", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--labels", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--test-embeddings", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--test-labels", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--format", "fmt", type=click.Choice(["binary", "csv"]), default="binary", show_default=True)
@click.option("--noise", type=click.Choice(["sym", "asym", "both"]), default="sym", show_default=True)
@click.option("--rates", default=None, help="Comma-separated rates [default: protocol grid per noise kind].")
@click.option("--mapping", default=format_mapping(CIFAR10_ASYMMETRIC), show_default=True)
@click.option("--runs", type=int, default=5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--k-init", type=int, default=DEFAULT_K_INIT, show_default=True)
@click.option("--sigma", type=float, default=None, help="Kernel bandwidth [default: 100*sqrt(d)].")
@click.option("--knn-k", type=int, default=50, show_default=True)
@click.option("--kc", type=int, default=1, show_default=True, help="Supervised centroids per class.")
@click.option("--m-clusters", type=int, default=None, help="Unsupervised clusters [default: 3*C].")
@click.option("--methods", default=",".join(METHODS + (BASELINE,)), show_default=True)
@click.option("--voting", type=click.Choice(["w", "uw", "both"]), default="both", show_default=True)
@click.option("--train-accuracy", is_flag=True, help="Also score the training set against clean labels.")
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--formats", default="csv,svg,json", show_default=True)
def bench(embeddings, labels, test_embeddings, test_labels, fmt, noise, rates, mapping, runs, seed, k_init,
          sigma, knn_k, kc, m_clusters, methods, voting, train_accuracy, out, formats):
    """Run the full noise x method x voting sweep and write reports."""
    kinds = ["sym", "asym"] if noise == "both" else [noise]
    defaults = {"sym": SYMMETRIC_RATES, "asym": ASYMMETRIC_RATES}
    bad = set(_names(formats)) - set(FORMATS)
    if bad or not _names(formats):
        raise click.BadParameter(f"choose from {','.join(FORMATS)}", param_hint="--formats")
    grid = {NOISE_KINDS[k]: (_floats(rates) if rates else defaults[k]) for k in kinds}
    try:
        cfg = ExperimentConfig(
            train_embeddings=embeddings, train_labels=labels,
            test_embeddings=test_embeddings, test_labels=test_labels, format=fmt,
            methods=_names(methods),
            voting=("w", "uw") if voting == "both" else (voting,),
            noise=grid, mapping=parse_mapping(mapping), runs=runs, seed=seed,
            k_init=k_init, sigma=sigma, knn_k=knn_k, kc=kc, m_clusters=m_clusters,
            train_accuracy=train_accuracy,
        )
        report = run_experiment(cfg)
        paths = emit_report(report, out, _names(formats))
    except (ValueError, DatasetError, ExperimentError) as exc:
        raise click.ClickException(str(exc)) from exc
    for p in paths:
        click.echo(str(p))


@main.command()
@click.option("--from", "source", required=True, type=click.Path(exists=True, dir_okay=False), help="report.json")
@click.option("--out", type=click.Path(file_okay=False), required=True)
@click.option("--formats", default="csv,svg", show_default=True)
def report(source, out, formats):
    """Re-render CSV/SVG/JSON from a saved report.json."""
    try:
        paths = emit_report(load_report(source), out, _names(formats))
    except ValueError as exc:
        raise click.ClickException(str(exc)) from exc
    for p in paths:
        click.echo(str(p))


if __name__ == "__main__":
    main()
