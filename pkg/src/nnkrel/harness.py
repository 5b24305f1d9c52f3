"""Experiment engine: noise grid x methods x voting modes over seeded runs."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from .clustering import fit_supervised, fit_unsupervised
from .embeddings import EmbeddingDataset, l2_normalize, load_dataset
from .geometry import DEFAULT_K_INIT, KernelConfig, default_bandwidth, knn_candidates
from .inference import knn_baseline, predict_many
from .nnk import query_neighborhoods, training_neighborhoods
from .noise import CIFAR10_ASYMMETRIC, SYMMETRIC_RATES, NoiseSpec
from .reliability import (
    METHODS,
    fingerprint,
    knn_reliability,
    nnk_diameter_ratio_reliability,
    nnk_weights_reliability,
    supervised_kmeans_reliability,
    unsupervised_kmeans_reliability,
)

log = logging.getLogger(__name__)

BASELINE = "knn_baseline"
NO_VOTING = "none"
VOTING_SHORT = {"w": "weighted", "uw": "unweighted"}


class ExperimentError(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    """Everything that determines a benchmark run.

    ``noise`` maps a kind (``symmetric``/``asymmetric``) to its rate grid.
    ``mapping`` is the asymmetric class map in raw label values.
    ``sigma=None`` means ``100 * sqrt(d)``; ``m_clusters=None`` means ``3 * C``.
    """

    train_embeddings: str | None = None
    train_labels: str | None = None
    test_embeddings: str | None = None
    test_labels: str | None = None
    format: str = "binary"
    methods: tuple = METHODS + (BASELINE,)
    voting: tuple = ("weighted", "unweighted")
    noise: dict = field(default_factory=lambda: {"symmetric": SYMMETRIC_RATES})
    mapping: dict = field(default_factory=lambda: dict(CIFAR10_ASYMMETRIC))
    runs: int = 5
    seed: int = 0
    k_init: int = DEFAULT_K_INIT
    sigma: float | None = None
    knn_k: int = 50
    kc: int = 1
    m_clusters: int | None = None
    train_accuracy: bool = False

    def __post_init__(self):
        self.methods = tuple(self.methods)
        self.voting = tuple(VOTING_SHORT.get(v, v) for v in self.voting)
        self.noise = {k: tuple(float(r) for r in v) for k, v in self.noise.items()}
        self.mapping = {int(k): int(v) for k, v in self.mapping.items()}
        self.validate()

    def validate(self):
        if self.runs < 1:
            raise ValueError("runs must be >= 1")
        if not self.methods:
            raise ValueError("method list is empty")
        for m in self.methods:
            if m not in METHODS and m != BASELINE:
                raise ValueError(f"unknown method {m!r}")
        if any(m != BASELINE for m in self.methods) and not self.voting:
            raise ValueError("no voting mode selected")
        for v in self.voting:
            if v not in ("weighted", "unweighted"):
                raise ValueError(f"unknown voting mode {v!r}")
        if not self.noise:
            raise ValueError("noise grid is empty")
        for kind, rates in self.noise.items():
            if kind not in ("symmetric", "asymmetric"):
                raise ValueError(f"unknown noise kind {kind!r}")
            if not rates or any(not 0.0 <= r <= 1.0 for r in rates):
                raise ValueError(f"{kind} rates must be non-empty and within [0, 1]")

    def to_dict(self):
        d = asdict(self)
        d["methods"] = list(self.methods)
        d["voting"] = list(self.voting)
        d["noise"] = {k: list(v) for k, v in self.noise.items()}
        d["mapping"] = {str(k): v for k, v in sorted(self.mapping.items())}
        return d

    def cells(self):
        """Grid cells ``(method, voting, kind, rate)`` in report order."""
        out = []
        for kind, rates in self.noise.items():
            for rate in rates:
                for m in self.methods:
                    votings = (NO_VOTING,) if m == BASELINE else self.voting
                    for v in votings:
                        out.append((m, v, kind, rate))
        return out


@dataclass
class CellResult:
    method: str
    voting: str
    noise_kind: str
    rate: float
    accuracies: list
    seconds: float
    train_accuracies: list | None = None

    @property
    def acc_mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def acc_std(self) -> float:
        # population std: a single run reports 0
        return float(np.std(self.accuracies))

    def to_dict(self):
        d = {
            "method": self.method,
            "voting": self.voting,
            "noise_kind": self.noise_kind,
            "rate": self.rate,
            "acc_mean": self.acc_mean,
            "acc_std": self.acc_std,
            "accuracies": list(self.accuracies),
            "seconds": self.seconds,
        }
        if self.train_accuracies is not None:
            d["train_accuracies"] = list(self.train_accuracies)
            d["train_acc_mean"] = float(np.mean(self.train_accuracies))
            d["train_acc_std"] = float(np.std(self.train_accuracies))
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(
            method=d["method"],
            voting=d["voting"],
            noise_kind=d["noise_kind"],
            rate=float(d["rate"]),
            accuracies=[float(a) for a in d["accuracies"]],
            seconds=float(d["seconds"]),
            train_accuracies=d.get("train_accuracies"),
        )


@dataclass
class ExperimentReport:
    cells: list
    seeds: list
    config: dict
    config_fingerprint: str
    label_values: list = field(default_factory=list)
    shared_seconds: float = 0.0

    def cell(self, method, voting, kind, rate) -> CellResult:
        for c in self.cells:
            if (c.method, c.voting, c.noise_kind) == (method, voting, kind) and np.isclose(c.rate, rate):
                return c
        raise KeyError((method, voting, kind, rate))

    def to_dict(self):
        return {
            "config_fingerprint": self.config_fingerprint,
            "config": self.config,
            "seeds": list(self.seeds),
            "label_values": list(self.label_values),
            "shared_seconds": self.shared_seconds,
            "cells": [c.to_dict() for c in self.cells],
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            cells=[CellResult.from_dict(c) for c in d["cells"]],
            seeds=list(d["seeds"]),
            config=d["config"],
            config_fingerprint=d["config_fingerprint"],
            label_values=list(d.get("label_values", [])),
            shared_seconds=float(d.get("shared_seconds", 0.0)),
        )

    def __eq__(self, other):
        if not isinstance(other, ExperimentReport):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def load_config_datasets(cfg: ExperimentConfig):
    train = load_dataset(cfg.train_embeddings, cfg.train_labels, cfg.format)
    test = load_dataset(cfg.test_embeddings, cfg.test_labels, cfg.format, classes=train.label_values)
    return l2_normalize(train), l2_normalize(test)


def _dense_mapping(mapping, label_values):
    index = {v: i for i, v in enumerate(label_values)}
    out = {}
    for src, dst in mapping.items():
        if src in index and dst in index:
            out[index[src]] = index[dst]
        else:
            log.warning("asymmetric mapping entry %s->%s names an absent class; skipped", src, dst)
    return out


class _Estimators:
    """Fits the requested reliability estimators on one noisy training set."""

    def __init__(self, cfg, kernel, train_nbs):
        self.cfg = cfg
        self.kernel = kernel
        self.train_nbs = train_nbs

    def score(self, method, noisy: EmbeddingDataset, seed):
        cfg = self.cfg
        if method == "knn":
            return knn_reliability(noisy, cfg.knn_k)
        if method == "nnk_weights":
            return nnk_weights_reliability(noisy, self.kernel, self.train_nbs)
        if method == "nnk_diam_ratio":
            return nnk_diameter_ratio_reliability(noisy, self.kernel, self.train_nbs)
        if method == "kmeans_supervised":
            return supervised_kmeans_reliability(noisy, fit_supervised(noisy, cfg.kc, seed))
        if method == "kmeans_unsupervised":
            m = cfg.m_clusters or 3 * noisy.num_classes
            return unsupervised_kmeans_reliability(noisy, fit_unsupervised(noisy, m, seed))
        raise ValueError(f"unknown method {method!r}")


def run_experiment(cfg: ExperimentConfig, train=None, test=None) -> ExperimentReport:
    """Sweep the configured grid and aggregate accuracy over ``cfg.runs`` runs.

    Run ``r`` seeds noise injection and k-means with ``cfg.seed + r``.
    Reliability is refit on each run's noisy labels; the test set stays clean.
    NNK neighborhoods depend only on geometry, so the unrestricted training
    and test neighborhoods are built once and reused across the grid.
    """
    if train is None or test is None:
        train, test = load_config_datasets(cfg)
    if train.dim != test.dim:
        raise ExperimentError(f"train d={train.dim} but test d={test.dim}")
    sigma = cfg.sigma if cfg.sigma is not None else default_bandwidth(train.dim)
    kernel = KernelConfig(sigma, cfg.k_init)
    resolved = cfg.to_dict()
    resolved["sigma"] = sigma
    resolved["m_clusters"] = cfg.m_clusters or 3 * train.num_classes

    t0 = time.perf_counter()
    needs_nnk = any(m != BASELINE for m in cfg.methods)
    train_nbs = training_neighborhoods(train, kernel) if needs_nnk else None
    test_nbs = query_neighborhoods(train, test.vectors, kernel) if needs_nnk else None
    shared = time.perf_counter() - t0

    estimators = _Estimators(cfg, kernel, train_nbs)
    mapping = _dense_mapping(cfg.mapping, train.label_values)
    seeds = [cfg.seed + r for r in range(cfg.runs)]
    results = {c: CellResult(*c, accuracies=[], seconds=0.0,
                             train_accuracies=[] if cfg.train_accuracy else None) for c in cfg.cells()}

    for kind, rates in cfg.noise.items():
        for rate in rates:
            for r, seed in enumerate(seeds):
                coord = f"(noise={kind}, rate={rate}, run={r})"
                try:
                    spec = NoiseSpec(kind, rate, seed, mapping if kind == "asymmetric" else {})
                    noisy_labels, _ = spec.apply(train.labels, train.num_classes)
                    noisy = train.with_labels(noisy_labels)
                except Exception as exc:
                    raise ExperimentError(f"noise injection failed at {coord}: {exc}") from exc
                for method in cfg.methods:
                    try:
                        _run_method(cfg, estimators, method, kind, rate, seed, noisy, train, test,
                                    train_nbs, test_nbs, results)
                    except ExperimentError:
                        raise
                    except Exception as exc:
                        raise ExperimentError(f"{method} failed at {coord}: {exc}") from exc
                log.info("finished %s", coord)

    report = ExperimentReport(
        cells=[results[c] for c in cfg.cells()],
        seeds=seeds,
        config=resolved,
        config_fingerprint=fingerprint(resolved),
        label_values=list(train.label_values),
        shared_seconds=shared,
    )
    return report


def _accuracy(pred, truth) -> float:
    return float(np.count_nonzero(np.asarray(pred) == np.asarray(truth)) / len(truth))


def _run_method(cfg, estimators, method, kind, rate, seed, noisy, train, test, train_nbs, test_nbs, results):
    t0 = time.perf_counter()
    if method == BASELINE:
        pred = [knn_baseline(x, noisy, cfg.knn_k) for x in test.vectors]
        cell = results[(method, NO_VOTING, kind, rate)]
        cell.accuracies.append(_accuracy(pred, test.labels))
        if cell.train_accuracies is not None:
            tr = [_knn_self_excluded(noisy, q, cfg.knn_k) for q in range(len(noisy))]
            cell.train_accuracies.append(_accuracy(tr, train.labels))
        cell.seconds += time.perf_counter() - t0
        return
    rel = estimators.score(method, noisy, seed)
    fit_time = time.perf_counter() - t0
    for voting in cfg.voting:
        t1 = time.perf_counter()
        cell = results[(method, voting, kind, rate)]
        pred = predict_many(test_nbs, noisy, rel, voting)
        cell.accuracies.append(_accuracy(pred, test.labels))
        if cell.train_accuracies is not None:
            cell.train_accuracies.append(_accuracy(predict_many(train_nbs, noisy, rel, voting), train.labels))
        cell.seconds += fit_time + time.perf_counter() - t1


def _knn_self_excluded(ds, q, k):
    nn = knn_candidates(ds.vectors, ds.vectors[q], k, exclude=q)
    return int(np.argmax(np.bincount(ds.labels[nn], minlength=ds.num_classes)))
