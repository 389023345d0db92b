"""Training machinery: Adam updates, the 10-epoch minibatch loop,
stratified k-fold cross-validation and hyperparameter grid search
ranked by mean F1 of the tunneling class.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .datagen import LABEL_TUNNELING, DomainSample
from .network import Hyperparams, ModelParams, backward_batch, forward_batch, init_params
from .tokenizer import VOCAB_SIZE, encode_batch


def count_parameters(hp: Hyperparams, vocab_size: int = VOCAB_SIZE) -> int:
    """Total trainable scalars: embedding + conv kernels/bias + both dense
    layers. Matches ModelParams allocation exactly."""
    conv = hp.ks * hp.d * hp.nf + hp.nf
    dense1 = hp.conv_out_len * hp.nf * hp.hn + hp.hn
    dense2 = hp.hn + 1
    return vocab_size * hp.d + conv + dense1 + dense2


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 128
    seed: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass
class AdamState:
    """First/second-moment accumulators shaped like the parameters, plus
    the step counter and optimizer constants."""

    m: ModelParams
    v: ModelParams
    t: int = 0
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, params: ModelParams, cfg: TrainConfig | None = None) -> "AdamState":
        cfg = cfg or TrainConfig()
        return cls(
            m=ModelParams.zeros_like(params),
            v=ModelParams.zeros_like(params),
            lr=cfg.lr,
            beta1=cfg.beta1,
            beta2=cfg.beta2,
            eps=cfg.eps,
        )


def adam_step(params: ModelParams, grads: ModelParams, state: AdamState) -> tuple[ModelParams, AdamState]:
    """One bias-corrected Adam update, applied elementwise in place."""
    for (name, p), (_, g), (_, m), (_, v) in zip(
        params.arrays(), grads.arrays(), state.m.arrays(), state.v.arrays()
    ):
        if p.shape != g.shape:
            raise ValueError(f"gradient shape mismatch for {name}: {p.shape} vs {g.shape}")
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for (_, p), (_, g), (_, m), (_, v) in zip(
        params.arrays(), grads.arrays(), state.m.arrays(), state.v.arrays()
    ):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * np.square(g)
        p -= state.lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


def _encode_dataset(dataset: Sequence[DomainSample], hp: Hyperparams) -> tuple[np.ndarray, np.ndarray]:
    x = encode_batch([s.name for s in dataset], hp.l)
    y = np.array([1.0 if s.label == LABEL_TUNNELING else 0.0 for s in dataset])
    return x, y


def train(
    dataset: Sequence[DomainSample],
    hp: Hyperparams,
    cfg: TrainConfig | None = None,
    progress: Callable[[int, float], None] | None = None,
) -> ModelParams:
    """Train a fresh model with Adam on seeded, shuffled minibatches.

    Deterministic given (dataset order, hp, cfg.seed). `progress`,
    if given, receives (epoch, mean epoch loss) after each epoch.
    """
    cfg = cfg or TrainConfig()
    if len({s.label for s in dataset}) < 2:
        raise ValueError("training requires samples from both classes")
    x, y = _encode_dataset(dataset, hp)

    params = init_params(hp, cfg.seed)
    state = AdamState.fresh(params, cfg)
    rng = np.random.default_rng(cfg.seed)
    n = len(dataset)

    for epoch in range(1, cfg.epochs + 1):
        perm = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            grads, loss = backward_batch(params, hp, x[idx], y[idx])
            adam_step(params, grads, state)
            total += loss * len(idx)
        if progress is not None:
            progress(epoch, total / n)
    return params


def stratified_folds(labels: Sequence[str], k: int, seed: int) -> list[list[int]]:
    """Partition indices into k folds, dealing each class round-robin so
    every fold's class counts are within 1 of an even split."""
    if k < 2:
        raise ValueError(f"k must be >= 2, got {k}")
    if k > len(labels):
        raise ValueError(f"k={k} exceeds dataset size {len(labels)}")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    for label in sorted(set(labels)):
        idx = np.array([i for i, lbl in enumerate(labels) if lbl == label])
        idx = idx[rng.permutation(len(idx))]
        for j, i in enumerate(idx):
            folds[j % k].append(int(i))
    return folds


def _tunneling_f1(y_true: np.ndarray, probs: np.ndarray, threshold: float = 0.5) -> float:
    pred = probs >= threshold
    actual = y_true >= 0.5
    tp = int(np.sum(pred & actual))
    fp = int(np.sum(pred & ~actual))
    fn = int(np.sum(~pred & actual))
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2.0 * precision * recall / (precision + recall)


def kfold_cross_validate(
    dataset: Sequence[DomainSample],
    hp: Hyperparams,
    cfg: TrainConfig | None = None,
    k: int = 5,
) -> tuple[float, float]:
    """Stratified k-fold CV; returns (mean, population sd) of the held-out
    tunneling-class F1 at threshold 0.5."""
    cfg = cfg or TrainConfig()
    folds = stratified_folds([s.label for s in dataset], k, cfg.seed)
    scores = []
    for held_out in folds:
        val_set = set(held_out)
        train_split = [s for i, s in enumerate(dataset) if i not in val_set]
        params = train(train_split, hp, cfg)
        x_val, y_val = _encode_dataset([dataset[i] for i in held_out], hp)
        probs = forward_batch(params, hp, x_val)
        scores.append(_tunneling_f1(y_val, probs))
    scores = np.array(scores)
    return float(scores.mean()), float(scores.std())


@dataclass(frozen=True)
class GridResult:
    hp: Hyperparams
    mean_f1: float
    sd_f1: float
    parameter_count: int


def grid_search(
    dataset: Sequence[DomainSample],
    grid: Sequence[Hyperparams],
    cfg: TrainConfig | None = None,
    k: int = 5,
) -> list[GridResult]:
    """Cross-validate every combination; results sorted by mean F1
    descending, ties broken by fewer parameters, then grid order."""
    if not grid:
        raise ValueError("grid must contain at least one combination")
    cfg = cfg or TrainConfig()
    results = []
    for hp in grid:
        mean_f1, sd_f1 = kfold_cross_validate(dataset, hp, cfg, k=k)
        results.append(GridResult(hp, mean_f1, sd_f1, count_parameters(hp)))
    order = sorted(
        range(len(results)),
        key=lambda i: (-results[i].mean_f1, results[i].parameter_count, i),
    )
    return [results[i] for i in order]


def default_grid() -> list[Hyperparams]:
    """The stock search grid; includes the reference configuration."""
    combos = itertools.product((256, 1024), (2, 4), (50, 100), (128, 256))
    return [Hyperparams(nf=nf, ks=ks, sl=1, d=d, l=45, hn=hn) for nf, ks, d, hn in combos]


_GRID_KEYS = ("nf", "ks", "sl", "d", "l", "hn")


def parse_grid_line(line: str) -> Hyperparams:
    """One combination as labeled key=value pairs, e.g.
    'nf=1024 ks=4 sl=1 d=100 l=45 hn=256'."""
    values = {}
    for token in line.replace(",", " ").split():
        key, sep, raw = token.partition("=")
        if not sep or key not in _GRID_KEYS:
            raise ValueError(f"bad grid token {token!r} (expected one of {_GRID_KEYS})")
        if key in values:
            raise ValueError(f"duplicate grid key {key!r}")
        try:
            values[key] = int(raw)
        except ValueError:
            raise ValueError(f"grid value for {key!r} is not an integer: {raw!r}") from None
    missing = [k for k in _GRID_KEYS if k not in values]
    if missing:
        raise ValueError(f"grid line missing keys: {missing}")
    return Hyperparams(**values)


def parse_grid_file(path) -> list[Hyperparams]:
    """Grid file: one combination per line; blank lines and '#' comments
    are skipped."""
    grid = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                grid.append(parse_grid_line(line))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
    if not grid:
        raise ValueError(f"grid file {path} contains no combinations")
    return grid
