"""Independent oracles shared by the unit and acceptance tests.

These deliberately reimplement the quantities they check (similarity
metric, exhaustive path enumeration) with separate code so the tests do
not validate the library against itself.
"""

from __future__ import annotations

import itertools

import numpy as np

from quandary.core import LABELS
from quandary.crf import CrfModel, TrainConfig


def oracle_fuzzy(a: str, b: str) -> float:
    """Reference blend of trigram Dice and normalized edit similarity."""
    a = " ".join(a.lower().split())
    b = " ".join(b.lower().split())

    def grams(s: str) -> set[str]:
        padded = "  " + s + " "
        return {padded[i:i + 3] for i in range(len(padded) - 2)}

    ga, gb = grams(a), grams(b)
    dice = 2.0 * len(ga & gb) / (len(ga) + len(gb))

    m, n = len(a), len(b)
    dist = [[0] * (n + 1) for _ in range(m + 1)]
    for i in range(m + 1):
        dist[i][0] = i
    for j in range(n + 1):
        dist[0][j] = j
    for i in range(1, m + 1):
        for j in range(1, n + 1):
            dist[i][j] = min(
                dist[i - 1][j] + 1,
                dist[i][j - 1] + 1,
                dist[i - 1][j - 1] + (a[i - 1] != b[j - 1]),
            )
    return 0.5 * dice + 0.5 * (1.0 - dist[m][n] / max(m, n))


def enumerate_path_scores(
    emissions: np.ndarray, transitions: np.ndarray, start: np.ndarray, stop: np.ndarray
) -> np.ndarray:
    """Score of every one of the k^m label paths, as a flat array."""
    scores = start + emissions[0]
    for t in range(1, len(emissions)):
        scores = scores[..., :, None] + transitions + emissions[t]
    return (scores + stop).ravel()


def python_path_scores(emissions, transitions, start, stop) -> list[float]:
    """Pure-Python cross-check of enumerate_path_scores (small m only)."""
    m, k = emissions.shape
    out = []
    for path in itertools.product(range(k), repeat=m):
        total = start[path[0]] + stop[path[-1]]
        for t, y in enumerate(path):
            total += emissions[t, y]
            if t:
                total += transitions[path[t - 1], y]
        out.append(float(total))
    return out


def logsumexp_all(values: np.ndarray) -> float:
    peak = float(np.max(values))
    return peak + float(np.log(np.sum(np.exp(values - peak))))


def random_crf_model(rng: np.random.Generator, n_features: int, scale: float = 1.0,
                     l2_lambda: float = 0.0) -> CrfModel:
    k = len(LABELS)
    return CrfModel(
        feature_vocabulary={f"f{i}": i for i in range(n_features)},
        emissions=scale * rng.normal(size=(n_features, k)),
        transitions=scale * rng.normal(size=(k, k)),
        start=scale * rng.normal(size=k),
        stop=scale * rng.normal(size=k),
        config=TrainConfig(l2_lambda=l2_lambda),
        losses=[],
    )


def random_features(rng: np.random.Generator, m: int, n_features: int) -> list[dict[str, float]]:
    out = []
    for _ in range(m):
        count = int(rng.integers(1, n_features + 1))
        ids = rng.choice(n_features, size=count, replace=False)
        out.append({f"f{i}": float(rng.uniform(0.5, 1.5)) for i in ids})
    return out
