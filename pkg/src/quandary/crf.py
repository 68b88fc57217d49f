"""Linear-chain CRF sequence labeler over hand-crafted lexical features.

Emissions come from sparse binary features (fuzzy-match buckets, an
ambiguity column-match count, word shape/identity, and adjacent-token
conjunctions); transitions are a dense label-by-label matrix with start
and stop vectors. Forbidden BIO transitions are pinned to a large negative
constant rather than structurally masked. All arithmetic is in log space.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .align import MatchConfig, STOPWORDS, _is_numeric, fuzzy_score
from .core import (
    LABELS,
    LABEL_INDEX,
    BioLabel,
    TableSchema,
    Token,
    check_bio_wellformed,
)

N_LABELS = len(LABELS)

#: Surrogate for -inf on disallowed transitions; fixed so tests are exact.
FORBIDDEN_WEIGHT = -1e4


def _forbidden_masks() -> tuple[np.ndarray, np.ndarray]:
    """(transition mask, start mask): True where the move breaks BIO order."""
    trans = np.zeros((N_LABELS, N_LABELS), dtype=bool)
    start = np.zeros(N_LABELS, dtype=bool)
    for j, to_label in enumerate(LABELS):
        if not to_label.is_inside:
            continue
        start[j] = True
        for i, from_label in enumerate(LABELS):
            if from_label.category != to_label.category:
                trans[i, j] = True
    return trans, start


TRANS_FORBIDDEN, START_FORBIDDEN = _forbidden_masks()


# ---------------------------------------------------------------------------
# Features
# ---------------------------------------------------------------------------

def _bucket(score: float) -> str:
    return f"{min(int(score * 10 + 1e-9), 10) / 10:.1f}"


def _shape(text: str) -> str:
    out = []
    for ch in text:
        if ch.isupper():
            cls = "X"
        elif ch.islower():
            cls = "x"
        elif ch.isdigit():
            cls = "d"
        else:
            cls = ch
        if not out or out[-1] != cls:
            out.append(cls)
    return "".join(out)


def _base_features(
    tokens: Sequence[Token],
    schema: TableSchema,
    cfg: MatchConfig,
    stopwords: frozenset[str],
) -> list[dict[str, str]]:
    columns = schema.columns
    values = [v for col in columns for v in schema.cells.get(col, ())]
    m = len(tokens)

    # per column: token positions covered by an n-gram scoring >= threshold
    covered_counts = [0] * m
    for col in columns:
        covered: set[int] = set()
        for i in range(m):
            for j in range(i, min(i + cfg.max_ngram, m)):
                text = " ".join(tok.norm for tok in tokens[i:j + 1])
                if text.strip() and fuzzy_score(text, col) >= cfg.threshold:
                    covered.update(range(i, j + 1))
        for pos in covered:
            covered_counts[pos] += 1

    feats: list[dict[str, str]] = []
    for i, tok in enumerate(tokens):
        col_best = max((fuzzy_score(tok.norm, c) for c in columns), default=0.0) if tok.norm.strip() else 0.0
        val_best = 0.0
        if values and tok.norm.strip():
            val_best = max(fuzzy_score(tok.norm, v) for v in values)
        count = covered_counts[i]
        feats.append(
            {
                "colb": _bucket(col_best),
                "valb": _bucket(val_best),
                "cmatch": "2+" if count >= 2 else str(count),
                "stop": "1" if tok.norm in stopwords else "0",
                "num": "1" if _is_numeric(tok.norm) else "0",
                "shape": _shape(tok.text),
                "w": tok.norm,
                "pos": "only" if m == 1 else ("first" if i == 0 else "last" if i == m - 1 else "mid"),
            }
        )
    return feats


def featurize(
    tokens: Sequence[Token],
    schema: TableSchema,
    cfg: MatchConfig,
    stopwords: frozenset[str] = STOPWORDS,
) -> list[dict[str, float]]:
    """Sparse binary feature map per token, with adjacent-token conjunctions.

    Use the same stopword list for training and decoding; it feeds the
    stopword indicator feature.
    """
    base = _base_features(tokens, schema, cfg, stopwords)
    out: list[dict[str, float]] = []
    for i, cur in enumerate(base):
        fv: dict[str, float] = {f"{k}={v}": 1.0 for k, v in cur.items()}
        prev = base[i - 1] if i > 0 else None
        nxt = base[i + 1] if i + 1 < len(base) else None
        for kind, value in cur.items():
            pv = prev[kind] if prev is not None else "<S>"
            nv = nxt[kind] if nxt is not None else "</S>"
            fv[f"p.{kind}={pv}|{kind}={value}"] = 1.0
            fv[f"{kind}={value}|n.{kind}={nv}"] = 1.0
        out.append(fv)
    return out


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------

@dataclass
class TrainConfig:
    learning_rate: float = 0.3
    epochs: int = 15
    batch_size: int = 16
    l2_lambda: float = 1e-4
    lr_decay: float = 1.0
    seed: int = 0


@dataclass
class CrfModel:
    feature_vocabulary: dict[str, int]
    emissions: np.ndarray       # [n_features, N_LABELS]
    transitions: np.ndarray     # [N_LABELS, N_LABELS]
    start: np.ndarray           # [N_LABELS]
    stop: np.ndarray            # [N_LABELS]
    config: TrainConfig
    losses: list[float]

    def __post_init__(self):
        for arr in (self.emissions, self.transitions, self.start, self.stop):
            if not np.all(np.isfinite(arr)):
                raise ValueError("model weights must be finite")

    def indexed(self, features: Sequence[dict[str, float]]) -> list[tuple[np.ndarray, np.ndarray]]:
        """Map feature dicts to (ids, values) arrays; unknown features drop out."""
        vocab = self.feature_vocabulary
        out = []
        for fv in features:
            pairs = [(vocab[name], val) for name, val in fv.items() if name in vocab]
            ids = np.array([p[0] for p in pairs], dtype=np.intp)
            vals = np.array([p[1] for p in pairs], dtype=np.float64)
            out.append((ids, vals))
        return out

    def emission_scores(self, features: Sequence[dict[str, float]]) -> np.ndarray:
        scores = np.zeros((len(features), N_LABELS))
        for t, (ids, vals) in enumerate(self.indexed(features)):
            if len(ids):
                scores[t] = vals @ self.emissions[ids]
        return scores


def _logsumexp(arr: np.ndarray, axis: int) -> np.ndarray:
    peak = np.max(arr, axis=axis, keepdims=True)
    with np.errstate(divide="ignore"):
        out = peak.squeeze(axis) + np.log(np.sum(np.exp(arr - peak), axis=axis))
    return out


def log_partition(
    emissions: np.ndarray, transitions: np.ndarray, start: np.ndarray, stop: np.ndarray
) -> float:
    """Forward-algorithm log Z over all label paths."""
    alpha = start + emissions[0]
    for t in range(1, len(emissions)):
        alpha = emissions[t] + _logsumexp(alpha[:, None] + transitions, axis=0)
    return float(_logsumexp(alpha + stop, axis=0))


def path_score(
    emissions: np.ndarray,
    transitions: np.ndarray,
    start: np.ndarray,
    stop: np.ndarray,
    path: Sequence[int],
) -> float:
    total = start[path[0]] + stop[path[-1]]
    for t, y in enumerate(path):
        total += emissions[t, y]
        if t:
            total += transitions[path[t - 1], y]
    return float(total)


@dataclass
class Gradient:
    emissions: np.ndarray
    transitions: np.ndarray
    start: np.ndarray
    stop: np.ndarray


def _trainable_l2(model: CrfModel) -> float:
    trans = np.where(TRANS_FORBIDDEN, 0.0, model.transitions)
    start = np.where(START_FORBIDDEN, 0.0, model.start)
    return float(
        np.sum(model.emissions ** 2)
        + np.sum(trans ** 2)
        + np.sum(start ** 2)
        + np.sum(model.stop ** 2)
    )


def log_likelihood_and_grad(
    model: CrfModel,
    features: Sequence[dict[str, float]],
    labels: Sequence[BioLabel],
    l2_lambda: Optional[float] = None,
) -> tuple[float, Gradient]:
    """log p(labels | features) minus the L2 penalty, with its exact gradient.

    The gradient is empirical-minus-expected feature counts from
    forward-backward; the L2 penalty covers trainable weights only, so
    pinned forbidden transitions contribute no regularization force.
    """
    if len(features) != len(labels):
        raise ValueError("feature/label length mismatch")
    if not features:
        raise ValueError("empty sequence")
    lam = model.config.l2_lambda if l2_lambda is None else l2_lambda
    path = [LABEL_INDEX[label] for label in labels]
    m = len(path)

    emis = model.emission_scores(features)
    trans, start, stop = model.transitions, model.start, model.stop

    alpha = np.zeros((m, N_LABELS))
    alpha[0] = start + emis[0]
    for t in range(1, m):
        alpha[t] = emis[t] + _logsumexp(alpha[t - 1][:, None] + trans, axis=0)
    logz = float(_logsumexp(alpha[-1] + stop, axis=0))

    beta = np.zeros((m, N_LABELS))
    beta[-1] = stop
    for t in range(m - 2, -1, -1):
        beta[t] = _logsumexp(trans + (emis[t + 1] + beta[t + 1])[None, :], axis=1)

    unary = np.exp(alpha + beta - logz)  # [m, N_LABELS]

    grad_e = np.zeros_like(model.emissions)
    indexed = model.indexed(features)
    for t, (ids, vals) in enumerate(indexed):
        if len(ids) == 0:
            continue
        delta = -unary[t]
        delta[path[t]] += 1.0
        grad_e[ids] += vals[:, None] * delta[None, :]

    grad_t = np.zeros_like(trans)
    for t in range(1, m):
        pair = np.exp(alpha[t - 1][:, None] + trans + (emis[t] + beta[t])[None, :] - logz)
        grad_t -= pair
        grad_t[path[t - 1], path[t]] += 1.0

    grad_start = -unary[0]
    grad_start[path[0]] += 1.0
    grad_stop = -unary[-1]
    grad_stop[path[-1]] += 1.0

    ll = path_score(emis, trans, start, stop, path) - logz
    if lam:
        ll -= lam * _trainable_l2(model)
        grad_e -= 2.0 * lam * model.emissions
        grad_t -= 2.0 * lam * np.where(TRANS_FORBIDDEN, 0.0, trans)
        grad_start -= 2.0 * lam * np.where(START_FORBIDDEN, 0.0, start)
        grad_stop -= 2.0 * lam * model.stop

    return ll, Gradient(grad_e, grad_t, grad_start, grad_stop)


def viterbi_decode(model: CrfModel, features: Sequence[dict[str, float]]) -> list[BioLabel]:
    """Argmax label path; ties break toward the lowest label index."""
    if not features:
        raise ValueError("empty sequence")
    emis = model.emission_scores(features)
    trans = model.transitions
    m = len(features)
    delta = model.start + emis[0]
    back = np.zeros((m, N_LABELS), dtype=np.intp)
    for t in range(1, m):
        scores = delta[:, None] + trans  # [from, to]
        back[t] = np.argmax(scores, axis=0)
        delta = emis[t] + np.max(scores, axis=0)
    delta = delta + model.stop
    best = int(np.argmax(delta))
    path = [best]
    for t in range(m - 1, 0, -1):
        best = int(back[t, best])
        path.append(best)
    path.reverse()
    return [LABELS[i] for i in path]


def decode_score(model: CrfModel, features: Sequence[dict[str, float]]) -> float:
    """Score of the Viterbi path (used by the brute-force equality checks)."""
    emis = model.emission_scores(features)
    path = [LABEL_INDEX[label] for label in viterbi_decode(model, features)]
    return path_score(emis, model.transitions, model.start, model.stop, path)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

FeaturizedExample = tuple[Sequence[dict[str, float]], Sequence[BioLabel]]


def _clamp_forbidden(model: CrfModel) -> None:
    model.transitions[TRANS_FORBIDDEN] = FORBIDDEN_WEIGHT
    model.start[START_FORBIDDEN] = FORBIDDEN_WEIGHT


def _dataset_loss(model: CrfModel, data: list[FeaturizedExample]) -> float:
    total = 0.0
    for features, labels in data:
        path = [LABEL_INDEX[label] for label in labels]
        emis = model.emission_scores(features)
        logz = log_partition(emis, model.transitions, model.start, model.stop)
        total -= path_score(emis, model.transitions, model.start, model.stop, path) - logz
    return total / len(data) + model.config.l2_lambda * _trainable_l2(model)


def train(examples: Sequence[FeaturizedExample], config: Optional[TrainConfig] = None) -> CrfModel:
    """Minimize mean NLL + L2 with mini-batch gradient descent.

    Deterministic under config.seed; per-epoch losses are recorded on the
    returned model, bracketed by full-dataset evaluations before and after.
    """
    if not examples:
        raise ValueError("training set is empty")
    config = config or TrainConfig()
    for _, labels in examples:
        check_bio_wellformed(labels)

    names = sorted({name for features, _ in examples for fv in features for name in fv})
    vocab = {name: i for i, name in enumerate(names)}
    model = CrfModel(
        feature_vocabulary=vocab,
        emissions=np.zeros((len(vocab), N_LABELS)),
        transitions=np.zeros((N_LABELS, N_LABELS)),
        start=np.zeros(N_LABELS),
        stop=np.zeros(N_LABELS),
        config=config,
        losses=[],
    )
    _clamp_forbidden(model)
    data = [(features, tuple(labels)) for features, labels in examples]
    model.losses.append(_dataset_loss(model, data))

    rng = np.random.default_rng(config.seed)
    lr = config.learning_rate
    n = len(data)
    for _ in range(config.epochs):
        order = rng.permutation(n)
        epoch_nll = 0.0
        for lo in range(0, n, config.batch_size):
            batch = order[lo:lo + config.batch_size]
            grad_e = np.zeros_like(model.emissions)
            grad_t = np.zeros_like(model.transitions)
            grad_start = np.zeros_like(model.start)
            grad_stop = np.zeros_like(model.stop)
            for idx in batch:
                features, labels = data[idx]
                ll, grad = log_likelihood_and_grad(model, features, labels, l2_lambda=0.0)
                epoch_nll -= ll
                grad_e += grad.emissions
                grad_t += grad.transitions
                grad_start += grad.start
                grad_stop += grad.stop
            scale = lr / len(batch)
            lam2 = 2.0 * config.l2_lambda * lr
            model.emissions += scale * grad_e - lam2 * model.emissions
            model.transitions += scale * grad_t - lam2 * np.where(
                TRANS_FORBIDDEN, 0.0, model.transitions
            )
            model.start += scale * grad_start - lam2 * np.where(
                START_FORBIDDEN, 0.0, model.start
            )
            model.stop += scale * grad_stop - lam2 * model.stop
            _clamp_forbidden(model)
        model.losses.append(epoch_nll / n + config.l2_lambda * _trainable_l2(model))
        lr *= config.lr_decay

    model.losses.append(_dataset_loss(model, data))
    return model


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def model_to_dict(model: CrfModel) -> dict:
    return {
        "feature_vocabulary": model.feature_vocabulary,
        "emission_weights": model.emissions.tolist(),
        "transition_weights": {
            "matrix": model.transitions.tolist(),
            "start": model.start.tolist(),
            "stop": model.stop.tolist(),
        },
        "config": asdict(model.config),
        "label_order": [label.value for label in LABELS],
    }


def model_from_dict(obj: dict) -> CrfModel:
    order = [BioLabel(s) for s in obj["label_order"]]
    perm = [order.index(label) for label in LABELS]
    trans = np.asarray(obj["transition_weights"]["matrix"], dtype=np.float64)
    model = CrfModel(
        feature_vocabulary={k: int(v) for k, v in obj["feature_vocabulary"].items()},
        emissions=np.asarray(obj["emission_weights"], dtype=np.float64)[:, perm],
        transitions=trans[np.ix_(perm, perm)],
        start=np.asarray(obj["transition_weights"]["start"], dtype=np.float64)[perm],
        stop=np.asarray(obj["transition_weights"]["stop"], dtype=np.float64)[perm],
        config=TrainConfig(**obj["config"]),
        losses=[],
    )
    return model


def save_model(model: CrfModel, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(model_to_dict(model), handle)


def load_model(path) -> CrfModel:
    with open(path, encoding="utf-8") as handle:
        return model_from_dict(json.load(handle))
