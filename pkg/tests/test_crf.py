import numpy as np
import pytest

from helpers import (
    enumerate_path_scores,
    logsumexp_all,
    python_path_scores,
    random_crf_model,
    random_features,
)
from quandary.core import LABELS, LABEL_INDEX, BioLabel, check_bio_wellformed
from quandary.crf import (
    FORBIDDEN_WEIGHT,
    START_FORBIDDEN,
    TRANS_FORBIDDEN,
    CrfModel,
    TrainConfig,
    _clamp_forbidden,
    decode_score,
    featurize,
    load_model,
    log_likelihood_and_grad,
    log_partition,
    model_from_dict,
    model_to_dict,
    path_score,
    save_model,
    train,
    viterbi_decode,
)

O = BioLabel.O
K = len(LABELS)


def random_labels(rng, m):
    return [LABELS[i] for i in rng.integers(0, K, size=m)]


class TestForward:
    def test_single_token_closed_form(self):
        rng = np.random.default_rng(0)
        model = random_crf_model(rng, 3)
        feats = random_features(rng, 1, 3)
        emis = model.emission_scores(feats)
        expected = logsumexp_all(model.start + emis[0] + model.stop)
        assert log_partition(emis, model.transitions, model.start, model.stop) == pytest.approx(
            expected, rel=1e-12
        )

    def test_logz_matches_enumeration_m4(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            model = random_crf_model(rng, 4)
            feats = random_features(rng, 4, 4)
            emis = model.emission_scores(feats)
            scores = enumerate_path_scores(emis, model.transitions, model.start, model.stop)
            expected = logsumexp_all(scores)
            got = log_partition(emis, model.transitions, model.start, model.stop)
            assert got == pytest.approx(expected, rel=1e-8)

    def test_enumeration_oracle_against_pure_python(self):
        rng = np.random.default_rng(2)
        model = random_crf_model(rng, 3)
        feats = random_features(rng, 3, 3)
        emis = model.emission_scores(feats)
        fast = np.sort(enumerate_path_scores(emis, model.transitions, model.start, model.stop))
        slow = np.sort(python_path_scores(emis, model.transitions, model.start, model.stop))
        assert np.allclose(fast, slow, rtol=1e-12)

    def test_logz_upper_bounds_every_path(self):
        rng = np.random.default_rng(3)
        model = random_crf_model(rng, 4)
        feats = random_features(rng, 5, 4)
        emis = model.emission_scores(feats)
        logz = log_partition(emis, model.transitions, model.start, model.stop)
        for _ in range(50):
            path = list(rng.integers(0, K, size=5))
            assert path_score(emis, model.transitions, model.start, model.stop, path) < logz

    def test_path_probabilities_sum_to_one(self):
        rng = np.random.default_rng(4)
        for m in (1, 2, 3, 5):
            model = random_crf_model(rng, 3)
            feats = random_features(rng, m, 3)
            emis = model.emission_scores(feats)
            scores = enumerate_path_scores(emis, model.transitions, model.start, model.stop)
            logz = log_partition(emis, model.transitions, model.start, model.stop)
            assert np.sum(np.exp(scores - logz)) == pytest.approx(1.0, abs=1e-9)

    def test_gold_probability_in_unit_interval(self):
        rng = np.random.default_rng(5)
        model = random_crf_model(rng, 4)
        feats = random_features(rng, 4, 4)
        labels = random_labels(rng, 4)
        ll, _ = log_likelihood_and_grad(model, feats, labels, l2_lambda=0.0)
        assert 0.0 < np.exp(ll) <= 1.0


class TestGradient:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(6)
        h = 1e-5
        for _ in range(10):
            model = random_crf_model(rng, 4, l2_lambda=1e-3)
            feats = random_features(rng, 3, 4)
            labels = random_labels(rng, 3)
            _, grad = log_likelihood_and_grad(model, feats, labels)

            def value():
                return log_likelihood_and_grad(model, feats, labels)[0]

            for arr, g in (
                (model.emissions, grad.emissions),
                (model.transitions, grad.transitions),
                (model.start, grad.start),
                (model.stop, grad.stop),
            ):
                flat, gflat = arr.ravel(), g.ravel()
                for idx in range(flat.size):
                    orig = flat[idx]
                    flat[idx] = orig + h
                    up = value()
                    flat[idx] = orig - h
                    down = value()
                    flat[idx] = orig
                    fd = (up - down) / (2 * h)
                    denom = max(abs(fd), abs(gflat[idx]), 1e-5)
                    assert abs(fd - gflat[idx]) / denom < 1e-4

    def test_length_mismatch_rejected(self):
        rng = np.random.default_rng(7)
        model = random_crf_model(rng, 3)
        with pytest.raises(ValueError):
            log_likelihood_and_grad(model, random_features(rng, 3, 3), random_labels(rng, 2))


class TestViterbi:
    def test_matches_brute_force_max(self):
        rng = np.random.default_rng(8)
        for _ in range(30):
            m = int(rng.integers(1, 7))
            model = random_crf_model(rng, 4)
            feats = random_features(rng, m, 4)
            emis = model.emission_scores(feats)
            best = float(
                np.max(enumerate_path_scores(emis, model.transitions, model.start, model.stop))
            )
            assert decode_score(model, feats) == pytest.approx(best, rel=1e-12)

    def test_zero_weights_score_matches_brute_force(self):
        rng = np.random.default_rng(9)
        model = random_crf_model(rng, 3, scale=0.0)
        feats = random_features(rng, 4, 3)
        emis = model.emission_scores(feats)
        best = float(
            np.max(enumerate_path_scores(emis, model.transitions, model.start, model.stop))
        )
        assert decode_score(model, feats) == pytest.approx(best)
        # ties break toward the lowest label index
        assert viterbi_decode(model, feats) == [LABELS[0]] * 4

    def test_clamped_model_decodes_wellformed(self):
        rng = np.random.default_rng(10)
        for _ in range(25):
            model = random_crf_model(rng, 4, scale=2.0)
            _clamp_forbidden(model)
            feats = random_features(rng, int(rng.integers(1, 9)), 4)
            check_bio_wellformed(viterbi_decode(model, feats))

    def test_empty_rejected(self):
        rng = np.random.default_rng(11)
        model = random_crf_model(rng, 3)
        with pytest.raises(ValueError):
            viterbi_decode(model, [])


def _toy_dataset():
    features = [
        {"w=show": 1.0},
        {"w=sales": 1.0},
        {"w=by": 1.0},
        {"w=region": 1.0},
    ]
    labels = [O, BioLabel.B_COL, O, BioLabel.B_COL]
    return [(features, labels)] * 10


class TestTrain:
    def test_overfits_repeated_example(self):
        model = train(_toy_dataset(), TrainConfig(learning_rate=0.5, epochs=30, seed=0))
        features, labels = _toy_dataset()[0]
        assert viterbi_decode(model, features) == list(labels)

    def test_loss_decreases(self):
        model = train(_toy_dataset(), TrainConfig(learning_rate=0.5, epochs=30, seed=0))
        assert model.losses[-1] <= model.losses[0]

    def test_heavy_l2_shrinks_weights(self):
        # equilibrium scale is |grad|/(2*lambda), so huge lambda pins all
        # trainable weights near zero and the emissions stop mattering
        heavy = train(
            _toy_dataset(),
            TrainConfig(learning_rate=2e-4, epochs=60, l2_lambda=1000.0, seed=0),
        )
        light = train(
            _toy_dataset(),
            TrainConfig(learning_rate=0.5, epochs=60, l2_lambda=1e-4, seed=0),
        )
        assert np.abs(heavy.emissions).max() < 1e-3
        assert np.abs(heavy.stop).max() < 1e-3
        assert np.abs(heavy.emissions).max() < 0.01 * np.abs(light.emissions).max()

    def test_deterministic_under_seed(self):
        config = TrainConfig(learning_rate=0.4, epochs=8, seed=42, batch_size=4)
        a = train(_toy_dataset(), config)
        b = train(_toy_dataset(), config)
        assert np.array_equal(a.emissions, b.emissions)
        assert np.array_equal(a.transitions, b.transitions)
        assert np.array_equal(a.start, b.start)
        assert np.array_equal(a.stop, b.stop)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            train([], TrainConfig())

    def test_malformed_gold_rejected(self):
        bad = [([{"a": 1.0}, {"b": 1.0}], [O, BioLabel.I_COL])]
        with pytest.raises(Exception):
            train(bad, TrainConfig(epochs=1))

    def test_forbidden_transitions_stay_clamped(self):
        model = train(_toy_dataset(), TrainConfig(epochs=3, seed=1))
        assert np.all(model.transitions[TRANS_FORBIDDEN] == FORBIDDEN_WEIGHT)
        assert np.all(model.start[START_FORBIDDEN] == FORBIDDEN_WEIGHT)


class TestFeaturize:
    def test_ambiguity_count_feature(self, tables, match_cfg):
        from quandary.core import tokenize

        tokens = tokenize("what is the rating of the movie")
        feats = featurize(tokens, tables["movies"], match_cfg)
        assert feats[3].get("cmatch=2+") == 1.0

    def test_stopword_and_numeric_flags(self, tables, match_cfg):
        from quandary.core import tokenize

        tokens = tokenize("the price is 500")
        feats = featurize(tokens, tables["phones"], match_cfg)
        assert feats[0].get("stop=1") == 1.0
        assert feats[3].get("num=1") == 1.0

    def test_shape_and_conjunctions(self, tables, match_cfg):
        from quandary.core import tokenize

        tokens = tokenize("IMDB Rating")
        feats = featurize(tokens, tables["movies"], match_cfg)
        assert feats[0].get("shape=X") == 1.0
        assert feats[1].get("shape=Xx") == 1.0
        assert any(name.startswith("p.w=imdb|w=rating") for name in feats[1])


class TestSerialization:
    def test_round_trip_identical_decodes(self, tmp_path):
        model = train(_toy_dataset(), TrainConfig(epochs=10, seed=3))
        path = tmp_path / "model.json"
        save_model(model, path)
        loaded = load_model(path)
        assert loaded.feature_vocabulary == model.feature_vocabulary
        assert np.allclose(loaded.emissions, model.emissions)
        features, _ = _toy_dataset()[0]
        assert viterbi_decode(loaded, features) == viterbi_decode(model, features)

    def test_label_order_permutation(self):
        model = train(_toy_dataset(), TrainConfig(epochs=5, seed=4))
        obj = model_to_dict(model)
        # permute the stored label order; loading must undo it
        perm = list(range(K))[::-1]
        obj["label_order"] = [obj["label_order"][i] for i in perm]
        obj["emission_weights"] = np.asarray(obj["emission_weights"])[:, perm].tolist()
        matrix = np.asarray(obj["transition_weights"]["matrix"])
        obj["transition_weights"]["matrix"] = matrix[np.ix_(perm, perm)].tolist()
        obj["transition_weights"]["start"] = np.asarray(obj["transition_weights"]["start"])[perm].tolist()
        obj["transition_weights"]["stop"] = np.asarray(obj["transition_weights"]["stop"])[perm].tolist()
        loaded = model_from_dict(obj)
        assert np.allclose(loaded.emissions, model.emissions)
        assert np.allclose(loaded.transitions, model.transitions)
