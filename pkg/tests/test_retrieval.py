import numpy as np
import pytest

from audioeeg.retrieval import (
    FeatureTable,
    RankedResult,
    RetrievalConfig,
    RetrievalModel,
    evaluate_direction,
    expected_random_mrr,
    mrr,
    mrr_report,
    rank,
    ranked_result,
)
from audioeeg.validation import ValidationError


def make_table(rng, n, d, classes=4, prefix="it"):
    return FeatureTable(ids=[f"{prefix}{i:03d}" for i in range(n)],
                        class_labels=[str(i % classes) for i in range(n)],
                        vectors=rng.standard_normal((n, d)))


def shared_latent_tables(rng, n, latent_dim=8, noise=0.1, da=20, db=30):
    z = rng.standard_normal((n, latent_dim))
    wa = rng.standard_normal((latent_dim, da))
    wb = rng.standard_normal((latent_dim, db))
    labels = [str(i % 4) for i in range(n)]
    ids = [f"it{i:03d}" for i in range(n)]
    a = FeatureTable(ids, labels, z @ wa + noise * rng.standard_normal((n, da)))
    b = FeatureTable(ids, labels, z @ wb + noise * rng.standard_normal((n, db)))
    return a, b


def small_config(**kw):
    base = dict(layer_dims=(32, 16), canonical_k=8, epochs=60,
                batch_size=1000, seed=0)
    base.update(kw)
    return RetrievalConfig(**base)


class TestMrr:
    def test_all_rank_one(self):
        results = [ranked_result("q", ["q", "x"], {"q"}) for _ in range(5)]
        assert mrr(results) == 1.0

    def test_all_rank_two(self):
        results = [ranked_result("q", ["x", "q"], {"q"}) for _ in range(5)]
        assert mrr(results) == 0.5

    def test_random_ranking_expectation(self):
        # Analytic: (1/100) * sum(1/k) ~ 0.05187; Monte Carlo should agree.
        n = 100
        analytic = expected_random_mrr(n)
        assert analytic == pytest.approx(0.05187, abs=1e-4)
        rng = np.random.default_rng(0)
        ids = [f"c{i}" for i in range(n)]
        total = 0.0
        trials = 10_000
        for _ in range(trials):
            order = rng.permutation(n)
            target = ids[int(rng.integers(n))]
            ranking = [ids[j] for j in order]
            total += 1.0 / (ranking.index(target) + 1)
        assert abs(total / trials - analytic) < 0.005

    def test_empty_results_rejected(self):
        with pytest.raises(ValidationError):
            mrr([])

    def test_missing_relevant_rejected(self):
        with pytest.raises(ValidationError):
            ranked_result("q", ["a", "b"], {"zz"})

    def test_order_invariance(self):
        r1 = ranked_result("q1", ["a", "q1"], {"q1"})
        r2 = ranked_result("q2", ["q2", "a"], {"q2"})
        assert mrr([r1, r2]) == mrr([r2, r1])


class TestRetrievalModel:
    def test_identical_views_selfretrieval(self):
        rng = np.random.default_rng(1)
        table = make_table(rng, 140, 12)
        train = table.subset(range(40))
        test = table.subset(range(40, 140))
        model = RetrievalModel(small_config(epochs=30)).fit(train, train)
        results = evaluate_direction(model, test, test, "a", "instance")
        assert mrr(results) >= 0.99

    def test_shared_latent_beats_random(self):
        rng = np.random.default_rng(2)
        a, b = shared_latent_tables(rng, 500)
        train_idx = range(400)
        test_idx = range(400, 500)
        model = RetrievalModel(small_config(epochs=80)).fit(
            a.subset(train_idx), b.subset(train_idx))
        results = evaluate_direction(model, a.subset(test_idx),
                                     b.subset(test_idx), "a", "instance")
        score = mrr(results)
        assert score > 5 * expected_random_mrr(100)

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(3)
        a, b = shared_latent_tables(rng, 60, da=6, db=7)
        r1 = RetrievalModel(small_config(epochs=10)).fit(a, b)
        r2 = RetrievalModel(small_config(epochs=10)).fit(a, b)
        assert r1.loss_history_ == r2.loss_history_
        q = a.vectors[0]
        assert rank(r1, q, "a", b) == rank(r2, q, "a", b)

    def test_misaligned_ids_rejected(self):
        rng = np.random.default_rng(4)
        a = make_table(rng, 10, 4)
        b = make_table(rng, 10, 4, prefix="other")
        with pytest.raises(ValidationError):
            RetrievalModel(small_config()).fit(a, b)

    def test_class_mrr_single_class_is_one(self):
        rng = np.random.default_rng(5)
        a, b = shared_latent_tables(rng, 40, da=5, db=5)
        one_class_b = FeatureTable(b.ids, ["0"] * len(b), b.vectors)
        one_class_a = FeatureTable(a.ids, ["0"] * len(a), a.vectors)
        model = RetrievalModel(small_config(epochs=5)).fit(a, b)
        results = evaluate_direction(model, one_class_a, one_class_b, "a", "class")
        assert mrr(results) == 1.0

    def test_instance_le_class(self):
        rng = np.random.default_rng(6)
        a, b = shared_latent_tables(rng, 80, da=6, db=6)
        model = RetrievalModel(small_config(epochs=15)).fit(a, b)
        inst = mrr(evaluate_direction(model, a, b, "a", "instance"))
        clas = mrr(evaluate_direction(model, a, b, "a", "class"))
        assert inst <= clas + 1e-12

    def test_report_shape(self):
        rng = np.random.default_rng(7)
        a, b = shared_latent_tables(rng, 50, da=5, db=8)
        model = RetrievalModel(small_config(epochs=5)).fit(a, b)
        report = mrr_report(model, a, b, seed=7)
        assert set(report) == {"instance_mrr_a_to_b", "instance_mrr_b_to_a",
                               "class_mrr_a_to_b", "class_mrr_b_to_a",
                               "n", "k", "seed"}
        assert report["n"] == 50
        assert report["k"] == 8


class TestRank:
    def fitted(self):
        rng = np.random.default_rng(8)
        a, b = shared_latent_tables(rng, 60, noise=0.01, da=6, db=7)
        model = RetrievalModel(small_config(epochs=40)).fit(a, b)
        return model, a, b

    def test_true_pair_first_under_strong_model(self):
        model, a, b = self.fitted()
        hits = 0
        for i in range(20):
            ranking = rank(model, a.vectors[i], "a", b)
            hits += ranking[0] == a.ids[i]
        assert hits >= 18

    def test_output_is_permutation(self):
        model, a, b = self.fitted()
        ranking = rank(model, a.vectors[0], "a", b)
        assert sorted(ranking) == sorted(b.ids)

    def test_tie_break_ascending_id(self):
        model, a, b = self.fitted()
        # Duplicate one candidate vector: identical similarity, id decides.
        dup = FeatureTable(ids=["zz", "aa"], class_labels=["0", "0"],
                           vectors=np.tile(b.vectors[:1], (2, 1)))
        ranking = rank(model, a.vectors[0], "a", dup)
        assert ranking == ["aa", "zz"]

    def test_agrees_with_bruteforce_oracle(self):
        model, a, b = self.fitted()
        qi = model.canonical(a.vectors, "a")
        ci = model.canonical(b.vectors, "b")
        for i in range(50):
            q = qi[i]
            sims = []
            for j in range(len(b)):
                c = ci[j]
                denom = max(np.linalg.norm(q) * np.linalg.norm(c), 1e-300)
                sims.append((-float(q @ c / denom), b.ids[j]))
            oracle = [cid for _, cid in sorted(sims)]
            assert oracle == rank(model, a.vectors[i], "a", b)
