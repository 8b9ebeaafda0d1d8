"""Cross-modal retrieval harness.

Two fully-connected branches trained on the correlation objective over
precomputed feature views, a linear CCA into a shared canonical space,
similarity ranking there, and instance-/class-based mean reciprocal rank.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .dcca import dcca_loss
from .linalg import LinearCCA
from .nn import build_dense_stack
from .optim import make_optimizer
from .validation import NumericError, ValidationError, as_matrix, require


@dataclass
class FeatureTable:
    """Row-aligned id / class / vector records for one view."""

    ids: list
    class_labels: list
    vectors: np.ndarray

    def __post_init__(self):
        self.ids = [str(i) for i in self.ids]
        self.class_labels = [str(c) for c in self.class_labels]
        self.vectors = as_matrix(self.vectors, "vectors")
        require(len(self.ids) == len(self.class_labels) == len(self.vectors),
                "ids, class labels and vectors must be aligned")
        require(len(set(self.ids)) == len(self.ids), "ids must be unique")

    def __len__(self):
        return len(self.ids)

    @property
    def dim(self):
        return self.vectors.shape[1]

    def subset(self, indices):
        return FeatureTable(ids=[self.ids[i] for i in indices],
                            class_labels=[self.class_labels[i] for i in indices],
                            vectors=self.vectors[list(indices)])


@dataclass
class RetrievalConfig:
    layer_dims: tuple = (512, 256, 128, 64)
    canonical_k: int = 32
    epochs: int = 500
    batch_size: int = 1000
    reg: float = 1e-4
    eigen_floor: float = 1e-12
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    similarity: str = "cosine"  # or "euclidean"
    seed: int = 0

    def __post_init__(self):
        require(len(self.layer_dims) >= 1, "need at least one layer")
        require(self.canonical_k <= self.layer_dims[-1],
                f"canonical_k={self.canonical_k} exceeds the output layer "
                f"dimension {self.layer_dims[-1]}")
        require(self.similarity in ("cosine", "euclidean"),
                f"unknown similarity {self.similarity!r}")


@dataclass
class RankedResult:
    """One query's ordered candidates and its reciprocal rank."""

    query_id: str
    ranking: list
    relevant: set
    reciprocal_rank: float


class RetrievalModel(BaseEstimator):
    """Correlation-trained dense branches plus a canonical-space ranker."""

    def __init__(self, config=None):
        self.config = config or RetrievalConfig()

    def fit(self, view_a, view_b):
        cfg = self.config
        require(view_a.ids == view_b.ids,
                "views must be row-aligned: same ids in the same order")
        n = len(view_a)
        require(n >= 2, "need at least 2 paired items")

        seeds = np.random.SeedSequence(cfg.seed).generate_state(3)
        self.net_a_ = build_dense_stack(view_a.dim, cfg.layer_dims,
                                        seed=int(seeds[0]))
        self.net_b_ = build_dense_stack(view_b.dim, cfg.layer_dims,
                                        seed=int(seeds[1]))
        shuffle_rng = np.random.default_rng(int(seeds[2]))
        params = self.net_a_.params() + self.net_b_.params()
        optimizer = make_optimizer(cfg.optimizer, params,
                                   learning_rate=cfg.learning_rate)
        self.loss_history_ = []
        for _ in range(cfg.epochs):
            order = shuffle_rng.permutation(n)
            losses = []
            for start in range(0, n, cfg.batch_size):
                batch = order[start:start + cfg.batch_size]
                if len(batch) < 2:
                    warnings.warn("skipping batch with fewer than 2 items")
                    continue
                out_a = self.net_a_.forward(view_a.vectors[batch], train=True)
                out_b = self.net_b_.forward(view_b.vectors[batch], train=True)
                res = dcca_loss(out_a, out_b, reg=cfg.reg,
                                eigen_floor=cfg.eigen_floor)
                if not np.isfinite(res.loss):
                    raise NumericError("retrieval training loss became non-finite")
                self.net_a_.backward(res.grad_x)
                self.net_b_.backward(res.grad_y)
                optimizer.step(self.net_a_.grads() + self.net_b_.grads())
                losses.append(res.loss)
            require(losses, "epoch produced no usable batches")
            self.loss_history_.append(float(np.mean(losses)))

        out_a = self.net_a_.forward(view_a.vectors, train=False)
        out_b = self.net_b_.forward(view_b.vectors, train=False)
        k = min(cfg.canonical_k, cfg.layer_dims[-1], n - 1)
        self.cca_ = LinearCCA(n_components=k, reg=cfg.reg,
                              eigen_floor=cfg.eigen_floor).fit(out_a, out_b)
        return self

    def _require_fitted(self):
        if not hasattr(self, "cca_"):
            raise NotFittedError("RetrievalModel instance is not fitted yet")

    def canonical(self, vectors, view):
        """Project raw feature vectors of one view into canonical space."""
        self._require_fitted()
        require(view in ("a", "b"), f"view must be 'a' or 'b', got {view!r}")
        vectors = as_matrix(vectors, "vectors")
        net = self.net_a_ if view == "a" else self.net_b_
        out = net.forward(vectors, train=False)
        return self.cca_.transform(out, view="x" if view == "a" else "y")


def _similarities(query, candidates, kind):
    if kind == "cosine":
        qn = np.linalg.norm(query)
        cn = np.linalg.norm(candidates, axis=1)
        denom = np.maximum(qn * cn, 1e-300)
        return candidates @ query / denom
    diff = candidates - query
    return -np.sqrt(np.square(diff).sum(axis=1))


def rank(model, query_vector, view, candidates):
    """Order the other view's candidates for one query.

    ``view`` names the query's own view; candidates are scored in canonical
    space by descending similarity with deterministic ascending-id
    tie-breaking.  Returns the ordered candidate ids.
    """
    other = "b" if view == "a" else "a"
    q = model.canonical(np.asarray(query_vector, dtype=np.float64)[None, :],
                        view)[0]
    cand = model.canonical(candidates.vectors, other)
    sims = _similarities(q, cand, model.config.similarity)
    order = np.lexsort((np.asarray(candidates.ids), -sims))
    return [candidates.ids[i] for i in order]


def ranked_result(query_id, ranking, relevant):
    """Attach relevance to a ranking and compute the reciprocal rank."""
    relevant = set(relevant)
    require(relevant, f"query {query_id!r} has an empty relevant set")
    require(relevant & set(ranking),
            f"query {query_id!r} has no relevant candidate present")
    position = next(i for i, cid in enumerate(ranking, start=1)
                    if cid in relevant)
    return RankedResult(query_id=query_id, ranking=list(ranking),
                        relevant=relevant, reciprocal_rank=1.0 / position)


def evaluate_direction(model, queries, candidates, query_view, mode):
    """RankedResults for every query of one view against the other view.

    ``mode`` is 'instance' (only the query's paired item is relevant) or
    'class' (every candidate sharing the query's class label is relevant).
    """
    require(mode in ("instance", "class"), f"unknown mode {mode!r}")
    by_class = {}
    for cid, label in zip(candidates.ids, candidates.class_labels):
        by_class.setdefault(label, set()).add(cid)
    results = []
    for i, qid in enumerate(queries.ids):
        ranking = rank(model, queries.vectors[i], query_view, candidates)
        if mode == "instance":
            relevant = {qid}
        else:
            relevant = by_class.get(queries.class_labels[i], set())
        results.append(ranked_result(qid, ranking, relevant))
    return results


def mrr(results):
    """Mean reciprocal rank of prepared results."""
    require(len(results) > 0, "mrr of an empty result list")
    return float(np.mean([r.reciprocal_rank for r in results]))


def mrr_report(model, view_a, view_b, seed=None):
    """The four-way evaluation: instance/class MRR in both directions."""
    require(view_a.ids == view_b.ids, "evaluation views must be row-aligned")
    report = {
        "instance_mrr_a_to_b": mrr(evaluate_direction(model, view_a, view_b,
                                                      "a", "instance")),
        "instance_mrr_b_to_a": mrr(evaluate_direction(model, view_b, view_a,
                                                      "b", "instance")),
        "class_mrr_a_to_b": mrr(evaluate_direction(model, view_a, view_b,
                                                   "a", "class")),
        "class_mrr_b_to_a": mrr(evaluate_direction(model, view_b, view_a,
                                                   "b", "class")),
        "n": len(view_a),
        "k": int(model.cca_.n_components),
    }
    if seed is not None:
        report["seed"] = int(seed)
    return report


def expected_random_mrr(n_candidates):
    """Analytic instance-mode expectation under uniformly random rankings."""
    return float(np.sum(1.0 / np.arange(1, n_candidates + 1)) / n_candidates)
