"""Classifiers over descriptor sets with Euclidean or kernel-induced geometry.

kNN stores the training vectors and ranks them under a MetricSpec; the SVM is
a one-vs-one soft-margin machine trained by sequential minimal optimization.
Both are deterministic given (data order, tolerances); all tie-breaking rules
are fixed.
"""

from __future__ import annotations

import dataclasses
import logging

import numpy as np
from scipy.spatial.distance import cdist

from .adapt import FeatureSet, GfkModel
from .errors import (
    DimensionMismatch,
    EmptyTestSet,
    SingleClass,
    TooFewExamples,
)

logger = logging.getLogger(__name__)

EUCLIDEAN = "euclidean"
GFK = "gfk"

_KERNEL_KINDS = ("linear", "rbf", "gfk_linear", "gfk_rbf")


@dataclasses.dataclass
class MetricSpec:
    """Distance used by kNN: plain Euclidean or the GFK quadratic form."""

    kind: str = EUCLIDEAN
    model: GfkModel | None = None

    def __post_init__(self):
        if self.kind not in (EUCLIDEAN, GFK):
            raise ValueError(f"unknown metric kind {self.kind!r}")
        if self.kind == GFK and self.model is None:
            raise ValueError("gfk metric requires a fitted GfkModel")
        self._factor = None

    def _gfk_factor(self) -> np.ndarray:
        # G = W diag(e) W^T with e clipped at 0, so distances become
        # Euclidean in the transformed coordinates x -> (x @ W) * sqrt(e).
        if self._factor is None:
            evals, evecs = np.linalg.eigh(self.model.g)
            self._factor = evecs * np.sqrt(np.clip(evals, 0.0, None))
        return self._factor

    def pairwise(self, queries: np.ndarray, refs: np.ndarray) -> np.ndarray:
        queries = np.atleast_2d(np.asarray(queries, dtype=float))
        refs = np.atleast_2d(np.asarray(refs, dtype=float))
        if queries.shape[1] != refs.shape[1]:
            raise DimensionMismatch("query/reference dimensions differ")
        if self.kind == EUCLIDEAN:
            return cdist(queries, refs)
        if queries.shape[1] != self.model.dim:
            raise DimensionMismatch("vector dimension does not match the kernel")
        factor = self._gfk_factor()
        return cdist(queries @ factor, refs @ factor)


@dataclasses.dataclass
class KernelSpec:
    """SVM kernel; gfk_* kinds replace the scalar product with x^T G y."""

    kind: str = "rbf"
    gamma: float | None = None
    model: GfkModel | None = None

    def __post_init__(self):
        if self.kind not in _KERNEL_KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind.startswith("gfk") and self.model is None:
            raise ValueError(f"{self.kind} kernel requires a fitted GfkModel")
        if self.gamma is not None and self.gamma <= 0:
            raise ValueError("gamma must be > 0")
        self._factor = None

    def resolved(self, training: np.ndarray) -> "KernelSpec":
        """Fill the default gamma = 1 / (D * mean feature variance)."""
        if "rbf" not in self.kind or self.gamma is not None:
            return self
        variance = float(training.var(axis=0).mean())
        gamma = 1.0 / (training.shape[1] * max(variance, 1e-12))
        return KernelSpec(self.kind, gamma, self.model)

    def _gfk_factor(self) -> np.ndarray:
        if self._factor is None:
            evals, evecs = np.linalg.eigh(self.model.g)
            self._factor = evecs * np.sqrt(np.clip(evals, 0.0, None))
        return self._factor

    def matrix(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        a = np.atleast_2d(np.asarray(a, dtype=float))
        b = np.atleast_2d(np.asarray(b, dtype=float))
        if a.shape[1] != b.shape[1]:
            raise DimensionMismatch("kernel operands differ in dimension")
        if self.kind == "linear":
            return a @ b.T
        if self.kind == "rbf":
            return np.exp(-self.gamma * cdist(a, b, "sqeuclidean"))
        if self.kind == "gfk_linear":
            return a @ self.model.g @ b.T
        factor = self._gfk_factor()
        return np.exp(-self.gamma * cdist(a @ factor, b @ factor, "sqeuclidean"))


@dataclasses.dataclass
class KnnModel:
    """k-nearest-neighbor model: the training set plus a metric."""

    vectors: np.ndarray
    labels: list
    k: int
    metric: MetricSpec
    preprocessing: object | None = None
    algorithm: str = dataclasses.field(default="knn", init=False)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=float)
        if len(self.vectors) == 0:
            raise ValueError("knn model needs at least one stored vector")
        if len(self.labels) != len(self.vectors):
            raise ValueError("one label per stored vector required")
        if not 1 <= self.k <= len(self.vectors):
            raise ValueError("k outside [1, n_stored]")
        self.classes = sorted(set(self.labels))

    def predict(self, query: np.ndarray):
        return knn_classify(self, query)


def fit_knn(data: FeatureSet, k: int, metric: MetricSpec | None = None) -> KnnModel:
    if data.labels is None:
        raise ValueError("labeled data required")
    return KnnModel(data.vectors, list(data.labels), k, metric or MetricSpec())


def _knn_vote(model: KnnModel, distances: np.ndarray):
    # Stable argsort implements "distance ties -> lower stored index".
    order = np.argsort(distances, kind="stable")[: model.k]
    votes: dict = {}
    sums: dict = {}
    for idx in order:
        lab = model.labels[idx]
        votes[lab] = votes.get(lab, 0) + 1
        sums[lab] = sums.get(lab, 0.0) + float(distances[idx])
    best = max(votes.values())
    tied = [lab for lab, cnt in votes.items() if cnt == best]
    if len(tied) == 1:
        return tied[0]
    # Vote ties: smaller summed distance, then lower class index.
    tied.sort(key=lambda lab: (sums[lab], model.classes.index(lab)))
    return tied[0]


def knn_classify(model: KnnModel, query: np.ndarray):
    """Majority vote among the k nearest stored vectors."""
    query = np.asarray(query, dtype=float).reshape(1, -1)
    if query.shape[1] != model.vectors.shape[1]:
        raise DimensionMismatch("query dimension does not match the model")
    distances = model.metric.pairwise(query, model.vectors)[0]
    return _knn_vote(model, distances)


@dataclasses.dataclass
class BinarySvm:
    """One soft-margin machine of the one-vs-one ensemble.

    Only support vectors are kept; `coef` holds alpha_i * y_i where y = +1
    for class_a (the lower class index) and -1 for class_b.
    """

    class_a: object
    class_b: object
    support_vectors: np.ndarray
    coef: np.ndarray
    bias: float

    def decision(self, kernel: KernelSpec, queries: np.ndarray) -> np.ndarray:
        if len(self.support_vectors) == 0:
            return np.full(len(np.atleast_2d(queries)), self.bias)
        k = kernel.matrix(queries, self.support_vectors)
        return k @ self.coef + self.bias


@dataclasses.dataclass
class SvmModel:
    """One-vs-one SVM with majority voting (ties -> lowest class index)."""

    machines: list
    kernel: KernelSpec
    c: float
    tol: float
    classes: list
    preprocessing: object | None = None
    algorithm: str = dataclasses.field(default="svm", init=False)

    def predict(self, query: np.ndarray):
        return svm_predict(self, query)


def _smo(kmat: np.ndarray, y: np.ndarray, c: float, tol: float):
    """Platt-style SMO with deterministic heuristics; returns (alpha, bias).

    Decision function convention: f(x) = sum_i alpha_i y_i k(x_i, x) + bias.
    The second-choice heuristic (max |E1 - E2| over non-bound multipliers,
    then ordered scans from index 0) replaces Platt's random starts so
    training is reproducible.
    """
    n = len(y)
    alpha = np.zeros(n)
    bias = 0.0
    errors = -y.astype(float)  # f = 0 initially, E_i = f(x_i) - y_i
    eps = 1e-12

    def refresh_errors():
        errors[:] = (alpha * y) @ kmat + bias - y

    def take_step(i1: int, i2: int) -> bool:
        nonlocal bias
        if i1 == i2:
            return False
        a1_old, a2_old = alpha[i1], alpha[i2]
        y1, y2 = y[i1], y[i2]
        e1, e2 = errors[i1], errors[i2]
        s = y1 * y2
        if s > 0:
            low = max(0.0, a1_old + a2_old - c)
            high = min(c, a1_old + a2_old)
        else:
            low = max(0.0, a2_old - a1_old)
            high = min(c, c + a2_old - a1_old)
        if low >= high:
            return False
        k11, k12, k22 = kmat[i1, i1], kmat[i1, i2], kmat[i2, i2]
        eta = k11 + k22 - 2.0 * k12
        if eta > 0:
            a2 = a2_old + y2 * (e1 - e2) / eta
            a2 = min(max(a2, low), high)
        else:
            # Flat or concave direction: evaluate the dual at both ends.
            coef = alpha * y

            def dual(a1_c, a2_c):
                trial = coef.copy()
                trial[i1] = a1_c * y1
                trial[i2] = a2_c * y2
                total = alpha.sum() - a1_old - a2_old + a1_c + a2_c
                return total - 0.5 * trial @ kmat @ trial

            obj_low = dual(a1_old + s * (a2_old - low), low)
            obj_high = dual(a1_old + s * (a2_old - high), high)
            if obj_low > obj_high + eps:
                a2 = low
            elif obj_high > obj_low + eps:
                a2 = high
            else:
                return False
        if abs(a2 - a2_old) < eps * (a2 + a2_old + eps):
            return False
        a1 = min(max(a1_old + s * (a2_old - a2), 0.0), c)

        b1 = bias - (e1 + y1 * (a1 - a1_old) * k11 + y2 * (a2 - a2_old) * k12)
        b2 = bias - (e2 + y1 * (a1 - a1_old) * k12 + y2 * (a2 - a2_old) * k22)
        if 0 < a1 < c:
            bias = b1
        elif 0 < a2 < c:
            bias = b2
        else:
            bias = (b1 + b2) / 2.0
        alpha[i1], alpha[i2] = a1, a2
        refresh_errors()
        return True

    def examine(i2: int) -> bool:
        y2 = y[i2]
        a2 = alpha[i2]
        e2 = errors[i2]
        r2 = e2 * y2
        if (r2 < -tol and a2 < c) or (r2 > tol and a2 > 0):
            non_bound = np.nonzero((alpha > 0) & (alpha < c))[0]
            if len(non_bound) > 1:
                gaps = np.abs(errors[non_bound] - e2)
                i1 = int(non_bound[int(np.argmax(gaps))])
                if take_step(i1, i2):
                    return True
            for i1 in non_bound:
                if take_step(int(i1), i2):
                    return True
            for i1 in range(n):
                if take_step(i1, i2):
                    return True
        return False

    examine_all = True
    budget = 500 * max(n, 10)
    steps = 0
    while steps < budget:
        changed = 0
        candidates = range(n) if examine_all else np.nonzero((alpha > 0) & (alpha < c))[0]
        for i2 in candidates:
            if examine(int(i2)):
                changed += 1
            steps += 1
            if steps >= budget:
                break
        if examine_all:
            if changed == 0:
                break
            examine_all = False
        elif changed == 0:
            examine_all = True
    else:
        logger.warning("SMO iteration budget exhausted; returning current iterate")
    return alpha, bias


def svm_train(data: FeatureSet, kernel: KernelSpec, c: float = 10.0, tol: float = 1e-3) -> SvmModel:
    """Train a one-vs-one SVM with SMO to the given KKT tolerance."""
    if data.labels is None:
        raise ValueError("labeled data required")
    if c <= 0:
        raise ValueError("C must be > 0")
    labels = list(data.labels)
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise SingleClass("svm_train needs at least two classes")
    kernel = kernel.resolved(data.vectors)
    label_arr = np.array(labels, dtype=object)

    machines = []
    for ia in range(len(classes)):
        for ib in range(ia + 1, len(classes)):
            cls_a, cls_b = classes[ia], classes[ib]
            mask = (label_arr == cls_a) | (label_arr == cls_b)
            x_pair = data.vectors[mask]
            y_pair = np.where(label_arr[mask] == cls_a, 1.0, -1.0)
            kmat = kernel.matrix(x_pair, x_pair)
            alpha, bias = _smo(kmat, y_pair, c, tol)
            support = alpha > 1e-12
            machines.append(
                BinarySvm(
                    cls_a,
                    cls_b,
                    x_pair[support],
                    (alpha * y_pair)[support],
                    bias,
                )
            )
    return SvmModel(machines, kernel, c, tol, classes)


def _svm_votes(model: SvmModel, queries: np.ndarray) -> np.ndarray:
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    votes = np.zeros((len(queries), len(model.classes)), dtype=int)
    index = {cls: i for i, cls in enumerate(model.classes)}
    for machine in model.machines:
        dec = machine.decision(model.kernel, queries)
        a, b = index[machine.class_a], index[machine.class_b]
        votes[dec >= 0, a] += 1
        votes[dec < 0, b] += 1
    return votes


def svm_predict(model: SvmModel, query: np.ndarray):
    """Majority vote over the one-vs-one machines."""
    query = np.asarray(query, dtype=float).reshape(1, -1)
    votes = _svm_votes(model, query)[0]
    return model.classes[int(np.argmax(votes))]  # argmax takes the lowest index on ties


def predict_batch(model, queries: np.ndarray) -> list:
    """Vectorized prediction for either model type."""
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    if model.algorithm == "knn":
        if queries.shape[1] != model.vectors.shape[1]:
            raise DimensionMismatch("query dimension does not match the model")
        dmat = model.metric.pairwise(queries, model.vectors)
        return [_knn_vote(model, row) for row in dmat]
    votes = _svm_votes(model, queries)
    return [model.classes[int(np.argmax(row))] for row in votes]


@dataclasses.dataclass(frozen=True)
class ConfusionMatrix:
    """Per-class recognition fractions; columns = true class, rows = predicted."""

    values: np.ndarray
    classes: list

    def diagonal(self) -> np.ndarray:
        return np.diag(self.values)


def _confusion_from_counts(counts: np.ndarray, classes: list) -> ConfusionMatrix:
    totals = counts.sum(axis=0)
    values = np.zeros_like(counts, dtype=float)
    nonzero = totals > 0
    values[:, nonzero] = counts[:, nonzero] / totals[nonzero]
    return ConfusionMatrix(values, classes)


def evaluate(model, test: FeatureSet):
    """Accuracy plus the column-normalized confusion matrix."""
    if test.labels is None or len(test) == 0:
        raise EmptyTestSet("evaluation requires labeled test examples")
    preds = predict_batch(model, test.vectors)
    classes = sorted(set(model.classes) | set(test.labels))
    index = {cls: i for i, cls in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)))
    correct = 0
    for pred, true in zip(preds, test.labels):
        counts[index[pred], index[true]] += 1
        correct += pred == true
    accuracy = correct / len(test)
    return accuracy, _confusion_from_counts(counts, classes)


@dataclasses.dataclass(frozen=True)
class CvResult:
    """k-fold cross-validation outcome with the fold assignment recorded."""

    mean_accuracy: float
    fold_accuracies: list
    confusion: ConfusionMatrix
    assignments: np.ndarray
    seed: int


def kfold_cv(data: FeatureSet, k: int, trainer, seed: int = 0) -> CvResult:
    """Stratified k-fold cross-validation of `trainer(train_set) -> model`.

    Folds preserve class proportions to within one example; the seeded fold
    assignment is returned so runs are reproducible.
    """
    if data.labels is None:
        raise ValueError("labeled data required")
    n = len(data)
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > n:
        raise TooFewExamples(f"cannot split {n} examples into {k} folds")

    rng = np.random.default_rng(seed)
    labels = np.array(data.labels, dtype=object)
    assignments = np.empty(n, dtype=int)
    for cls in sorted(set(data.labels)):
        idx = np.nonzero(labels == cls)[0]
        idx = idx[rng.permutation(len(idx))]
        assignments[idx] = np.arange(len(idx)) % k

    classes = sorted(set(data.labels))
    index = {cls: i for i, cls in enumerate(classes)}
    counts = np.zeros((len(classes), len(classes)))
    fold_accuracies = []
    for fold in range(k):
        test_mask = assignments == fold
        if not test_mask.any():
            continue
        train_set = FeatureSet(
            data.vectors[~test_mask], data.domain, list(labels[~test_mask])
        )
        model = trainer(train_set)
        preds = predict_batch(model, data.vectors[test_mask])
        true = labels[test_mask]
        fold_accuracies.append(float(np.mean([p == t for p, t in zip(preds, true)])))
        for pred, t in zip(preds, true):
            counts[index[pred], index[t]] += 1
    mean_accuracy = float(np.mean(fold_accuracies))
    return CvResult(
        mean_accuracy, fold_accuracies, _confusion_from_counts(counts, classes), assignments, seed
    )
