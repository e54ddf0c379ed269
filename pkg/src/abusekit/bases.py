"""The five base classifiers behind the stacked ensemble.

Kinds and their fixed hyperparameters:

    gpc     Gaussian process classifier, kernel 1.0 * exp(-||x-x'||^2 / 2),
            logistic likelihood, Laplace approximation (Newton on the mode),
            20-node Gauss-Hermite quadrature for the predictive probability.
    mlp100  one hidden layer of 100 units (shares the Adam/softmax machinery).
    linsvm  linear SVM, C = 0.025, primal smoothed hinge, full-batch gradient
            descent; P(1) approximated by a sigmoid of the decision value.
    rforest 10 trees, max depth 5, sqrt(d) features per split, Gini impurity.
    logreg  logistic regression, IRLS/Newton with L2 strength 1.0.

Every fitted model exposes predict_proba(X) -> P(label = 1) in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve_triangular

from .errors import TrainingError
from .mlp import MLPModel, TrainConfig, init_mlp, _train
from .serialize import decode_array, encode_array

BASE_KINDS = ("gpc", "mlp100", "linsvm", "rforest", "logreg")

GPC_JITTER = 1e-8
GPC_MAX_NEWTON = 100
GH_NODES = 20

LOGREG_L2 = 1.0
LOGREG_MAX_ITER = 100
LOGREG_TOL = 1e-8

SVM_C = 0.025
SVM_SMOOTHING = 0.5
SVM_MAX_ITER = 2000
SVM_TOL = 1e-8

FOREST_TREES = 10
FOREST_MAX_DEPTH = 5


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _validate(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise TrainingError("training set must be n x dim with matching labels")
    if set(np.unique(y)) != {0, 1}:
        raise TrainingError("training set must contain both classes")
    return X, y


# --- logistic regression ----------------------------------------------------


@dataclass
class LogisticRegressionModel:
    weights: np.ndarray
    bias: float
    l2: float = LOGREG_L2

    def decision(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.weights + self.bias

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return _sigmoid(self.decision(X))


def fit_logreg(X, y, l2: float = LOGREG_L2) -> LogisticRegressionModel:
    """Newton/IRLS on sum cross-entropy + (l2/2)||w||^2 (bias unpenalized)."""
    X, y = _validate(X, y)
    n, d = X.shape
    Xb = np.hstack([X, np.ones((n, 1))])
    w = np.zeros(d + 1)
    for _ in range(LOGREG_MAX_ITER):
        p = _sigmoid(Xb @ w)
        grad = Xb.T @ (p - y)
        grad[:d] += l2 * w[:d]
        r = np.maximum(p * (1.0 - p), 1e-12)
        hess = (Xb * r[:, None]).T @ Xb
        hess[np.diag_indices(d)] += l2
        step = np.linalg.solve(hess, grad)
        w -= step
        if np.max(np.abs(step)) < LOGREG_TOL:
            break
    return LogisticRegressionModel(weights=w[:d], bias=float(w[d]), l2=l2)


# --- linear SVM ---------------------------------------------------------------


@dataclass
class LinearSVMModel:
    weights: np.ndarray
    bias: float

    def decision(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.weights + self.bias

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        # Sigmoid of the margin; a documented approximation (no Platt scaling).
        return _sigmoid(self.decision(X))


def _smooth_hinge(margin: np.ndarray, delta: float = SVM_SMOOTHING):
    """Quadratically smoothed hinge loss and its derivative in the margin."""
    loss = np.zeros_like(margin)
    grad = np.zeros_like(margin)
    low = margin <= 1.0 - delta
    mid = (~low) & (margin < 1.0)
    loss[low] = 1.0 - margin[low] - delta / 2.0
    grad[low] = -1.0
    loss[mid] = (1.0 - margin[mid]) ** 2 / (2.0 * delta)
    grad[mid] = -(1.0 - margin[mid]) / delta
    return loss, grad


def fit_linsvm(X, y, C: float = SVM_C) -> LinearSVMModel:
    """Full-batch gradient descent on mean smoothed hinge + (lambda/2)||w||^2.

    lambda = 1 / (n * C), the primal equivalent of the usual C formulation.
    """
    X, y = _validate(X, y)
    n, d = X.shape
    sign = 2.0 * y - 1.0
    lam = 1.0 / (n * C)
    w = np.zeros(d)
    b = 0.0
    # Step size from a Lipschitz bound of the smoothed objective.
    lip = lam + (np.linalg.norm(X, 2) ** 2 + n) / (n * SVM_SMOOTHING)
    lr = 1.0 / lip
    for _ in range(SVM_MAX_ITER):
        margin = sign * (X @ w + b)
        _, gmargin = _smooth_hinge(margin)
        coeff = gmargin * sign / n
        grad_w = X.T @ coeff + lam * w
        grad_b = coeff.sum()
        w_new = w - lr * grad_w
        b_new = b - lr * grad_b
        delta = max(np.max(np.abs(w_new - w)), abs(b_new - b))
        w, b = w_new, b_new
        if delta < SVM_TOL:
            break
    return LinearSVMModel(weights=w, bias=float(b))


# --- random forest -----------------------------------------------------------


@dataclass
class TreeNode:
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    prob: float = 0.5  # class-1 frequency at a leaf

    @property
    def is_leaf(self) -> bool:
        return self.left is None

    def depth(self) -> int:
        if self.is_leaf:
            return 0
        return 1 + max(self.left.depth(), self.right.depth())


def _gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(1.0 - (p**2).sum())


def _best_split(X, y, features):
    """Lowest weighted-Gini split among candidate features.

    Features are scanned in ascending index order with ascending thresholds
    and strict improvement, so ties resolve to the lowest feature index and
    then the lowest threshold.
    """
    best = None  # (score, feature, threshold)
    n = y.size
    for f in features:
        values = X[:, f]
        order = np.argsort(values, kind="stable")
        sv = values[order]
        sy = y[order]
        ones_left = np.cumsum(sy)
        total_ones = ones_left[-1]
        for i in range(n - 1):
            if sv[i] == sv[i + 1]:
                continue
            left_n = i + 1
            left_ones = ones_left[i]
            right_n = n - left_n
            right_ones = total_ones - left_ones
            score = (
                left_n * _gini(np.array([left_n - left_ones, left_ones]))
                + right_n * _gini(np.array([right_n - right_ones, right_ones]))
            ) / n
            if best is None or score < best[0] - 1e-15:
                threshold = (sv[i] + sv[i + 1]) / 2.0
                best = (score, f, threshold)
    return best


def _grow_tree(X, y, depth, max_depth, rng) -> TreeNode:
    node = TreeNode(prob=float(y.mean()))
    if depth >= max_depth or y.size < 2 or y.min() == y.max():
        return node
    d = X.shape[1]
    n_feat = max(1, int(round(np.sqrt(d))))
    features = np.sort(rng.choice(d, size=min(n_feat, d), replace=False))
    split = _best_split(X, y, features)
    if split is None:
        return node
    _, f, threshold = split
    mask = X[:, f] <= threshold
    node.feature = int(f)
    node.threshold = float(threshold)
    node.left = _grow_tree(X[mask], y[mask], depth + 1, max_depth, rng)
    node.right = _grow_tree(X[~mask], y[~mask], depth + 1, max_depth, rng)
    return node


def _tree_probs(node: TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0])
    for i, row in enumerate(X):
        cur = node
        while not cur.is_leaf:
            cur = cur.left if row[cur.feature] <= cur.threshold else cur.right
        out[i] = cur.prob
    return out


@dataclass
class RandomForestModel:
    trees: list[TreeNode]

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Mean of per-tree leaf class-1 frequencies."""
        X = np.asarray(X, dtype=np.float64)
        return np.mean([_tree_probs(t, X) for t in self.trees], axis=0)


def fit_rforest(X, y, seed: int = 0, n_trees: int = FOREST_TREES,
                max_depth: int = FOREST_MAX_DEPTH) -> RandomForestModel:
    """Bootstrapped Gini trees; per-tree generators derived from the run seed."""
    X, y = _validate(X, y)
    n = X.shape[0]
    root_rng = np.random.default_rng(seed)
    tree_seeds = root_rng.integers(0, 2**31 - 1, size=n_trees)
    trees = []
    for ts in tree_seeds:
        rng = np.random.default_rng(int(ts))
        idx = rng.integers(0, n, size=n)
        trees.append(_grow_tree(X[idx], y[idx], 0, max_depth, rng))
    return RandomForestModel(trees=trees)


# --- Gaussian process classifier ----------------------------------------------


def _rbf_kernel(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    # 1.0 * exp(-||a - b||^2 / 2), i.e. unit signal variance and length scale.
    sq = (
        np.sum(A**2, axis=1)[:, None]
        + np.sum(B**2, axis=1)[None, :]
        - 2.0 * A @ B.T
    )
    return np.exp(-0.5 * np.maximum(sq, 0.0))


def _log_likelihood(f: np.ndarray, sign: np.ndarray) -> float:
    # sum log sigma(sign * f), computed stably.
    m = sign * f
    return float(-np.sum(np.logaddexp(0.0, -m)))


@dataclass
class GPCModel:
    """Laplace-approximated GP classifier; keeps its training inputs."""

    X_train: np.ndarray
    f_hat: np.ndarray
    grad_at_mode: np.ndarray  # (t - pi) at the mode
    sqrt_w: np.ndarray
    chol_b: np.ndarray  # lower Cholesky of B = I + sqrtW K sqrtW
    newton_trace: list[float] = field(default_factory=list)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        k_star = _rbf_kernel(self.X_train, X)  # n_train x n_test
        mu = k_star.T @ self.grad_at_mode
        v = solve_triangular(self.chol_b, self.sqrt_w[:, None] * k_star, lower=True)
        var = np.maximum(1.0 - np.sum(v**2, axis=0), 1e-12)
        nodes, weights = np.polynomial.hermite.hermgauss(GH_NODES)
        # E[sigma(f)] under N(mu, var) by Gauss-Hermite quadrature.
        samples = mu[:, None] + np.sqrt(2.0 * var)[:, None] * nodes[None, :]
        return _sigmoid(samples) @ weights / np.sqrt(np.pi)


def fit_gpc(X, y) -> GPCModel:
    """Newton iteration for the posterior mode (Laplace approximation).

    Step halving keeps the unnormalized log posterior non-decreasing; failing
    to converge within 100 iterations is an error.
    """
    X, y = _validate(X, y)
    n = X.shape[0]
    t = y.astype(np.float64)
    sign = 2.0 * t - 1.0
    K = _rbf_kernel(X, X)
    K[np.diag_indices(n)] += GPC_JITTER
    K_chol = cho_factor(K, lower=True)

    def psi(f: np.ndarray) -> float:
        alpha = cho_solve(K_chol, f)
        return -0.5 * float(f @ alpha) + _log_likelihood(f, sign)

    f = np.zeros(n)
    current = psi(f)
    trace = [current]
    converged = False
    for _ in range(GPC_MAX_NEWTON):
        pi = _sigmoid(f)
        w = pi * (1.0 - pi)
        sw = np.sqrt(w)
        B = np.eye(n) + sw[:, None] * K * sw[None, :]
        L = np.linalg.cholesky(B)
        b = w * f + (t - pi)
        inner = solve_triangular(L, sw * (K @ b), lower=True)
        a = b - sw * solve_triangular(L.T, inner, lower=False)
        f_newton = K @ a
        # Line search: full Newton step, halved until psi does not decrease.
        # If no step improves, the mode is reached (up to float noise).
        step = 1.0
        accepted = False
        while step > 1e-6:
            candidate = f + step * (f_newton - f)
            value = psi(candidate)
            if value >= current:
                accepted = True
                break
            step /= 2.0
        if not accepted:
            converged = True
            break
        improvement = value - current
        f = candidate
        current = value
        trace.append(current)
        if improvement < 1e-10:
            converged = True
            break
    if not converged:
        raise TrainingError(f"GPC Newton did not converge in {GPC_MAX_NEWTON} iterations")
    pi = _sigmoid(f)
    w = pi * (1.0 - pi)
    sw = np.sqrt(w)
    B = np.eye(n) + sw[:, None] * K * sw[None, :]
    return GPCModel(
        X_train=X,
        f_hat=f,
        grad_at_mode=t - pi,
        sqrt_w=sw,
        chol_b=np.linalg.cholesky(B),
        newton_trace=trace,
    )


# --- stacked-ensemble-facing façade -------------------------------------------


@dataclass
class MLP100Model:
    inner: MLPModel

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.inner.predict_proba(X)


def fit_mlp100(X, y, seed: int = 0) -> MLP100Model:
    X, y = _validate(X, y)
    cfg = TrainConfig(dropout=0.0, epochs=200, seed=seed).validated()
    rng = np.random.default_rng(cfg.seed)
    model = init_mlp([X.shape[1], 100, 2], rng, dropout=0.0)
    return MLP100Model(inner=_train(model, X, y, cfg, rng))


def fit_base(kind: str, X, y, seed: int = 0):
    """Fit one of the five base classifiers by kind name."""
    if kind == "gpc":
        return fit_gpc(X, y)
    if kind == "mlp100":
        return fit_mlp100(X, y, seed=seed)
    if kind == "linsvm":
        return fit_linsvm(X, y)
    if kind == "rforest":
        return fit_rforest(X, y, seed=seed)
    if kind == "logreg":
        return fit_logreg(X, y)
    raise TrainingError(f"unknown base classifier kind {kind!r}")


# --- serialization ---------------------------------------------------------


def base_to_blobs(kind: str, model) -> dict:
    if kind == "logreg":
        return {"weights": encode_array(model.weights),
                "bias": encode_array(np.array([model.bias]))}
    if kind == "linsvm":
        return {"weights": encode_array(model.weights),
                "bias": encode_array(np.array([model.bias]))}
    if kind == "gpc":
        return {
            "x_train": encode_array(model.X_train),
            "f_hat": encode_array(model.f_hat),
            "grad_at_mode": encode_array(model.grad_at_mode),
            "sqrt_w": encode_array(model.sqrt_w),
            "chol_b": encode_array(model.chol_b),
        }
    if kind == "rforest":
        flat = [_flatten_tree(t) for t in model.trees]
        return {f"tree{i}": encode_array(arr) for i, arr in enumerate(flat)}
    if kind == "mlp100":
        inner = model.inner
        blobs = {}
        for i, (W, b) in enumerate(zip(inner.weights, inner.biases)):
            blobs[f"w{i}"] = encode_array(W)
            blobs[f"b{i}"] = encode_array(b)
        return blobs
    raise TrainingError(f"unknown base classifier kind {kind!r}")


def base_from_blobs(kind: str, blobs: dict):
    if kind == "logreg":
        return LogisticRegressionModel(weights=decode_array(blobs["weights"]),
                                       bias=float(decode_array(blobs["bias"])[0]))
    if kind == "linsvm":
        return LinearSVMModel(weights=decode_array(blobs["weights"]),
                              bias=float(decode_array(blobs["bias"])[0]))
    if kind == "gpc":
        return GPCModel(
            X_train=decode_array(blobs["x_train"]),
            f_hat=decode_array(blobs["f_hat"]),
            grad_at_mode=decode_array(blobs["grad_at_mode"]),
            sqrt_w=decode_array(blobs["sqrt_w"]),
            chol_b=decode_array(blobs["chol_b"]),
        )
    if kind == "rforest":
        trees = [_unflatten_tree(decode_array(blobs[f"tree{i}"]))
                 for i in range(len(blobs))]
        return RandomForestModel(trees=trees)
    if kind == "mlp100":
        n_layers = len(blobs) // 2
        weights = [decode_array(blobs[f"w{i}"]) for i in range(n_layers)]
        biases = [decode_array(blobs[f"b{i}"]) for i in range(n_layers)]
        return MLP100Model(inner=MLPModel(weights=weights, biases=biases, dropout=0.0))
    raise TrainingError(f"unknown base classifier kind {kind!r}")


def _flatten_tree(node: TreeNode) -> np.ndarray:
    # Preorder rows of (feature, threshold, prob); feature -1 marks a leaf.
    rows: list[list[float]] = []

    def visit(n: TreeNode):
        rows.append([float(n.feature if not n.is_leaf else -1), n.threshold, n.prob])
        if not n.is_leaf:
            visit(n.left)
            visit(n.right)

    visit(node)
    return np.array(rows)


def _unflatten_tree(rows: np.ndarray) -> TreeNode:
    pos = 0

    def build() -> TreeNode:
        nonlocal pos
        feature, threshold, prob = rows[pos]
        pos += 1
        node = TreeNode(prob=float(prob))
        if int(feature) >= 0:
            node.feature = int(feature)
            node.threshold = float(threshold)
            node.left = build()
            node.right = build()
        return node

    return build()
