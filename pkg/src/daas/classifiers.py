"""Small linear and naive-Bayes binary classifiers written against numpy.

Every model exposes ``decision_function`` (a log-odds style score, larger is
more likely positive) and ``predict_proba``. Ranking uses the score, which
does not saturate the way probabilities do.
"""
from __future__ import annotations

import numpy as np
from numba import njit
from scipy.special import expit, logsumexp

SGD_LOGISTIC = "sgd"
LINEAR_SVM = "svm"
LOGISTIC_REGRESSION = "lr"
GAUSSIAN_NB = "gnb"
KINDS = (SGD_LOGISTIC, LINEAR_SVM, LOGISTIC_REGRESSION, GAUSSIAN_NB)

SGD_STEP = 0.01
SGD_EPOCHS = 20
SVM_L2 = 1e-4
LR_TOL = 1e-6
LR_MAX_ITER = 500
VAR_FLOOR = 1e-9


def logistic_loss(w: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
    """Mean logistic loss; the last entry of ``w`` is the intercept."""
    z = X @ w[:-1] + w[-1]
    return float(np.mean(np.logaddexp(0.0, z) - y * z))


def logistic_grad(w: np.ndarray, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    z = X @ w[:-1] + w[-1]
    r = expit(z) - y
    return np.append(X.T @ r, r.sum()) / len(y)


@njit(cache=True)
def _sgd(X, y, order, step, loss_kind, l2):
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    for e in range(order.shape[0]):
        for t in range(n):
            i = order[e, t]
            z = b
            for j in range(d):
                z += w[j] * X[i, j]
            if loss_kind == 0:
                # logistic: d/dz = sigmoid(z) - y
                if z >= 0:
                    p = 1.0 / (1.0 + np.exp(-z))
                else:
                    ez = np.exp(z)
                    p = ez / (1.0 + ez)
                g = p - y[i]
                for j in range(d):
                    w[j] -= step * g * X[i, j]
                b -= step * g
            else:
                s = 2.0 * y[i] - 1.0
                for j in range(d):
                    w[j] -= step * l2 * w[j]
                if s * z < 1.0:
                    for j in range(d):
                        w[j] += step * s * X[i, j]
                    b += step * s
    return w, b


class LinearModel:
    def __init__(self, kind: str, w=None, b: float = 0.0):
        self.kind = kind
        self.w = None if w is None else np.asarray(w, dtype=float)
        self.b = float(b)
        self.iterations = 0

    def fit(self, X: np.ndarray, y: np.ndarray, seed: int = 0) -> "LinearModel":
        X = np.ascontiguousarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == LOGISTIC_REGRESSION:
            self._fit_gd(X, y)
        else:
            rng = np.random.default_rng(seed)
            order = np.stack([rng.permutation(len(y)) for _ in range(SGD_EPOCHS)])
            loss_kind = 0 if self.kind == SGD_LOGISTIC else 1
            self.w, self.b = _sgd(X, y, order, SGD_STEP, loss_kind, SVM_L2)
            self.iterations = SGD_EPOCHS
        return self

    def _fit_gd(self, X, y):
        n, d = X.shape
        Xb = np.hstack([X, np.ones((n, 1))])
        # logistic loss Hessian is bounded by X'X / 4n
        lip = 0.25 * np.linalg.eigvalsh(Xb.T @ Xb / n)[-1]
        step = 1.0 / max(lip, 1e-12)
        w = np.zeros(d + 1)
        for it in range(1, LR_MAX_ITER + 1):
            g = logistic_grad(w, X, y)
            if np.linalg.norm(g) < LR_TOL:
                break
            w -= step * g
        self.iterations = it
        self.w, self.b = w[:-1], float(w[-1])

    def decision_function(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.w + self.b

    def predict_proba(self, X) -> np.ndarray:
        return expit(self.decision_function(X))

    def params(self) -> dict:
        return {"w": self.w.tolist(), "b": self.b}

    @classmethod
    def from_params(cls, kind, p) -> "LinearModel":
        return cls(kind, p["w"], p["b"])


class GaussianNB:
    kind = GAUSSIAN_NB

    def __init__(self, means=None, variances=None, log_priors=None):
        self.means = None if means is None else np.asarray(means, dtype=float)
        self.variances = None if variances is None else np.asarray(variances, dtype=float)
        self.log_priors = None if log_priors is None else np.asarray(log_priors, dtype=float)

    def fit(self, X, y, seed: int = 0) -> "GaussianNB":
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        self.means = np.array([X[y == c].mean(axis=0) for c in (0, 1)])
        self.variances = np.maximum(np.array([X[y == c].var(axis=0) for c in (0, 1)]), VAR_FLOOR)
        self.log_priors = np.log(np.array([np.mean(y == 0), np.mean(y == 1)]))
        return self

    def joint_log_likelihood(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = np.empty((len(X), 2))
        for c in (0, 1):
            var = self.variances[c]
            out[:, c] = self.log_priors[c] - 0.5 * np.sum(np.log(2 * np.pi * var)) \
                - 0.5 * np.sum((X - self.means[c]) ** 2 / var, axis=1)
        return out

    def posteriors(self, X) -> np.ndarray:
        jll = self.joint_log_likelihood(X)
        return np.exp(jll - logsumexp(jll, axis=1, keepdims=True))

    def decision_function(self, X) -> np.ndarray:
        jll = self.joint_log_likelihood(X)
        return jll[:, 1] - jll[:, 0]

    def predict_proba(self, X) -> np.ndarray:
        return self.posteriors(X)[:, 1]

    def params(self) -> dict:
        return {"means": self.means.tolist(), "variances": self.variances.tolist(),
                "log_priors": self.log_priors.tolist()}

    @classmethod
    def from_params(cls, kind, p) -> "GaussianNB":
        return cls(p["means"], p["variances"], p["log_priors"])


def make_model(kind: str):
    if kind == GAUSSIAN_NB:
        return GaussianNB()
    if kind in (SGD_LOGISTIC, LINEAR_SVM, LOGISTIC_REGRESSION):
        return LinearModel(kind)
    raise ValueError(f"unknown classifier {kind!r}; choose from {', '.join(KINDS)}")


def model_from_params(kind: str, params: dict):
    cls = GaussianNB if kind == GAUSSIAN_NB else LinearModel
    return cls.from_params(kind, params)
