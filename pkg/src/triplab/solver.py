"""Embedding recovery by empirical-risk minimization with random restarts.

Each restart runs full-batch gradient descent with a backtracking step rule
(halve on risk increase, grow 1.05 on success) from an independent random
initialization; the restart with the lowest final risk wins, ties going to
the lowest restart index. Restarts are independent by construction (each
owns a private random stream derived from (seed, restart index)), so the
loop could be parallelized without changing results; the experiment layer
parallelizes across grid cells instead.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInputError, NotPSDError, NumericalOverflowError
from .losses import LossSpec, _risk_grad_arrays
from .triplets import LabeledTripletSet, TripletQuery

_MAX_HALVINGS = 60


@dataclass(frozen=True)
class SolverConfig:
    restarts: int = 30
    max_iters: int = 1000
    rel_tol: float = 1e-7
    init_scale: float = 0.1
    step_rule: str = "backtracking"
    seed: int = 0
    keep_history: bool = False

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError(f"restarts must be >= 1, got {self.restarts}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.rel_tol <= 0:
            raise ValueError(f"rel_tol must be > 0, got {self.rel_tol}")
        if self.step_rule not in ("backtracking", "fixed-with-decay"):
            raise ValueError(f"unknown step_rule {self.step_rule!r}")


@dataclass(frozen=True)
class EmbeddingResult:
    """Best embedding across restarts plus per-restart provenance."""

    Y: np.ndarray  # (m, n)
    risk: float
    restart_risks: list[float]
    violations: float
    m: int
    histories: list[list[float]] | None = field(default=None, compare=False)

    @property
    def values(self) -> np.ndarray:
        """The 1-D time series view (first embedding dimension)."""
        return self.Y[0]


def triplet_margin(Y, query: TripletQuery) -> float:
    """||y_i - y_k||^2 - ||y_i - y_j||^2; positive when j sits closer to i."""
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    n = Y.shape[1]
    if max(query.i, query.j, query.k) > n:
        raise IndexError(f"query {query.as_tuple()} out of range for n={n}")
    yi = Y[:, query.i - 1]
    yj = Y[:, query.j - 1]
    yk = Y[:, query.k - 1]
    return float(np.sum((yi - yk) ** 2) - np.sum((yi - yj) ** 2))


def _descend(
    spec: LossSpec,
    Y0: np.ndarray,
    arrays,
    config: SolverConfig,
) -> tuple[np.ndarray, float, list[float]]:
    """One descent from Y0. Returns (Y, final risk, accepted-risk history)."""
    I, J, K, W = arrays
    Y = Y0.copy()
    risk, grad = _risk_grad_arrays(spec, Y, I, J, K, W, want_grad=True)
    if not np.isfinite(risk):
        raise NumericalOverflowError("non-finite risk at initialization")
    eta = 1.0
    fixed_decay = config.step_rule == "fixed-with-decay"
    history = [risk]
    for _ in range(config.max_iters):
        accepted = False
        for _ in range(_MAX_HALVINGS):
            candidate = Y - eta * grad
            new_risk, _ = _risk_grad_arrays(spec, candidate, I, J, K, W, want_grad=False)
            if np.isfinite(new_risk) and new_risk <= risk:
                accepted = True
                break
            eta *= 0.5
        if not accepted:
            # risk cannot be decreased along -grad even with a tiny step:
            # treat a finite plateau as convergence, a persistent overflow
            # as the step-size failure the caller should hear about
            if not np.isfinite(new_risk):
                raise NumericalOverflowError(
                    f"risk stayed non-finite after {_MAX_HALVINGS} step halvings"
                )
            break
        converged = risk - new_risk < config.rel_tol * max(abs(risk), 1e-300)
        Y = candidate
        risk = new_risk
        history.append(risk)
        if converged:
            break
        if fixed_decay:
            eta *= 0.999
        else:
            eta *= 1.05
        _, grad = _risk_grad_arrays(spec, Y, I, J, K, W, want_grad=True)
        if grad is None or not np.all(np.isfinite(grad)):
            raise NumericalOverflowError("non-finite gradient during descent")
    return Y, risk, history


def fit_embedding(
    labels: LabeledTripletSet,
    m: int,
    spec: LossSpec,
    config: SolverConfig | None = None,
) -> EmbeddingResult:
    """Minimize the empirical risk over an m x n embedding.

    Deterministic given config.seed. Violations are computed on the training
    triplets of the winning restart.
    """
    from .evaluation import triplet_violations

    if config is None:
        config = SolverConfig()
    if m < 1:
        raise ValueError(f"embedding dimension must be >= 1, got {m}")
    if len(labels) == 0:
        raise EmptyInputError("fit_embedding needs a non-empty label set")
    arrays = labels.to_arrays()
    n = labels.n
    best_Y = None
    best_risk = np.inf
    restart_risks: list[float] = []
    histories: list[list[float]] | None = [] if config.keep_history else None
    for restart in range(config.restarts):
        rng = np.random.default_rng([config.seed, restart])
        Y0 = rng.normal(0.0, config.init_scale, size=(m, n))
        Y, risk, history = _descend(spec, Y0, arrays, config)
        restart_risks.append(risk)
        if histories is not None:
            histories.append(history)
        if risk < best_risk:
            best_risk = risk
            best_Y = Y
    violations = triplet_violations(best_Y, labels)
    return EmbeddingResult(
        Y=best_Y,
        risk=best_risk,
        restart_risks=restart_risks,
        violations=violations,
        m=m,
        histories=histories,
    )


def recover_from_gram(G, m: int, tol: float = 1e-8) -> np.ndarray:
    """Top-m factor Y of a PSD Gram matrix with Y^T Y ~= G.

    The truncated eigendecomposition is the Frobenius-optimal rank-m
    factorization; Y is unique only up to rotation/reflection.
    """
    G = np.asarray(G, dtype=np.float64)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError(f"Gram matrix must be square, got shape {G.shape}")
    if not np.allclose(G, G.T, atol=1e-10, rtol=0.0):
        raise ValueError("Gram matrix must be symmetric")
    if m < 1:
        raise ValueError(f"embedding dimension must be >= 1, got {m}")
    eigvals, eigvecs = np.linalg.eigh((G + G.T) / 2.0)
    scale = max(1.0, float(eigvals[-1]))
    if eigvals[0] < -tol * scale:
        raise NotPSDError(
            f"negative eigenvalue {eigvals[0]:g} beyond tolerance {tol:g}"
        )
    order = np.argsort(eigvals)[::-1][:m]
    top_vals = np.clip(eigvals[order], 0.0, None)
    top_vecs = eigvecs[:, order]
    return (np.sqrt(top_vals)[:, None] * top_vecs.T).reshape(m, G.shape[0])
