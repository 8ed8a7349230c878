"""Embedding quality, internal consistency, and annotator-accuracy estimates.

Recovered embeddings are defined only up to scale and sign, so quality
against ground truth is measured after a closed-form affine fit, and Pearson
correlation is sign-corrected by that fit. Internal consistency is the
triplet-violation fraction; annotator accuracy is summarized by a binned
success-probability curve and the Poisson-Binomial count model it feeds.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyInputError, InvalidBinsError, UndefinedCorrelationError
from .signals import Signal
from .triplets import LabeledTripletSet


@dataclass(frozen=True)
class AffineFit:
    """Least-squares (a, b) with mse = (1/n) ||a*Y - b*1 - Z||^2 minimized."""

    a: float
    b: float
    mse: float
    degenerate: bool = False


def affine_align_mse(Y, Z) -> AffineFit:
    """Closed-form OLS alignment of an embedding to ground truth.

    a may be negative: it absorbs the embedding's sign ambiguity. A constant
    Y has no unique fit; the best constant (a=0, b=-mean(Z)) is returned and
    flagged instead of raising, so batch evaluation never aborts.
    """
    y = np.asarray(Y, dtype=np.float64).reshape(-1)
    z = Z.values if isinstance(Z, Signal) else np.asarray(Z, dtype=np.float64).reshape(-1)
    if y.size != z.size:
        raise ValueError(f"length mismatch: {y.size} vs {z.size}")
    if y.size < 2:
        raise ValueError("affine fit needs at least 2 samples")
    n = y.size
    var_y = float(np.var(y))
    if var_y == 0.0:
        mse = float(np.mean((np.mean(z) - z) ** 2))
        return AffineFit(a=0.0, b=float(-np.mean(z)), mse=mse, degenerate=True)
    cov = float(np.mean((y - y.mean()) * (z - z.mean())))
    a = cov / var_y
    b = float(a * y.mean() - z.mean())
    mse = float(np.sum((a * y - b - z) ** 2) / n)
    return AffineFit(a=float(a), b=b, mse=mse)


def aligned_embedding(Y, Z) -> np.ndarray:
    """a*Y - b with the fitted coefficients, ready to overlay on Z."""
    fit = affine_align_mse(Y, Z)
    y = np.asarray(Y, dtype=np.float64).reshape(-1)
    return fit.a * y - fit.b


def pearson(Y, Z) -> float:
    """Plain Pearson correlation; raises on constant input."""
    y = np.asarray(Y, dtype=np.float64).reshape(-1)
    z = Z.values if isinstance(Z, Signal) else np.asarray(Z, dtype=np.float64).reshape(-1)
    if y.size != z.size or y.size < 2:
        raise ValueError(f"need two same-length sequences with n >= 2, got {y.size}, {z.size}")
    if np.ptp(y) == 0.0 or np.ptp(z) == 0.0:
        raise UndefinedCorrelationError("correlation undefined for constant input")
    yc = y - y.mean()
    zc = z - z.mean()
    return float(np.dot(yc, zc) / np.sqrt(np.dot(yc, yc) * np.dot(zc, zc)))


def aligned_pearson(Y, Z) -> float:
    """Sign-corrected correlation: sign(a) * rho, i.e. rho after alignment."""
    fit = affine_align_mse(Y, Z)
    if fit.degenerate:
        raise UndefinedCorrelationError("correlation undefined for constant embedding")
    rho = pearson(Y, Z)
    return float(np.sign(fit.a) * rho) if fit.a != 0 else rho


def _oriented_distances(Y, labels: LabeledTripletSet):
    """Label-oriented (d_near, d_far) per triplet: the label asserts near < far."""
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    I, J, K, W = labels.to_arrays()
    d_j = np.sqrt(np.sum((Y[:, I] - Y[:, J]) ** 2, axis=0))
    d_k = np.sqrt(np.sum((Y[:, I] - Y[:, K]) ** 2, axis=0))
    neg = W == -1
    near = np.where(neg, d_j, d_k)
    far = np.where(neg, d_k, d_j)
    return near, far


def triplet_violations(Y, labels: LabeledTripletSet) -> float:
    """Fraction of labeled triplets the embedding contradicts.

    A violation needs a strict inequality the wrong way; exact ties count as
    agreements (they are rare at m=1 and the strict definition targets
    genuine contradictions).
    """
    if len(labels) == 0:
        raise EmptyInputError("triplet_violations needs a non-empty label set")
    near, far = _oriented_distances(Y, labels)
    return float(np.count_nonzero(far < near) / len(labels))


def correct_under_embedding(Y, labels: LabeledTripletSet) -> int:
    """Count of non-violated triplets; 1 - count/|S| equals the violation rate."""
    if len(labels) == 0:
        raise EmptyInputError("correct_under_embedding needs a non-empty label set")
    near, far = _oriented_distances(Y, labels)
    return int(np.count_nonzero(~(far < near)))


def expected_correct(probs) -> float:
    """Expected correctly-labeled count: the Poisson-Binomial mean sum(p_t)."""
    p = np.asarray(probs, dtype=np.float64).reshape(-1)
    if p.size and (p.min() < 0.0 or p.max() > 1.0):
        raise ValueError("success probabilities must lie in [0, 1]")
    return float(np.sum(p))


def expected_correct_variance(probs) -> float:
    """Poisson-Binomial variance sum(p_t * (1 - p_t)) for tolerance bands."""
    p = np.asarray(probs, dtype=np.float64).reshape(-1)
    if p.size and (p.min() < 0.0 or p.max() > 1.0):
        raise ValueError("success probabilities must lie in [0, 1]")
    return float(np.sum(p * (1.0 - p)))


@dataclass(frozen=True)
class SuccessBin:
    mean_distance_gap: float
    estimated_p: float
    count: int


@dataclass(frozen=True)
class SuccessProbabilityCurve:
    bins: tuple[SuccessBin, ...]


def _true_gaps_and_correct(labels: LabeledTripletSet, signal: Signal):
    z = signal.values
    I, J, K, W = labels.to_arrays()
    d_ij = np.abs(z[I] - z[J])
    d_ik = np.abs(z[I] - z[K])
    gaps = np.abs(d_ij - d_ik)
    tie = d_ij == d_ik
    # w = -1 asserts "closer to j", correct when d_ij < d_ik
    correct = np.where(W == -1, d_ij < d_ik, d_ik < d_ij)
    return gaps, correct, tie


def estimate_success_probability(
    labels: LabeledTripletSet, signal: Signal, num_bins: int = 10
) -> SuccessProbabilityCurve:
    """Binned ML estimate of the annotator success probability vs gap size.

    Triplets are sorted by the true distance gap |d_ij - d_ik| and split into
    equal-count bins (sizes differ by at most one); each bin reports its mean
    gap and the fraction labeled correctly against the true signal. Ties have
    no correct answer and are excluded from the fraction's denominator.
    """
    if len(labels) == 0:
        raise EmptyInputError("estimate_success_probability needs labels")
    if not (1 <= num_bins <= len(labels)):
        raise InvalidBinsError(
            f"num_bins must be in [1, {len(labels)}], got {num_bins}"
        )
    if signal.n < labels.n:
        raise ValueError(f"signal length {signal.n} shorter than labels' n={labels.n}")
    gaps, correct, tie = _true_gaps_and_correct(labels, signal)
    order = np.argsort(gaps, kind="stable")
    bins = []
    for chunk in np.array_split(order, num_bins):
        chunk_ties = tie[chunk]
        denom = int(np.count_nonzero(~chunk_ties))
        if denom > 0:
            p_hat = float(np.count_nonzero(correct[chunk] & ~chunk_ties) / denom)
        else:
            p_hat = float("nan")
        bins.append(
            SuccessBin(
                mean_distance_gap=float(np.mean(gaps[chunk])),
                estimated_p=p_hat,
                count=int(chunk.size),
            )
        )
    return SuccessProbabilityCurve(tuple(bins))
