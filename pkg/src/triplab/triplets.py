"""Triplet universe, uniform sampling, noisy-annotator simulation, fusion.

The universe T contains every (i, j, k) with i distinct from both and j < k;
a query and its (i, k, j) mirror are the same element, with the answer
direction carried by the label w (-1: i judged closer to j, +1: closer to k).
Mirrored inputs are normalized on ingestion.

Sampling never materializes T (|T| grows as n^3): ranks are drawn without
replacement from range(|T|) and decoded combinatorially.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy.special import expit
from scipy.stats import norm

from .errors import (
    BudgetExceedsUniverseError,
    DuplicateQueryError,
    EmptyInputError,
    FusionConflictError,
    InvalidSizeError,
)
from .signals import Signal


@dataclass(frozen=True, order=True)
class TripletQuery:
    """Canonical triplet (i, j, k), 1-based time indices, j < k."""

    i: int
    j: int
    k: int

    def __post_init__(self):
        if len({self.i, self.j, self.k}) != 3:
            raise ValueError(f"triplet indices must be distinct, got {(self.i, self.j, self.k)}")
        if not (self.j < self.k):
            raise ValueError(
                f"canonical form requires j < k, got j={self.j}, k={self.k}; "
                "use canonical_labeled() to normalize mirrored input"
            )
        if min(self.i, self.j, self.k) < 1:
            raise ValueError(f"indices are 1-based, got {(self.i, self.j, self.k)}")

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.i, self.j, self.k)


def canonical_labeled(i: int, j: int, k: int, w: int) -> tuple[TripletQuery, int]:
    """Normalize a possibly mirrored labeled triple to canonical (j < k) form.

    Swapping the two options flips the meaning of the answer, so w is negated
    when j and k trade places.
    """
    if w not in (-1, 1):
        raise ValueError(f"label w must be -1 or +1, got {w}")
    if j > k:
        return TripletQuery(i, k, j), -w
    return TripletQuery(i, j, k), w


@dataclass(frozen=True)
class LabeledTriplet:
    query: TripletQuery
    w: int
    annotator_id: str
    source: str = "simulated"

    def __post_init__(self):
        if self.w not in (-1, 1):
            raise ValueError(f"label w must be -1 or +1, got {self.w}")
        if self.source not in ("simulated", "human"):
            raise ValueError(f"source must be 'simulated' or 'human', got {self.source!r}")


@dataclass(frozen=True)
class ConstantLink:
    """Annotator answers correctly w.p. clamp(mu + eps, 0, 1), eps ~ N(0, eps_sd^2).

    eps is drawn once per labeled triplet. Clamping is needed because normal
    tails can leave [0, 1]; at the usual mu=0.9, eps_sd=0.01 it is inert.
    """

    mu: float
    eps_sd: float = 0.0

    def __post_init__(self):
        if not (0.5 < self.mu <= 1.0):
            raise ValueError(f"constant link needs mu in (0.5, 1], got {self.mu}")
        if self.eps_sd < 0:
            raise ValueError(f"eps_sd must be >= 0, got {self.eps_sd}")

    def success_probability(self, gap: float) -> float:
        """Expected probability of a correct label at distance gap |d_ij - d_ik|.

        Marginalizes the per-triplet eps draw: E[clamp(mu+eps, 0, 1)] has the
        closed form of a censored normal mean. Ties (gap == 0) have no correct
        answer and are scored as successes by the violation convention.
        """
        if gap == 0.0:
            return 1.0
        if self.eps_sd == 0.0:
            return min(max(self.mu, 0.0), 1.0)
        s, mu = self.eps_sd, self.mu
        alpha, beta = (0.0 - mu) / s, (1.0 - mu) / s
        middle = mu * (norm.cdf(beta) - norm.cdf(alpha)) - s * (norm.pdf(beta) - norm.pdf(alpha))
        return float(middle + (1.0 - norm.cdf(beta)))


@dataclass(frozen=True)
class LogisticLink:
    """P(w = -1) = 1 / (1 + exp(-sigma * (d_ik - d_ij))): harder when the gap is small."""

    sigma: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"logistic link needs sigma > 0, got {self.sigma}")

    def success_probability(self, gap: float) -> float:
        if gap == 0.0:
            return 1.0
        return float(expit(self.sigma * abs(gap)))


@dataclass(frozen=True)
class AnnotatorModel:
    """A simulated annotator: an id plus the link that drives label flips."""

    id: str
    link: ConstantLink | LogisticLink

    def success_probability(self, gap: float) -> float:
        return self.link.success_probability(gap)


class LabeledTripletSet:
    """An immutable collection of labeled triplets over a length-n signal.

    Canonical queries are unique: each triplet is labeled at most once, which
    is what makes fusion a plain union.
    """

    def __init__(self, labels: Iterable[LabeledTriplet], n: int):
        labels = tuple(labels)
        if n < 3:
            raise InvalidSizeError(f"signal length must be >= 3, got {n}")
        seen: dict[tuple[int, int, int], LabeledTriplet] = {}
        for lab in labels:
            key = lab.query.as_tuple()
            if max(key) > n:
                raise IndexError(f"triplet {key} out of range for n={n}")
            if key in seen:
                raise DuplicateQueryError(
                    f"triplet {key} labeled twice (by {seen[key].annotator_id!r} "
                    f"and {lab.annotator_id!r})"
                )
            seen[key] = lab
        self._labels = labels
        self.n = n
        self._arrays: tuple[np.ndarray, ...] | None = None

    @property
    def labels(self) -> tuple[LabeledTriplet, ...]:
        return self._labels

    def __len__(self) -> int:
        return len(self._labels)

    def __iter__(self) -> Iterator[LabeledTriplet]:
        return iter(self._labels)

    def queries(self) -> set[tuple[int, int, int]]:
        return {lab.query.as_tuple() for lab in self._labels}

    def annotator_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for lab in self._labels:
            counts[lab.annotator_id] = counts.get(lab.annotator_id, 0) + 1
        return counts

    def to_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """0-based (I, J, K, W) arrays for the numeric kernels; cached."""
        if self._arrays is None:
            size = len(self._labels)
            I = np.empty(size, dtype=np.int64)
            J = np.empty(size, dtype=np.int64)
            K = np.empty(size, dtype=np.int64)
            W = np.empty(size, dtype=np.int64)
            for idx, lab in enumerate(self._labels):
                I[idx] = lab.query.i - 1
                J[idx] = lab.query.j - 1
                K[idx] = lab.query.k - 1
                W[idx] = lab.w
            self._arrays = (I, J, K, W)
        return self._arrays


def triplet_universe_size(n: int) -> int:
    """|T| = n * (n-1) * (n-2) / 2 canonical triples."""
    if n < 3:
        raise InvalidSizeError(f"no triplets exist for n={n}")
    return n * (n - 1) * (n - 2) // 2


def fraction_to_count(n: int, fraction: float) -> int:
    """Triplet budget for a fraction of |T|, floored to match reported counts.

    floor(0.005 * |T|) reproduces the reference budgets (13,862 at n=178;
    47,052 and 23,526 at n=267).
    """
    if not (0 < fraction <= 1):
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    # tiny epsilon so exact products are not floored by float error
    return max(1, int(fraction * triplet_universe_size(n) + 1e-9))


def triplet_budget(n: int, K: float) -> int:
    """round(K * n * ln n), clamped to [1, |T|]."""
    if K <= 0:
        raise ValueError(f"K must be positive, got {K}")
    size = triplet_universe_size(n)
    return min(size, max(1, round(K * n * math.log(n))))


def _decode_ranks(ranks: np.ndarray, n: int) -> list[TripletQuery]:
    """Map universe ranks to canonical triples without materializing T.

    Rank layout: blocks of per_i = C(n-1, 2) pairs for each reference i; the
    within-block rank is a colex 2-combination index over [0..n-1] \\ {i}.
    """
    per_i = (n - 1) * (n - 2) // 2
    ranks = np.asarray(ranks, dtype=np.int64)
    i0 = ranks // per_i
    pr = ranks % per_i
    # colex unrank: b = largest b with C(b,2) <= pr, then a = pr - C(b,2)
    b = (np.sqrt(8.0 * pr + 1.0).astype(np.int64) + 1) // 2
    # float sqrt can be off by one at 2^50+ scales; fix up exactly
    b = np.where(b * (b - 1) // 2 > pr, b - 1, b)
    b = np.where((b + 1) * b // 2 <= pr, b + 1, b)
    a = pr - b * (b - 1) // 2
    # pool position -> time index, skipping the reference
    j0 = np.where(a < i0, a, a + 1)
    k0 = np.where(b < i0, b, b + 1)
    return [
        TripletQuery(int(i) + 1, int(j) + 1, int(k) + 1) for i, j, k in zip(i0, j0, k0)
    ]


def sample_triplets(n: int, m_target: int, seed: int) -> list[TripletQuery]:
    """Draw m_target distinct canonical triples uniformly without replacement."""
    size = triplet_universe_size(n)
    if m_target < 1:
        raise ValueError(f"m_target must be >= 1, got {m_target}")
    if m_target > size:
        raise BudgetExceedsUniverseError(
            f"m_target={m_target} exceeds universe size {size} for n={n}"
        )
    ranks = random.Random(seed).sample(range(size), m_target)
    return _decode_ranks(np.asarray(ranks, dtype=np.int64), n)


def simulate_label(
    model: AnnotatorModel,
    signal: Signal,
    query: TripletQuery,
    rng: np.random.Generator,
) -> LabeledTriplet:
    """Draw one label for the query under the annotator's noise model.

    Logistic link: w = -1 w.p. expit(sigma * (d_ik - d_ij)). Constant link:
    the true answer is kept w.p. clamp(mu + eps, 0, 1). Exact ties are
    answered uniformly at random.
    """
    d_ij = signal.dissimilarity(query.i, query.j)
    d_ik = signal.dissimilarity(query.i, query.k)
    link = model.link
    if isinstance(link, LogisticLink):
        p_neg = float(expit(link.sigma * (d_ik - d_ij)))
        w = -1 if rng.random() < p_neg else 1
    else:
        if d_ij == d_ik:
            w = -1 if rng.random() < 0.5 else 1
        else:
            correct = -1 if d_ij < d_ik else 1
            eps = rng.normal(0.0, link.eps_sd) if link.eps_sd > 0 else 0.0
            p_correct = min(max(link.mu + eps, 0.0), 1.0)
            w = correct if rng.random() < p_correct else -correct
    return LabeledTriplet(query=query, w=w, annotator_id=model.id, source="simulated")


def simulate_labels(
    model: AnnotatorModel,
    signal: Signal,
    queries: Sequence[TripletQuery],
    rng: np.random.Generator,
) -> LabeledTripletSet:
    labels = [simulate_label(model, signal, q, rng) for q in queries]
    return LabeledTripletSet(labels, n=signal.n)


def partition_to_annotators(
    queries: Sequence[TripletQuery], annotator_ids: Sequence[str]
) -> dict[str, list[TripletQuery]]:
    """Deal queries round-robin so the per-annotator sets are disjoint."""
    if not annotator_ids:
        raise ValueError("at least one annotator id is required")
    unique = set()
    for q in queries:
        key = q.as_tuple()
        if key in unique:
            raise DuplicateQueryError(f"duplicate query {key} in partition input")
        unique.add(key)
    parts: dict[str, list[TripletQuery]] = {a: [] for a in annotator_ids}
    ids = list(annotator_ids)
    for pos, q in enumerate(queries):
        parts[ids[pos % len(ids)]].append(q)
    return parts


def fuse(sets: Sequence[LabeledTripletSet]) -> LabeledTripletSet:
    """Union of disjoint labeled sets; this is the whole fusion step."""
    if not sets:
        raise EmptyInputError("fuse() needs at least one labeled set")
    n = sets[0].n
    for s in sets[1:]:
        if s.n != n:
            raise ValueError(f"labeled sets refer to different n: {s.n} != {n}")
    owner: dict[tuple[int, int, int], str] = {}
    merged: list[LabeledTriplet] = []
    for s in sets:
        for lab in s:
            key = lab.query.as_tuple()
            if key in owner:
                raise FusionConflictError(
                    f"triplet {key} labeled by both {owner[key]!r} and "
                    f"{lab.annotator_id!r}",
                    query=lab.query,
                    annotators=(owner[key], lab.annotator_id),
                )
            owner[key] = lab.annotator_id
            merged.append(lab)
    return LabeledTripletSet(merged, n=n)


# --- JSON Lines interchange -------------------------------------------------
#
# One object per line: {"i":int,"j":int,"k":int,"w":-1|1,"annotator":"id",
# "source":"simulated|human"}. This format links simulation output, service
# export, and the solver input.


def write_jsonl(labels: LabeledTripletSet, path) -> None:
    with open(path, "w") as fh:
        for line in iter_jsonl_lines(labels):
            fh.write(line + "\n")


def iter_jsonl_lines(labels: LabeledTripletSet) -> Iterator[str]:
    for lab in labels:
        yield json.dumps(
            {
                "i": lab.query.i,
                "j": lab.query.j,
                "k": lab.query.k,
                "w": lab.w,
                "annotator": lab.annotator_id,
                "source": lab.source,
            },
            separators=(",", ":"),
        )


def read_jsonl_labels(path) -> list[LabeledTriplet]:
    """Parse the interchange format into rows, normalizing mirrored (j > k) ones.

    Uniqueness is not enforced here; build a :class:`LabeledTripletSet` (or
    per-annotator sets plus :func:`fuse`) to get the disjointness checks.
    """
    labels: list[LabeledTriplet] = []
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                query, w = canonical_labeled(
                    int(obj["i"]), int(obj["j"]), int(obj["k"]), int(obj["w"])
                )
                source = str(obj.get("source", "human"))
                annotator = str(obj["annotator"])
            except (KeyError, ValueError, TypeError) as exc:
                raise ValueError(f"{path}: bad triplet line {line_no}: {exc}") from exc
            labels.append(LabeledTriplet(query, w, annotator, source))
    return labels


def _infer_n(labels: Sequence[LabeledTriplet], n: int | None) -> int:
    if n is not None:
        return n
    max_idx = max((max(lab.query.i, lab.query.k) for lab in labels), default=3)
    return max(max_idx, 3)


def read_jsonl(path, n: int | None = None) -> LabeledTripletSet:
    """Parse the interchange format into one set.

    If n is not given it is inferred as the largest index seen.
    """
    labels = read_jsonl_labels(path)
    return LabeledTripletSet(labels, n=_infer_n(labels, n))


def read_jsonl_by_annotator(path, n: int | None = None) -> dict[str, LabeledTripletSet]:
    """Parse the interchange format into per-annotator sets (fusion input)."""
    labels = read_jsonl_labels(path)
    n = _infer_n(labels, n)
    grouped: dict[str, list[LabeledTriplet]] = {}
    for lab in labels:
        grouped.setdefault(lab.annotator_id, []).append(lab)
    return {a: LabeledTripletSet(rows, n=n) for a, rows in grouped.items()}
