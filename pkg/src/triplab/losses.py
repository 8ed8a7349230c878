"""Empirical risk and gradients for the four triplet losses.

Every loss is written in terms of the label-oriented squared distances
(d_near^2, d_far^2): "near" is the option the label asserts is closer to the
reference. With margin = ||y_i - y_k||^2 - ||y_i - y_j||^2 the quantity
x = w * margin equals d_near^2 - d_far^2 for either label direction.

  ste(sigma)     l(x) = log(1 + exp(x / (2 sigma^2)))        (convex)
  gnmds-hinge    l(x) = max(0, 1 + x)                        (convex)
  tste(alpha)    -log p, p = Kn / (Kn + Kf),
                 K(d^2) = (1 + d^2/alpha)^(-(alpha+1)/2)     (non-convex)
  ckl(mu)        -log p, p = (mu + d_far^2) /
                            (2 mu + d_near^2 + d_far^2)      (non-convex)

The hot loop lives in a compiled Cython kernel when available, with a
vectorized numpy fallback selected at import time (see ``backend_name``).
Set TRIPLAB_PURE_PYTHON=1 to force the fallback.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from . import _kernels_np
from .errors import EmptyInputError, NumericalOverflowError
from .triplets import LabeledTripletSet

_LOSS_CODES = {"ste": 0, "gnmds-hinge": 1, "tste": 2, "ckl": 3}

if os.environ.get("TRIPLAB_PURE_PYTHON"):
    _kernels = None
else:
    try:
        from . import _kernels  # compiled extension
    except ImportError:
        _kernels = None


def backend_name() -> str:
    """Which kernel implementation this process is using."""
    return "cython" if _kernels is not None else "numpy"


@dataclass(frozen=True)
class LossSpec:
    """A loss family plus its single shape parameter (if any)."""

    kind: str
    sigma: float = 1.0 / math.sqrt(2.0)  # ste only
    alpha: float = 2.0  # tste only
    mu: float = 2.0  # ckl only

    def __post_init__(self):
        if self.kind not in _LOSS_CODES:
            raise ValueError(f"unknown loss kind {self.kind!r}, expected one of {sorted(_LOSS_CODES)}")
        if self.kind == "ste" and self.sigma <= 0:
            raise ValueError(f"ste needs sigma > 0, got {self.sigma}")
        if self.kind == "tste" and self.alpha <= 0:
            raise ValueError(f"tste needs alpha > 0, got {self.alpha}")
        if self.kind == "ckl" and self.mu <= 0:
            raise ValueError(f"ckl needs mu > 0, got {self.mu}")

    @property
    def param(self) -> float:
        if self.kind == "ste":
            return self.sigma
        if self.kind == "tste":
            return self.alpha
        if self.kind == "ckl":
            return self.mu
        return 0.0

    @classmethod
    def ste(cls, sigma: float = 1.0 / math.sqrt(2.0)) -> "LossSpec":
        return cls(kind="ste", sigma=sigma)

    @classmethod
    def tste(cls, alpha: float) -> "LossSpec":
        return cls(kind="tste", alpha=alpha)

    @classmethod
    def gnmds_hinge(cls) -> "LossSpec":
        return cls(kind="gnmds-hinge")

    @classmethod
    def ckl(cls, mu: float) -> "LossSpec":
        return cls(kind="ckl", mu=mu)

    def label(self) -> str:
        """Short display/parse form, e.g. "ste", "tste:10", "ckl:2"."""
        if self.kind == "tste":
            return f"tste:{self.alpha:g}"
        if self.kind == "ckl":
            return f"ckl:{self.mu:g}"
        if self.kind == "ste" and not math.isclose(self.sigma, 1.0 / math.sqrt(2.0)):
            return f"ste:{self.sigma:g}"
        return self.kind

    @classmethod
    def parse(cls, text: str) -> "LossSpec":
        name, _, arg = text.strip().partition(":")
        name = name.lower()
        if name in ("gnmds", "gnmds-hinge"):
            return cls.gnmds_hinge()
        if name == "ste":
            return cls.ste(float(arg)) if arg else cls.ste()
        if name == "tste":
            return cls.tste(float(arg)) if arg else cls.tste(2.0)
        if name == "ckl":
            return cls.ckl(float(arg)) if arg else cls.ckl(2.0)
        raise ValueError(f"cannot parse loss spec {text!r}")


def _as_embedding(Y) -> np.ndarray:
    Y = np.ascontiguousarray(np.atleast_2d(np.asarray(Y, dtype=np.float64)))
    if Y.ndim != 2:
        raise ValueError(f"embedding must be one or two dimensional, got shape {Y.shape}")
    return Y


def _risk_grad_arrays(
    spec: LossSpec,
    Y: np.ndarray,
    I: np.ndarray,
    J: np.ndarray,
    K: np.ndarray,
    W: np.ndarray,
    want_grad: bool = True,
) -> tuple[float, np.ndarray | None]:
    """Backend dispatch on raw index arrays. May return non-finite values."""
    code = _LOSS_CODES[spec.kind]
    if _kernels is not None:
        return _kernels.risk_grad(Y, I, J, K, W, code, float(spec.param), want_grad)
    return _kernels_np.risk_grad(Y, I, J, K, W, code, float(spec.param), want_grad)


def risk_and_gradient(
    spec: LossSpec, Y, labels: LabeledTripletSet
) -> tuple[float, np.ndarray]:
    """Empirical risk (mean per-triplet loss) and its exact gradient in Y.

    Y is m x n (a 1-D array is treated as m=1). Raises
    :class:`NumericalOverflowError` if any intermediate value is non-finite,
    which in descent loops signals a step that was too large.
    """
    if len(labels) == 0:
        raise EmptyInputError("risk_and_gradient needs a non-empty label set")
    Y = _as_embedding(Y)
    if Y.shape[1] != labels.n:
        raise ValueError(f"embedding has {Y.shape[1]} columns but labels expect n={labels.n}")
    I, J, K, W = labels.to_arrays()
    risk, grad = _risk_grad_arrays(spec, Y, I, J, K, W, want_grad=True)
    if not np.isfinite(risk) or not np.all(np.isfinite(grad)):
        raise NumericalOverflowError(
            "non-finite risk or gradient (embedding magnitude too large?)"
        )
    return risk, grad


def risk(spec: LossSpec, Y, labels: LabeledTripletSet) -> float:
    """Risk only (skips gradient accumulation)."""
    if len(labels) == 0:
        raise EmptyInputError("risk needs a non-empty label set")
    Y = _as_embedding(Y)
    I, J, K, W = labels.to_arrays()
    value, _ = _risk_grad_arrays(spec, Y, I, J, K, W, want_grad=False)
    if not np.isfinite(value):
        raise NumericalOverflowError("non-finite risk")
    return value


def label_probabilities(spec: LossSpec, Y, labels: LabeledTripletSet) -> np.ndarray:
    """Per-triplet model probability of the observed label (ste/tste/ckl).

    The hinge loss has no probabilistic reading, so gnmds-hinge is rejected.
    """
    if spec.kind == "gnmds-hinge":
        raise ValueError("gnmds-hinge does not define label probabilities")
    Y = _as_embedding(Y)
    I, J, K, W = labels.to_arrays()
    d_j = np.sum((Y[:, I] - Y[:, J]) ** 2, axis=0)
    d_k = np.sum((Y[:, I] - Y[:, K]) ** 2, axis=0)
    near = np.where(W == -1, d_j, d_k)
    far = np.where(W == -1, d_k, d_j)
    if spec.kind == "ste":
        # softmax of exp(-d^2 / (2 sigma^2)) over the two options
        c = 1.0 / (2.0 * spec.sigma**2)
        from scipy.special import expit

        return expit(c * (far - near))
    if spec.kind == "tste":
        a = spec.alpha
        log_kn = -(a + 1.0) / 2.0 * np.log1p(near / a)
        log_kf = -(a + 1.0) / 2.0 * np.log1p(far / a)
        return np.exp(log_kn - np.logaddexp(log_kn, log_kf))
    mu = spec.mu
    return (mu + far) / (2.0 * mu + near + far)
