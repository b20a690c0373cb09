"""Imaging problem families and their shared building blocks.

Two composite models are provided: weighted least squares plus isotropic
total variation for Poisson denoising, and the generalized Kullback-Leibler
fidelity plus (optionally strongly convexified) total variation for Poisson
deblurring.  Shared pieces: forward-difference image gradient and its
adjoint, reflexive-boundary convolution with symmetric kernels, Gaussian
point-spread functions and the split-gradient metric constructions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.fft import dctn, idctn

from .metrics import (ConstantMetricStrategy, DiagonalMetric,
                      IdentityMetricStrategy, MetricStrategy,
                      SplitGradientStrategy, SqueezeSchedule, BoxSet,
                      split_gradient_metric)
from .prox import (BoxIndicator, BoxPlusQuadratic, IsotropicNormSum,
                   LinearBlockOperator, StructuredNonsmooth)
from .solver import CompositeProblem, SmoothPart

GRAD_NORM_SQ_BOUND = 8.0


# ---------------------------------------------------------------------------
# discrete gradient / divergence
# ---------------------------------------------------------------------------

def grad_op(x: np.ndarray) -> np.ndarray:
    """Forward-difference gradient with zero differences at the far edges."""
    g = np.zeros(x.shape + (2,))
    g[:-1, :, 0] = x[1:, :] - x[:-1, :]
    g[:, :-1, 1] = x[:, 1:] - x[:, :-1]
    return g


def div_adjoint(w: np.ndarray) -> np.ndarray:
    """Exact adjoint of :func:`grad_op` (negative discrete divergence)."""
    out = np.zeros(w.shape[:2])
    out[:-1, :] -= w[:-1, :, 0]
    out[1:, :] += w[:-1, :, 0]
    out[:, :-1] -= w[:, :-1, 1]
    out[:, 1:] += w[:, :-1, 1]
    return out


class GradientOp(LinearBlockOperator):
    def forward(self, x):
        return grad_op(x)

    def adjoint(self, w):
        return div_adjoint(w)


def tv_value(x: np.ndarray, lam: float = 1.0) -> float:
    """Isotropic total variation: lam * sum of gradient magnitudes."""
    g = grad_op(x)
    return lam * float(np.sum(np.sqrt(np.sum(g * g, axis=-1))))


# ---------------------------------------------------------------------------
# reflexive-boundary convolution
# ---------------------------------------------------------------------------

def gaussian_psf(sigma: float, size: int | None = None) -> np.ndarray:
    """Sampled isotropic Gaussian kernel normalized to unit sum.

    ``sigma == 0`` returns the delta kernel.  The default support is
    ``2*ceil(3*sigma)+1`` (truncate-and-renormalize).
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0:
        if size is not None and size != 1:
            raise ValueError("sigma = 0 only admits the 1x1 delta kernel")
        return np.array([[1.0]])
    if size is None:
        size = 2 * math.ceil(3.0 * sigma) + 1
    if size % 2 == 0:
        raise ValueError("kernel size must be odd")
    half = size // 2
    coords = np.arange(-half, half + 1, dtype=float)
    r2 = coords[:, None] ** 2 + coords[None, :] ** 2
    kernel = np.exp(-r2 / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


class ConvolutionOperator(LinearBlockOperator):
    """2-D correlation with a doubly symmetric kernel and reflexive padding.

    Doubly symmetric kernels under reflexive boundary conditions yield a
    self-adjoint operator diagonalized by the cosine transform, so the
    adjoint is the operator itself.  ``method`` picks the spatial or the
    transform evaluation path; both agree to machine precision.
    """

    def __init__(self, psf: np.ndarray, method: str = "auto"):
        psf = np.asarray(psf, dtype=float)
        if psf.ndim != 2 or psf.shape[0] % 2 == 0 or psf.shape[1] % 2 == 0:
            raise ValueError("psf must be 2-D with odd side lengths")
        if np.any(psf < 0):
            raise ValueError("psf entries must be nonnegative")
        if not (np.allclose(psf, psf[::-1, :], atol=1e-14)
                and np.allclose(psf, psf[:, ::-1], atol=1e-14)):
            raise ValueError("psf must be symmetric about both axes")
        if method not in ("auto", "spatial", "dct"):
            raise ValueError("method must be auto, spatial or dct")
        self.psf = psf
        self.method = method
        self._eigs: dict[tuple, np.ndarray] = {}

    @property
    def is_identity(self) -> bool:
        return self.psf.shape == (1, 1)

    def _check_shape(self, x: np.ndarray) -> None:
        if self.psf.shape[0] > x.shape[0] or self.psf.shape[1] > x.shape[1]:
            raise ValueError("kernel larger than image")

    def _apply_spatial(self, x: np.ndarray) -> np.ndarray:
        return ndimage.correlate(x, self.psf, mode="reflect")

    def _eigenvalues(self, shape: tuple) -> np.ndarray:
        eigs = self._eigs.get(shape)
        if eigs is None:
            e1 = np.zeros(shape)
            e1[0, 0] = 1.0
            numer = dctn(self._apply_spatial(e1), type=2, norm="ortho")
            denom = dctn(e1, type=2, norm="ortho")
            eigs = numer / denom
            self._eigs[shape] = eigs
        return eigs

    def _apply_dct(self, x: np.ndarray) -> np.ndarray:
        eigs = self._eigenvalues(x.shape)
        return idctn(eigs * dctn(x, type=2, norm="ortho"), type=2, norm="ortho")

    def apply(self, x: np.ndarray) -> np.ndarray:
        if self.is_identity:
            return np.array(x, copy=True)
        self._check_shape(x)
        if self.method == "spatial":
            return self._apply_spatial(x)
        if self.method == "dct":
            return self._apply_dct(x)
        # auto: transform path pays off once the kernel is sizeable
        if self.psf.size >= 49:
            return self._apply_dct(x)
        return self._apply_spatial(x)

    def apply_adjoint(self, x: np.ndarray) -> np.ndarray:
        return self.apply(x)

    # block-operator interface
    def forward(self, x):
        return self.apply(x)

    def adjoint(self, w):
        return self.apply_adjoint(w)


def convolve(x: np.ndarray, op: ConvolutionOperator) -> np.ndarray:
    return op.apply(x)


def convolve_adjoint(w: np.ndarray, op: ConvolutionOperator) -> np.ndarray:
    return op.apply_adjoint(w)


# ---------------------------------------------------------------------------
# smooth parts
# ---------------------------------------------------------------------------

class _WeightedL2Smooth(SmoothPart):
    """f(x) = 0.5 * sum (x - z + b)^2 / (z + b)."""

    def __init__(self, z: np.ndarray, b: float):
        self.z = z
        self.b = b
        self._denom = z + b

    def value(self, x):
        r = x - self.z + self.b
        return 0.5 * float(np.sum(r * r / self._denom))

    def grad(self, x):
        return (x - self.z + self.b) / self._denom

    def digest_material(self):
        return [b"wl2", self.z.tobytes(), np.float64(self.b).tobytes()]


class _KLSmooth(SmoothPart):
    """Generalized Kullback-Leibler fidelity f(x) = KL(Hx + b; z)."""

    def __init__(self, z: np.ndarray, b: float, op: ConvolutionOperator):
        self.z = z
        self.b = b
        self.op = op
        ones = np.ones_like(z)
        self.h_e = op.apply(ones)
        self.ht_e = op.apply_adjoint(ones)
        if np.any(self.h_e <= 0) or np.any(self.ht_e <= 0):
            raise ValueError("operator must have positive row and column sums")
        self._zpos = z > 0

    def value(self, x):
        w = self.op.apply(x) + self.b
        if np.any(w <= 0):
            raise FloatingPointError("nonpositive blurred intensity; "
                                     "infeasible point")
        z = self.z
        fit = np.sum(w - z)
        log_term = np.sum(z[self._zpos] * np.log(z[self._zpos] / w[self._zpos]))
        return float(fit + log_term)

    def grad(self, x):
        w = self.op.apply(x) + self.b
        return self.ht_e - self.op.apply_adjoint(self.z / w)

    def digest_material(self):
        return [b"kl", self.z.tobytes(), np.float64(self.b).tobytes(),
                self.op.psf.tobytes()]


# ---------------------------------------------------------------------------
# problem families
# ---------------------------------------------------------------------------

@dataclass
class WeightedL2Denoise:
    """Weighted-l2 + TV denoising of a Poisson-noisy image.

    The fidelity weights are the inverse noisy intensities, which makes the
    smooth part strongly convex with known constants.
    """

    z: np.ndarray
    b: float
    lam: float
    use_strong_convexity: bool = True

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        if np.any(self.z < 0):
            raise ValueError("data must be nonnegative")
        if self.b <= 0 or self.lam <= 0:
            raise ValueError("background and regularization weight must be positive")
        self._smooth = _WeightedL2Smooth(self.z, self.b)

    @property
    def sigma_f(self) -> float:
        return 1.0 / (float(self.z.max()) + self.b)

    @property
    def L_f(self) -> float:
        return 1.0 / (float(self.z.min()) + self.b)

    @property
    def mu_f(self) -> float:
        return self.sigma_f if self.use_strong_convexity else 0.0

    @property
    def mu_g(self) -> float:
        return 0.0

    def f_value(self, x: np.ndarray) -> float:
        return self._smooth.value(x)

    def f_grad(self, x: np.ndarray) -> np.ndarray:
        return self._smooth.grad(x)

    def smooth(self) -> SmoothPart:
        return self._smooth

    def to_composite(self) -> CompositeProblem:
        g = StructuredNonsmooth(
            blocks=[(IsotropicNormSum(self.lam), GradientOp())],
            psi=BoxIndicator(0.0, None), mu_g=0.0,
            operator_norm_sq_bound=GRAD_NORM_SQ_BOUND)
        return CompositeProblem(self.smooth(), g, BoxSet(0.0, None))

    def metric_strategy(self, mode: str = "split",
                        schedule: SqueezeSchedule | None = None) -> MetricStrategy:
        if mode == "identity":
            return IdentityMetricStrategy()
        if mode == "constant":
            return ConstantMetricStrategy(DiagonalMetric.from_weights(1.0 / (self.z + self.b)))
        if mode == "split":
            zb = self.z + self.b
            return SplitGradientStrategy(lambda anchor: zb, np.ones_like(self.z),
                                         schedule or SqueezeSchedule(1.0, 2.0))
        raise ValueError(f"unknown metric mode {mode!r}")


@dataclass
class KLTVDeblur:
    """KL + TV deblurring with a quadratic perturbation of weight eps_q.

    The perturbation makes the nonsmooth part eps_q-strongly convex; the
    gradient Lipschitz constant is the usual conservative overestimate
    ``max(z)/b^2 * max(H^T 1) * max(H 1)``.
    """

    z: np.ndarray
    b: float
    H: ConvolutionOperator
    lam: float
    eps_q: float = 0.0

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        if np.any(self.z < 0):
            raise ValueError("data must be nonnegative")
        if self.b <= 0 or self.lam <= 0:
            raise ValueError("background and regularization weight must be positive")
        if self.eps_q < 0:
            raise ValueError("eps_q must be nonnegative")
        self._smooth = _KLSmooth(self.z, self.b, self.H)

    @property
    def L_f(self) -> float:
        return float(self.z.max()) / self.b ** 2 \
            * float(self._smooth.ht_e.max()) * float(self._smooth.h_e.max())

    @property
    def mu_f(self) -> float:
        return 0.0

    @property
    def mu_g(self) -> float:
        return self.eps_q

    def kl_value(self, x: np.ndarray) -> float:
        return self._smooth.value(x)

    def kl_grad(self, x: np.ndarray) -> np.ndarray:
        return self._smooth.grad(x)

    def smooth(self) -> SmoothPart:
        return self._smooth

    def to_composite(self) -> CompositeProblem:
        psi = (BoxPlusQuadratic(self.eps_q, 0.0, None) if self.eps_q > 0
               else BoxIndicator(0.0, None))
        g = StructuredNonsmooth(
            blocks=[(IsotropicNormSum(self.lam), GradientOp())],
            psi=psi, mu_g=self.eps_q,
            operator_norm_sq_bound=GRAD_NORM_SQ_BOUND)
        return CompositeProblem(self._smooth, g, BoxSet(0.0, None))

    def metric_strategy(self, mode: str = "split",
                        schedule: SqueezeSchedule | None = None) -> MetricStrategy:
        if mode == "identity":
            return IdentityMetricStrategy()
        if mode == "split":
            return SplitGradientStrategy(lambda anchor: anchor, self._smooth.ht_e,
                                         schedule or SqueezeSchedule(1.0, 2.0))
        raise ValueError(f"unknown metric mode {mode!r}")


def build_wl2_metric(z: np.ndarray, b: float, gamma: float) -> DiagonalMetric:
    """Inverse clamped-intensity metric for the weighted-l2 model."""
    return split_gradient_metric(z + b, np.ones_like(z), gamma)


def build_kl_metric(y: np.ndarray, op: ConvolutionOperator, gamma: float) -> DiagonalMetric:
    """Split-gradient metric for the KL model, anchored at the current point."""
    ht_e = op.apply_adjoint(np.ones_like(y))
    return split_gradient_metric(y, ht_e, gamma)
