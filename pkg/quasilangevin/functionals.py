"""
Discretized weight functionals and the Airy function they rest on.

Three path-space weights appear in the lab:

* the delta functional, never evaluated as a number; it is realized by the
  deterministic integration steps in ``brownian`` and ``semiclassical``,
* the Airy functional, a product of per-slice factors Ai(eps^(2/3) f_k),
* the Gaussian functional exp{-(eps/2D) sum R_k^2} of white noise.

``Ai`` always means the standard Airy function (unit integral over the real
line). Constant prefactors such as 2*pi and eps^(-1/3) are dropped because
every estimator built on these weights is a ratio.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Optional, Tuple, Union

import numpy as np
from scipy import integrate, special

from .core import RngStream
from .utils import UsageError, require_int, require_positive

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

AIRY_FIRST_ZERO = -2.338107410459767
DEFAULT_TRUNCATION = 20.0
DEFAULT_UPPER = 10.0
TABLE_SPACING = 1e-3


def airy_ai(x: ArrayLike) -> ArrayLike:
    """Standard Airy function Ai(x), scalar or elementwise."""
    value = special.airy(np.asarray(x, dtype=float))[0]
    return float(value) if np.ndim(value) == 0 else value


def airy_ai_prime(x: ArrayLike) -> ArrayLike:
    """Derivative Ai'(x), scalar or elementwise."""
    value = special.airy(np.asarray(x, dtype=float))[1]
    return float(value) if np.ndim(value) == 0 else value


@dataclass(frozen=True)
class SliceWeight:
    """
    One per-slice weight factor split into magnitude and sign.

    Products of many factors are formed in the log domain with
    :func:`accumulate_weights` so that long paths do not underflow.
    """

    magnitude: float
    sign: int

    def __post_init__(self) -> None:
        if not (np.isfinite(self.magnitude) and self.magnitude >= 0):
            raise UsageError(f"Slice weight magnitude must be finite and >= 0, got {self.magnitude}")
        if self.sign not in (1, -1):
            raise UsageError(f"Slice weight sign must be +1 or -1, got {self.sign}")

    @classmethod
    def from_value(cls, value: float) -> "SliceWeight":
        return cls(abs(float(value)), 1 if value >= 0 else -1)

    @property
    def log_magnitude(self) -> float:
        return math.log(self.magnitude) if self.magnitude > 0 else -math.inf

    @property
    def value(self) -> float:
        return self.sign * self.magnitude


def accumulate_weights(weights: Iterable[SliceWeight]) -> Tuple[float, int]:
    """
    Multiply slice weights in the log domain.

    The quasi-Langevin sampler does not call this: drawing from |Ai| / Z_L
    reduces each slice ratio Ai(u) / (|Ai(u)| / Z_L) to sgn Ai(u) * Z_L, which it
    accumulates directly.

    Returns:
        (log_magnitude, sign) of the product
    """
    log_magnitude = 0.0
    sign = 1
    for weight in weights:
        log_magnitude += weight.log_magnitude
        sign *= weight.sign
    return log_magnitude, sign


def airy_slice_weight(f_k: float, eps: float) -> SliceWeight:
    """
    Per-slice factor of the Airy functional.

    The slice integral over the rescaled fluctuation eta,
    int d(eta) exp{i eps [eta f + eta^3 / 3]}, equals
    2 pi eps^(-1/3) Ai(eps^(2/3) f). Only Ai(eps^(2/3) f) is kept. Under the
    |Ai| proposal the importance ratio of this factor is sign * Z_L, so
    ``quasi_langevin_simulate`` never evaluates it per trajectory.

    Args:
        f_k: Slice argument (m x'' + V') / (hbar phi)
        eps: Slice duration

    Returns:
        SliceWeight: |Ai| and its sign

    Raises:
        UsageError: If eps is not positive
    """
    eps = require_positive("eps", eps)
    return SliceWeight.from_value(airy_ai(eps ** (2.0 / 3.0) * float(f_k)))


def airy_slice_reduction(f_k: float, eps: float) -> float:
    """Closed form 2 pi eps^(-1/3) Ai(eps^(2/3) f) of the slice integral."""
    eps = require_positive("eps", eps)
    return 2.0 * math.pi * eps ** (-1.0 / 3.0) * airy_ai(eps ** (2.0 / 3.0) * float(f_k))


def airy_slice_integral(f_k: float, eps: float, cutoff_slope: float = 200.0) -> float:
    """
    Slice integral int d(eta) exp{i eps [eta f + eta^3 / 3]} by direct quadrature.

    The integrand is even in its real part and odd in its imaginary part, so
    the integral is 2 int_0^inf cos(psi) with psi = eps (eta f + eta^3 / 3).
    [0, H] is covered by adaptive quadrature on pieces shorter than half an
    oscillation; the tail beyond H, where psi' = ``cutoff_slope``, is taken
    from two integration-by-parts terms.

    Used to check :func:`airy_slice_reduction`, not in production paths.
    """
    eps = require_positive("eps", eps)
    cutoff_slope = require_positive("cutoff_slope", cutoff_slope)
    f_k = float(f_k)

    def psi(eta: float) -> float:
        return eps * (eta * f_k + eta**3 / 3.0)

    h = math.sqrt(max(cutoff_slope / eps - f_k, 1.0))
    slope_bound = max(eps * abs(f_k), eps * (f_k + h * h), 1e-12)
    n_pieces = max(1, math.ceil(h * slope_bound / math.pi))
    edges = np.linspace(0.0, h, n_pieces + 1)

    body = 0.0
    for lo, hi in zip(edges[:-1], edges[1:]):
        piece, _ = integrate.quad(lambda eta: math.cos(psi(eta)), lo, hi, epsabs=1e-14, epsrel=1e-12)
        body += piece

    d1 = eps * (f_k + h * h)
    d2 = 2.0 * eps * h
    tail = -math.sin(psi(h)) / d1 + math.cos(psi(h)) * d2 / d1**3
    return 2.0 * (body + tail)


def gaussian_path_weight(R: ArrayLike, D: float, eps: float) -> ArrayLike:
    """
    Discretized Gaussian functional exp{-(eps / 2D) sum_k R_k^2}.

    ``R`` may be one path (1-D) or a stack of paths along the last axis.
    """
    return np.exp(gaussian_path_log_weight(R, D, eps))


def gaussian_path_log_weight(R: ArrayLike, D: float, eps: float) -> ArrayLike:
    D = require_positive("D", D)
    eps = require_positive("eps", eps)
    R = np.asarray(R, dtype=float)
    result = -(eps / (2.0 * D)) * np.sum(R * R, axis=-1)
    return float(result) if np.ndim(result) == 0 else result


@dataclass(frozen=True)
class AiryProposal:
    """
    Sampler for u with density |Ai(u)| / Z_L on [-truncation, upper].

    |Ai(u)| decays only like |u|^(-1/4) for u -> -inf, so the untruncated
    density does not exist; ``truncation`` bounds the negative side.
    Sampling inverts the cumulative trapezoid table of |Ai| by linear
    interpolation.
    """

    truncation: float = DEFAULT_TRUNCATION
    upper: float = DEFAULT_UPPER
    spacing: float = TABLE_SPACING
    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    cdf: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        truncation = float(self.truncation)
        if not (np.isfinite(truncation) and truncation > 0):
            raise UsageError(f"Proposal truncation L must be > 0, got {self.truncation}")
        upper = require_positive("upper", self.upper)
        spacing = require_positive("spacing", self.spacing)
        n_nodes = int(math.ceil((truncation + upper) / spacing)) + 1
        nodes = np.linspace(-truncation, upper, n_nodes)
        cdf = integrate.cumulative_trapezoid(np.abs(airy_ai(nodes)), nodes, initial=0.0)
        nodes.flags.writeable = False
        cdf.flags.writeable = False
        object.__setattr__(self, "truncation", truncation)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "cdf", cdf)
        logger.debug("Airy proposal table: L=%g upper=%g nodes=%d Z=%.12g", truncation, upper, n_nodes, cdf[-1])

    @property
    def normalization(self) -> float:
        """Z_L = int |Ai| over the support."""
        return float(self.cdf[-1])

    @property
    def signed_integral(self) -> float:
        """int Ai over the support."""
        return float(integrate.trapezoid(airy_ai(self.nodes), self.nodes))

    @property
    def expected_mean_sign(self) -> float:
        """Mean sign of one draw: int Ai / int |Ai|."""
        return self.signed_integral / self.normalization

    def density(self, u: ArrayLike) -> ArrayLike:
        u = np.asarray(u, dtype=float)
        inside = (u >= -self.truncation) & (u <= self.upper)
        result = np.where(inside, np.abs(airy_ai(u)), 0.0) / self.normalization
        return float(result) if result.ndim == 0 else result

    def signed_moment(self, order: int) -> float:
        """Signed moment int u^n Ai / int Ai over the truncated support."""
        order = require_int("order", order, 0)
        values = self.nodes**order * airy_ai(self.nodes)
        return float(integrate.trapezoid(values, self.nodes)) / self.signed_integral

    def boundary_moment(self, order: int) -> float:
        """
        Unnormalized truncated moment int u^n Ai from boundary terms.

        Exact for n = 1 (Ai'(U) - Ai'(-L)) and n = 2 ([u Ai' - Ai] at the ends).
        """
        lo, hi = -self.truncation, self.upper
        if order == 1:
            return airy_ai_prime(hi) - airy_ai_prime(lo)
        if order == 2:
            return (hi * airy_ai_prime(hi) - airy_ai(hi)) - (lo * airy_ai_prime(lo) - airy_ai(lo))
        raise UsageError(f"Boundary moment is available for orders 1 and 2, got {order}")

    def sample(self, gen: np.random.Generator, size: Optional[int] = None) -> Tuple[ArrayLike, ArrayLike]:
        """
        Draw u from |Ai| / Z_L and its sign sgn Ai(u).

        Returns:
            (u, sign) arrays of shape ``size`` (scalars when size is None);
            sign is int8
        """
        q = gen.random(size) * self.normalization
        u = np.interp(q, self.cdf, self.nodes)
        sign = np.where(np.asarray(airy_ai(u)) >= 0.0, 1, -1).astype(np.int8)
        if size is None:
            return float(u), int(sign)
        return u, sign


@lru_cache(maxsize=16)
def airy_proposal(truncation: float = DEFAULT_TRUNCATION, upper: float = DEFAULT_UPPER) -> AiryProposal:
    """Cached proposal table for (truncation, upper)."""
    return AiryProposal(float(truncation), float(upper))


def airy_proposal_sample(
    rng: Union[RngStream, np.random.Generator],
    truncation: float = DEFAULT_TRUNCATION,
    size: Optional[int] = None,
    upper: float = DEFAULT_UPPER,
    block: int = 0,
) -> Tuple[ArrayLike, ArrayLike]:
    """
    Sample R-proposal values with density |Ai| on [-truncation, upper].

    A stream is reproducible: the same (stream, block) pair always yields the
    same draws, so successive calls need distinct ``block`` values or a
    generator that is carried between calls.

    Args:
        rng: Stream or an existing generator
        truncation: Negative-side support bound L
        size: Number of draws, None for a single draw
        upper: Positive-side support bound
        block: Block of the stream to draw from; ignored for a generator

    Returns:
        (u, sign) with sign = sgn Ai(u)

    Raises:
        UsageError: If truncation <= 0
    """
    if not truncation > 0:
        raise UsageError(f"Proposal truncation L must be > 0, got {truncation}")
    gen = rng.generator(require_int("block", block, 0)) if isinstance(rng, RngStream) else rng
    return airy_proposal(truncation, upper).sample(gen, size)
