"""
Draw-count laws for the sampling stage of the shuffling-sampling channel.

Each input sequence is drawn ``N_i ~ Q`` times independently. A law is one
of the frozen dataclasses below; every law exposes its mass at zero, pmf,
probability generating function, first two moments and an exact sampler.
"""

import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple, Union

import numpy as np
from scipy import stats
from scipy.special import gammaln, xlogy

from .errors import DomainError, SpecParseError, UndefinedConditionalError
from .seqcore import RngLike, as_generator

logger = logging.getLogger(__name__)

# Relative tail mass at which probability series are truncated
PMF_TAIL = 1e-12
MAX_SERIES_TERMS = 1_000_000
EMPIRICAL_SUM_TOL = 1e-12


def _check_probability(name: str, value: float) -> None:
    if not (0.0 <= value <= 1.0) or math.isnan(value):
        raise DomainError(f"{name} must lie in [0, 1], got {value}")


def _poisson_pmf(n: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Poisson pmf that also accepts mean 0 (all mass at n = 0)."""
    return np.exp(xlogy(n, mu) - mu - gammaln(np.asarray(n, dtype=float) + 1.0))


class SamplingSpec(ABC):
    """Base class of the draw-count law Q = (q_0, q_1, ...)."""

    @abstractmethod
    def q0(self) -> float:
        """Exact probability that a sequence is never drawn."""

    @abstractmethod
    def pmf(self, n: int) -> float:
        """Exact q_n."""

    @abstractmethod
    def pgf(self, z: float) -> float:
        """E[z^N]."""

    @abstractmethod
    def moments(self) -> Tuple[float, float]:
        """(E[N], E[N^2])."""

    @abstractmethod
    def draw(self, gen: np.random.Generator, M: int) -> np.ndarray:
        """M independent draw counts as int64."""

    @abstractmethod
    def support_bound(self, tail: float) -> int:
        """Smallest n_max with P(N > n_max) < tail (or the finite support end)."""

    def pmf_vector(self, tail: float = PMF_TAIL) -> np.ndarray:
        """(q_0, ..., q_{n_max}) with the remaining tail mass below ``tail``."""
        n_max = self.support_bound(tail)
        if n_max + 1 > MAX_SERIES_TERMS:
            logger.warning(
                f"Series for {self} needs {n_max + 1} terms; truncating at {MAX_SERIES_TERMS}"
            )
            n_max = MAX_SERIES_TERMS - 1
        return np.array([self.pmf(n) for n in range(n_max + 1)], dtype=float)


@dataclass(frozen=True)
class SingleDraw(SamplingSpec):
    """Each sequence is seen once with probability 1-q, otherwise not at all."""

    q: float

    def __post_init__(self):
        _check_probability("q", self.q)

    def q0(self) -> float:
        return self.q

    def pmf(self, n: int) -> float:
        return {0: self.q, 1: 1.0 - self.q}.get(n, 0.0)

    def pgf(self, z: float) -> float:
        return self.q + (1.0 - self.q) * z

    def moments(self) -> Tuple[float, float]:
        return 1.0 - self.q, 1.0 - self.q

    def draw(self, gen: np.random.Generator, M: int) -> np.ndarray:
        return (gen.random(M) >= self.q).astype(np.int64)

    def support_bound(self, tail: float) -> int:
        return 1


@dataclass(frozen=True)
class Poisson(SamplingSpec):
    """Poisson(lam) draws; lam is the coverage depth."""

    lam: float

    def __post_init__(self):
        if not self.lam > 0 or math.isinf(self.lam):
            raise DomainError(f"Poisson coverage must be a positive finite number, got {self.lam}")

    def q0(self) -> float:
        return math.exp(-self.lam)

    def pmf(self, n: int) -> float:
        return float(stats.poisson.pmf(n, self.lam))

    def pgf(self, z: float) -> float:
        return math.exp(-self.lam * (1.0 - z))

    def moments(self) -> Tuple[float, float]:
        return self.lam, self.lam + self.lam**2

    def draw(self, gen: np.random.Generator, M: int) -> np.ndarray:
        return gen.poisson(self.lam, size=M).astype(np.int64)

    def support_bound(self, tail: float) -> int:
        return int(stats.poisson.isf(tail, self.lam)) + 1

    def pmf_vector(self, tail: float = PMF_TAIL) -> np.ndarray:
        return stats.poisson.pmf(np.arange(self.support_bound(tail) + 1), self.lam)


@dataclass(frozen=True)
class Fixed(SamplingSpec):
    """Every sequence is drawn exactly n times."""

    n: int

    def __post_init__(self):
        if self.n < 0:
            raise DomainError(f"draws per sequence must be >= 0, got {self.n}")

    def q0(self) -> float:
        return 1.0 if self.n == 0 else 0.0

    def pmf(self, n: int) -> float:
        return 1.0 if n == self.n else 0.0

    def pgf(self, z: float) -> float:
        return 1.0 if self.n == 0 else z**self.n

    def moments(self) -> Tuple[float, float]:
        return float(self.n), float(self.n**2)

    def draw(self, gen: np.random.Generator, M: int) -> np.ndarray:
        return np.full(M, self.n, dtype=np.int64)

    def support_bound(self, tail: float) -> int:
        return self.n


@dataclass(frozen=True)
class NegBinomial(SamplingSpec):
    """
    Negative binomial draws, q_n = C(n+r-1, n) (1-s)^r s^n.

    ``r`` is the number of failures and ``s`` the success probability, so the
    mean is r*s/(1-s).
    """

    r: float
    s: float

    def __post_init__(self):
        if not self.r > 0:
            raise DomainError(f"r must be positive, got {self.r}")
        if not 0.0 < self.s < 1.0:
            raise DomainError(f"s must lie in (0, 1), got {self.s}")

    def q0(self) -> float:
        return (1.0 - self.s) ** self.r

    def pmf(self, n: int) -> float:
        return float(stats.nbinom.pmf(n, self.r, 1.0 - self.s))

    def pgf(self, z: float) -> float:
        return ((1.0 - self.s) / (1.0 - self.s * z)) ** self.r

    def moments(self) -> Tuple[float, float]:
        mean = self.r * self.s / (1.0 - self.s)
        var = self.r * self.s / (1.0 - self.s) ** 2
        return mean, var + mean**2

    def draw(self, gen: np.random.Generator, M: int) -> np.ndarray:
        return gen.negative_binomial(self.r, 1.0 - self.s, size=M).astype(np.int64)

    def support_bound(self, tail: float) -> int:
        return int(stats.nbinom.isf(tail, self.r, 1.0 - self.s)) + 1

    def pmf_vector(self, tail: float = PMF_TAIL) -> np.ndarray:
        return stats.nbinom.pmf(np.arange(self.support_bound(tail) + 1), self.r, 1.0 - self.s)


@dataclass(frozen=True)
class Empirical(SamplingSpec):
    """Finite law given by its weights; weights[n] = q_n."""

    weights: Tuple[float, ...]

    def __post_init__(self):
        w = tuple(float(x) for x in self.weights)
        object.__setattr__(self, "weights", w)
        if not w:
            raise DomainError("empirical law needs at least one weight")
        arr = np.asarray(w)
        if not np.all(np.isfinite(arr)) or np.any(arr < 0):
            raise DomainError("empirical weights must be finite and non-negative")
        if abs(arr.sum() - 1.0) > EMPIRICAL_SUM_TOL:
            raise DomainError(f"empirical weights sum to {arr.sum():.15g}, not 1")

    def q0(self) -> float:
        return self.weights[0]

    def pmf(self, n: int) -> float:
        return self.weights[n] if 0 <= n < len(self.weights) else 0.0

    def pgf(self, z: float) -> float:
        # Horner, highest degree first
        return float(np.polyval(self.weights[::-1], z))

    def moments(self) -> Tuple[float, float]:
        w = np.asarray(self.weights)
        n = np.arange(len(w))
        return float(np.dot(n, w)), float(np.dot(n * n, w))

    def draw(self, gen: np.random.Generator, M: int) -> np.ndarray:
        w = np.asarray(self.weights)
        return gen.choice(len(w), size=M, p=w / w.sum()).astype(np.int64)

    def support_bound(self, tail: float) -> int:
        return len(self.weights) - 1

    def pmf_vector(self, tail: float = PMF_TAIL) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)


@dataclass(frozen=True)
class PoissonPCR(SamplingSpec):
    """
    PCR amplification followed by Poisson sequencing.

    Each molecule is amplified into A ~ Poisson(alpha) copies and the pool is
    then sequenced at coverage lam, so N | A ~ Poisson(lam * A / alpha).
    """

    alpha: float
    lam: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise DomainError(f"alpha must be positive, got {self.alpha}")
        if not self.lam > 0:
            raise DomainError(f"lam must be positive, got {self.lam}")

    def q0(self) -> float:
        return math.exp(-self.alpha * (-math.expm1(-self.lam / self.alpha)))

    def _amplification_support(self, tail: float) -> np.ndarray:
        a_max = int(stats.poisson.isf(tail / 2, self.alpha)) + 1
        return np.arange(a_max + 1)

    def pmf(self, n: int) -> float:
        a = self._amplification_support(PMF_TAIL)
        w = stats.poisson.pmf(a, self.alpha)
        return float(np.dot(w, _poisson_pmf(n, self.lam * a / self.alpha)))

    def pgf(self, z: float) -> float:
        return math.exp(self.alpha * math.expm1(-self.lam * (1.0 - z) / self.alpha))

    def moments(self) -> Tuple[float, float]:
        lam = self.lam
        return lam, lam + lam**2 / self.alpha + lam**2

    def draw(self, gen: np.random.Generator, M: int) -> np.ndarray:
        copies = gen.poisson(self.alpha, size=M)
        return gen.poisson(self.lam * copies / self.alpha).astype(np.int64)

    def support_bound(self, tail: float) -> int:
        # P(N > n) <= P(A > a_max) + P(Poisson(lam * a_max / alpha) > n)
        a_max = int(self._amplification_support(tail)[-1])
        return int(stats.poisson.isf(tail / 2, self.lam * a_max / self.alpha)) + 1

    def pmf_vector(self, tail: float = PMF_TAIL) -> np.ndarray:
        a = self._amplification_support(tail)
        w = stats.poisson.pmf(a, self.alpha)
        n = np.arange(self.support_bound(tail) + 1)
        table = _poisson_pmf(n[:, None], (self.lam * a / self.alpha)[None, :])
        return table @ w


@dataclass(frozen=True, eq=False)
class DrawCounts:
    """Per-sequence draw counts N_1..N_M."""

    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __len__(self) -> int:
        return len(self.counts)


def q0(spec: SamplingSpec) -> float:
    """Probability that an input sequence is never drawn."""
    return spec.q0()


def moments(spec: SamplingSpec) -> Tuple[float, float]:
    """Exact (mean, second moment) of the draw count."""
    return spec.moments()


def pmf(spec: SamplingSpec, n: int) -> float:
    return spec.pmf(n)


def pmf_vector(spec: SamplingSpec, tail: float = PMF_TAIL) -> np.ndarray:
    return spec.pmf_vector(tail)


def pgf(spec: SamplingSpec, z: float) -> float:
    return spec.pgf(z)


def sample_counts(M: int, spec: SamplingSpec, rng: RngLike) -> DrawCounts:
    """Draw N_i ~ Q independently for i = 1..M."""
    if M < 1:
        raise DomainError(f"M must be >= 1, got {M}")
    counts = spec.draw(as_generator(rng), M)
    return DrawCounts(counts)


def effective_erasure_series(spec: SamplingSpec, p: float, tail: float = PMF_TAIL) -> float:
    """Sum_{n>=1} q_n p^n / (1 - q_0), truncated where the tail mass drops below ``tail``."""
    _check_probability("p", p)
    qs = spec.pmf_vector(tail)
    missing = spec.q0()
    if missing >= 1.0:
        raise UndefinedConditionalError("p_eff is undefined when q0 = 1")
    n = np.arange(len(qs))
    return float(np.dot(qs[1:], np.power(p, n[1:]))) / (1.0 - missing)


def effective_erasure(spec: SamplingSpec, p: float) -> float:
    """
    p_eff = E[p^N | N >= 1], the erasure rate left after per-cluster consensus.

    Args:
        spec: Draw-count law
        p: Per-symbol erasure probability

    Returns:
        Effective erasure probability in [0, 1]
    """
    _check_probability("p", p)
    missing = spec.q0()
    if missing >= 1.0:
        raise UndefinedConditionalError("p_eff is undefined when q0 = 1")
    if p == 0.0:
        return 0.0
    if isinstance(spec, Poisson):
        lam = spec.lam
        # (e^{-lam(1-p)} - e^{-lam}) / (1 - e^{-lam})
        return math.exp(-lam) * math.expm1(lam * p) / -math.expm1(-lam)
    value = (spec.pgf(p) - missing) / (1.0 - missing)
    return min(max(value, 0.0), 1.0)


def load_empirical(path: Union[str, Path], normalize: bool = True) -> Empirical:
    """
    Load an empirical law from a single-column text file (line n holds q_n).

    Args:
        path: File to read
        normalize: Rescale the weights to sum to exactly one
    """
    weights = np.loadtxt(path, dtype=float, ndmin=1)
    if normalize:
        total = weights.sum()
        if total <= 0:
            raise DomainError(f"empirical weights in {path} sum to {total}")
        weights = weights / total
    logger.info(f"Loaded empirical draw law with {len(weights)} weights from {path}")
    return Empirical(tuple(weights.tolist()))


def _floats(args: str, count: int, text: str) -> Tuple[float, ...]:
    parts = [a for a in args.split(",") if a.strip()]
    if len(parts) != count:
        raise SpecParseError(f"expected {count} parameter(s) in {text!r}")
    try:
        return tuple(float(a) for a in parts)
    except ValueError as e:
        raise SpecParseError(f"non-numeric parameter in {text!r}") from e


def parse_sampling(text: str) -> SamplingSpec:
    """
    Parse a compact sampling spec.

    Accepted forms: ``single:q``, ``poisson:lam``, ``fixed:n``, ``negbin:r,s``,
    ``pcr:alpha,lam``, ``empirical:w0,w1,...`` and ``empirical:@path``.
    """
    kind, _, args = text.strip().partition(":")
    kind = kind.lower()
    if not args:
        raise SpecParseError(f"sampling spec {text!r} has no parameters")
    if kind == "single":
        return SingleDraw(*_floats(args, 1, text))
    if kind == "poisson":
        return Poisson(*_floats(args, 1, text))
    if kind == "fixed":
        (n,) = _floats(args, 1, text)
        if n != int(n):
            raise SpecParseError(f"fixed draw count must be an integer in {text!r}")
        return Fixed(int(n))
    if kind == "negbin":
        return NegBinomial(*_floats(args, 2, text))
    if kind == "pcr":
        return PoissonPCR(*_floats(args, 2, text))
    if kind == "empirical":
        if args.startswith("@"):
            return load_empirical(args[1:])
        try:
            weights = tuple(float(a) for a in args.split(","))
        except ValueError as e:
            raise SpecParseError(f"non-numeric weight in {text!r}") from e
        return Empirical(weights)
    raise SpecParseError(f"unknown sampling law {kind!r}")
