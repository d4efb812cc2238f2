"""
Closed-form capacity and achievable-rate evaluators.

Every evaluator is total: outside the parameter range where a capacity
theorem applies it still returns the achievable index-scheme rate, tagged
with a regime flag so sweeps can tell proven values from the rest.
Logarithms are base 2 and rates are bits per stored symbol.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Optional, Tuple, Union

import numpy as np
from scipy import optimize, stats
from scipy.special import comb, entr

from .channel import (
    ConstDeletion,
    DeletionProfile,
    ExpDeletion,
    FixedTear,
    GeometricTear,
    LengthLaw,
    NoDeletion,
    UniformTear,
)
from .errors import DomainError
from .sampling import Poisson, SamplingSpec, effective_erasure

logger = logging.getLogger(__name__)

# Tail mass at which capacity series over the draw count are cut
CAPACITY_TAIL = 1e-9
ROOT_XTOL = 1e-9
LN2 = math.log(2.0)


class Regime(str, Enum):
    """How much a returned rate is backed by theory."""

    PROVEN = "proven"
    ZERO = "zero"
    CONJECTURED = "conjectured"
    OUTSIDE_PROVEN_REGIME = "outside_proven_regime"


@dataclass(frozen=True)
class CapacityResult:
    """A rate with its regime flag and the inequalities that decided the flag."""

    rate: float
    regime: Regime
    condition_report: str = ""
    details: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError(f"rate must be non-negative, got {self.rate}")
        if self.regime is Regime.ZERO and self.rate != 0.0:
            raise ValueError("a zero-regime result must carry rate 0")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "rate": self.rate,
            "regime": self.regime.value,
            "conditions": self.condition_report,
            **self.details,
        }


@dataclass(frozen=True)
class RatePair:
    """Storage rate (bits per synthesized base) and recovery rate (bits per sequenced base)."""

    R_s: float
    R_r: float


# ============== Basic quantities ==============


def _check_unit(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0 or math.isnan(value):
        raise DomainError(f"{name} must lie in [0, 1], got {value}")


def _check_beta(beta: float) -> None:
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")


def binary_entropy(p: float) -> float:
    """H(p) in bits, with 0 log 0 = 0."""
    _check_unit("p", p)
    return float((entr(p) + entr(1.0 - p)) / LN2)


def count_multisets(a: int, b: int) -> int:
    """
    Number of multisets of size b over a symbols, C(a+b-1, b).

    Args:
        a: Number of distinct symbols (>= 1)
        b: Multiset size (>= 0)

    Returns:
        Exact big integer
    """
    if a < 1 or b < 0:
        raise DomainError(f"count_multisets needs a >= 1 and b >= 0, got ({a}, {b})")
    return int(comb(a + b - 1, b, exact=True))


def _log2_count_multisets(a: float, b: int) -> float:
    """log2 C(a+b-1, b) = sum_{i<b} log2(a+i) - log2(b!) without forming the integer."""
    if b == 0:
        return 0.0
    i = np.arange(b, dtype=float)
    return float(np.sum(np.log2(a + i)) - np.sum(np.log2(i + 1.0)))


def shuffling_capacity_exact(M: int, L: int, alphabet_size: int = 2) -> float:
    """
    Exact noise-free rate log2 T[|S|^L, M] / (M L) for M unordered length-L sequences.

    Tends to (log2|S| - 1/beta)+ as M grows with L = beta log2 M.
    """
    if M < 1 or L < 1 or alphabet_size < 2:
        raise DomainError("need M >= 1, L >= 1 and an alphabet of at least 2 symbols")
    return _log2_count_multisets(float(alphabet_size) ** L, M) / (M * L)


def multi_draw_bsc_capacity(p: float, n: int) -> float:
    """
    Capacity of a BSC observed through n independent draws of the same input bit.

    C_n = 1 - sum_k C(n,k) p^k (1-p)^(n-k) log2(1 + ((1-p)/p)^(2k-n))
    """
    _check_unit("p", p)
    if n < 1:
        raise DomainError(f"number of draws must be >= 1, got {n}")
    if p in (0.0, 1.0):
        return 1.0
    if p == 0.5:
        return 0.0
    k = np.arange(n + 1)
    weights = stats.binom.pmf(k, n, p)
    # log2(1 + e^x) through logaddexp to avoid overflow for large n
    x = (2 * k - n) * math.log((1.0 - p) / p)
    loss = np.dot(weights, np.logaddexp(0.0, x)) / LN2
    return float(min(1.0, max(0.0, 1.0 - loss)))


def multi_trace_bec_capacity(p: float, T: int) -> float:
    """Capacity left after combining T erasure traces of one symbol, 1 - p^T."""
    _check_unit("p", p)
    if T < 1:
        raise DomainError(f"number of traces must be >= 1, got {T}")
    return 1.0 - p**T


def _per_draw_capacities(channel_kind: str, p: float, n_max: int) -> np.ndarray:
    """(C_1, ..., C_{n_max}) for the chosen per-read channel."""
    kind = channel_kind.lower()
    if kind == "bsc":
        return np.array([multi_draw_bsc_capacity(p, n) for n in range(1, n_max + 1)])
    if kind == "bec":
        return 1.0 - np.power(p, np.arange(1, n_max + 1, dtype=float))
    if kind in {"none", "identity"}:
        return np.ones(n_max)
    raise DomainError(f"channel kind must be 'bsc', 'bec' or 'none', got {channel_kind!r}")


def conditional_capacity(sampling: SamplingSpec, channel_kind: str, p: float) -> float:
    """E[C_N | N >= 1], the per-cluster capacity averaged over observed draw counts."""
    _check_unit("p", p)
    qs = sampling.pmf_vector(CAPACITY_TAIL)
    observed = qs[1:].sum()
    if sampling.q0() >= 1.0 or observed <= 0.0:
        return 0.0
    caps = _per_draw_capacities(channel_kind, p, len(qs) - 1)
    # normalised by the truncated mass so C_n = 1 for all n gives exactly 1
    return float(np.dot(qs[1:], caps) / observed)


# ============== Single-draw channels ==============


def cap_noise_free(q0: float, beta: float) -> CapacityResult:
    """Capacity (1-q0)(1-1/beta) of the noise-free shuffling-sampling channel."""
    _check_unit("q0", q0)
    _check_beta(beta)
    if beta <= 1.0:
        return CapacityResult(0.0, Regime.ZERO, f"beta = {beta:g} <= 1")
    return CapacityResult((1.0 - q0) * (1.0 - 1.0 / beta), Regime.PROVEN, f"beta = {beta:g} > 1")


def cap_bsc(q: float, p: float, beta: float) -> CapacityResult:
    """
    Capacity of the BSC shuffling-sampling channel with single draws.

    Proven when p < 1/4 and 1 - H(2p) - 2/beta > 0; elsewhere the value is the
    index-based achievable rate.
    """
    _check_unit("q", q)
    _check_unit("p", p)
    _check_beta(beta)
    if beta <= 1.0:
        return CapacityResult(0.0, Regime.ZERO, f"beta = {beta:g} <= 1")
    rate = (1.0 - q) * max(0.0, 1.0 - binary_entropy(p) - 1.0 / beta)
    if p < 0.25:
        margin = 1.0 - binary_entropy(2 * p) - 2.0 / beta
        report = f"p = {p:g} < 1/4; 1 - H(2p) - 2/beta = {margin:.6f}"
        proven = margin > 0
    else:
        report = f"p = {p:g} >= 1/4"
        proven = False
    return CapacityResult(rate, Regime.PROVEN if proven else Regime.OUTSIDE_PROVEN_REGIME, report)


def cap_bec(q: float, p: float, beta: float) -> CapacityResult:
    """Capacity (1-q)(1-p-1/beta)+ of the BEC shuffling-sampling channel, proven when 1-2p-2/beta > 0."""
    _check_unit("q", q)
    _check_unit("p", p)
    _check_beta(beta)
    if beta <= 1.0:
        return CapacityResult(0.0, Regime.ZERO, f"beta = {beta:g} <= 1")
    rate = (1.0 - q) * max(0.0, 1.0 - p - 1.0 / beta)
    margin = 1.0 - 2 * p - 2.0 / beta
    regime = Regime.PROVEN if margin > 0 else Regime.OUTSIDE_PROVEN_REGIME
    return CapacityResult(rate, regime, f"1 - 2p - 2/beta = {margin:.6f}")


# ============== Multi-draw channels ==============


def _single_draw_support(sampling: SamplingSpec) -> bool:
    return len(sampling.pmf_vector(CAPACITY_TAIL)) <= 2


def unified_rate(sampling: SamplingSpec, channel_kind: str, p: float, beta: float) -> CapacityResult:
    """
    (1-q0)(E[C_N | N >= 1] - 1/beta)+ for any draw law and per-read channel.

    Proven where a capacity theorem covers the parameters (noise-free, multi-draw
    BEC, single-draw BSC, Poisson multi-draw BSC), conjectured elsewhere.
    """
    _check_unit("p", p)
    _check_beta(beta)
    kind = channel_kind.lower()
    missing = sampling.q0()
    if beta <= 1.0:
        return CapacityResult(0.0, Regime.ZERO, f"beta = {beta:g} <= 1")
    expected = conditional_capacity(sampling, kind, p)
    rate = (1.0 - missing) * max(0.0, expected - 1.0 / beta)
    details = {"q0": missing, "conditional_capacity": expected}

    if kind in {"none", "identity"} or p == 0.0:
        return CapacityResult(rate, Regime.PROVEN, f"noise-free, beta = {beta:g} > 1", details)
    if kind == "bec":
        margin = 1.0 - 2 * p - 2.0 / beta
        regime = Regime.PROVEN if margin > 0 else Regime.OUTSIDE_PROVEN_REGIME
        return CapacityResult(rate, regime, f"1 - 2p - 2/beta = {margin:.6f}", details)

    if _single_draw_support(sampling):
        single = cap_bsc(missing, p, beta)
        return CapacityResult(rate, single.regime, single.condition_report, details)
    if isinstance(sampling, Poisson):
        if p < 0.125:
            margin = 1.0 - binary_entropy(4 * p) - 2.0 / beta
            report = f"p = {p:g} < 1/8; 1 - H(4p) - 2/beta = {margin:.6f}"
            regime = Regime.PROVEN if margin > 0 else Regime.OUTSIDE_PROVEN_REGIME
        else:
            report = f"p = {p:g} >= 1/8"
            regime = Regime.OUTSIDE_PROVEN_REGIME
        return CapacityResult(rate, regime, report, details)
    return CapacityResult(rate, Regime.CONJECTURED, "multi-draw BSC under a non-Poisson law", details)


def cap_multi_bec(sampling: SamplingSpec, p: float, beta: float) -> CapacityResult:
    """
    Capacity (1-q0)(1-p_eff-1/beta)+ of the BEC channel with multiple draws.

    For Poisson sampling this equals 1 - e^{-lam(1-p)} - (1-e^{-lam})/beta.
    """
    _check_unit("p", p)
    _check_beta(beta)
    missing = sampling.q0()
    margin = 1.0 - 2 * p - 2.0 / beta
    report = f"1 - 2p - 2/beta = {margin:.6f}"
    if beta <= 1.0:
        return CapacityResult(0.0, Regime.ZERO, f"beta = {beta:g} <= 1")
    regime = Regime.PROVEN if margin > 0 else Regime.OUTSIDE_PROVEN_REGIME
    if missing >= 1.0:
        return CapacityResult(0.0, regime, report + "; q0 = 1", {"q0": 1.0})
    p_eff = effective_erasure(sampling, p)
    rate = (1.0 - missing) * max(0.0, 1.0 - p_eff - 1.0 / beta)
    return CapacityResult(rate, regime, report, {"q0": missing, "p_eff": p_eff})


def cap_multi_bsc(sampling: SamplingSpec, p: float, beta: float) -> CapacityResult:
    """
    Capacity sum_{n>=1} q_n C_{p,n} - (1-q0)/beta of the BSC channel with multiple draws.

    Proven for Poisson sampling when p < 1/8 and 1 - H(4p) - 2/beta > 0.
    """
    return unified_rate(sampling, "bsc", p, beta)


def index_rate_multidraw(sampling: SamplingSpec, p: float, beta: float, channel_kind: str) -> float:
    """
    Rate of the plain index scheme on a multi-draw channel.

    The index costs gamma/beta with gamma = E[C_N | N >= 1] / C_1, because the
    index must survive a single read.
    """
    _check_beta(beta)
    kind = channel_kind.lower()
    if kind not in {"bsc", "bec"}:
        raise DomainError(f"channel kind must be 'bsc' or 'bec', got {channel_kind!r}")
    missing = sampling.q0()
    c1 = float(_per_draw_capacities(kind, p, 1)[0])
    if missing >= 1.0 or c1 <= 0.0 or beta <= 1.0:
        return 0.0
    expected = conditional_capacity(sampling, kind, p)
    gamma = expected / c1
    return (1.0 - missing) * max(0.0, expected - gamma / beta)


def general_alphabet_rate(
    q0: float, beta: float, C_noisy: float, alphabet_size: Optional[int] = None
) -> CapacityResult:
    """
    (1-q0)(C_noisy - 1/beta)+ for a noisy channel of capacity C_noisy bits per symbol.

    Without ``alphabet_size`` the alphabet is the smallest power of two whose
    log2 reaches C_noisy. Proven for the noise-free channel (C_noisy = log2|S|),
    conjectured otherwise.
    """
    _check_unit("q0", q0)
    _check_beta(beta)
    if C_noisy < 0:
        raise DomainError(f"C_noisy must be non-negative, got {C_noisy}")
    if alphabet_size is None:
        bits = float(max(1, math.ceil(C_noisy - 1e-12)))
    else:
        bits = math.log2(alphabet_size)
        if C_noisy > bits + 1e-12:
            raise DomainError(f"C_noisy = {C_noisy} exceeds log2|S| = {bits}")
    rate = (1.0 - q0) * max(0.0, C_noisy - 1.0 / beta)
    noiseless = abs(C_noisy - bits) <= 1e-12
    report = f"C_noisy - 1/beta = {C_noisy - 1.0 / beta:.6f}"
    if noiseless:
        if rate == 0.0:
            return CapacityResult(0.0, Regime.ZERO, report)
        return CapacityResult(rate, Regime.PROVEN, report + "; noise-free")
    return CapacityResult(rate, Regime.CONJECTURED, report)


def indel_shuffling_rate(
    beta: float, C_indel: Optional[float] = None, p_del: Optional[float] = None
) -> CapacityResult:
    """
    Conjectured rate (C_indel - 1/beta)+ of the shuffling channel with indels.

    Without an explicit C_indel the deletion-channel lower bound (1 - p_del)/9 is used.
    """
    _check_beta(beta)
    if C_indel is None:
        if p_del is None:
            raise DomainError("give either C_indel or p_del")
        _check_unit("p_del", p_del)
        C_indel = (1.0 - p_del) / 9.0
        source = f"lower bound (1 - p_del)/9 at p_del = {p_del:g}"
    else:
        source = "user supplied"
    rate = max(0.0, C_indel - 1.0 / beta)
    return CapacityResult(rate, Regime.CONJECTURED, f"C_indel = {C_indel:.6f} ({source})")


def short_molecule_rate(beta: float, M: int) -> CapacityResult:
    """
    Conjectured rate (1-beta)/(2 beta) M^(beta-1) for short molecules, beta < 1.

    Details carry the total bits ((1-beta)/(2 beta)) M^beta L with L = beta log2 M.
    """
    if not 0.0 < beta < 1.0:
        raise DomainError(f"short-molecule regime needs beta in (0, 1), got {beta}")
    if M < 2:
        raise DomainError(f"M must be >= 2, got {M}")
    factor = (1.0 - beta) / (2.0 * beta)
    L = beta * math.log2(M)
    return CapacityResult(
        factor * M ** (beta - 1.0),
        Regime.CONJECTURED,
        f"beta = {beta:g} < 1",
        {"total_bits": factor * M**beta * L, "L": L},
    )


def cluster_gamma(p: float, beta: float) -> float:
    """gamma = -beta log2(1 - (1-p)^2/2); clustering by consistency works when gamma > 1."""
    _check_unit("p", p)
    _check_beta(beta)
    return float(-beta * math.log2(1.0 - (1.0 - p) ** 2 / 2.0))


# ============== Torn paper ==============


def torn_coverage_geometric(beta: float) -> float:
    """Fraction covered by pieces of length >= log n under geometric tearing, (1+1/beta)e^{-1/beta}."""
    _check_beta(beta)
    return (1.0 + 1.0 / beta) * math.exp(-1.0 / beta)


def torn_reorder_cost_geometric(beta: float) -> float:
    """Index cost of reordering those pieces, e^{-1/beta}/beta."""
    _check_beta(beta)
    return math.exp(-1.0 / beta) / beta


def cap_torn(
    length_law: Union[str, LengthLaw],
    deletion: Optional[DeletionProfile] = None,
    beta: Optional[float] = None,
    gamma: Optional[float] = None,
) -> CapacityResult:
    """
    Torn-paper channel capacity for the supported tearing and deletion laws.

    Args:
        length_law: ``"geometric"``, ``"uniform"``, ``"fixed"`` or a LengthLaw instance
        deletion: Deletion profile (default: none)
        beta: Normalised mean piece length, for geometric and fixed tearing
        gamma: Length range factor for uniform tearing

    Returns:
        CapacityResult flagged proven
    """
    deletion = deletion or NoDeletion()
    if isinstance(length_law, GeometricTear):
        kind = "geometric"
    elif isinstance(length_law, UniformTear):
        kind, gamma = "uniform", length_law.gamma if gamma is None else gamma
    elif isinstance(length_law, FixedTear):
        kind = "fixed"
    else:
        kind = str(length_law).lower()

    if kind == "uniform":
        if gamma is None or gamma < 1:
            raise DomainError(f"uniform tearing needs gamma >= 1, got {gamma}")
        if not isinstance(deletion, NoDeletion):
            raise DomainError("uniform tearing is only supported without deletions")
        return CapacityResult(((gamma - 1.0) / gamma) ** 2, Regime.PROVEN, f"gamma = {gamma:g} >= 1")

    if beta is None:
        raise DomainError(f"{kind} tearing needs beta")
    _check_beta(beta)
    if kind == "fixed":
        if not isinstance(deletion, NoDeletion):
            raise DomainError("fixed-length tearing is only supported without deletions")
        return cap_noise_free(0.0, beta)
    if kind != "geometric":
        raise DomainError(f"unknown tearing law {length_law!r}")

    base = math.exp(-1.0 / beta)
    if isinstance(deletion, NoDeletion):
        rate = base
    elif isinstance(deletion, ConstDeletion):
        rate = (1.0 - deletion.eps) * base
    elif isinstance(deletion, ExpDeletion):
        g = deletion.gamma_d
        rate = base * (1.0 - beta**-2 * math.exp(-g) / (1.0 / beta + g) ** 2)
    else:
        raise DomainError(f"unsupported deletion profile {deletion!r}")
    return CapacityResult(max(0.0, rate), Regime.PROVEN, f"geometric tearing, beta = {beta:g}")


# ============== Storage/recovery tradeoff ==============


def tradeoff_region(lam: float, beta: float) -> RatePair:
    """Corner of the achievable (R_s, R_r) region at Poisson coverage lam."""
    if not lam > 0:
        raise DomainError(f"coverage must be positive, got {lam}")
    _check_beta(beta)
    storage = -math.expm1(-lam) * max(0.0, 1.0 - 1.0 / beta)
    return RatePair(storage, storage / lam)


def storage_cost(q_cost_ratio: float, lam: float, beta: float) -> float:
    """Cost per stored bit (q + lam) / ((1 - e^{-lam})(1 - 1/beta)), q = synthesis/sequencing cost ratio."""
    if q_cost_ratio < 0:
        raise DomainError("cost ratio must be non-negative")
    if not beta > 1:
        raise DomainError(f"storage cost needs beta > 1, got {beta}")
    if lam <= 0:
        return math.inf
    return (q_cost_ratio + lam) / (-math.expm1(-lam) * (1.0 - 1.0 / beta))


def optimal_coverage(q_cost_ratio: float, beta: float) -> Tuple[float, float]:
    """
    Coverage minimising the cost per bit.

    Solves the stationarity condition e^lam = 1 + q + lam by bisection.

    Returns:
        (lam*, cost at lam*)
    """
    if q_cost_ratio < 0:
        raise DomainError("cost ratio must be non-negative")
    if not beta > 1:
        raise DomainError(f"optimal coverage needs beta > 1, got {beta}")
    if q_cost_ratio == 0:
        # cost -> 1/(1 - 1/beta) as lam -> 0
        return 0.0, 1.0 / (1.0 - 1.0 / beta)

    def stationarity(lam: float) -> float:
        return math.expm1(lam) - q_cost_ratio - lam

    hi = 1.0
    while stationarity(hi) <= 0:
        hi *= 2.0
    lam_star = optimize.bisect(stationarity, 0.0, hi, xtol=ROOT_XTOL)
    return lam_star, storage_cost(q_cost_ratio, lam_star, beta)


# ============== Regime boundaries ==============


def _boundary_beta(margin: Callable[[float], float], lo: float = 1.0, hi: float = 2.0) -> float:
    """Smallest beta at which an increasing ``margin(beta)`` turns positive."""
    if margin(lo) > 0:
        return lo
    while margin(hi) <= 0:
        hi *= 2.0
        if hi > 1e12:
            return math.inf
    return float(optimize.bisect(margin, lo, hi, xtol=ROOT_XTOL))


def regime_boundaries(p: float) -> Dict[str, float]:
    """
    Beta thresholds at noise level p, found by bisection on the regime conditions.

    Keys:
        bsc_proven: 1 - H(2p) - 2/beta = 0 (single-draw BSC theorem holds above)
        bsc_positive: 1 - H(p) - 1/beta = 0 (index-based rate turns positive)
        bec_multi_proven: 1 - 2p - 2/beta = 0 (multi-draw BEC theorem holds above)
        cluster_gamma_one: cluster_gamma(p, beta) = 1 (consistency clustering succeeds above)
    """
    _check_unit("p", p)
    h_p = binary_entropy(p)
    rows = {
        "bsc_positive": _boundary_beta(lambda b: 1.0 - h_p - 1.0 / b) if h_p < 1 else math.inf,
        "bec_multi_proven": _boundary_beta(lambda b: 1.0 - 2 * p - 2.0 / b) if p < 0.5 else math.inf,
        "cluster_gamma_one": (
            _boundary_beta(lambda b: cluster_gamma(p, b) - 1.0, lo=1e-9) if p < 1 else math.inf
        ),
    }
    if p < 0.25:
        h_2p = binary_entropy(2 * p)
        rows["bsc_proven"] = _boundary_beta(lambda b: 1.0 - h_2p - 2.0 / b)
    else:
        rows["bsc_proven"] = math.inf
    return rows
