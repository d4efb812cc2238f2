"""
Experiment orchestration: seeded Monte Carlo trials, figure sweeps and record files.

Every trial draws from ``derive_stream(master, i)`` and its named children, so
results do not depend on how many trials run concurrently.
"""

import io
import logging
import math
import time
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence as Seq, Union

import numpy as np
import pandas as pd
from scipy import stats

from .capacity import (
    cap_torn,
    general_alphabet_rate,
    optimal_coverage,
    regime_boundaries,
    torn_coverage_geometric,
    torn_reorder_cost_geometric,
    tradeoff_region,
    unified_rate,
)
from .channel import (
    BEC,
    BSC,
    GeometricTear,
    Identity,
    NoDeletion,
    NoiseSpec,
    fragment_stats,
    parse_noise,
    parse_torn,
    tear,
    transmit,
)
from .cluster_recon import LshParams, randomize, run_pipeline, score_clustering
from .codec_index import InnerFailureRate, decode, encode, plan_concatenated, plan_index_code, rate_of
from .codec_linear import (
    decode_linear,
    edge_probe,
    encode_linear,
    gen_codebook,
    incorrect_edge_probe,
)
from .errors import DomainError
from .gf2 import BinaryMatrix
from .inner_code import candidate_inner_codes, parse_inner
from .models import TRIAL_KINDS, ExperimentConfig, ExperimentKind, TrialRecord
from .sampling import Poisson, SamplingSpec, parse_sampling
from .seqcore import Alphabet, RandomStream, derive_stream, random_pool
from .settings import LabSettings, load_settings

logger = logging.getLogger(__name__)

DEFAULT_COLUMNS = ["trial", "seed", "success"]

# draws from which a noisy-channel consensus is expected to be exact
WELL_COVERED = 5


# ============== Results ==============


@dataclass
class RunResult:
    """Records of every trial plus their summary."""

    records: List[TrialRecord]
    summary: Dict[str, Any]
    warnings: List[str] = field(default_factory=list)

    @property
    def all_succeeded(self) -> bool:
        return all(r.success for r in self.records)


def summarize(records: Seq[TrialRecord]) -> Dict[str, Any]:
    """
    Success frequency with a 95% Wilson interval and the mean of every numeric metric.

    The result does not depend on the order of ``records``.
    """
    ordered = sorted(records, key=lambda r: r.trial)
    n = len(ordered)
    successes = sum(r.success for r in ordered)
    summary: Dict[str, Any] = {"trials": n, "successes": successes}
    if n == 0:
        return summary
    ci = stats.binomtest(successes, n).proportion_ci(confidence_level=0.95, method="wilson")
    summary.update(success_rate=successes / n, ci_low=float(ci.low), ci_high=float(ci.high))
    keys = sorted({k for r in ordered for k, v in r.metrics.items() if _is_number(v)})
    for key in keys:
        values = [r.metrics[key] for r in ordered if _is_number(r.metrics.get(key))]
        summary[f"mean_{key}"] = float(np.mean(values))
    return summary


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


# ============== Trial kinds ==============


def _capacity_of(
    config: ExperimentConfig, sampling: SamplingSpec, noise: NoiseSpec
) -> Optional[float]:
    """Rate the channel supports, or None when no evaluator covers it."""
    beta = config.actual_beta
    if math.isinf(beta):
        return None
    if config.alphabet_enum is Alphabet.QUATERNARY:
        if isinstance(noise, Identity):
            return general_alphabet_rate(sampling.q0(), beta, 2.0, 4).rate
        return None
    if isinstance(noise, Identity):
        return unified_rate(sampling, "none", 0.0, beta).rate
    if isinstance(noise, (BSC, BEC)):
        kind = "bsc" if isinstance(noise, BSC) else "bec"
        return unified_rate(sampling, kind, noise.p, beta).rate
    return None


class _CodecTrials:
    """Index or linear codec: encode a random message, transmit, decode."""

    def __init__(self, config: ExperimentConfig, settings: LabSettings, master: RandomStream):
        self.config = config
        self.settings = settings
        self.sampling = parse_sampling(config.sampling)
        self.noise = parse_noise(config.noise)
        self.warnings: List[str] = []
        M, L = config.M, config.length
        capacity = _capacity_of(config, self.sampling, self.noise)
        if config.rate is not None:
            target = config.rate
        elif capacity is not None:
            target = (config.rate_fraction if config.rate_fraction is not None else 0.8) * capacity
        else:
            raise DomainError("no capacity evaluator covers this channel; give an explicit rate")

        self.inner_failure: Optional[InnerFailureRate] = None
        if config.scheme == "index" and config.inner.strip().lower() == "auto":
            alphabet = config.alphabet_enum
            self.layout, self.inner_failure = plan_concatenated(
                M,
                L,
                target,
                candidate_inner_codes(L * alphabet.bits_per_symbol),
                self.noise,
                master.child("inner"),
                alphabet,
                self.sampling.q0(),
                config.n_outer,
                config.round_up,
            )
            self.rate = rate_of(self.layout)
        elif config.scheme == "index":
            self.layout = plan_index_code(
                M, L, target, parse_inner(config.inner), config.alphabet_enum, config.n_outer, config.round_up
            )
            self.rate = rate_of(self.layout)
        else:
            if config.alphabet_enum is not Alphabet.BINARY:
                raise DomainError("the linear scheme stores binary sequences")
            if not isinstance(self.noise, (Identity, BEC)):
                raise DomainError("the linear scheme decodes erasure channels only")
            B = config.B or min(M * L, max(1, math.ceil(math.log2(config.num_messages))) + 2)
            self.codebook = gen_codebook(M, L, B, config.num_messages, master.child("codebook"))
            self.rate = self.codebook.rate
        if capacity is not None and self.rate > capacity:
            message = f"rate {self.rate:.4f} exceeds capacity {capacity:.4f}"
            logger.warning(f"Infeasible codec configuration: {message}")
            self.warnings.append(message)
        self.capacity = capacity

    def __call__(self, stream: RandomStream) -> Dict[str, Any]:
        if self.config.scheme == "index":
            return self._index_trial(stream)
        return self._linear_trial(stream)

    def _index_trial(self, stream: RandomStream) -> Dict[str, Any]:
        layout = self.layout
        message = stream.child("message").generator().integers(0, 2, size=layout.message_bits, dtype=np.uint8)
        trace = transmit(encode(message, layout), self.sampling, self.noise, stream.child("channel"))
        report = decode(trace.output, layout)
        correct = report.success and np.array_equal(report.message, message)
        return {
            "success": bool(correct),
            "rate": self.rate,
            "reads": len(trace.output),
            "erasures": report.erasures,
            "substitutions": report.substitutions,
            "inner_failures": report.counts.get("inner_failure", 0),
            "outer_k": layout.outer.k,
            "silent_error": bool(report.success and not correct),
            "failure_reason": report.failure_reason,
        }

    def _linear_trial(self, stream: RandomStream) -> Dict[str, Any]:
        index = int(stream.child("message").generator().integers(0, len(self.codebook)))
        trace = transmit(encode_linear(self.codebook, index), self.sampling, self.noise, stream.child("channel"))
        report = decode_linear(
            trace.output,
            self.codebook,
            self.sampling.q0(),
            self.config.epsilon if self.config.epsilon is not None else self.settings.linear_epsilon,
            self.settings.max_partitions,
        )
        correct = report.success and report.message_index == index
        return {
            "success": bool(correct),
            "rate": self.rate,
            "reads": len(trace.output),
            "drawn": int((trace.counts.counts > 0).sum()),
            "status": report.status,
            "candidates": len(report.candidates),
            "partitions": report.partitions,
            "systems": report.systems,
            "silent_error": bool(report.success and not correct),
        }


def _torn_trial(config: ExperimentConfig) -> Callable[[RandomStream], Dict[str, Any]]:
    spec = parse_torn(config.torn, config.n)
    reference: Dict[str, Any] = {}
    if isinstance(spec.length_law, GeometricTear) and spec.length_law.p > 0:
        beta = 1.0 / (spec.length_law.p * math.log2(config.n))
        reference = {
            "beta": beta,
            "coverage_reference": torn_coverage_geometric(beta),
            "reorder_reference": torn_reorder_cost_geometric(beta),
        }
        # scaled deletion probabilities vanish with n and leave the no-deletion capacity
        deletion = spec.deletion if not spec.scaled else NoDeletion()
        reference["capacity"] = cap_torn(spec.length_law, deletion, beta=beta).rate

    def trial(stream: RandomStream) -> Dict[str, Any]:
        seq = random_pool(1, config.n, config.alphabet_enum, stream.child("input"))[0]
        trace = tear(seq, spec, stream.child("channel"))
        coverage, reorder = fragment_stats(trace.output.reads, config.n)
        return {
            "success": True,
            "pieces": len(trace.pieces),
            "survivors": len(trace.output),
            "coverage": coverage,
            "reorder_cost": reorder,
            **reference,
        }

    return trial


def _cluster_trial(config: ExperimentConfig, settings: LabSettings) -> Callable[[RandomStream], Dict[str, Any]]:
    sampling = parse_sampling(config.sampling)
    noise = parse_noise(config.noise)
    alphabet = config.alphabet_enum
    base = LshParams.from_settings(settings, alphabet)
    params = LshParams(
        k=config.k or base.k,
        h=config.h or base.h,
        bands=config.bands or base.bands,
        rows=config.rows or base.rows,
        band_width=base.band_width,
        tau=config.tau or base.tau,
    )
    M, L = config.M, config.length

    def trial(stream: RandomStream) -> Dict[str, Any]:
        pool = random_pool(M, L, alphabet, stream.child("pool"))
        mask_seed = stream.child("mask").fingerprint()
        trace = transmit(randomize(pool, mask_seed, L), sampling, noise, stream.child("channel"))
        result = run_pipeline(
            trace.output, params, config.mode, stream.child("minhash").fingerprint(), mask_seed, L
        )
        score = score_clustering(result.assignment, trace.origins)
        exact = set()
        clusters = result.assignment.clusters()
        for c, members in enumerate(clusters):
            origin = Counter(int(trace.origins[r]) for r in members).most_common(1)[0][0]
            if result.reconstructed[c] == pool[origin]:
                exact.add(origin)
        sampled = int((trace.counts.counts > 0).sum())
        covered = np.flatnonzero(trace.counts.counts >= WELL_COVERED)
        covered_exact = sum(int(o) in exact for o in covered)
        return {
            "success": len(exact) == sampled,
            "precision": score.precision,
            "recall": score.recall,
            "accuracy": score.accuracy,
            "clusters": len(clusters),
            "sampled": sampled,
            "exact_fraction": len(exact) / sampled if sampled else 1.0,
            "covered": len(covered),
            "covered_exact_fraction": covered_exact / len(covered) if len(covered) else 1.0,
            "candidate_pairs": result.candidate_pairs,
            "kept_pairs": result.kept_pairs,
        }

    return trial


def _probe_trial(config: ExperimentConfig) -> Callable[[RandomStream], Dict[str, Any]]:
    if config.probe == "rank":
        B = config.B or 100
        rows = int(round((1.0 - config.delta) * B))

        def rank_trial(stream: RandomStream) -> Dict[str, Any]:
            rank = BinaryMatrix.random(rows, B, stream.generator()).rank()
            return {"success": rank == min(rows, B), "rank": rank}

        return rank_trial

    noise = parse_noise(config.noise)
    if not isinstance(noise, BEC):
        raise DomainError("edge probes need a bec:p noise spec")
    if config.probe == "edges":
        L = config.L if config.L is not None else config.length

        def edge_trial(stream: RandomStream) -> Dict[str, Any]:
            probe = edge_probe(noise.p, L, config.pairs, stream)
            return {
                "success": abs(probe.empirical - probe.exact) <= 3 * probe.stderr,
                "empirical": probe.empirical,
                "exact": probe.exact,
                "stderr": probe.stderr,
            }

        return edge_trial

    sampling = parse_sampling(config.sampling)

    def incorrect_trial(stream: RandomStream) -> Dict[str, Any]:
        probe = incorrect_edge_probe(config.M, config.actual_beta, noise.p, sampling, 1, stream)
        return {
            "success": probe.counts[0] <= probe.bound,
            "incorrect_edges": probe.counts[0],
            "expected": probe.expected,
            "bound": probe.bound,
        }

    return incorrect_trial


# ============== Runner ==============


def run(config: ExperimentConfig, settings: Optional[LabSettings] = None) -> RunResult:
    """
    Execute every trial of a trial-based experiment.

    Raises:
        DomainError: the experiment kind is a sweep (use ``sweep``)
    """
    settings = settings or load_settings()
    if config.kind not in TRIAL_KINDS:
        raise DomainError(f"{config.kind.value} is a sweep; use sweep()")
    master = RandomStream(config.seed if config.seed is not None else settings.master_seed, config.kind.value)
    warnings: List[str] = []
    if config.kind is ExperimentKind.CODEC_TRIAL:
        trial_fn: Callable[[RandomStream], Dict[str, Any]] = _CodecTrials(config, settings, master)
        warnings = trial_fn.warnings
    elif config.kind is ExperimentKind.TORN_PAPER:
        trial_fn = _torn_trial(config)
    elif config.kind is ExperimentKind.CLUSTER_PIPELINE:
        trial_fn = _cluster_trial(config, settings)
    else:
        trial_fn = _probe_trial(config)

    def one(index: int) -> TrialRecord:
        stream = derive_stream(master, index)
        started = time.perf_counter()
        metrics = trial_fn(stream)
        success = bool(metrics.pop("success"))
        if settings.record_runtime:
            metrics["runtime_ms"] = (time.perf_counter() - started) * 1000.0
        metrics = {k: _plain(v) for k, v in metrics.items()}
        logger.debug(f"Trial {index}: success={success}")
        return TrialRecord(trial=index, seed=stream.fingerprint(), success=success, metrics=metrics)

    logger.info(f"Running {config.trials} {config.kind.value} trial(s) with {settings.workers} worker(s)")
    if settings.workers > 1:
        with ThreadPoolExecutor(max_workers=settings.workers) as pool:
            records = list(pool.map(one, range(config.trials)))
    else:
        records = [one(i) for i in range(config.trials)]
    summary = summarize(records)
    if warnings:
        summary["warnings"] = "; ".join(warnings)
    logger.info(f"Finished: {summary.get('successes')}/{summary.get('trials')} successful")
    return RunResult(records, summary, warnings)


def _plain(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    return value


# ============== Sweeps ==============


def _grid(config: ExperimentConfig, key: str, default: Seq[float]) -> List[float]:
    return [float(v) for v in config.grid.get(key, default)]


def sweep(config: ExperimentConfig) -> List[Dict[str, Any]]:
    """
    Evaluator rows over a parameter grid.

    Figures:
        tradeoff: (R_s, R_r) corners over lam x beta
        cost: optimal coverage and cost over the synthesis/sequencing cost ratio q
        torn: torn-paper capacity e^{-1/beta} against the shuffling capacity (1-1/beta)+
        bsc-regimes / bec-regimes: beta boundaries of the proven and positive regimes over p
        capacity: unified capacity over lam x p x beta for the configured noise law
    """
    figure = config.figure or ("tradeoff" if config.kind is ExperimentKind.TRADEOFF else "capacity")
    rows: List[Dict[str, Any]] = []
    if figure == "tradeoff":
        for lam in _grid(config, "lam", [0.5, 1, 2, 3, 4, 5]):
            for beta in _grid(config, "beta", [2.0]):
                pair = tradeoff_region(lam, beta)
                rows.append({"lam": lam, "beta": beta, "R_s": pair.R_s, "R_r": pair.R_r,
                             "coverage_fraction": -math.expm1(-lam)})
    elif figure == "cost":
        for q in _grid(config, "q", [1, 10, 100, 1000, 10000]):
            for beta in _grid(config, "beta", [2.0]):
                lam, cost = optimal_coverage(q, beta)
                rows.append({"q": q, "beta": beta, "lam_star": lam, "cost": cost})
    elif figure == "torn":
        for beta in _grid(config, "beta", np.round(np.linspace(0.2, 10, 50), 6).tolist()):
            rows.append({
                "beta": beta,
                "torn": math.exp(-1.0 / beta),
                "shuffling": max(0.0, 1.0 - 1.0 / beta),
                "coverage": torn_coverage_geometric(beta),
                "reorder_cost": torn_reorder_cost_geometric(beta),
            })
    elif figure in {"bsc-regimes", "bec-regimes"}:
        keys = ["bsc_positive", "bsc_proven"] if figure == "bsc-regimes" else ["cluster_gamma_one", "bec_multi_proven"]
        for p in _grid(config, "p", np.round(np.linspace(0.01, 0.2, 20), 6).tolist()):
            bounds = regime_boundaries(p)
            rows.append({"p": p, **{k: bounds[k] for k in keys}})
    elif figure == "capacity":
        noise = parse_noise(config.noise)
        kind = "none" if isinstance(noise, Identity) else type(noise).__name__.lower()
        if kind not in {"none", "bsc", "bec"}:
            raise DomainError(f"capacity sweeps cover identity, bsc and bec noise, got {config.noise!r}")
        for lam in _grid(config, "lam", [1, 2, 3]):
            for p in _grid(config, "p", [0.0] if kind == "none" else [0.01, 0.05, 0.1]):
                for beta in _grid(config, "beta", [1.5, 2, 4]):
                    result = unified_rate(Poisson(lam), kind, p, beta)
                    rows.append({"lam": lam, "p": p, "beta": beta, "rate": result.rate,
                                 "regime": result.regime.value})
    else:
        raise DomainError(f"unknown sweep figure {figure!r}")
    logger.info(f"Sweep {figure}: {len(rows)} rows")
    return rows


# ============== Record files ==============


def _rows(records: Seq[Union[TrialRecord, Dict[str, Any]]]) -> List[Dict[str, Any]]:
    return [r.flat() if isinstance(r, TrialRecord) else dict(r) for r in records]


def emit(
    records: Seq[Union[TrialRecord, Dict[str, Any]]],
    path: Optional[Union[str, Path]] = None,
    fmt: str = "csv",
    columns: Optional[List[str]] = None,
) -> str:
    """
    Serialize records as CSV (header row, RFC-4180 quoting) or a JSON array.

    An empty record list yields a header-only CSV. The text is returned and,
    when ``path`` is given, also written there.
    """
    rows = _rows(records)
    if rows:
        frame = pd.DataFrame(rows)
    else:
        frame = pd.DataFrame(columns=columns or DEFAULT_COLUMNS)
    if fmt == "csv":
        buffer = io.StringIO()
        frame.to_csv(buffer, index=False, lineterminator="\n")
        text = buffer.getvalue()
    elif fmt == "json":
        text = frame.to_json(orient="records", force_ascii=True) + "\n"
    else:
        raise DomainError(f"unknown output format {fmt!r}")
    if path is not None:
        Path(path).write_text(text, encoding="ascii")
        logger.info(f"Wrote {len(rows)} record(s) to {path}")
    return text


def load_records(path: Union[str, Path]) -> List[Dict[str, Any]]:
    """Read records written by ``emit``; the format follows the file suffix."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        frame = pd.read_json(path, orient="records")
    else:
        frame = pd.read_csv(path)
    return frame.to_dict(orient="records")
