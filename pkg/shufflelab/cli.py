#!/usr/bin/env python3
"""Command-line interface for shufflelab experiments."""

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence as Seq

import numpy as np
from rich.console import Console
from rich.table import Table

from .capacity import (
    cap_torn,
    general_alphabet_rate,
    indel_shuffling_rate,
    short_molecule_rate,
    unified_rate,
)
from .channel import BEC, BSC, Identity, parse_noise, parse_torn, tear, transmit
from .cluster_recon import LshParams, run_pipeline, score_clustering
from .codec_index import IndexLayout, bits_to_bytes, bytes_to_bits, decode, encode, plan_index_code, rate_of
from .codec_linear import LinearCodebook, decode_linear, encode_linear, gen_codebook
from .errors import DomainError, ShuffleLabError
from .harness import emit, run, sweep
from .inner_code import parse_inner
from .models import ExperimentConfig, ExperimentKind, load_config
from .outer_code import OuterCodeSpec
from .sampling import parse_sampling
from .seqcore import Alphabet, RandomStream, random_pool, read_pool, write_pool
from .settings import LabSettings, load_settings

logger = logging.getLogger(__name__)

console = Console(stderr=True)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_DECODE_FAILURE = 2


# ============== Argument helpers ==============


def _floats(text: str) -> List[float]:
    return [float(v) for v in text.split(",") if v.strip()]


def _grid_entry(text: str) -> Dict[str, List[float]]:
    key, sep, values = text.partition("=")
    if not sep or not key.strip():
        raise argparse.ArgumentTypeError(f"expected key=v1,v2,..., got {text!r}")
    return {key.strip(): _floats(values)}


def _length_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group()
    group.add_argument("--L", type=int, help="Sequence length")
    group.add_argument("--beta", type=float, help="Normalised length L / log2 M")


def _resolve_length(args: argparse.Namespace) -> int:
    if args.L is not None:
        return args.L
    if args.beta is not None:
        return max(1, int(round(args.beta * math.log2(args.M))))
    raise DomainError("give --L or --beta")


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per experiment surface."""
    parser = argparse.ArgumentParser(
        prog="shufflelab", description="Shuffling-channel capacity, codecs and clustering experiments"
    )
    parser.add_argument("--seed", type=int, help="Master seed (default: SHUFFLELAB_MASTER_SEED)")
    parser.add_argument("--out", help="Output file (directory for cluster)")
    parser.add_argument("--format", choices=["csv", "json"], help="Record format")
    parser.add_argument("--config", help="Experiment config JSON; runs it when no subcommand is given")
    parser.add_argument("--log-level", help="Logging level (default: SHUFFLELAB_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command")

    cap = sub.add_parser("capacity", help="Evaluate one capacity expression")
    cap.add_argument("--sampling", default="poisson:2")
    cap.add_argument("--noise", default="identity")
    cap.add_argument("--beta", type=float, help="Normalised length L / log2 M")
    cap.add_argument("--alphabet", default="binary")
    cap.add_argument("--noisy-capacity", type=float, help="Per-read capacity for non-binary alphabets")
    cap.add_argument("--torn", help="Torn-paper spec, e.g. geom:0.01,del=const:0.2")
    cap.add_argument("--gamma", type=float, help="Uniform tearing range factor")
    cap.add_argument("--indel-capacity", type=float, help="C_indel for the indel shuffling rate")
    cap.add_argument("--p-del", type=float, help="Deletion probability for the indel stub")
    cap.add_argument("--short", action="store_true", help="Short-molecule regime (beta < 1)")
    cap.add_argument("--M", type=int, default=1024)

    trade = sub.add_parser("tradeoff", help="Storage/recovery tradeoff rows")
    trade.add_argument("--lam", type=_floats, default=[0.5, 1, 2, 3, 4, 5])
    trade.add_argument("--beta", type=_floats, default=[2.0])
    trade.add_argument("--q", type=_floats, help="Cost ratios; emits optimal coverage rows instead")

    sim = sub.add_parser("simulate", help="Pass a pool through the channel")
    sim.add_argument("--in", dest="input", help="Input pool file (default: random pool)")
    sim.add_argument("--M", type=int, default=64)
    sim.add_argument("--L", type=int, default=64)
    sim.add_argument("--n", type=int, default=1 << 12, help="Torn-paper input length")
    sim.add_argument("--alphabet", default="binary")
    sim.add_argument("--sampling", default="poisson:2")
    sim.add_argument("--noise", default="identity")
    sim.add_argument("--torn", help="Torn-paper spec; replaces the shuffling-sampling channel")
    sim.add_argument("--truth", help="Write the origin of every output read here")

    codec = sub.add_parser("codec", help="Index or linear codec")
    codec.add_argument("action", choices=["encode", "decode", "trial"])
    codec.add_argument("--scheme", choices=["index", "linear"], default="index")
    codec.add_argument("--M", "--m", dest="M", type=int, default=64)
    codec.add_argument("--L", "--l", dest="L", type=int)
    codec.add_argument("--beta", type=float)
    codec.add_argument("--alphabet", default="binary")
    codec.add_argument("--outer", help="Outer code n,k")
    codec.add_argument("--rate", type=float, help="Target rate in bits per symbol")
    codec.add_argument("--rate-fraction", type=float, help="Target rate as a fraction of capacity")
    codec.add_argument("--inner", default="none", help="none, rep:r, parity:rows,cols or hamming:length; trials also take auto")
    codec.add_argument("--n-outer", type=int)
    codec.add_argument("--round-up", action="store_true")
    codec.add_argument("--b", dest="B", type=int, help="Linear scheme tag length")
    codec.add_argument("--num-messages", type=int, default=64)
    codec.add_argument("--epsilon", type=float)
    codec.add_argument("--message-index", type=int, default=0)
    codec.add_argument("--sampling", default="poisson:2")
    codec.add_argument("--noise", default="identity")
    codec.add_argument("--trials", type=int, default=100)
    codec.add_argument("--in", dest="input", help="Message bytes (encode) or pool (decode)")

    clus = sub.add_parser("cluster", help="Cluster and reconstruct a read pool")
    clus.add_argument("--in", dest="input", required=True)
    clus.add_argument("--alphabet", default="quaternary")
    clus.add_argument("--k", type=int)
    clus.add_argument("--h", type=int)
    clus.add_argument("--bands", type=int)
    clus.add_argument("--rows", type=int)
    clus.add_argument("--tau", type=float)
    clus.add_argument("--mode", choices=["sub", "substitution", "indel"], default="substitution")
    clus.add_argument("--truth", help="Origin index per read, one per line")
    clus.add_argument("--mask-seed", type=int, help="Derandomize reconstructions with this seed")
    clus.add_argument("--mask-length", type=int)

    probe = sub.add_parser("probe", help="Rank and consistency-edge probes")
    probe.add_argument("probe", choices=["rank", "edges", "incorrect-edges"])
    probe.add_argument("--B", type=int, default=100)
    probe.add_argument("--delta", type=float, default=0.0)
    probe.add_argument("--p", type=float, default=0.1)
    probe.add_argument("--M", type=int, default=64)
    _length_args(probe)
    probe.add_argument("--pairs", type=int, default=10_000)
    probe.add_argument("--sampling", default="poisson:2")
    probe.add_argument("--trials", type=int, default=100)

    sw = sub.add_parser("sweep", help="Evaluator rows over a parameter grid")
    sw.add_argument("--figure", default="capacity",
                    choices=["tradeoff", "cost", "torn", "bsc-regimes", "bec-regimes", "capacity"])
    sw.add_argument("--grid", type=_grid_entry, action="append", default=[], help="key=v1,v2,...")
    sw.add_argument("--noise", default="identity")

    sub.add_parser("run", help="Run the experiment given by --config")
    return parser


# ============== Output ==============


def _write_records(records: Seq[Any], args: argparse.Namespace, settings: LabSettings) -> None:
    fmt = args.format or settings.output_format
    text = emit(records, args.out, fmt)
    if args.out is None:
        sys.stdout.write(text)


def _summary_table(summary: Dict[str, Any]) -> Table:
    table = Table(title="Summary")
    table.add_column("Metric", style="cyan")
    table.add_column("Value", style="white")
    for key, value in summary.items():
        table.add_row(key, f"{value:.4f}" if isinstance(value, float) else str(value))
    return table


def _run_config(config: ExperimentConfig, args: argparse.Namespace, settings: LabSettings) -> int:
    if args.out is None and config.output is not None:
        args.out = config.output
    if config.kind in {ExperimentKind.CAPACITY_SWEEP, ExperimentKind.TRADEOFF}:
        _write_records(sweep(config), args, settings)
        return EXIT_OK
    result = run(config, settings)
    _write_records(result.records, args, settings)
    console.print(_summary_table(result.summary))
    for warning in result.warnings:
        console.print(f"[yellow]Warning: {warning}[/yellow]")
    if config.kind is ExperimentKind.CODEC_TRIAL and not result.all_succeeded:
        return EXIT_DECODE_FAILURE
    return EXIT_OK


# ============== Subcommands ==============


def cmd_capacity(args: argparse.Namespace, settings: LabSettings) -> int:
    if args.torn:
        spec = parse_torn(args.torn)
        result = cap_torn(spec.length_law, spec.deletion, beta=args.beta, gamma=args.gamma)
    elif args.beta is None:
        raise DomainError("capacity needs --beta")
    elif args.short:
        result = short_molecule_rate(args.beta, args.M)
    elif args.indel_capacity is not None or args.p_del is not None:
        result = indel_shuffling_rate(args.beta, args.indel_capacity, args.p_del)
    else:
        sampling = parse_sampling(args.sampling)
        noise = parse_noise(args.noise)
        alphabet = Alphabet.parse(args.alphabet)
        if alphabet is not Alphabet.BINARY:
            noisy = args.noisy_capacity if args.noisy_capacity is not None else math.log2(alphabet.size)
            result = general_alphabet_rate(sampling.q0(), args.beta, noisy, alphabet.size)
        elif isinstance(noise, Identity):
            result = unified_rate(sampling, "none", 0.0, args.beta)
        elif isinstance(noise, (BSC, BEC)):
            result = unified_rate(sampling, type(noise).__name__.lower(), noise.p, args.beta)
        else:
            raise DomainError(f"no binary capacity evaluator for noise {args.noise!r}")
    text = json.dumps(result.to_dict(), sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="ascii")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_tradeoff(args: argparse.Namespace, settings: LabSettings) -> int:
    grid = {"beta": args.beta}
    if args.q:
        grid["q"] = args.q
        figure = "cost"
    else:
        grid["lam"] = args.lam
        figure = "tradeoff"
    config = ExperimentConfig(kind=ExperimentKind.TRADEOFF, figure=figure, grid=grid)
    _write_records(sweep(config), args, settings)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace, settings: LabSettings) -> int:
    grid: Dict[str, List[float]] = {}
    for entry in args.grid:
        grid.update(entry)
    config = ExperimentConfig(
        kind=ExperimentKind.CAPACITY_SWEEP, figure=args.figure, grid=grid, noise=args.noise
    )
    _write_records(sweep(config), args, settings)
    return EXIT_OK


def cmd_simulate(args: argparse.Namespace, settings: LabSettings) -> int:
    if args.out is None:
        raise DomainError("simulate needs --out for the output pool")
    alphabet = Alphabet.parse(args.alphabet)
    master = RandomStream(args.seed if args.seed is not None else settings.master_seed, "simulate")
    if args.torn:
        if args.input:
            seq = read_pool(args.input, alphabet)[0]
        else:
            seq = random_pool(1, args.n, alphabet, master.child("input"))[0]
        trace = tear(seq, parse_torn(args.torn, len(seq)), master.child("channel"))
        output, origins = trace.output, trace.order
    else:
        if args.input:
            pool = read_pool(args.input, alphabet)
        else:
            pool = random_pool(args.M, args.L, alphabet, master.child("input"))
        sampled = transmit(pool, parse_sampling(args.sampling), parse_noise(args.noise), master.child("channel"))
        output, origins = sampled.output, sampled.origins
    write_pool(output, args.out)
    if args.truth:
        Path(args.truth).write_text("".join(f"{int(o)}\n" for o in origins), encoding="ascii")
    console.print(f"[green]✓[/green] Wrote {len(output)} reads to {args.out}")
    return EXIT_OK


def _index_layout(args: argparse.Namespace) -> IndexLayout:
    alphabet = Alphabet.parse(args.alphabet)
    L = _resolve_length(args)
    inner = parse_inner(args.inner)
    if args.outer:
        try:
            n, k = (int(v) for v in args.outer.split(","))
        except ValueError as e:
            raise DomainError(f"--outer expects n,k, got {args.outer!r}") from e
        return IndexLayout.build(args.M, L, OuterCodeSpec(n, k), inner, alphabet)
    if args.rate is None:
        raise DomainError("give --outer n,k or --rate")
    return plan_index_code(args.M, L, args.rate, inner, alphabet, args.n_outer, args.round_up)


def _codebook(args: argparse.Namespace, settings: LabSettings) -> LinearCodebook:
    seed = args.seed if args.seed is not None else settings.master_seed
    L = _resolve_length(args)
    B = args.B or min(args.M * L, max(1, math.ceil(math.log2(args.num_messages))) + 2)
    # same stream as codec trials so a seed names one codebook everywhere
    master = RandomStream(seed, ExperimentKind.CODEC_TRIAL.value)
    return gen_codebook(args.M, L, B, args.num_messages, master.child("codebook"))


def cmd_codec(args: argparse.Namespace, settings: LabSettings) -> int:
    if args.action == "trial":
        config = ExperimentConfig(
            kind=ExperimentKind.CODEC_TRIAL,
            M=args.M,
            L=args.L,
            beta=args.beta,
            alphabet=args.alphabet,
            sampling=args.sampling,
            noise=args.noise,
            trials=args.trials,
            seed=args.seed,
            scheme=args.scheme,
            rate=args.rate,
            rate_fraction=args.rate_fraction,
            inner=args.inner,
            n_outer=args.n_outer,
            round_up=args.round_up,
            B=args.B,
            num_messages=args.num_messages,
            epsilon=args.epsilon,
        )
        return _run_config(config, args, settings)
    if args.out is None:
        raise DomainError(f"codec {args.action} needs --out")

    if args.scheme == "linear":
        codebook = _codebook(args, settings)
        if args.action == "encode":
            write_pool(encode_linear(codebook, args.message_index), args.out)
            console.print(f"[green]✓[/green] Encoded message {args.message_index} of {len(codebook)}")
            return EXIT_OK
        reads = read_pool(_require_input(args), Alphabet.BINARY)
        epsilon = args.epsilon if args.epsilon is not None else settings.linear_epsilon
        report = decode_linear(
            reads, codebook, parse_sampling(args.sampling).q0(), epsilon, settings.max_partitions
        )
        Path(args.out).write_text(
            json.dumps({"status": report.status, "message_index": report.message_index}) + "\n",
            encoding="ascii",
        )
        return _decode_outcome(report.success, report.status)

    layout = _index_layout(args)
    if args.action == "encode":
        bits = bytes_to_bits(Path(_require_input(args)).read_bytes())
        if len(bits) > layout.message_bits:
            raise DomainError(f"message has {len(bits)} bits, layout holds {layout.message_bits}")
        message = np.zeros(layout.message_bits, dtype=np.uint8)
        message[: len(bits)] = bits
        write_pool(encode(message, layout), args.out)
        console.print(
            f"[green]✓[/green] Encoded {len(bits)} bits at rate {rate_of(layout):.4f} into {layout.M} sequences"
        )
        return EXIT_OK
    report = decode(read_pool(_require_input(args), layout.alphabet), layout)
    if report.success:
        Path(args.out).write_bytes(bits_to_bytes(report.message))
    return _decode_outcome(report.success, report.failure_reason)


def _require_input(args: argparse.Namespace) -> str:
    if not args.input:
        raise DomainError(f"codec {args.action} needs --in")
    return args.input


def _decode_outcome(success: bool, reason: str) -> int:
    if success:
        console.print("[green]✓[/green] Decoded")
        return EXIT_OK
    console.print(f"[yellow]Decoding failed: {reason}[/yellow]")
    return EXIT_DECODE_FAILURE


def cmd_cluster(args: argparse.Namespace, settings: LabSettings) -> int:
    alphabet = Alphabet.parse(args.alphabet)
    reads = read_pool(args.input, alphabet)
    base = LshParams.from_settings(settings, alphabet)
    params = LshParams(
        k=args.k or base.k,
        h=args.h or base.h,
        bands=args.bands or base.bands,
        rows=args.rows or base.rows,
        band_width=base.band_width,
        tau=args.tau or base.tau,
    )
    seed = args.seed if args.seed is not None else settings.master_seed
    mode = "substitution" if args.mode == "sub" else args.mode
    result = run_pipeline(
        reads,
        params,
        mode,
        RandomStream(seed, "cluster").child("minhash").fingerprint(),
        args.mask_seed,
        args.mask_length,
    )

    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "clusters.txt").write_text(
        "".join(f"{i} {c}\n" for i, c in enumerate(result.assignment.labels)), encoding="ascii"
    )
    write_pool(result.reconstructed, out_dir / "reconstructed.txt")
    metrics: Dict[str, Any] = {
        "reads": len(reads),
        "clusters": result.assignment.n_clusters,
        "candidate_pairs": result.candidate_pairs,
        "kept_pairs": result.kept_pairs,
    }
    if args.truth:
        lines = Path(args.truth).read_text(encoding="ascii").split()
        origins = np.array([int(v) for v in lines], dtype=np.int64)
        if len(origins) != len(reads):
            raise DomainError(f"truth file has {len(origins)} entries for {len(reads)} reads")
        score = score_clustering(result.assignment, origins)
        metrics.update(precision=score.precision, recall=score.recall, accuracy=score.accuracy)
    (out_dir / "metrics.json").write_text(json.dumps(metrics, sort_keys=True, indent=2) + "\n", encoding="ascii")
    console.print(_summary_table(metrics))
    return EXIT_OK


def cmd_probe(args: argparse.Namespace, settings: LabSettings) -> int:
    config = ExperimentConfig(
        kind=ExperimentKind.PROBE,
        probe=args.probe,
        M=args.M,
        L=args.L,
        beta=args.beta,
        B=args.B,
        delta=args.delta,
        noise=f"bec:{args.p}",
        sampling=args.sampling,
        pairs=args.pairs,
        trials=args.trials,
        seed=args.seed,
    )
    return _run_config(config, args, settings)


COMMANDS = {
    "capacity": cmd_capacity,
    "tradeoff": cmd_tradeoff,
    "simulate": cmd_simulate,
    "codec": cmd_codec,
    "cluster": cmd_cluster,
    "probe": cmd_probe,
    "sweep": cmd_sweep,
}


def main(argv: Optional[Seq[str]] = None) -> int:
    """Parse arguments, configure logging and dispatch; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        settings = load_settings()
        level = (args.log_level or settings.log_level).upper()
        logging.basicConfig(level=level, format="%(asctime)s - %(levelname)s - %(message)s")

        if args.command in {None, "run"}:
            if not args.config:
                parser.print_help(sys.stderr)
                return EXIT_ERROR
            config = load_config(args.config)
            if args.seed is not None:
                config = config.model_copy(update={"seed": args.seed})
            return _run_config(config, args, settings)
        return COMMANDS[args.command](args, settings)
    except (ShuffleLabError, ValueError, OSError) as e:
        console.print(f"[red]Error: {e}[/red]")
        return EXIT_ERROR
    except KeyboardInterrupt:
        console.print("\n[yellow]Interrupted[/yellow]")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
