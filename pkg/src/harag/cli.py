"""``harag`` command line: gen-corpus, analyze, profile, compress, simulate.

Exit codes: 0 success, 1 runtime error, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
from collections import Counter
from pathlib import Path

from .analysis import analyze_chunk
from .config import ConfigError, RunConfig, load_config
from .core import Scheme
from .hotness import AccessProfile, compress_corpus, partition, sort_by_frequency
from .placement import build_lists
from .simulator import Mode, ablation, gen_corpus, gen_workload, profile_from_workload, run
from .store import dump_corpus, dump_store, load_corpus, load_store

ANALYSIS_HEADER = ["chunk_id", "kind", "min", "max", "top1_coverage", "top4_coverage", "top8_coverage"] + [
    f"rmse_{s.label}" for s in Scheme
]


class UsageError(Exception):
    pass


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _config(args, keys: tuple[str, ...]) -> RunConfig:
    try:
        return load_config(args.config, {k: getattr(args, k, None) for k in keys})
    except ConfigError as e:
        raise UsageError(str(e)) from None


def _workload_for(cfg: RunConfig, n_chunks: int, uniform: bool):
    if cfg.k > n_chunks:
        raise UsageError(f"k={cfg.k} exceeds chunk count {n_chunks}")
    return gen_workload(n_chunks, cfg.queries, cfg.k, 0.0 if uniform else cfg.zipf_s, cfg.seed)


# ---------------------------------------------------------------- commands


def cmd_gen_corpus(args) -> int:
    cfg = _config(args, ("docs", "tokens", "width", "seed"))
    chunks = gen_corpus(cfg.docs, cfg.tokens, cfg.width, cfg.seed)
    blob = dump_corpus(chunks)
    Path(args.out).write_bytes(blob)
    print(f"wrote {len(chunks)} chunks, {len(blob)} bytes to {args.out}")
    return 0


def cmd_analyze(args) -> int:
    cfg = _config(args, ())
    chunks = load_corpus(Path(args.corpus).read_bytes())
    buf = io.StringIO()
    w = csv.DictWriter(buf, ANALYSIS_HEADER, lineterminator="\n")
    w.writeheader()
    top8 = []
    for c in chunks:
        row = analyze_chunk(c, cfg.layout)
        top8.append(row["top8_coverage"])
        w.writerow({k: (f"{v:.9g}" if isinstance(v, float) else v) for k, v in row.items()})
    _emit(buf.getvalue(), args.out)
    if args.out is not None:
        mean = sum(top8) / len(top8) if top8 else 0.0
        print(f"analyzed {len(chunks)} chunks, mean top-8 exponent coverage {mean:.4f}")
    return 0


def cmd_profile(args) -> int:
    cfg = _config(args, ("queries", "k", "zipf_s", "seed"))
    if args.corpus:
        ids = sorted(c.id for c in load_corpus(Path(args.corpus).read_bytes()))
    elif args.chunks:
        ids = list(range(args.chunks))
    else:
        raise UsageError("profile needs --corpus or --chunks")
    w = _workload_for(cfg, len(ids), args.uniform)
    # workload ranks index into the sorted id list
    counts = Counter(ids[i] for q in w.queries for i in q)
    profile = AccessProfile.for_ids(ids, counts)
    _emit(profile.to_csv(), args.out)
    return 0


def cmd_compress(args) -> int:
    cfg = _config(args, ("tau1", "tau2", "tau3", "e_bits", "m_bits"))
    chunks = load_corpus(Path(args.corpus).read_bytes())
    profile = AccessProfile.from_csv(Path(args.profile).read_text())
    missing = [c.id for c in chunks if c.id not in profile.counts]
    if missing:
        raise ValueError(f"profile is missing {len(missing)} chunk ids; first: {missing[0]}")
    ids = {c.id for c in chunks}
    ranked = [cid for cid in sort_by_frequency(profile) if cid in ids]
    part = partition(ranked, cfg.tau1, cfg.tau2, cfg.tau3)
    store = compress_corpus(chunks, part, cfg.layout)
    Path(args.out).write_bytes(dump_store(store, cfg.layout))
    raw = sum(c.raw_nbytes for c in store)
    packed = sum(c.nbytes for c in store)
    hist = Counter(c.scheme for c in store)
    print(f"compressed {len(store)} chunks: {raw} -> {packed} bytes, ratio {raw / packed:.4f}")
    print("schemes: " + ", ".join(f"{s.label}={hist.get(s, 0)}" for s in Scheme))
    return 0


def cmd_simulate(args) -> int:
    cfg = _config(args, ("queries", "k", "zipf_s", "seed", "tau_gpu", "tau_pin", "tau_page"))
    store, _ = load_store(Path(args.store).read_bytes())
    ids = sorted(c.id for c in store)
    w = _workload_for(cfg, len(ids), args.uniform)
    w = type(w)(tuple(tuple(ids[i] for i in q) for q in w.queries), w.seed, w.zipf_s, w.k, w.n_chunks)
    if args.profile:
        profile = AccessProfile.from_csv(Path(args.profile).read_text())
    else:
        profile = profile_from_workload(w, ids)
    ranked = sort_by_frequency(AccessProfile.for_ids(ids, profile.counts))
    lists = build_lists(ranked, cfg.tau_gpu, cfg.tau_pin, cfg.tau_page)
    model = cfg.cost_model()
    if args.baseline_only:
        report = run(store, w, lists, model, baseline_only=True)
    else:
        report = ablation(store, w, lists, Mode(args.mode), model)
    _emit(report.to_csv(), args.out)
    if args.summary:
        Path(args.summary).write_text(report.summary_csv())
    if args.out is not None:
        s = report.summary()
        print(
            f"{s['queries']} queries: mean speedup {s['mean_speedup']:.3f}, max {s['max_speedup']:.3f}, "
            f"first half {s['first_half_mean_speedup']:.3f}, second half {s['second_half_mean_speedup']:.3f}"
        )
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="harag", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_required=False):
        sp.add_argument("--seed", type=int)
        sp.add_argument("--config", help="flat key=value config file")
        sp.add_argument("--out", required=out_required)

    g = sub.add_parser("gen-corpus", help="generate a synthetic HKVC corpus")
    common(g, out_required=True)
    g.add_argument("--docs", type=_positive_int)
    g.add_argument("--tokens", type=_positive_int)
    g.add_argument("--width", type=_positive_int)
    g.set_defaults(func=cmd_gen_corpus)

    a = sub.add_parser("analyze", help="per-chunk range, exponent coverage and codec RMSE")
    common(a)
    a.add_argument("corpus")
    a.set_defaults(func=cmd_analyze)

    def workload_flags(sp):
        sp.add_argument("--queries", type=_positive_int)
        sp.add_argument("--k", type=_positive_int)
        sp.add_argument("--zipf-s", dest="zipf_s", type=float)
        sp.add_argument("--uniform", action="store_true", help="uniform sampling (Zipf s -> 0)")

    pr = sub.add_parser("profile", help="access-count profile from a generated workload")
    common(pr)
    src = pr.add_mutually_exclusive_group()
    src.add_argument("--corpus")
    src.add_argument("--chunks", type=_positive_int)
    workload_flags(pr)
    pr.set_defaults(func=cmd_profile)

    c = sub.add_parser("compress", help="hotness-aware compression into a HARG store")
    common(c, out_required=True)
    c.add_argument("corpus")
    c.add_argument("--profile", required=True)
    for t in ("tau1", "tau2", "tau3"):
        c.add_argument(f"--{t}", type=float)
    c.add_argument("--e-bits", dest="e_bits", type=int)
    c.add_argument("--m-bits", dest="m_bits", type=int)
    c.set_defaults(func=cmd_compress)

    s = sub.add_parser("simulate", help="replay a workload against the tiered store")
    common(s)
    s.add_argument("store")
    s.add_argument("--profile", help="hotness profile (default: derived from the workload)")
    s.add_argument("--summary", help="write summary CSV here")
    s.add_argument("--mode", choices=[m.value for m in Mode], default=Mode.FULL.value)
    s.add_argument("--baseline-only", action="store_true")
    for t in ("tau_gpu", "tau_pin", "tau_page"):
        s.add_argument(f"--{t.replace('_', '-')}", dest=t, type=float)
    workload_flags(s)
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        parser.error(str(e))
    except (OSError, ValueError, KeyError) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"harag: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
