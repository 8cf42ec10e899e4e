"""Command-line entry point: enumerate, search, eval, baselines, export."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import export as X
from . import program as P
from .config import ConfigError, ExperimentConfig, load_config
from .enumeration import EnumerationConfig, enumerate_programs
from .lifetime import run_lifetime, trial_seed_for
from .pruning import KEPT, prune_programs
from .search import CandidateRecord, SearchConfig, featurize, run_search
from .store import ResultStore

EXIT_USAGE = 2
EXIT_NOTHING = 3
BASELINES = ("constant_zero", "constant_one", "constant_minus_one", "gaussian_noise")

log = logging.getLogger("curio")


def _paths(out):
    return {
        "programs": os.path.join(out, "programs"),
        "verdicts": os.path.join(out, "verdicts.tsv"),
        "results": os.path.join(out, "results.tsv"),
        "ranking": os.path.join(out, "ranking.tsv"),
    }


def _combiner(cfg: ExperimentConfig) -> P.ProgramGraph:
    if os.path.exists(cfg.combiner):
        with open(cfg.combiner, encoding="utf-8") as fh:
            return P.deserialize(fh.read())
    return P.build_reference_program(cfg.combiner)


def cmd_enumerate(cfg: ExperimentConfig, out: str) -> int:
    paths = _paths(out)
    os.makedirs(paths["programs"], exist_ok=True)
    ecfg = EnumerationConfig(cfg.op_budget, cfg.registry or None, cfg.max_programs or None,
                             cfg.fake_steps, cfg.fake_seeds, cfg.tolerance)
    programs = list(enumerate_programs(ecfg))
    verdicts = prune_programs(programs, ecfg, triviality=cfg.triviality)
    for name in os.listdir(paths["programs"]):
        if name.endswith(".prog"):
            os.remove(os.path.join(paths["programs"], name))
    counts = {}
    with open(paths["verdicts"], "w", encoding="utf-8") as fh:
        fh.write("# key\tverdict\n")
        for v in verdicts:
            fh.write(v.record() + "\n")
            label = "duplicate" if v.verdict.startswith("duplicate_of:") else v.verdict
            counts[label] = counts.get(label, 0) + 1
            if v.verdict == KEPT:
                g = P.ProgramGraph(v.graph.kind, v.graph.nodes, v.graph.output, v.key.hex)
                with open(os.path.join(paths["programs"], v.key.hex + ".prog"), "w", encoding="utf-8") as pf:
                    pf.write(P.serialize(g))
    print(f"enumerated {len(programs)} programs (op budget {cfg.op_budget})")
    for label in sorted(counts):
        print(f"{label}\t{counts[label]}")
    return 0


def _kept_programs(paths) -> list:
    if not os.path.exists(paths["verdicts"]):
        return []
    keys = []
    with open(paths["verdicts"], encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            key, verdict = line.rstrip("\n").split("\t")
            if verdict == KEPT:
                keys.append(key)
    out = []
    for key in keys:
        with open(os.path.join(paths["programs"], key + ".prog"), encoding="utf-8") as fh:
            out.append(P.deserialize(fh.read()))
    return out


def cmd_search(cfg: ExperimentConfig, out: str, workers: int) -> int:
    paths = _paths(out)
    programs = _kept_programs(paths)
    if not programs:
        print("nothing to search: no kept programs (run `enumerate` first)")
        return EXIT_NOTHING
    cands = [CandidateRecord(P.canonical_key(g).hex, g, featurize(g)) for g in programs]
    scfg = SearchConfig(stages=cfg.stages, benchmark_size=cfg.benchmark_size, epsilon=cfg.epsilon,
                        knn_k=cfg.knn_k, seed=cfg.seed, early_stopping=cfg.early_stopping,
                        stage1_budget=cfg.stage1_budget or None, round_size=cfg.round_size,
                        floor_score=cfg.floor_score)
    store = ResultStore(paths["results"])
    if store.skipped:
        print(f"warning: skipped {len(store.skipped)} corrupted store line(s)", file=sys.stderr)
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    try:
        result = run_search(cands, _combiner(cfg), scfg, store=store, pool=pool)
    finally:
        if pool is not None:
            pool.shutdown()
    last = cfg.stages[-1].env_id
    rows = []
    for rank, key in enumerate(result.ranking, start=1):
        rec = result.records[key]
        rows.append((rank, key, rec.score(last), rec.status_on(last)))
    X.write_table(paths["ranking"], ["rank", "key", f"score_{last}", "status"], rows)
    for row in rows[:10]:
        print("\t".join(X._fmt(v) for v in row))
    return 0


def _run_trials(cfg, g, env_id, out_prefix):
    lifetime = cfg.lifetime or None
    scores = []
    rows = []
    trace_fh = open(out_prefix + "_trace.tsv", "w", encoding="utf-8") if cfg.trace else None
    try:
        for t in range(cfg.trials):
            seed = trial_seed_for(cfg.seed, t)
            sink = None
            if trace_fh is not None:
                trace_fh.write(f"# trial {t}\n")
                sink = lambda line, fh=trace_fh: fh.write(line + "\n")
            res = run_lifetime(env_id, g, _combiner(cfg), trial_seed=seed, lifetime=lifetime,
                               floor_score=cfg.floor_score, trace_sink=sink)
            scores.append(res.score)
            rows.append((t, seed, "failed" if res.failed else "completed", res.score, res.curve.encode()))
    finally:
        if trace_fh is not None:
            trace_fh.close()
    X.write_table(out_prefix + ".tsv", ["trial", "trial_seed", "status", "score", "curve"], rows)
    return scores


def cmd_eval(cfg: ExperimentConfig, out: str, program_file: str, env_id: str) -> int:
    with open(program_file, encoding="utf-8") as fh:
        g = P.deserialize(fh.read())
    os.makedirs(out, exist_ok=True)
    scores = _run_trials(cfg, g, env_id, os.path.join(out, f"eval_{g.name}_{env_id}"))
    for t, s in enumerate(scores):
        print(f"trial {t}\t{s!r}")
    print(f"mean\t{np.mean(scores)!r}\tstd\t{np.std(scores)!r}")
    return 0


def cmd_baselines(cfg: ExperimentConfig, out: str, env_id: str) -> int:
    os.makedirs(out, exist_ok=True)
    rows = []
    for name in BASELINES:
        scores = _run_trials(cfg, P.build_reference_program(name), env_id,
                             os.path.join(out, f"baseline_{name}_{env_id}"))
        rows.append((name, float(np.mean(scores)), float(np.std(scores))))
        print(f"{name}\t{rows[-1][1]!r}\t{rows[-1][2]!r}")
    X.write_table(os.path.join(out, f"baselines_{env_id}.tsv"), ["program", "mean", "std"], rows)
    return 0


def cmd_export(cfg: ExperimentConfig, out: str, kind: str) -> int:
    from . import plotting

    paths = _paths(out)
    store = ResultStore(paths["results"])
    base = os.path.join(out, f"export_{kind}")
    if kind == "scatter":
        rows, r = X.scatter_table(store, cfg.env_a, cfg.env_b)
        X.write_table(base + ".tsv", ["key", cfg.env_a, cfg.env_b], rows)
        X.write_table(base + "_correlation.tsv", ["env_a", "env_b", "pearson_r", "n"],
                      [(cfg.env_a, cfg.env_b, r, len(rows))])
        plotting.plot_scatter(rows, r, cfg.env_a, cfg.env_b, base + ".png")
        print(f"pearson_r\t{r!r}\tn\t{len(rows)}")
    elif kind == "distribution":
        rows = X.distribution_table(store, cfg.export_env)
        X.write_table(base + ".tsv", ["key", "mean", "mean_minus_std", "mean_plus_std"], rows)
        plotting.plot_distribution(rows, cfg.export_env, base + ".png")
        print(f"programs\t{len(rows)}")
    elif kind == "search_efficiency":
        progs = X.load_programs(os.path.join(paths["programs"], f)
                                for f in sorted(os.listdir(paths["programs"])) if f.endswith(".prog"))
        cache = X.cache_from_store(store, cfg.export_env, progs)
        rows = X.efficiency_table(cache, cfg.efficiency_seeds, cfg.top_fraction, cfg.epsilon, cfg.knn_k)
        X.write_table(base + ".tsv", ["fraction_evaluated", "guided_found", "random_found"], rows)
        plotting.plot_efficiency(rows, base + ".png")
        half = rows[max(0, len(rows) // 2 - 1)]
        print(f"at {half[0]:.2f} evaluated\tguided\t{half[1]!r}\trandom\t{half[2]!r}")
    else:
        raise ValueError(f"unknown export kind {kind!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="curio", description="Search over curiosity programs.")
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--out", default="curio_out", help="output directory")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.add_argument("--workers", type=int, default=1, help="evaluation worker processes")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("enumerate", help="enumerate and prune programs")
    sub.add_parser("search", help="evaluate kept programs along the environment ladder")
    e = sub.add_parser("eval", help="evaluate one program file")
    e.add_argument("program_file")
    e.add_argument("env")
    b = sub.add_parser("baselines", help="evaluate the constant and noise baselines")
    b.add_argument("env")
    x = sub.add_parser("export", help="write plot-ready tables and figures")
    x.add_argument("kind", choices=["scatter", "distribution", "search_efficiency"])
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config)
    except (ConfigError, OSError) as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers < 1:
        print("usage error: --workers must be at least 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "enumerate":
            return cmd_enumerate(cfg, args.out)
        if args.command == "search":
            return cmd_search(cfg, args.out, args.workers)
        if args.command == "eval":
            return cmd_eval(cfg, args.out, args.program_file, args.env)
        if args.command == "baselines":
            return cmd_baselines(cfg, args.out, args.env)
        return cmd_export(cfg, args.out, args.kind)
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
