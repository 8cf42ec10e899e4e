"""Build the GridRoom score cache used by the replay tests.

Every candidate is evaluated to completion (no early stopping) so the replay
harnesses can simulate any evaluation order.  Results go through a
ResultStore, so an interrupted run resumes where it stopped.

    python3 scripts/build_score_cache.py --out tests/data/gridroom_cache.tsv
"""

import argparse
import os
import time

import numpy as np

from curio import program as P
from curio.enumeration import EnumerationConfig, enumerate_programs
from curio.export import write_cache
from curio.lifetime import run_lifetime, trial_seed_for
from curio.pruning import KEPT, prune_programs
from curio.search import COMPLETED, FAILED, CachedCandidate, TrialResult, featurize
from curio.store import ResultStore

LEARNED_REFERENCES = ("fast", "rnd", "cycle_consistency", "inverse_features",
                      "ensemble_disagreement", "rnd_ensemble_variant")


def candidates(budget, sample, seed):
    progs = list(enumerate_programs(EnumerationConfig(op_budget=budget)))
    kept = sorted((v for v in prune_programs(progs) if v.verdict == KEPT), key=lambda v: v.key.hex)
    rng = np.random.default_rng(seed)
    picked = [kept[i] for i in sorted(rng.choice(len(kept), size=min(sample, len(kept)), replace=False))]
    out = {v.key.hex: v.graph for v in picked}
    for name in LEARNED_REFERENCES:
        g = P.build_reference_program(name)
        out[P.canonical_key(g).hex] = g
    return out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="tests/data/gridroom_cache.tsv")
    ap.add_argument("--store", default="tests/data/gridroom_cache_results.tsv")
    ap.add_argument("--budget", type=int, default=3)
    ap.add_argument("--sample", type=int, default=234)
    ap.add_argument("--trials", type=int, default=2)
    ap.add_argument("--episode-cap", type=int, default=100)
    ap.add_argument("--lifetime", type=int, default=500)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    progs = candidates(args.budget, args.sample, args.seed)
    combiner = P.build_reference_program("combiner_intrinsic_only")
    store = ResultStore(args.store)
    seeds = tuple(trial_seed_for(args.seed, t) for t in range(args.trials))
    start = time.time()
    for n, (key, g) in enumerate(sorted(progs.items()), start=1):
        if store.has(key, "gridroom", seeds):
            continue
        results = []
        for s in seeds:
            res = run_lifetime("gridroom", g, combiner, trial_seed=s, lifetime=args.lifetime,
                               env_kwargs={"episode_cap": args.episode_cap})
            results.append(TrialResult("gridroom", s, FAILED if res.failed else COMPLETED, res.score, res.curve))
        store.append_results(key, results)
        print(f"{n}/{len(progs)} {key} {[r.score for r in results]} {time.time() - start:.0f}s", flush=True)

    cache = []
    for key, g in sorted(progs.items()):
        trials = store.results(key, "gridroom", seeds)
        cache.append(CachedCandidate(key, featurize(g), float(np.mean([t.score for t in trials])),
                                     [t.curve for t in trials]))
    write_cache(args.out, cache)
    print(f"wrote {len(cache)} candidates to {os.path.abspath(args.out)}")


if __name__ == "__main__":
    main()
