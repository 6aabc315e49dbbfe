"""How fast does parameter recovery improve with history length?

Simulates histories of increasing length from known parameters on the
bundled synthetic network, refits each one, and prints the median (and
worst) relative recovery error per length.  Longer windows should show
a clear downward trend.

Usage:
    python3 scripts/recovery_trend.py [--lengths 100,400,1600] [--seeds 12]
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from carpnet import (
    ModelParams,
    build_history,
    fit,
    load_history,
    load_network,
    month_sequence,
    run_cascades,
)

ROOT = Path(__file__).resolve().parent.parent
BURN_IN = 240


def single_error(network, params, length: int, seed: int) -> float:
    batch = run_cascades(
        network,
        network.likelihoods,
        params,
        np.zeros(network.n_risks, dtype=bool),
        length + BURN_IN,
        master_seed=seed,
        run_indices=np.array([0]),
        rng_path_prefix=(20,),
        keep_states=True,
    )
    states = batch.states[0][:, BURN_IN:].astype(np.uint8)
    history = build_history(network, month_sequence("2000-01", length), states)
    result = fit(history, network)
    fitted = np.array([result.params.alpha, result.params.beta, result.params.gamma])
    truth = np.array([params.alpha, params.beta, params.gamma])
    return float(np.abs(fitted / truth - 1).max())


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--lengths", default="100,400,1600")
    parser.add_argument("--seeds", type=int, default=12)
    parser.add_argument("--alpha", type=float, default=0.3)
    parser.add_argument("--beta", type=float, default=0.02)
    parser.add_argument("--gamma", type=float, default=1.0)
    args = parser.parse_args()

    network = load_network(
        ROOT / "data/synthetic_2013/risks.csv",
        ROOT / "data/synthetic_2013/pairs.csv",
        year="2013",
        likelihood_scale=5.0,
    )
    params = ModelParams(args.alpha, args.beta, args.gamma)
    lengths = [int(x) for x in args.lengths.split(",")]

    print(f"network: {network.n_risks} risks, {network.n_edges} edges")
    print(f"generator: alpha={params.alpha} beta={params.beta} gamma={params.gamma}")
    print(f"{'months':>8} {'median err':>12} {'worst err':>12}")
    for length in lengths:
        errors = [single_error(network, params, length, s) for s in range(args.seeds)]
        print(f"{length:>8} {np.median(errors):>12.4f} {max(errors):>12.4f}")


if __name__ == "__main__":
    main()
