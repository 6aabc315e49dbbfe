"""Command-line interface: reproducible, manifested runs of every workflow.

Design rules, enforced here rather than per command:

* every stochastic command requires an explicit ``--seed`` (no wall-clock
  fallback), so any artifact can be regenerated exactly;
* options may come from a flat key=value config file (``--config``);
  command-line flags override file values, and environment variables are
  never consulted;
* every run writes ``manifest.json`` recording the tool version, the
  effective semantic options, input file hashes, and output names.  The
  output directory and worker count are execution details and stay out of
  the manifest, so re-running a manifest into a fresh directory -- at any
  ``--jobs`` -- reproduces every artifact byte for byte;
* exit codes: 0 success, 1 usage/config error, 2 data validation error,
  3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .artifacts import write_csv, write_json, write_manifest
from .dynamics import (
    ModelParams,
    default_checkpoints,
    run_cascades_parallel,
    statistics_from_batch,
    trajectory_from_batch,
)
from .errors import CarpError, DataError, NumericalError, UsageError
from .graph_stats import compute_properties
from .influence import category_influence, risk_influence
from .likelihood import FitConfig, fit
from .risks import HistoryMatrix, RiskNetwork, load_history, load_network
from .steady_state import solve_steady_state
from .validation import (
    forward_error_bounds,
    network_effect_comparison,
    recovery_experiment,
    sensitivity_suite,
)

_EXPERIMENTS = ("recovery", "forward", "network-effect", "sensitivity")


class _Parser(argparse.ArgumentParser):
    """argparse that reports bad usage through the exit-code machinery."""

    def error(self, message):
        raise UsageError(message)


# dest -> (converter, allowed values) for config-file options, per subcommand
_CONVERTERS: dict[str, dict[str, tuple]] = {}


def _arg(parser: _Parser, command: str, *flags, conv=str, **kwargs):
    action = parser.add_argument(*flags, **kwargs)
    _CONVERTERS.setdefault(command, {})[action.dest] = (conv, action.choices)
    return action


def _int_ge0(text: str) -> int:
    value = int(text)
    if value < 0:
        raise ValueError("must be non-negative")
    return value


def _add_network_opts(p: _Parser, command: str) -> None:
    _arg(p, command, "--risks", help="risk catalog CSV (id,numeric_code,name,category,likelihood)")
    _arg(p, command, "--pairs", help="expert pair-count CSV (risk_a,risk_b,count)")
    _arg(p, command, "--scale", conv=float, type=float,
         help="survey scale maximum for likelihood normalization; omit if the likelihood column is already in (0,1)")
    _arg(p, command, "--epsilon", conv=float, type=float, default=0.5,
         help="offset in the likelihood normalization denominator (default 0.5)")
    _arg(p, command, "--year", default="", help="snapshot label stored on the network")


def _add_common_opts(p: _Parser, command: str) -> None:
    _arg(p, command, "--config", help="flat key=value option file; flags override it")
    _arg(p, command, "--out", help="output directory (created if missing; required)")


def _add_params_opts(p: _Parser, command: str) -> None:
    _arg(p, command, "--params", help="model parameters as 'alpha,beta,gamma'")
    _arg(p, command, "--params-file", help="JSON file with alpha/beta/gamma keys (e.g. a fit.json)")


def _add_fit_opts(p: _Parser, command: str) -> None:
    _arg(p, command, "--grid-points", conv=int, type=int, default=10,
         help="grid resolution per axis for the coarse search (default 10)")
    _arg(p, command, "--top-k", conv=int, type=int, default=5,
         help="number of grid cells refined by the simplex (default 5)")
    _arg(p, command, "--fix-beta", conv=float, type=float,
         help="pin the coupling parameter and fit the rest")


def build_parser() -> tuple[_Parser, dict[str, _Parser]]:
    parser = _Parser(prog="carpnet", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"carpnet {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    commands: dict[str, _Parser] = {}

    p = commands["fit"] = sub.add_parser(
        "fit", help="maximum-likelihood parameters from a history")
    _add_common_opts(p, "fit")
    _add_network_opts(p, "fit")
    _arg(p, "fit", "--history", help="state history CSV (long or wide form)")
    _add_fit_opts(p, "fit")

    p = commands["simulate"] = sub.add_parser(
        "simulate", help="Monte Carlo cascade trajectories")
    _add_common_opts(p, "simulate")
    _add_network_opts(p, "simulate")
    _add_params_opts(p, "simulate")
    _arg(p, "simulate", "--history", help="history CSV (needed for --initial history-last)")
    _arg(p, "simulate", "--seed", conv=_int_ge0, type=_int_ge0, help="master RNG seed (required)")
    _arg(p, "simulate", "--runs", conv=int, type=int, default=1000, help="number of runs (default 1000)")
    _arg(p, "simulate", "--horizon", conv=int, type=int, default=10000,
         help="months to simulate (default 10000)")
    _arg(p, "simulate", "--initial", default="passive",
         choices=("passive", "active", "history-last"),
         help="initial state (default passive)")
    _arg(p, "simulate", "--checkpoints",
         help="comma-separated output times (default: powers of 10 plus the horizon)")
    _arg(p, "simulate", "--jobs", conv=int, type=int, default=1,
         help="worker processes; any value produces identical output (default 1)")

    p = commands["steady-state"] = sub.add_parser(
        "steady-state", help="mean-field fixed point of the dynamics")
    _add_common_opts(p, "steady-state")
    _add_network_opts(p, "steady-state")
    _add_params_opts(p, "steady-state")
    _arg(p, "steady-state", "--tol", conv=float, type=float, default=1e-12,
         help="sup-norm convergence tolerance (default 1e-12)")
    _arg(p, "steady-state", "--max-iter", conv=int, type=int, default=1_000_000,
         help="iteration budget (default 1e6)")

    p = commands["validate"] = sub.add_parser(
        "validate", help="recovery / forward / network-effect / sensitivity experiments")
    _add_common_opts(p, "validate")
    _add_network_opts(p, "validate")
    _add_params_opts(p, "validate")
    _arg(p, "validate", "--experiment", choices=_EXPERIMENTS, help="which experiment to run")
    _arg(p, "validate", "--history", help="state history CSV")
    _arg(p, "validate", "--seed", conv=_int_ge0, type=_int_ge0, help="master RNG seed (required)")
    _arg(p, "validate", "--replicates", conv=int, type=int, default=125,
         help="recovery replicates (default 125)")
    _arg(p, "validate", "--months", conv=int, type=int, default=12,
         help="forward window length (default 12)")
    _arg(p, "validate", "--runs", conv=int, type=int, default=100,
         help="runs per ensemble (default 100)")
    _arg(p, "validate", "--perturbation", conv=float, type=float, default=0.1,
         help="sensitivity perturbation size (default 0.1)")
    _arg(p, "validate", "--jobs", conv=int, type=int, default=1,
         help="accepted for symmetry; experiments are already deterministic reductions")

    p = commands["influence"] = sub.add_parser(
        "influence", help="risk-on-risk and category influence matrices")
    _add_common_opts(p, "influence")
    _add_network_opts(p, "influence")
    _add_params_opts(p, "influence")
    _arg(p, "influence", "--method", default="disable", choices=("disable", "delete"),
         help="counterfactual: zero the likelihood or delete the node (default disable)")
    _arg(p, "influence", "--aggregate", default="sum", choices=("sum", "mean"),
         help="category aggregation (default sum)")
    _arg(p, "influence", "--kappa", conv=float, type=float, default=99.0,
         help="log display compression (default 99)")

    p = commands["stats"] = sub.add_parser(
        "stats", help="structural statistics of the network")
    _add_common_opts(p, "stats")
    _add_network_opts(p, "stats")

    p = commands["pipeline"] = sub.add_parser(
        "pipeline", help="fit, steady state, and influence in one run")
    _add_common_opts(p, "pipeline")
    _add_network_opts(p, "pipeline")
    _arg(p, "pipeline", "--history", help="state history CSV")
    _add_fit_opts(p, "pipeline")
    _arg(p, "pipeline", "--method", default="disable", choices=("disable", "delete"))
    _arg(p, "pipeline", "--aggregate", default="sum", choices=("sum", "mean"))
    _arg(p, "pipeline", "--kappa", conv=float, type=float, default=99.0)

    return parser, commands


def _peek_config(argv) -> tuple[str | None, str | None]:
    """Extract (command, config path) without a full parse."""
    command = None
    config = None
    i = 0
    while i < len(argv):
        tok = argv[i]
        if command is None and not tok.startswith("-"):
            command = tok
        if tok == "--config":
            if i + 1 < len(argv):
                config = argv[i + 1]
                i += 1
        elif tok.startswith("--config="):
            config = tok.split("=", 1)[1]
        i += 1
    return command, config


def _load_config(command: str, path: str) -> dict:
    """Parse a flat ``key = value`` file into typed option defaults.

    One option per line; blank lines and ``#`` comments ignored; keys are
    long option names with ``-`` or ``_``.  Values get the same conversion
    as the matching flag.
    """
    converters = _CONVERTERS.get(command, {})
    values: dict = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        dest = key.replace("-", "_")
        if dest in ("config",):
            raise UsageError(f"{path}:{lineno}: config files cannot nest")
        if dest not in converters:
            raise UsageError(f"{path}:{lineno}: unknown option {key!r} for command {command!r}")
        conv, choices = converters[dest]
        try:
            value = conv(raw)
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: bad value for {key!r}: {exc}") from None
        if choices is not None and value not in choices:
            raise UsageError(
                f"{path}:{lineno}: {key!r} got {value!r}, "
                f"must be one of {', '.join(map(str, choices))}"
            )
        values[dest] = value
    return values


def _require(args, command: str, *dests: str) -> None:
    for dest in dests:
        if getattr(args, dest, None) is None:
            flag = "--" + dest.replace("_", "-")
            raise UsageError(f"{command} requires {flag} (flag or config file)")


def _load_net(args) -> RiskNetwork:
    try:
        return load_network(
            args.risks, args.pairs, year=args.year,
            likelihood_scale=args.scale, epsilon=args.epsilon,
        )
    except OSError as exc:
        raise DataError(f"cannot read network inputs: {exc}") from None


def _load_hist(args, network: RiskNetwork) -> HistoryMatrix:
    try:
        return load_history(args.history, network)
    except OSError as exc:
        raise DataError(f"cannot read history: {exc}") from None


def _parse_params(args, network, history, *, allow_fit=False, fit_config=None):
    """Resolve model parameters from --params, --params-file, or a fit.

    Returns (params, source) where source is recorded in the outputs.
    """
    if args.params is not None and args.params_file is not None:
        raise UsageError("give either --params or --params-file, not both")
    if args.params is not None:
        parts = args.params.split(",")
        if len(parts) != 3:
            raise UsageError("--params must be 'alpha,beta,gamma'")
        try:
            a, b, g = (float(p) for p in parts)
        except ValueError as exc:
            raise UsageError(f"bad --params value: {exc}") from None
        return ModelParams(a, b, g), "given"
    if args.params_file is not None:
        try:
            payload = json.loads(Path(args.params_file).read_text(encoding="utf-8"))
        except OSError as exc:
            raise DataError(f"cannot read params file: {exc}") from None
        except json.JSONDecodeError as exc:
            raise DataError(f"params file is not valid JSON: {exc}") from None
        try:
            return (
                ModelParams(
                    float(payload["alpha"]), float(payload["beta"]), float(payload["gamma"])
                ),
                "file",
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"params file must hold numeric alpha/beta/gamma: {exc}") from None
    if allow_fit and history is not None:
        return fit(history, network, fit_config).params, "fitted"
    raise UsageError("model parameters required: --params or --params-file")


def _params_dict(params: ModelParams) -> dict:
    return {"alpha": params.alpha, "beta": params.beta, "gamma": params.gamma}


def _params_config(args) -> dict:
    if args.params is not None:
        return {"params": [float(p) for p in args.params.split(",")]}
    if args.params_file is not None:
        return {"params_file": args.params_file}
    return {}


def _network_config(args) -> dict:
    return {
        "risks": args.risks,
        "pairs": args.pairs,
        "scale": args.scale,
        "epsilon": args.epsilon,
        "year": args.year,
    }


def _fit_config_from(args) -> FitConfig:
    return FitConfig(
        grid_points=args.grid_points, top_k=args.top_k, fix_beta=args.fix_beta
    )


def _fit_json(result) -> dict:
    return {
        "alpha": result.params.alpha,
        "beta": result.params.beta,
        "gamma": result.params.gamma,
        "loglik": result.log_likelihood,
        "converged": result.converged,
        "boundary_flags": list(result.boundary_flags),
        "iterations": result.iterations,
        "restarts": result.restarts,
    }


def _steady_artifacts(out: Path, network, steady) -> list[str]:
    write_csv(
        out / "steady_state.csv",
        ("risk_id", "p_hat"),
        zip(network.ids, steady.p_hat),
    )
    write_json(out / "convergence.json", {
        "residual": steady.residual,
        "iterations": steady.iterations,
        "converged": steady.converged,
        "monotone": steady.monotone,
        "unique": steady.unique,
        "limit_gap": steady.limit_gap,
    })
    return ["steady_state.csv", "convergence.json"]


def _influence_artifacts(out: Path, network, params, method, aggregate, kappa) -> list[str]:
    matrix = risk_influence(network, params, method=method)
    rows = [
        (matrix.ids[i], matrix.ids[j], float(matrix.values[i, j]))
        for i in range(network.n_risks)
        for j in range(network.n_risks)
        if i != j
    ]
    write_csv(out / "influence.csv", ("source_id", "target_id", "influence"), rows)

    cats = category_influence(matrix, network, aggregate=aggregate, kappa=kappa)
    cat_rows = [
        (
            cats.categories[ci],
            cats.categories[di],
            float(cats.raw[ci, di]),
            float(cats.normalized[ci, di]),
            float(cats.log_scaled[ci, di]),
        )
        for ci in range(len(cats.categories))
        for di in range(len(cats.categories))
    ]
    write_csv(
        out / "category_influence.csv",
        ("source_cat", "target_cat", "raw", "normalized", "log_scaled"),
        cat_rows,
    )
    write_json(out / "influence.json", {
        "method": matrix.method,
        "aggregate": cats.aggregate,
        "kappa": kappa,
        "degenerate": cats.degenerate,
        "anomalies": [list(a) for a in matrix.anomalies],
    })
    return ["influence.csv", "category_influence.csv", "influence.json"]


def _cmd_fit(args, out: Path):
    _require(args, "fit", "risks", "pairs", "history")
    network = _load_net(args)
    history = _load_hist(args, network)
    result = fit(history, network, _fit_config_from(args))
    write_json(out / "fit.json", _fit_json(result))
    config = {
        **_network_config(args),
        "history": args.history,
        "grid_points": args.grid_points,
        "top_k": args.top_k,
        "fix_beta": args.fix_beta,
    }
    inputs = {"risks": args.risks, "pairs": args.pairs, "history": args.history}
    return config, inputs, ["fit.json"], None


def _cmd_simulate(args, out: Path):
    _require(args, "simulate", "risks", "pairs", "seed")
    network = _load_net(args)
    history = None
    if args.initial == "history-last":
        _require(args, "simulate", "history")
    if args.history is not None:
        history = _load_hist(args, network)
    params, _ = _parse_params(args, network, history)

    R = network.n_risks
    if args.initial == "passive":
        initial = np.zeros(R, dtype=bool)
    elif args.initial == "active":
        initial = np.ones(R, dtype=bool)
    else:
        initial = history.states[:, -1].astype(bool)

    if args.checkpoints is not None:
        try:
            checkpoints = tuple(int(c) for c in args.checkpoints.split(","))
        except ValueError as exc:
            raise UsageError(f"bad --checkpoints: {exc}") from None
    else:
        checkpoints = default_checkpoints(args.horizon)

    batch = run_cascades_parallel(
        network, network.likelihoods, params, initial, args.horizon,
        args.seed, range(args.runs), jobs=args.jobs, checkpoints=checkpoints,
    )
    traj = trajectory_from_batch(batch)
    stats = statistics_from_batch(batch)

    write_csv(
        out / "trajectory.csv",
        ("t", "risk_id", "frequency"),
        (
            (t, network.ids[i], float(traj.mean_frequency[k, i]))
            for k, t in enumerate(traj.checkpoints)
            for i in range(R)
        ),
    )
    write_csv(
        out / "statistics.csv",
        ("risk_id", "freq_active", "freq_activation"),
        (
            (network.ids[i], float(stats.freq_active[i]), float(stats.activations[i]))
            for i in range(R)
        ),
    )

    config = {
        **_network_config(args),
        **_params_config(args),
        "history": args.history,
        "initial": args.initial,
        "runs": args.runs,
        "horizon": args.horizon,
        "checkpoints": list(checkpoints),
        "seed": args.seed,
    }
    inputs = {"risks": args.risks, "pairs": args.pairs}
    if args.history is not None:
        inputs["history"] = args.history
    if args.params_file is not None:
        inputs["params_file"] = args.params_file
    return config, inputs, ["trajectory.csv", "statistics.csv"], args.seed


def _cmd_steady_state(args, out: Path):
    _require(args, "steady-state", "risks", "pairs")
    network = _load_net(args)
    params, _ = _parse_params(args, network, None)
    steady = solve_steady_state(params, network, tol=args.tol, max_iter=args.max_iter)
    outputs = _steady_artifacts(out, network, steady)
    config = {
        **_network_config(args),
        **_params_config(args),
        "tol": args.tol,
        "max_iter": args.max_iter,
    }
    inputs = {"risks": args.risks, "pairs": args.pairs}
    if args.params_file is not None:
        inputs["params_file"] = args.params_file
    return config, inputs, outputs, None


def _cmd_stats(args, out: Path):
    _require(args, "stats", "risks", "pairs")
    network = _load_net(args)
    props = compute_properties(network)
    write_json(out / "network_stats.json", {
        "node_count": props.node_count,
        "edge_count": props.edge_count,
        "density": props.density,
        "average_degree": props.average_degree,
        "degree_assortativity": props.degree_assortativity,
        "average_clustering": props.average_clustering,
        "diameter": props.diameter,
        "average_shortest_path": props.average_shortest_path,
        "max_clique_size": props.max_clique_size,
        "connected": props.connected,
        "n_components": props.n_components,
        "largest_component_size": props.largest_component_size,
    })
    config = _network_config(args)
    inputs = {"risks": args.risks, "pairs": args.pairs}
    return config, inputs, ["network_stats.json"], None


def _cmd_influence(args, out: Path):
    _require(args, "influence", "risks", "pairs")
    network = _load_net(args)
    params, _ = _parse_params(args, network, None)
    outputs = _influence_artifacts(out, network, params, args.method, args.aggregate, args.kappa)
    config = {
        **_network_config(args),
        **_params_config(args),
        "method": args.method,
        "aggregate": args.aggregate,
        "kappa": args.kappa,
    }
    inputs = {"risks": args.risks, "pairs": args.pairs}
    if args.params_file is not None:
        inputs["params_file"] = args.params_file
    return config, inputs, outputs, None


def _cmd_pipeline(args, out: Path):
    _require(args, "pipeline", "risks", "pairs", "history")
    network = _load_net(args)
    history = _load_hist(args, network)
    result = fit(history, network, _fit_config_from(args))
    write_json(out / "fit.json", _fit_json(result))
    steady = solve_steady_state(result.params, network)
    outputs = ["fit.json"]
    outputs += _steady_artifacts(out, network, steady)
    outputs += _influence_artifacts(
        out, network, result.params, args.method, args.aggregate, args.kappa
    )
    config = {
        **_network_config(args),
        "history": args.history,
        "grid_points": args.grid_points,
        "top_k": args.top_k,
        "fix_beta": args.fix_beta,
        "method": args.method,
        "aggregate": args.aggregate,
        "kappa": args.kappa,
    }
    inputs = {"risks": args.risks, "pairs": args.pairs, "history": args.history}
    return config, inputs, outputs, None


def _fractions_dict(fr) -> dict:
    return {
        "internal_only": fr.internal_only,
        "external_only": fr.external_only,
        "both": fr.both,
        "a": fr.a,
        "b": fr.b,
        "both_fraction": fr.both_fraction,
        "defined": fr.defined,
    }


def _cmd_validate(args, out: Path):
    _require(args, "validate", "risks", "pairs", "history", "seed", "experiment")
    network = _load_net(args)
    history = _load_hist(args, network)
    params, source = _parse_params(args, network, history, allow_fit=True)
    experiment = args.experiment
    outputs: list[str] = []

    if experiment == "recovery":
        report = recovery_experiment(
            network, history, params, n_replicates=args.replicates, master_seed=args.seed
        )
        retained = set(report.retained)
        write_json(out / "recovery.json", {
            "ground_truth": _params_dict(report.ground_truth),
            "params_source": source,
            "gt_fractions": _fractions_dict(report.gt_fractions),
            "gt_vector": list(report.gt_vector),
            "activation_bound": report.activation_bound,
            "recovery_bound": report.recovery_bound,
            "activation_bound_gt_fractions": report.activation_bound_gt_fractions,
            "n_replicates": args.replicates,
            "n_failed": report.n_failed,
            "n_retained": len(report.retained),
            "n_discarded": len(report.discarded),
        })
        write_csv(
            out / "recovery_replicates.csv",
            ("replicate", "failed", "alpha", "beta", "gamma",
             "activation_param", "recovery_param", "ks", "retained"),
            (
                (
                    rec.index,
                    rec.failed,
                    rec.params.alpha if rec.params else float("nan"),
                    rec.params.beta if rec.params else float("nan"),
                    rec.params.gamma if rec.params else float("nan"),
                    rec.activation_param,
                    rec.recovery_param,
                    rec.ks,
                    rec.index in retained,
                )
                for rec in report.replicates
            ),
        )
        outputs = ["recovery.json", "recovery_replicates.csv"]

    elif experiment == "forward":
        report = recovery_experiment(
            network, history, params, n_replicates=args.replicates, master_seed=args.seed
        )
        by_index = {rec.index: rec for rec in report.replicates}
        sets = [by_index[i].params for i in report.retained]
        fw = forward_error_bounds(
            network, params, sets,
            initial=history.states[:, -1].astype(bool),
            months=args.months, runs=args.runs, master_seed=args.seed,
        )
        write_json(out / "forward.json", {
            "ground_truth": _params_dict(params),
            "params_source": source,
            "months": fw.months,
            "runs": fw.n_runs,
            "n_sets": len(sets),
            "gt_freq_active": fw.gt_freq_active,
            "gt_freq_activation": fw.gt_activations,
            "freq_active": {
                "mean": fw.freq_summary[0],
                "worst_low": fw.freq_summary[1],
                "worst_high": fw.freq_summary[2],
            },
            "freq_activation": {
                "mean": fw.activation_summary[0],
                "worst_low": fw.activation_summary[1],
                "worst_high": fw.activation_summary[2],
            },
            "worst_deviation": fw.worst_deviation,
        })
        write_csv(
            out / "forward_sets.csv",
            ("set_index", "replicate", "freq_active", "freq_activation",
             "freq_active_deviation", "freq_activation_deviation"),
            (
                (
                    s,
                    report.retained[s],
                    float(fw.set_freq_active[s]),
                    float(fw.set_activations[s]),
                    float(abs(fw.set_freq_active[s] / fw.gt_freq_active - 1.0)),
                    float(abs(fw.set_activations[s] / fw.gt_activations - 1.0)),
                )
                for s in range(len(sets))
            ),
        )
        outputs = ["forward.json", "forward_sets.csv"]

    elif experiment == "network-effect":
        report = network_effect_comparison(
            network, history, params, runs=args.runs, master_seed=args.seed
        )
        write_json(out / "network_effect.json", {
            "params_source": source,
            "runs": args.runs,
            "m_network": report.m_network,
            "m_independent": report.m_independent,
            "ratio": report.ratio,
            "network_params": _params_dict(report.network_params),
            "independent_params": _params_dict(report.independent_params),
            "network_infinite_steps": list(report.network_infinite_steps),
            "independent_infinite_steps": list(report.independent_infinite_steps),
        })
        write_csv(
            out / "network_effect_series.csv",
            ("step", "historical", "network_mean", "network_std",
             "independent_mean", "independent_std"),
            (
                (
                    t,
                    float(report.historical[t]),
                    float(report.network_mean[t]),
                    float(report.network_std[t]),
                    float(report.independent_mean[t]),
                    float(report.independent_std[t]),
                )
                for t in range(report.historical.size)
            ),
        )
        outputs = ["network_effect.json", "network_effect_series.csv"]

    else:  # sensitivity
        report = sensitivity_suite(
            network, history, params,
            perturbation=args.perturbation, master_seed=args.seed,
        )
        write_json(out / "sensitivity.json", {
            "params_source": source,
            "params": _params_dict(report.baseline_params),
            "perturbation": report.perturbation,
        })
        order = sorted(
            range(network.n_risks), key=lambda i: (-report.baseline_p_hat[i], i)
        )
        write_csv(
            out / "sensitivity.csv",
            ("risk_id", "baseline_p_hat", "single_likelihood_delta",
             "single_history_delta", "all_likelihood_delta", "all_history_delta",
             "n_deactivated"),
            (
                (
                    network.ids[i],
                    float(report.baseline_p_hat[i]),
                    float(report.single_likelihood[i]),
                    float(report.single_history[i]),
                    float(report.all_likelihood[i]),
                    float(report.all_history[i]),
                    int(report.n_deactivated[i]),
                )
                for i in order
            ),
        )
        outputs = ["sensitivity.json", "sensitivity.csv"]

    config = {
        **_network_config(args),
        **_params_config(args),
        "experiment": experiment,
        "history": args.history,
        "seed": args.seed,
        "replicates": args.replicates,
        "months": args.months,
        "runs": args.runs,
        "perturbation": args.perturbation,
    }
    inputs = {"risks": args.risks, "pairs": args.pairs, "history": args.history}
    if args.params_file is not None:
        inputs["params_file"] = args.params_file
    return config, inputs, outputs, args.seed


_HANDLERS = {
    "fit": _cmd_fit,
    "simulate": _cmd_simulate,
    "steady-state": _cmd_steady_state,
    "validate": _cmd_validate,
    "influence": _cmd_influence,
    "stats": _cmd_stats,
    "pipeline": _cmd_pipeline,
}


def run(argv) -> None:
    command, config_path = _peek_config(argv)
    parser, commands = build_parser()
    if config_path is not None and command in commands:
        commands[command].set_defaults(**_load_config(command, config_path))
    args = parser.parse_args(argv)

    if args.out is None:
        raise UsageError(f"{args.command} requires --out (flag or config file)")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    config, inputs, outputs, seed = _HANDLERS[args.command](args, out)
    write_manifest(
        out,
        command=args.command,
        config=config,
        inputs=inputs,
        outputs=outputs,
        seed=seed,
        version=__version__,
    )


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    try:
        run(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except CarpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


def entrypoint() -> None:
    sys.exit(main())
