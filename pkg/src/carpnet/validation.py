"""Validation battery: recovery precision, forward error, network effect,
and sensitivity of the steady state to input perturbations.

Every experiment here is reproducible by construction: all randomness is
drawn from streams derived as (master_seed, tag, index), where the tag
partitions the experiments so none of them share draws:

    tag 0   reference simulation for attribution fractions
    tag 1   recovery replicates
    tag 2   forward-window runs (shared across parameter sets)
    tag 3   network-effect runs (shared across both models)
    tag 4   per-risk history perturbations

Sharing streams across parameter sets (tags 2 and 3) is deliberate: it
makes comparisons paired, so two identical parameter sets produce
identical output instead of merely statistically similar output.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import (
    ActivityStatistics,
    ModelParams,
    run_cascades,
    statistics_from_batch,
)
from .errors import ConvergenceError, DataError
from .likelihood import FitConfig, fit
from .risks import HistoryMatrix, RiskNetwork
from .rng import derive_rng
from .steady_state import solve_steady_state


def ks_distance(v1, v2) -> float:
    """Largest relative coordinate deviation max_i |v1[i]/v2[i] - 1|."""
    v1 = np.asarray(v1, dtype=float)
    v2 = np.asarray(v2, dtype=float)
    if v1.shape != v2.shape or v1.ndim != 1 or v1.size == 0:
        raise DataError(f"need two equal-length vectors, got {v1.shape} and {v2.shape}")
    if not (np.isfinite(v1).all() and np.isfinite(v2).all()):
        raise DataError("vectors must be finite")
    if (v2 == 0).any():
        raise DataError("reference vector has a zero entry; relative deviation undefined")
    return float(np.max(np.abs(v1 / v2 - 1.0)))


@dataclass(frozen=True)
class AttributionFractions:
    """Shares of activation events by cause.

    Simultaneous internal+external firings are split half-and-half
    between ``a`` and ``b``, so a + b = 1 whenever any activation
    occurred; ``both_fraction`` records the overlap share separately as a
    diagnostic.  With no activations at all the fractions are undefined
    (NaN, ``defined`` False).
    """

    internal_only: int
    external_only: int
    both: int
    a: float
    b: float
    both_fraction: float
    defined: bool

    @classmethod
    def from_counts(cls, internal_only: int, external_only: int, both: int):
        if min(internal_only, external_only, both) < 0:
            raise DataError("attribution counts must be non-negative")
        total = internal_only + external_only + both
        if total == 0:
            return cls(0, 0, 0, math.nan, math.nan, math.nan, False)
        return cls(
            internal_only=int(internal_only),
            external_only=int(external_only),
            both=int(both),
            a=(internal_only + 0.5 * both) / total,
            b=(external_only + 0.5 * both) / total,
            both_fraction=both / total,
            defined=True,
        )


def activation_rate(fractions: AttributionFractions, params: ModelParams) -> float:
    """Blended activation parameter a*alpha + b*beta."""
    if not fractions.defined:
        return math.nan
    return fractions.a * params.alpha + fractions.b * params.beta


@dataclass(frozen=True)
class ReplicateRecord:
    index: int
    failed: bool
    flags: tuple[str, ...]
    params: ModelParams | None
    fractions: AttributionFractions | None
    activation_param: float
    recovery_param: float
    activation_param_gt_fractions: float
    ks: float


@dataclass(frozen=True)
class ValidationReport:
    """Recovery-experiment outcome.

    ``retained``/``discarded`` index into ``replicates``; bounds are the
    largest relative errors over the retained replicates, coordinate by
    coordinate against ``gt_vector``.  ``activation_bound_gt_fractions``
    re-blends every replicate with the reference simulation's fractions
    instead of its own, as an alternative reading of the protocol.
    """

    ground_truth: ModelParams
    gt_fractions: AttributionFractions
    gt_vector: tuple[float, float]
    replicates: tuple[ReplicateRecord, ...]
    retained: tuple[int, ...]
    discarded: tuple[int, ...]
    n_failed: int
    activation_bound: float
    recovery_bound: float
    activation_bound_gt_fractions: float

    @property
    def replicate_params(self) -> tuple[tuple[float, float], ...]:
        """(activation_param, recovery_param) per successful replicate."""
        return tuple(
            (r.activation_param, r.recovery_param)
            for r in self.replicates
            if not r.failed
        )

    @property
    def ks_distances(self) -> tuple[float, ...]:
        return tuple(r.ks for r in self.replicates if not r.failed)


def _simulated_history(history: HistoryMatrix, batch_states, initial) -> HistoryMatrix:
    full = np.concatenate([initial[:, None].astype(np.uint8), batch_states], axis=1)
    return history.with_states(full)


def recovery_experiment(
    network: RiskNetwork,
    history: HistoryMatrix,
    fitted: ModelParams,
    n_replicates: int = 125,
    master_seed: int = 0,
    *,
    fit_config: FitConfig | None = None,
) -> ValidationReport:
    """How well do we re-estimate known parameters from data we generated?

    Simulates ``n_replicates`` histories of the same length as
    ``history`` (starting from its first month) under ``fitted``, refits
    each one, and compares each replicate's blended activation parameter
    a*alpha + b*beta and its recovery parameter gamma against the
    ground-truth pair.  The blend uses each replicate's own attribution
    fractions; the ground-truth pair uses fractions from a dedicated
    reference simulation.  The worst third of replicates by relative
    deviation (rounded up) is discarded as outliers and the error bounds
    are taken over the rest.  Failed refits are excluded with a warning
    before the outlier cut.
    """
    if n_replicates < 1:
        raise DataError("n_replicates must be >= 1")
    if history.risk_ids != network.ids:
        raise DataError("history risks are not aligned to the network")
    initial = history.states[:, 0].astype(bool)
    n_steps = history.n_months - 1

    ref = run_cascades(
        network, network.likelihoods, fitted, initial, n_steps, master_seed,
        [0], rng_path_prefix=(0,), track_causes=True,
    )
    gt_fractions = AttributionFractions.from_counts(*ref.cause_counts[0])
    if not gt_fractions.defined:
        raise DataError(
            "reference simulation produced no activations; cannot form a ground-truth vector"
        )
    gt_vector = (activation_rate(gt_fractions, fitted), fitted.gamma)
    if gt_vector[0] == 0 or gt_vector[1] == 0:
        raise DataError("ground-truth vector has a zero coordinate; deviations undefined")

    batch = run_cascades(
        network, network.likelihoods, fitted, initial, n_steps, master_seed,
        range(n_replicates), rng_path_prefix=(1,),
        keep_states=True, track_causes=True,
    )

    records = []
    for r in range(n_replicates):
        fractions = AttributionFractions.from_counts(*batch.cause_counts[r])
        sim = _simulated_history(history, batch.states[r], initial)
        failed = False
        flags: tuple[str, ...] = ()
        params = None
        try:
            result = fit(sim, network, fit_config)
            params = result.params
            flags = result.boundary_flags
        except ConvergenceError as exc:
            failed = True
            flags = (f"fit_failed: {exc}",)
        if not fractions.defined:
            failed = True
            flags = flags + ("no_activations_in_replicate",)

        if failed or params is None:
            records.append(
                ReplicateRecord(r, True, flags, params, fractions,
                                math.nan, math.nan, math.nan, math.nan)
            )
            continue
        act = activation_rate(fractions, params)
        act_gt_frac = activation_rate(gt_fractions, params)
        ks = ks_distance((act, params.gamma), gt_vector)
        records.append(
            ReplicateRecord(r, False, flags, params, fractions,
                            act, params.gamma, act_gt_frac, ks)
        )

    successes = [rec for rec in records if not rec.failed]
    n_failed = n_replicates - len(successes)
    if n_failed:
        warnings.warn(
            f"{n_failed} of {n_replicates} replicate fits failed and were excluded",
            stacklevel=2,
        )
    if not successes:
        raise DataError("every replicate fit failed; nothing to analyze")

    n_discard = math.ceil(len(successes) / 3)
    by_ks = sorted(successes, key=lambda rec: (rec.ks, rec.index))
    retained = by_ks[: len(successes) - n_discard]
    discarded = by_ks[len(successes) - n_discard:]
    if not retained:
        raise DataError("outlier cut discarded every replicate")

    act_gt, rec_gt = gt_vector
    activation_bound = max(abs(rec.activation_param / act_gt - 1.0) for rec in retained)
    recovery_bound = max(abs(rec.recovery_param / rec_gt - 1.0) for rec in retained)
    bound_gt_frac = max(
        abs(rec.activation_param_gt_fractions / act_gt - 1.0) for rec in retained
    )

    return ValidationReport(
        ground_truth=fitted,
        gt_fractions=gt_fractions,
        gt_vector=gt_vector,
        replicates=tuple(records),
        retained=tuple(rec.index for rec in retained),
        discarded=tuple(rec.index for rec in discarded),
        n_failed=n_failed,
        activation_bound=float(activation_bound),
        recovery_bound=float(recovery_bound),
        activation_bound_gt_fractions=float(bound_gt_frac),
    )


@dataclass(frozen=True)
class ForwardReport:
    """Forward-window statistics for ground truth and validation sets.

    Two scalars summarize each simulated window: the mean frequency of
    being active (over risks, months, and runs) and the mean number of
    activations per risk per run.  ``worst_deviation`` is the largest
    relative deviation of any validation set from ground truth across
    both statistics.
    """

    months: int
    n_runs: int
    gt_freq_active: float
    gt_activations: float
    set_freq_active: np.ndarray
    set_activations: np.ndarray
    freq_summary: tuple[float, float, float]  # mean, worst-low, worst-high
    activation_summary: tuple[float, float, float]
    worst_deviation: float


def forward_statistics(
    network: RiskNetwork,
    params: ModelParams,
    initial,
    months: int,
    n_runs: int,
    master_seed: int,
) -> ActivityStatistics:
    """Activity statistics of a simulated forward window (stream tag 2)."""
    batch = run_cascades(
        network, network.likelihoods, params, initial, months, master_seed,
        range(n_runs), rng_path_prefix=(2,),
    )
    return statistics_from_batch(batch)


def forward_error_bounds(
    network: RiskNetwork,
    ground_truth: ModelParams,
    validation_sets,
    *,
    initial,
    months: int = 12,
    runs: int = 100,
    master_seed: int = 0,
) -> ForwardReport:
    """Compare short forward simulations under estimated vs true parameters.

    Starting every simulation from ``initial`` (normally the last
    observed month), the ground-truth parameters and each validation
    parameter set generate ``runs`` windows of ``months`` months.  All
    parameter sets consume identical random streams, so a validation set
    equal to the ground truth reproduces its statistics exactly.
    """
    validation_sets = tuple(validation_sets)
    if not validation_sets:
        raise DataError("need at least one validation parameter set")
    if months < 1 or runs < 1:
        raise DataError("months and runs must be >= 1")
    initial = np.asarray(initial, dtype=bool)

    gt = forward_statistics(network, ground_truth, initial, months, runs, master_seed)
    if gt.mean_freq_active == 0 or gt.mean_activations == 0:
        raise DataError(
            "ground-truth forward window has zero activity; deviations undefined"
        )

    freq = np.empty(len(validation_sets))
    acts = np.empty(len(validation_sets))
    for s, params in enumerate(validation_sets):
        stats = forward_statistics(network, params, initial, months, runs, master_seed)
        freq[s] = stats.mean_freq_active
        acts[s] = stats.mean_activations

    worst = max(
        float(np.max(np.abs(freq / gt.mean_freq_active - 1.0))),
        float(np.max(np.abs(acts / gt.mean_activations - 1.0))),
    )
    return ForwardReport(
        months=months,
        n_runs=runs,
        gt_freq_active=gt.mean_freq_active,
        gt_activations=gt.mean_activations,
        set_freq_active=freq,
        set_activations=acts,
        freq_summary=(float(freq.mean()), float(freq.min()), float(freq.max())),
        activation_summary=(float(acts.mean()), float(acts.min()), float(acts.max())),
        worst_deviation=worst,
    )


@dataclass(frozen=True)
class NetworkEffectReport:
    """How many standard deviations are needed to cover history?

    For each model, ``m`` is the smallest multiple such that the band
    mean +/- m*std (per time step, over runs) covers every historical
    per-step activation count.  A step with zero spread but a mismatched
    historical count makes coverage impossible; those steps are listed
    and ``m`` is infinite.
    """

    historical: np.ndarray
    network_mean: np.ndarray
    network_std: np.ndarray
    independent_mean: np.ndarray
    independent_std: np.ndarray
    m_network: float
    m_independent: float
    ratio: float
    network_params: ModelParams
    independent_params: ModelParams
    network_infinite_steps: tuple[int, ...]
    independent_infinite_steps: tuple[int, ...]


def step_activation_counts(history: HistoryMatrix) -> np.ndarray:
    """Number of passive->active flips at each month-to-month step."""
    src = history.states[:, :-1]
    dst = history.states[:, 1:]
    return ((src == 0) & (dst == 1)).sum(axis=0).astype(np.int64)


def _coverage_multiple(historical, mean, std):
    gap = np.abs(historical - mean)
    per_step = np.zeros_like(mean)
    exact = gap == 0
    per_step[~exact & (std > 0)] = gap[~exact & (std > 0)] / std[~exact & (std > 0)]
    impossible = ~exact & (std == 0)
    per_step[impossible] = np.inf
    return float(np.max(per_step)), tuple(int(t) for t in np.nonzero(impossible)[0])


def network_effect_comparison(
    network: RiskNetwork,
    history: HistoryMatrix,
    params: ModelParams,
    runs: int = 100,
    master_seed: int = 0,
    *,
    fit_config: FitConfig | None = None,
) -> NetworkEffectReport:
    """Does the network improve the fit to historical activation counts?

    Simulates the historical window under (a) the network model with
    ``params`` and (b) an edgeless model whose parameters are refitted to
    the history with the coupling forced to zero.  Both models consume
    the same random streams (tag 3).  Smaller ``m`` means the model's
    run-to-run spread covers history more tightly.
    """
    if history.risk_ids != network.ids:
        raise DataError("history risks are not aligned to the network")
    if runs < 2:
        raise DataError("need at least 2 runs to estimate a standard deviation")
    historical = step_activation_counts(history).astype(float)
    initial = history.states[:, 0].astype(bool)
    n_steps = history.n_months - 1

    config = replace(fit_config, fix_beta=0.0) if fit_config else FitConfig(fix_beta=0.0)
    edgeless = network.without_edges()
    independent_params = fit(history, edgeless, config).params

    def band(net, p):
        batch = run_cascades(
            net, net.likelihoods, p, initial, n_steps, master_seed,
            range(runs), rng_path_prefix=(3,), track_step_activations=True,
        )
        counts = batch.step_activations.astype(float)
        return counts.mean(axis=0), counts.std(axis=0, ddof=1)

    net_mean, net_std = band(network, params)
    ind_mean, ind_std = band(edgeless, independent_params)

    m_net, net_inf = _coverage_multiple(historical, net_mean, net_std)
    m_ind, ind_inf = _coverage_multiple(historical, ind_mean, ind_std)
    if m_ind == 0.0:
        ratio = 1.0 if m_net == 0.0 else math.inf
    elif math.isinf(m_ind):
        ratio = math.nan if math.isinf(m_net) else 0.0
    else:
        ratio = m_net / m_ind

    return NetworkEffectReport(
        historical=historical,
        network_mean=net_mean,
        network_std=net_std,
        independent_mean=ind_mean,
        independent_std=ind_std,
        m_network=m_net,
        m_independent=m_ind,
        ratio=ratio,
        network_params=params,
        independent_params=independent_params,
        network_infinite_steps=net_inf,
        independent_infinite_steps=ind_inf,
    )


@dataclass(frozen=True)
class SensitivityReport:
    """Steady-state deltas under four perturbation designs.

    ``single_likelihood``/``single_history`` give, per risk i, the change
    in risk i's own steady-state activity when only risk i is perturbed;
    ``all_likelihood``/``all_history`` give the full delta vector when
    every risk is perturbed at once.  History perturbations deactivate a
    seeded random share of each risk's active months and refit; the
    all-risk variant reuses the same per-risk draws, so it is exactly the
    union of the single-risk edits.
    """

    perturbation: float
    baseline_params: ModelParams
    baseline_p_hat: np.ndarray
    single_likelihood: np.ndarray
    single_history: np.ndarray
    all_likelihood: np.ndarray
    all_history: np.ndarray
    n_deactivated: np.ndarray
    refit_flags: tuple[tuple[str, ...], ...]


def sensitivity_suite(
    network: RiskNetwork,
    history: HistoryMatrix,
    params: ModelParams,
    perturbation: float = 0.1,
    master_seed: int = 0,
    *,
    fit_config: FitConfig | None = None,
    tol: float = 1e-12,
) -> SensitivityReport:
    """Perturb inputs four ways and measure the steady-state response.

    (1) cut one risk's likelihood by ``perturbation`` and re-solve;
    (2) deactivate a random ``perturbation`` share of one risk's active
        months (rounded to nearest, seeded per risk), refit, re-solve;
    (3) cut every likelihood at once and re-solve;
    (4) apply every per-risk deactivation at once, refit, re-solve.

    Likelihood perturbations keep the baseline parameters (the model
    inputs changed, not the data); history perturbations refit because
    the estimates themselves are what a changed history would alter.
    """
    if not 0 <= perturbation < 1:
        raise DataError(f"perturbation must lie in [0, 1), got {perturbation}")
    if history.risk_ids != network.ids:
        raise DataError("history risks are not aligned to the network")
    R = network.n_risks
    L = network.likelihoods
    base = solve_steady_state(params, network, tol=tol).p_hat

    single_likelihood = np.zeros(R)
    for i in range(R):
        cut = L.copy()
        cut[i] *= 1.0 - perturbation
        p = solve_steady_state(params, network, L=cut, tol=tol).p_hat
        single_likelihood[i] = p[i] - base[i]

    all_cut = L * (1.0 - perturbation)
    all_likelihood = solve_steady_state(params, network, L=all_cut, tol=tol).p_hat - base

    drops: list[np.ndarray] = []
    n_deactivated = np.zeros(R, dtype=np.int64)
    for i in range(R):
        active_cols = np.nonzero(history.states[i])[0]
        n_drop = int(math.floor(perturbation * active_cols.size + 0.5))
        n_deactivated[i] = n_drop
        if n_drop == 0:
            drops.append(active_cols[:0])
            continue
        rng = derive_rng(master_seed, 4, i)
        drops.append(np.sort(rng.choice(active_cols, size=n_drop, replace=False)))

    single_history = np.zeros(R)
    refit_flags: list[tuple[str, ...]] = []
    for i in range(R):
        if drops[i].size == 0:
            refit_flags.append(())
            continue
        states = history.states.copy()
        states[i, drops[i]] = 0
        result = fit(history.with_states(states), network, fit_config)
        refit_flags.append(result.boundary_flags)
        p = solve_steady_state(result.params, network, tol=tol).p_hat
        single_history[i] = p[i] - base[i]

    if any(d.size for d in drops):
        states = history.states.copy()
        for i in range(R):
            states[i, drops[i]] = 0
        result = fit(history.with_states(states), network, fit_config)
        all_params = result.params
    else:
        all_params = params
    all_history = solve_steady_state(all_params, network, tol=tol).p_hat - base

    return SensitivityReport(
        perturbation=perturbation,
        baseline_params=params,
        baseline_p_hat=base,
        single_likelihood=single_likelihood,
        single_history=single_history,
        all_likelihood=all_likelihood,
        all_history=all_history,
        n_deactivated=n_deactivated,
        refit_flags=tuple(refit_flags),
    )
