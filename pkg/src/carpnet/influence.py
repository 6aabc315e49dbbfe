"""Risk-to-risk influence via counterfactual steady states.

The influence of risk i on risk j is the drop in j's externally-driven
share of steady-state transitions when i is removed from the system:

    influence[i, j] = frac_external_j(full model) - frac_external_j(without i)

where frac_external_j is the fraction of j's expected monthly transitions
(internal activations, external activations, recoveries) that are
external activations, evaluated at the mean-field steady state.

"Removing" risk i can mean two things that provably coincide: disabling
it by setting its likelihood to zero (it then never fires, and the least
fixed point puts its activity at exactly zero) or deleting the node from
the network outright.  Both are implemented; the disable route is the
default and the deletion route exists as an independent cross-check.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import ModelParams
from .errors import DataError
from .risks import CATEGORIES, RiskNetwork
from .steady_state import SteadyState, solve_steady_state

_ANOMALY_TOL = -1e-12


@dataclass(frozen=True)
class TransitionFractions:
    """Expected steady-state transition rates per risk and their shares.

    ``rate_*`` are expected transitions per month per risk (the joint
    internal-and-external event is counted in both activation rates; its
    probability is marginal per process).  ``frac_*`` are the per-risk
    shares, which sum to 1 wherever a risk makes any transitions at all;
    elsewhere they are NaN and ``defined`` is False.
    """

    rate_internal: np.ndarray
    rate_external: np.ndarray
    rate_recovery: np.ndarray
    frac_internal: np.ndarray
    frac_external: np.ndarray
    frac_recovery: np.ndarray
    defined: np.ndarray


@dataclass(frozen=True)
class InfluenceMatrix:
    """Pairwise influence with NaN diagonal.

    ``anomalies`` lists (source_id, target_id, value) for any entry more
    negative than -1e-12; the mean-field system is monotone, so a
    materially negative influence signals a solver or modeling problem
    and is surfaced instead of clipped.
    """

    ids: tuple[str, ...]
    values: np.ndarray
    method: str
    anomalies: tuple[tuple[str, str, float], ...]


@dataclass(frozen=True)
class CategoryInfluence:
    categories: tuple[str, ...]
    raw: np.ndarray
    normalized: np.ndarray
    log_scaled: np.ndarray
    aggregate: str
    degenerate: bool


def transition_fractions(
    steady: SteadyState,
    params: ModelParams,
    network: RiskNetwork,
    *,
    L=None,
) -> TransitionFractions:
    """Split each risk's steady-state transition rate by cause.

    A passive risk activates internally with probability 1-(1-L)**alpha
    and externally with probability 1-(1-L)**(beta*m), where m is its
    real-valued mean-field exposure (the sum of its neighbors' steady
    activities); an active risk recovers with probability (1-L)**gamma.
    Weighting by the steady-state activity gives expected transitions per
    month.  Pass the same ``L`` the steady state was solved with.
    """
    p_hat = steady.p_hat
    if L is None:
        L = network.likelihoods
    else:
        L = np.asarray(L, dtype=float)
    if p_hat.shape != L.shape:
        raise DataError("steady state and likelihood vector differ in length")
    log1m = np.log1p(-L)
    exposure = network.adjacency_float @ p_hat

    rate_int = (1.0 - p_hat) * -np.expm1(params.alpha * log1m)
    rate_ext = (1.0 - p_hat) * -np.expm1(params.beta * exposure * log1m)
    rate_rec = p_hat * np.exp(params.gamma * log1m)

    total = rate_int + rate_ext + rate_rec
    defined = total > 0
    frac = np.full((3, network.n_risks), np.nan)
    np.divide(
        np.stack([rate_int, rate_ext, rate_rec]),
        total,
        out=frac,
        where=defined,
    )
    return TransitionFractions(
        rate_internal=rate_int,
        rate_external=rate_ext,
        rate_recovery=rate_rec,
        frac_internal=frac[0],
        frac_external=frac[1],
        frac_recovery=frac[2],
        defined=defined,
    )


def external_fraction(
    params: ModelParams, network: RiskNetwork, *, L=None
) -> np.ndarray:
    """Per-risk external share of steady-state transitions (solves, then splits)."""
    steady = solve_steady_state(params, network, L=L)
    return transition_fractions(steady, params, network, L=L).frac_external


def _without_node(network: RiskNetwork, i: int) -> RiskNetwork:
    keep = [j for j in range(network.n_risks) if j != i]
    return RiskNetwork(
        year=network.year,
        risks=tuple(network.risks[j] for j in keep),
        adjacency=network.adjacency[np.ix_(keep, keep)].copy(),
        edge_weights=network.edge_weights[np.ix_(keep, keep)].copy(),
        pair_counts=network.pair_counts[np.ix_(keep, keep)].copy(),
    )


def risk_influence(
    network: RiskNetwork,
    params: ModelParams,
    *,
    L=None,
    method: str = "disable",
) -> InfluenceMatrix:
    """Pairwise influence values[i, j] for every ordered pair i != j.

    One baseline steady state plus one counterfactual solve per risk.
    method="disable" re-solves with L_i = 0; method="delete" removes node
    i from the network outright.  The diagonal is NaN by construction (a
    risk's external share is meaningless once that risk is disabled).
    """
    if method not in ("disable", "delete"):
        raise DataError(f"method must be 'disable' or 'delete', got {method!r}")
    R = network.n_risks
    if L is None:
        L = network.likelihoods
    else:
        L = np.asarray(L, dtype=float)
        if L.shape != (R,):
            raise DataError(f"L must have shape ({R},), got {L.shape}")
    base = external_fraction(params, network, L=L)
    values = np.full((R, R), np.nan)

    for i in range(R):
        others = [j for j in range(R) if j != i]
        if method == "disable":
            cut = L.copy()
            cut[i] = 0.0
            dropped = external_fraction(params, network, L=cut)
            values[i, others] = base[others] - dropped[others]
        else:
            sub = _without_node(network, i)
            dropped = external_fraction(params, sub, L=L[others])
            values[i, others] = base[others] - dropped

    with np.errstate(invalid="ignore"):
        bad = np.nonzero(values < _ANOMALY_TOL)
    anomalies = tuple(
        (network.ids[i], network.ids[j], float(values[i, j])) for i, j in zip(*bad)
    )
    return InfluenceMatrix(
        ids=network.ids, values=values, method=method, anomalies=anomalies
    )


def category_influence(
    influence: InfluenceMatrix,
    network: RiskNetwork,
    *,
    aggregate: str = "sum",
    kappa: float = 99.0,
) -> CategoryInfluence:
    """Aggregate pairwise influence to the five risk categories.

    raw[c, d] combines values[i, j] over source risks i in category c and
    target risks j in category d (NaN entries -- the diagonal, or
    undefined targets -- are skipped).  ``normalized`` min-max rescales
    the raw matrix to [0, 1]; when every entry is equal the matrix is
    degenerate, normalized is all zeros, and ``degenerate`` is set.
    ``log_scaled`` is log(1 + kappa*normalized), a display compression
    that spreads roughly two decades of small entries at the default
    kappa of 99.
    """
    if aggregate not in ("sum", "mean"):
        raise DataError(f"aggregate must be 'sum' or 'mean', got {aggregate!r}")
    if kappa <= 0:
        raise DataError(f"kappa must be positive, got {kappa}")
    if influence.ids != network.ids:
        raise DataError("influence matrix does not match the network")

    cats = np.array(network.categories)
    n_cat = len(CATEGORIES)
    raw = np.zeros((n_cat, n_cat))
    for ci, c in enumerate(CATEGORIES):
        rows = np.nonzero(cats == c)[0]
        for di, d in enumerate(CATEGORIES):
            cols = np.nonzero(cats == d)[0]
            if rows.size == 0 or cols.size == 0:
                raw[ci, di] = np.nan if aggregate == "mean" else 0.0
                continue
            block = influence.values[np.ix_(rows, cols)]
            if aggregate == "sum":
                raw[ci, di] = np.nansum(block)
            else:
                raw[ci, di] = np.nan if np.isnan(block).all() else np.nanmean(block)

    finite = np.isfinite(raw)
    if not finite.any():
        raise DataError("category influence has no finite entries")
    lo, hi = raw[finite].min(), raw[finite].max()
    degenerate = hi <= lo
    normalized = np.full_like(raw, np.nan)
    if degenerate:
        normalized[finite] = 0.0
    else:
        normalized[finite] = (raw[finite] - lo) / (hi - lo)
    log_scaled = np.log1p(kappa * normalized)

    return CategoryInfluence(
        categories=CATEGORIES,
        raw=raw,
        normalized=normalized,
        log_scaled=log_scaled,
        aggregate=aggregate,
        degenerate=degenerate,
    )
