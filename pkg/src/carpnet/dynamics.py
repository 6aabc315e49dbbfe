"""Cascade dynamics: per-risk transition probabilities, synchronous state
updates, and batched Monte Carlo simulation.

Each risk alternates between passive (0) and active (1).  With normalized
likelihood L and rate exponents (alpha, beta, gamma), over one month a
passive risk activates internally with probability ``1 - (1-L)**alpha`` and
through each active neighbor with probability ``1 - (1-L)**beta``; with k
active neighbors the combined activation probability is therefore
``1 - (1-L)**(alpha + beta*k)``.  An active risk stays active with
probability ``1 - (1-L)**gamma`` and recovers with ``(1-L)**gamma``.
Updates are synchronous: every risk transitions based on the previous
month's active set.

Randomness: internal and external activation are drawn separately (so the
cause of each activation is observable) and the risk activates if either
fired, which leaves the combined transition probability unchanged.  Each
run consumes exactly two uniforms per risk per step in a fixed order from
its own stream derived from (master seed, run index), so results never
depend on batching or worker count.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DataError
from .rng import derive_rng
from .risks import RiskNetwork

INTERNAL = "internal"
EXTERNAL = "external"
BOTH = "both"
RECOVERY = "recovery"

_REFILL_STEPS = 64  # uniforms are drawn per run in blocks of this many steps


@dataclass(frozen=True)
class ModelParams:
    """Rate exponents for internal activation, amplification, and continuation."""

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise DataError(f"{name} must be finite and non-negative, got {v!r}")

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.alpha, self.beta, self.gamma)


@dataclass(frozen=True)
class ProcessProbabilities:
    """Monthly event probabilities for one risk (or a vector of risks).

    ``p_con + p_rec == 1`` exactly: continuation is defined as the
    complement of recovery.
    """

    p_int: float | np.ndarray
    p_ext: float | np.ndarray
    p_con: float | np.ndarray
    p_rec: float | np.ndarray


def _check_likelihood(L, *, allow_zero: bool = False):
    arr = np.asarray(L, dtype=float)
    lo_ok = (arr >= 0.0) if allow_zero else (arr > 0.0)
    if not np.all(np.isfinite(arr) & lo_ok & (arr < 1.0)):
        bound = "[0, 1)" if allow_zero else "(0, 1)"
        raise DataError(f"normalized likelihood must lie in {bound}, got {L!r}")
    return arr


def process_probabilities(L, params: ModelParams) -> ProcessProbabilities:
    """Event probabilities for likelihood ``L`` (scalar or array) in (0, 1)."""
    arr = _check_likelihood(L)
    log1m = np.log1p(-arr)
    p_rec = np.exp(params.gamma * log1m)
    probs = ProcessProbabilities(
        p_int=-np.expm1(params.alpha * log1m),
        p_ext=-np.expm1(params.beta * log1m),
        p_con=1.0 - p_rec,
        p_rec=p_rec,
    )
    if np.ndim(L) == 0:
        return ProcessProbabilities(
            float(probs.p_int), float(probs.p_ext), float(probs.p_con), float(probs.p_rec)
        )
    return probs


def event_intensities(L, params: ModelParams) -> tuple:
    """Underlying monthly Poisson intensities ``-{alpha,beta,gamma} * ln(1-L)``."""
    arr = _check_likelihood(L)
    log1m = np.log1p(-arr)
    lam = (-params.alpha * log1m, -params.beta * log1m, -params.gamma * log1m)
    if np.ndim(L) == 0:
        return tuple(float(v) for v in lam)
    return lam


@dataclass(frozen=True)
class NetworkState:
    """Active set at one time step."""

    t: int
    active: np.ndarray  # bool (R,)

    def __post_init__(self):
        if self.active.dtype != np.bool_ or self.active.ndim != 1:
            raise DataError("NetworkState.active must be a 1-d boolean array")
        self.active.setflags(write=False)


@dataclass(frozen=True)
class TransitionCause:
    """Why one risk flipped during a step."""

    risk: int
    kind: str  # INTERNAL, EXTERNAL, BOTH, or RECOVERY


def _as_adjacency(network) -> np.ndarray:
    if isinstance(network, RiskNetwork):
        return network.adjacency_float
    arr = np.asarray(network, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DataError(f"adjacency must be square, got shape {arr.shape}")
    return arr


def activation_probability(
    i: int, state: NetworkState, probs: ProcessProbabilities, network
) -> float:
    """Combined passive->active probability for risk ``i`` given the state.

    Counts neighbors active in ``state`` and folds each one's external
    contribution into ``1 - (1-p_int) * (1-p_ext)**k``.
    """
    A = _as_adjacency(network)
    if not 0 <= i < A.shape[0]:
        raise DataError(f"risk index {i} out of range for {A.shape[0]} risks")
    k = float(A[i] @ state.active)
    p_int = np.asarray(probs.p_int, dtype=float).reshape(-1)
    p_ext = np.asarray(probs.p_ext, dtype=float).reshape(-1)
    pi = p_int[i] if p_int.size > 1 else p_int[0]
    pe = p_ext[i] if p_ext.size > 1 else p_ext[0]
    return float(-np.expm1(np.log1p(-pi) + k * np.log1p(-pe)))


def step(
    state: NetworkState,
    probs: ProcessProbabilities,
    network,
    rng: np.random.Generator,
) -> tuple[NetworkState, list[TransitionCause]]:
    """Advance the whole network one month synchronously.

    Consumes exactly ``2 * R`` uniforms as ``rng.random((2, R))``: row 0
    drives internal activation (or recovery, for active risks), row 1
    drives external activation.
    """
    A = _as_adjacency(network)
    R = A.shape[0]
    if state.active.shape != (R,):
        raise DataError(f"state has {state.active.shape[0]} risks, network has {R}")
    p_int = np.broadcast_to(np.asarray(probs.p_int, dtype=float), (R,))
    p_ext = np.broadcast_to(np.asarray(probs.p_ext, dtype=float), (R,))
    p_rec = np.broadcast_to(np.asarray(probs.p_rec, dtype=float), (R,))

    u = rng.random((2, R))
    active = state.active
    k = A @ active
    with np.errstate(divide="ignore"):
        ext_agg = -np.expm1(k * np.log1p(-p_ext))
    int_fire = u[0] < p_int
    ext_fire = u[1] < ext_agg
    recover = u[0] < p_rec

    activated = ~active & (int_fire | ext_fire)
    recovered = active & recover
    nxt = (active & ~recovered) | activated

    causes: list[TransitionCause] = []
    for i in np.nonzero(activated)[0]:
        if int_fire[i] and ext_fire[i]:
            kind = BOTH
        elif int_fire[i]:
            kind = INTERNAL
        else:
            kind = EXTERNAL
        causes.append(TransitionCause(int(i), kind))
    for i in np.nonzero(recovered)[0]:
        causes.append(TransitionCause(int(i), RECOVERY))
    return NetworkState(state.t + 1, nxt), causes


@dataclass(frozen=True)
class CascadeBatch:
    """Results of a batch of independent simulation runs."""

    run_indices: tuple[int, ...]
    n_steps: int
    final_active: np.ndarray  # bool (n_runs, R)
    active_months: np.ndarray  # int (n_runs, R): months spent active
    activation_counts: np.ndarray  # int (n_runs, R): passive->active flips
    checkpoints: tuple[int, ...]
    checkpoint_frequency: np.ndarray | None  # float (n_cp, n_runs, R)
    states: np.ndarray | None  # uint8 (n_runs, R, n_steps)
    step_activations: np.ndarray | None  # int (n_runs, n_steps)
    cause_counts: np.ndarray | None  # int (n_runs, 3): internal-only, external-only, both


def run_cascades(
    network,
    L,
    params: ModelParams,
    initial,
    n_steps: int,
    master_seed: int,
    run_indices: Sequence[int],
    *,
    rng_path_prefix: tuple[int, ...] = (),
    checkpoints: Sequence[int] | None = None,
    keep_states: bool = False,
    track_step_activations: bool = False,
    track_causes: bool = False,
) -> CascadeBatch:
    """Simulate many independent runs of the cascade in one vectorized pass.

    Run ``r`` draws from the stream ``(master_seed, *rng_path_prefix, r)``
    and its output is a function of that stream alone, so splitting the runs
    across any number of workers reproduces identical results.
    """
    A = _as_adjacency(network)
    R = A.shape[0]
    L = _check_likelihood(L, allow_zero=True)
    if L.shape != (R,):
        raise DataError(f"likelihood vector has shape {L.shape}, expected ({R},)")
    if n_steps < 1:
        raise DataError("n_steps must be >= 1")
    run_indices = tuple(int(r) for r in run_indices)
    n = len(run_indices)
    if n == 0:
        raise DataError("run_indices is empty")

    initial = np.asarray(initial, dtype=bool)
    if initial.shape == (R,):
        active = np.broadcast_to(initial, (n, R)).copy()
    elif initial.shape == (n, R):
        active = initial.copy()
    else:
        raise DataError(f"initial state must have shape ({R},) or ({n}, {R})")

    log1m = np.log1p(-L)
    p_int = -np.expm1(params.alpha * log1m)
    p_rec = np.exp(params.gamma * log1m)
    beta_log1m = params.beta * log1m  # per-neighbor external log-survival

    checkpoints = tuple(int(c) for c in (checkpoints or ()))
    if any(c < 1 or c > n_steps for c in checkpoints):
        raise DataError(f"checkpoints must lie in [1, {n_steps}], got {checkpoints}")
    cp_lookup = {c: k for k, c in enumerate(checkpoints)}
    cp_freq = (
        np.zeros((len(checkpoints), n, R), dtype=float) if checkpoints else None
    )

    active_months = np.zeros((n, R), dtype=np.int64)
    activation_counts = np.zeros((n, R), dtype=np.int64)
    states = np.zeros((n, R, n_steps), dtype=np.uint8) if keep_states else None
    step_acts = np.zeros((n, n_steps), dtype=np.int64) if track_step_activations else None
    cause_counts = np.zeros((n, 3), dtype=np.int64) if track_causes else None

    gens = [derive_rng(master_seed, *rng_path_prefix, r) for r in run_indices]
    buf = np.empty((n, _REFILL_STEPS, 2, R), dtype=float)

    for t in range(n_steps):
        slot = t % _REFILL_STEPS
        if slot == 0:
            fill = min(_REFILL_STEPS, n_steps - t)
            for r in range(n):
                buf[r, :fill] = gens[r].random((fill, 2, R))
        u_a = buf[:, slot, 0, :]
        u_b = buf[:, slot, 1, :]

        k = active.astype(float) @ A
        ext_agg = -np.expm1(k * beta_log1m)
        int_fire = u_a < p_int
        ext_fire = u_b < ext_agg
        fired = int_fire | ext_fire
        activated = ~active & fired
        recovered = active & (u_a < p_rec)
        active = (active & ~recovered) | activated

        active_months += active
        activation_counts += activated
        if states is not None:
            states[:, :, t] = active
        if step_acts is not None:
            step_acts[:, t] = activated.sum(axis=1)
        if cause_counts is not None:
            both = activated & int_fire & ext_fire
            cause_counts[:, 0] += (activated & int_fire & ~ext_fire).sum(axis=1)
            cause_counts[:, 1] += (activated & ext_fire & ~int_fire).sum(axis=1)
            cause_counts[:, 2] += both.sum(axis=1)
        if cp_freq is not None and (t + 1) in cp_lookup:
            cp_freq[cp_lookup[t + 1]] = active_months / (t + 1)

    return CascadeBatch(
        run_indices=run_indices,
        n_steps=n_steps,
        final_active=active,
        active_months=active_months,
        activation_counts=activation_counts,
        checkpoints=checkpoints,
        checkpoint_frequency=cp_freq,
        states=states,
        step_activations=step_acts,
        cause_counts=cause_counts,
    )


def _run_cascades_worker(kwargs):
    return run_cascades(**kwargs)


def _merge_batches(parts: Sequence[CascadeBatch]) -> CascadeBatch:
    def cat(attr):
        vals = [getattr(p, attr) for p in parts]
        if vals[0] is None:
            return None
        axis = 1 if attr == "checkpoint_frequency" else 0
        return np.concatenate(vals, axis=axis)

    return CascadeBatch(
        run_indices=tuple(r for p in parts for r in p.run_indices),
        n_steps=parts[0].n_steps,
        final_active=cat("final_active"),
        active_months=cat("active_months"),
        activation_counts=cat("activation_counts"),
        checkpoints=parts[0].checkpoints,
        checkpoint_frequency=cat("checkpoint_frequency"),
        states=cat("states"),
        step_activations=cat("step_activations"),
        cause_counts=cat("cause_counts"),
    )


def run_cascades_parallel(
    network,
    L,
    params: ModelParams,
    initial,
    n_steps: int,
    master_seed: int,
    run_indices: Sequence[int],
    *,
    jobs: int = 1,
    **kwargs,
) -> CascadeBatch:
    """Like :func:`run_cascades` but optionally split over worker processes.

    Output is identical for every ``jobs`` value: runs are partitioned into
    contiguous index blocks and reassembled in order.
    """
    run_indices = tuple(int(r) for r in run_indices)
    A = _as_adjacency(network)
    if jobs <= 1 or len(run_indices) < 2:
        return run_cascades(
            A, L, params, initial, n_steps, master_seed, run_indices, **kwargs
        )
    jobs = min(jobs, len(run_indices))
    splits = np.array_split(np.asarray(run_indices), jobs)
    tasks = [
        dict(
            network=A,
            L=np.asarray(L, dtype=float),
            params=params,
            initial=np.asarray(initial, dtype=bool),
            n_steps=n_steps,
            master_seed=master_seed,
            run_indices=tuple(int(r) for r in chunk),
            **kwargs,
        )
        for chunk in splits
        if len(chunk)
    ]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        parts = list(pool.map(_run_cascades_worker, tasks))
    return _merge_batches(parts)


def default_checkpoints(horizon: int) -> tuple[int, ...]:
    """Powers of ten up to the horizon, plus the horizon itself."""
    cps = []
    p = 10
    while p <= horizon:
        cps.append(p)
        p *= 10
    if horizon not in cps:
        cps.append(horizon)
    return tuple(sorted(cps))


@dataclass(frozen=True)
class Trajectory:
    """Being-active frequencies f_i(t) at checkpoints, aggregated over runs.

    ``f_i(t)`` is the fraction of the first t simulated months risk i spent
    active; mean and sample standard deviation are across runs.
    """

    checkpoints: tuple[int, ...]
    mean_frequency: np.ndarray  # float (n_checkpoints, R)
    std_frequency: np.ndarray  # float (n_checkpoints, R), ddof=1
    n_runs: int


def trajectory_from_batch(batch: CascadeBatch) -> Trajectory:
    if batch.checkpoint_frequency is None:
        raise DataError("batch was run without checkpoints")
    freq = batch.checkpoint_frequency
    n = freq.shape[1]
    std = freq.std(axis=1, ddof=1) if n > 1 else np.zeros_like(freq[:, 0, :])
    return Trajectory(
        checkpoints=batch.checkpoints,
        mean_frequency=freq.mean(axis=1),
        std_frequency=std,
        n_runs=n,
    )


def simulate_trajectory(
    initial,
    params: ModelParams,
    network,
    horizon: int,
    n_runs: int,
    master_seed: int,
    *,
    L=None,
    checkpoints: Sequence[int] | None = None,
    jobs: int = 1,
) -> Trajectory:
    """Monte Carlo being-active frequencies at log-spaced checkpoints.

    Run r draws from stream (master_seed, r).
    """
    if L is None:
        if not isinstance(network, RiskNetwork):
            raise DataError("pass L explicitly when network is a bare adjacency matrix")
        L = network.likelihoods
    if checkpoints is None:
        checkpoints = default_checkpoints(horizon)
    batch = run_cascades_parallel(
        network,
        L,
        params,
        initial,
        horizon,
        master_seed,
        range(n_runs),
        jobs=jobs,
        checkpoints=checkpoints,
    )
    return trajectory_from_batch(batch)


@dataclass(frozen=True)
class ActivityStatistics:
    """Activity summaries of one or more binary risk-by-month trajectories."""

    freq_active: np.ndarray  # float (R,): fraction of months active, averaged over runs
    activations: np.ndarray  # float (R,): passive->active flips per run, averaged over runs
    per_run_activations: np.ndarray  # int (n_runs, R)
    mean_freq_active: float  # scalar: over risks and months (and runs)
    mean_activations: float  # scalar: flips per risk per run

    @property
    def n_runs(self) -> int:
        return self.per_run_activations.shape[0]


def activity_statistics(states, *, initial=None) -> ActivityStatistics:
    """Being-active frequency and activation counts of state matrices.

    ``states`` has shape (R, T) or (n_runs, R, T).  Activations count the
    0->1 flips between consecutive observed months; passing ``initial``
    (the state preceding the first column) also counts flips into month 1.
    The active fraction is always over the T observed months only.
    """
    arr = np.asarray(states)
    if arr.ndim == 2:
        arr = arr[None, :, :]
    if arr.ndim != 3:
        raise DataError(f"states must have 2 or 3 dimensions, got {arr.ndim}")
    if not np.isin(arr, (0, 1)).all():
        raise DataError("states must be binary")
    n, R, T = arr.shape
    if T < 1:
        raise DataError("states must cover at least one month")

    if initial is not None:
        init = np.asarray(initial, dtype=arr.dtype).reshape(R)
        full = np.concatenate([np.broadcast_to(init, (n, R))[:, :, None], arr], axis=2)
    else:
        full = arr
    flips = (full[:, :, 1:] > full[:, :, :-1]).sum(axis=2)

    freq_active = arr.mean(axis=2).mean(axis=0)
    activations = flips.mean(axis=0)
    return ActivityStatistics(
        freq_active=freq_active,
        activations=activations,
        per_run_activations=flips,
        mean_freq_active=float(arr.mean()),
        mean_activations=float(flips.mean()),
    )


def statistics_from_batch(batch: CascadeBatch) -> ActivityStatistics:
    """Activity statistics of a simulation batch (without storing states)."""
    freq_active = (batch.active_months / batch.n_steps).mean(axis=0)
    return ActivityStatistics(
        freq_active=freq_active,
        activations=batch.activation_counts.mean(axis=0),
        per_run_activations=batch.activation_counts,
        mean_freq_active=float((batch.active_months / batch.n_steps).mean()),
        mean_activations=float(batch.activation_counts.mean()),
    )
