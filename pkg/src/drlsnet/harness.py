"""Monte Carlo ensemble execution and theory-vs-empirical comparison.

Runs are vectorized in chunks (leading batch axis) but reduced into the
averaged curves one run at a time, in run order, so the results do not
depend on the chunk size.  Every random stream is derived from the master
seed through a fixed SeedSequence spawn layout:

    root -> [w_star, run_0, run_1, ...]
    run_r -> [node_0, ..., node_{K-1}]
    node_k -> [u innovations, observation noise]
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import detrend

from .filters import init_network, init_state, drls_iteration, rls_iteration
from .network import CombinationMatrix
from .signals import (ColoredProcessParams, CyclostationaryProfile,
                      generate_node_signals, make_ground_truth)
from .theory import theoretical_trajectory

ALGORITHMS = ("rls", "drls")


def to_db(values) -> np.ndarray:
    """10*log10 with a -inf sentinel for non-positive entries."""
    values = np.asarray(values, dtype=float)
    out = np.full(values.shape, -np.inf)
    np.log10(values, out=out, where=values > 0)
    return 10.0 * out


@dataclass(frozen=True)
class EnsembleSpec:
    runs: int
    iterations: int
    master_seed: int
    algorithms: tuple[str, ...] = ("rls", "drls")

    def __post_init__(self):
        if self.runs < 1 or self.iterations < 1:
            raise ValueError("runs and iterations must be >= 1")
        unknown = set(self.algorithms) - set(ALGORITHMS)
        if unknown:
            raise ValueError(f"unknown algorithms: {sorted(unknown)}")


@dataclass
class Trajectory:
    """Per-iteration curves (linear units) plus replay metadata."""

    iterations: int
    master_seed: int
    msd_empirical: dict[str, np.ndarray]
    msd_theory: np.ndarray | None
    mean_err_norm_theory: np.ndarray | None
    mean_err_norm_empirical: np.ndarray | None = None
    w_star: np.ndarray | None = None
    snapshots: dict[str, dict] = field(default_factory=dict)
    excluded_runs: dict[str, list[tuple[int, int]]] = field(default_factory=dict)
    runs_effective: dict[str, int] = field(default_factory=dict)
    config_echo: dict | None = None
    wall_clock_s: float = 0.0


class ExcludedRunThresholdError(RuntimeError):
    """More than the allowed fraction of Monte Carlo runs blew up."""


def _default_chunk(K: int, N: int, L: int) -> int:
    # keep per-chunk signal storage around 100 MB
    return max(1, int(1.5e7 / (K * N * L)))


def run_ensemble(combiner: CombinationMatrix, noise_variances: np.ndarray,
                 profile, params: ColoredProcessParams, lam: float,
                 delta: float, spec: EnsembleSpec, *, guard: float = 1e12,
                 inverse_delta_init: bool = False, include_theory: bool = True,
                 collect_mean_error: bool = False, run_chunk: int | None = None,
                 max_excluded_fraction: float = 0.01, snapshot_every: int = 0,
                 config_echo: dict | None = None) -> Trajectory:
    """Simulate the selected algorithms over R independent runs.

    Empirical MSD_n averages ||w_{k,n} - w_star||^2 over surviving runs
    and nodes; w_star is drawn once and shared by all runs.  Runs whose
    inverse correlation matrix trips the magnitude guard are excluded
    entirely and reported; the experiment fails if more than
    `max_excluded_fraction` of runs are lost for any algorithm.
    """
    t0 = time.perf_counter()
    A = combiner.A
    K = A.shape[0]
    L = params.length
    N = spec.iterations
    R = spec.runs
    noise_variances = np.asarray(noise_variances, dtype=float)
    profiles = ([profile] * K if isinstance(profile, CyclostationaryProfile)
                else list(profile))
    if len(profiles) != K:
        raise ValueError(f"expected {K} node profiles, got {len(profiles)}")

    root = np.random.SeedSequence(spec.master_seed)
    children = root.spawn(1 + R)
    truth = make_ground_truth(L, children[0])
    sigma_z = np.sqrt(noise_variances)

    algos = [a for a in ALGORITHMS if a in spec.algorithms]
    dev_sq_sum = {a: np.zeros(N) for a in algos}
    err_sum = {a: np.zeros((N, K, L)) for a in algos} if collect_mean_error else None
    excluded: dict[str, list[tuple[int, int]]] = {a: [] for a in algos}
    snapshots: dict[str, dict] = {}  # first run's per-node weights

    chunk = run_chunk or _default_chunk(K, N, L)
    for start in range(0, R, chunk):
        run_ids = range(start, min(start + chunk, R))
        B = len(run_ids)
        X = np.empty((B, K, N, L))
        d = np.empty((B, K, N))
        for b, r in enumerate(run_ids):
            node_seqs = children[1 + r].spawn(K)
            for k in range(K):
                ss_u, ss_z = node_seqs[k].spawn(2)
                X[b, k], d[b, k] = generate_node_signals(
                    profiles[k], params, truth, sigma_z[k], N,
                    np.random.default_rng(ss_u), np.random.default_rng(ss_z))

        states = {}
        if "drls" in algos:
            states["drls"] = init_network(L, K, combiner, lam, delta,
                                          batch_shape=(B,), guard=None)
        if "rls" in algos:
            states["rls"] = init_state(L, delta, batch_shape=(B, K))

        bad = {a: np.zeros(B, dtype=bool) for a in algos}
        bad_at = {a: np.full(B, -1, dtype=int) for a in algos}
        dev_sq = {a: np.empty((B, N)) for a in algos}
        err_traj = ({a: np.empty((B, N, K, L)) for a in algos}
                    if collect_mean_error else None)

        for n in range(N):
            x_n = X[:, :, n, :]
            d_n = d[:, :, n]
            for a in algos:
                if a == "drls":
                    drls_iteration(states[a], x_n, d_n)
                    P = states[a].nodes.P
                    w = states[a].nodes.w
                else:
                    rls_iteration(states[a], x_n, d_n, lam, guard=None)
                    P = states[a].P
                    w = states[a].w
                with np.errstate(invalid="ignore"):
                    trip = np.abs(P).max(axis=(-3, -2, -1)) > guard
                    trip |= ~np.isfinite(P).all(axis=(-3, -2, -1))
                new_bad = trip & ~bad[a]
                if new_bad.any():
                    bad_at[a][new_bad] = n + 1
                    bad[a] |= new_bad
                dev = w - truth.w_star
                dev_sq[a][:, n] = np.einsum("bki,bki->b", dev, dev)
                if collect_mean_error:
                    err_traj[a][:, n] = dev
                if snapshot_every and start == 0 and (n + 1) % snapshot_every == 0:
                    snap = snapshots.setdefault(a, {"iteration": [], "weights": []})
                    snap["iteration"].append(n + 1)
                    snap["weights"].append(np.array(w[0]))

        # fixed-order (run-order) reduction, independent of chunk size
        for a in algos:
            for b, r in enumerate(run_ids):
                if bad[a][b]:
                    excluded[a].append((r, int(bad_at[a][b])))
                    continue
                dev_sq_sum[a] += dev_sq[a][b]
                if collect_mean_error:
                    err_sum[a] += err_traj[a][b]

    runs_effective = {a: R - len(excluded[a]) for a in algos}
    for a in algos:
        if len(excluded[a]) > max_excluded_fraction * R:
            raise ExcludedRunThresholdError(
                f"{a}: {len(excluded[a])} of {R} runs excluded "
                f"(> {max_excluded_fraction:.0%}); first: {excluded[a][:5]}")

    msd_empirical = {a: dev_sq_sum[a] / (runs_effective[a] * K) for a in algos}
    mean_err_norm_emp = None
    if collect_mean_error and algos:
        a = "drls" if "drls" in algos else algos[0]
        mean_err_norm_emp = np.linalg.norm(
            err_sum[a] / runs_effective[a], axis=(1, 2))

    msd_theory = mean_err_norm_theory = None
    if include_theory:
        theory = theoretical_trajectory(profiles, params, A, noise_variances,
                                        truth.w_star, lam, delta, N,
                                        inverse_delta_init=inverse_delta_init)
        msd_theory = theory.msd
        mean_err_norm_theory = theory.mean_err_norm

    return Trajectory(
        iterations=N, master_seed=spec.master_seed,
        msd_empirical=msd_empirical, msd_theory=msd_theory,
        mean_err_norm_theory=mean_err_norm_theory,
        mean_err_norm_empirical=mean_err_norm_emp,
        w_star=truth.w_star.copy(), snapshots=snapshots, excluded_runs=excluded,
        runs_effective=runs_effective, config_echo=config_echo,
        wall_clock_s=time.perf_counter() - t0,
    )


def compare_theory_empirical(traj: Trajectory, *, algorithm: str = "drls",
                             transient_window: tuple[int, int] = (50, 500),
                             steady_window: int = 500) -> dict:
    """Absolute dB deviation between theory and empirical MSD curves.

    Windows are iteration indices (1-based, inclusive); the steady-state
    window is the final `steady_window` iterations.
    """
    if traj.msd_theory is None or algorithm not in traj.msd_empirical:
        raise ValueError("trajectory must carry both curves")
    emp_db = to_db(traj.msd_empirical[algorithm])
    th_db = to_db(traj.msd_theory)
    dev = np.abs(emp_db - th_db)
    lo, hi = transient_window
    transient = dev[lo - 1:hi]
    steady = dev[-steady_window:]
    if transient.size == 0 or steady.size == 0:
        raise ValueError("comparison windows fall outside the trajectory")
    return {
        "transient_mean_abs_db": float(transient.mean()),
        "transient_max_abs_db": float(transient.max()),
        "steady_mean_abs_db": float(steady.mean()),
        "steady_max_abs_db": float(steady.max()),
    }


def detect_periodicity(curve: np.ndarray, T: int, *,
                       steady_window: int | None = None) -> float:
    """Fraction of steady-state fluctuation energy at period T and harmonics.

    Looks at the last `steady_window` samples (default: half the curve),
    truncated to a whole number of periods so 1/T falls on an exact FFT
    bin; the window must cover at least 3 periods.  A linear detrend
    removes residual convergence drift before the spectrum is taken.
    """
    curve = np.asarray(curve, dtype=float)
    window = steady_window if steady_window is not None else curve.size // 2
    if window > curve.size:
        raise ValueError("steady-state window longer than the curve")
    S = (window // T) * T
    if S < 3 * T:
        raise ValueError(f"window must cover >= 3 periods of T={T}")
    seg = detrend(curve[-S:], type="linear")
    spectrum = np.abs(np.fft.rfft(seg)) ** 2
    total = spectrum[1:].sum()
    # fluctuation at the level of float rounding is flat, not periodic
    floor = 1e-20 * S * max(1.0, float(np.mean(curve[-S:] ** 2)))
    if total <= floor:
        return 0.0
    k0 = S // T
    harmonics = np.arange(k0, spectrum.size, k0)
    return float(spectrum[harmonics].sum() / total)
