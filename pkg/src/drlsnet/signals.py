"""Cyclostationary colored input generation and exact second-order statistics.

The raw colored sequence u_n is AR(1) with unit stationary variance,

    u_n = rho * u_{n-1} + sqrt(1 - rho^2) * w_n,    w_n ~ N(0, 1),

and the regressor tap at lag i is the raw sample scaled by the periodic
amplitude of its own time index, x_{n-i} = sigma_x(n-i) * u_{n-i}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz
from scipy.signal import lfilter


@dataclass(frozen=True)
class CyclostationaryProfile:
    """Deterministic periodic amplitude sequence sigma_x(n) with period T.

    kinds:
      - "constant": sigma_x(n) = level
      - "pulsed": v_high for the first ceil(duty_cycle*T) samples of each
        period (shifted by `phase`), v_low for the rest
      - "sinusoidal": level * (1 + mod_depth * sin(2*pi*n/T))
    """

    kind: str = "constant"
    period: int = 1
    duty_cycle: float = 0.5
    v_low: float = 1.0
    v_high: float = 1.0
    level: float = 1.0
    mod_depth: float = 0.0
    phase: int = 0

    def __post_init__(self):
        if self.kind not in ("constant", "pulsed", "sinusoidal"):
            raise ValueError(f"unknown profile kind {self.kind!r}")
        if self.period < 1:
            raise ValueError("period must be a positive integer")
        if self.kind == "constant" and self.level <= 0:
            raise ValueError("constant level must be positive")
        if self.kind == "pulsed":
            if not 0 < self.duty_cycle < 1:
                raise ValueError("duty cycle must lie in (0, 1)")
            if not 0 < self.v_low < self.v_high:
                raise ValueError("need 0 < v_low < v_high")
        if self.kind == "sinusoidal":
            if self.level <= 0 or not 0 <= self.mod_depth < 1:
                raise ValueError("need level > 0 and 0 <= mod_depth < 1")


def sigma_at(profile: CyclostationaryProfile, n) -> np.ndarray | float:
    """Amplitude sigma_x(n); exactly period-T periodic, vectorized over n.

    Negative n is extended periodically so regressor taps before the
    first iteration are well defined.
    """
    n = np.asarray(n)
    if profile.kind == "constant":
        out = np.full(n.shape, profile.level)
    elif profile.kind == "pulsed":
        pos = (n - profile.phase) % profile.period
        high = pos < math.ceil(profile.duty_cycle * profile.period)
        out = np.where(high, profile.v_high, profile.v_low)
    else:
        out = profile.level * (1.0 + profile.mod_depth
                               * np.sin(2.0 * np.pi * (n % profile.period) / profile.period))
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ColoredProcessParams:
    """AR(1) correlation factor; the stationary variance is fixed at 1."""

    rho: float
    length: int  # filter length L

    def __post_init__(self):
        if not 0 <= self.rho < 1:
            raise ValueError("rho must lie in [0, 1)")
        if self.length < 1:
            raise ValueError("filter length must be >= 1")


@dataclass(frozen=True)
class GroundTruth:
    """Target weight vector with unit squared norm."""

    w_star: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w_star, dtype=float)
        if abs(w @ w - 1.0) > 1e-12:
            raise ValueError("ground truth must have unit squared norm")
        object.__setattr__(self, "w_star", w)
        self.w_star.setflags(write=False)


def make_ground_truth(L: int, seed) -> GroundTruth:
    """Standard-normal entries damped by 0.5**i, normalized to unit ||.||^2."""
    if L < 1:
        raise ValueError("L must be >= 1")
    rng = np.random.default_rng(seed)
    w = rng.standard_normal(L) * 0.5 ** np.arange(L)
    return GroundTruth(w / np.linalg.norm(w))


class NodeSignalState:
    """One node's colored sequence and the ring buffer forming regressors.

    The buffer is warmed with L stationary samples at times n0-L+1 .. n0
    so the first regressor (at n0, default 0) is already valid.
    """

    def __init__(self, params: ColoredProcessParams, rng: np.random.Generator,
                 start: int = 0):
        self.params = params
        L = params.length
        self.n = start
        # oldest-to-newest raw samples at times start-L+1 .. start
        self._u = np.empty(L)
        self._u[0] = rng.standard_normal()
        c = math.sqrt(1.0 - params.rho ** 2)
        for i in range(1, L):
            self._u[i] = params.rho * self._u[i - 1] + c * rng.standard_normal()
        self._times = np.arange(start - L + 1, start + 1)

    @property
    def last_sample(self) -> float:
        return float(self._u[-1])

    def advance(self, rng: np.random.Generator) -> float:
        """Generate u at time n+1 and push it into the buffer."""
        c = math.sqrt(1.0 - self.params.rho ** 2)
        u_next = self.params.rho * self._u[-1] + c * rng.standard_normal()
        self._u = np.roll(self._u, -1)
        self._u[-1] = u_next
        self._times = np.roll(self._times, -1)
        self._times[-1] = self.n + 1
        self.n += 1
        return u_next

    def regressor(self, profile: CyclostationaryProfile) -> np.ndarray:
        """x_n = [sigma_x(n)u_n, ..., sigma_x(n-L+1)u_{n-L+1}]."""
        scaled = sigma_at(profile, self._times) * self._u
        return scaled[::-1].copy()


def step_colored(state: NodeSignalState, rng: np.random.Generator) -> float:
    """Advance the AR(1) recursion one sample; returns u at the new time."""
    return state.advance(rng)


def emit_regressor(state: NodeSignalState, profile: CyclostationaryProfile) -> np.ndarray:
    return state.regressor(profile)


def emit_desired(x: np.ndarray, truth: GroundTruth, sigma_z: float,
                 rng: np.random.Generator) -> float:
    """d = x^T w_star + z with z ~ N(0, sigma_z^2) from the node's own stream."""
    return float(x @ truth.w_star) + sigma_z * rng.standard_normal()


def colored_autocorrelation(params: ColoredProcessParams) -> np.ndarray:
    """R_u with entries rho**|i-j| (unit-variance AR(1)); Toeplitz SPD."""
    return toeplitz(params.rho ** np.arange(params.length))


def input_covariance(profile: CyclostationaryProfile,
                     params: ColoredProcessParams, n: int) -> np.ndarray:
    """R_x(n) = Sigma_x(n) R_u Sigma_x(n), Sigma_x(n) = diag(sigma_x(n-i))."""
    s = sigma_at(profile, n - np.arange(params.length))
    return colored_autocorrelation(params) * np.outer(s, s)


def generate_node_signals(profile: CyclostationaryProfile,
                          params: ColoredProcessParams,
                          truth: GroundTruth, sigma_z: float,
                          n_iters: int,
                          rng_u: np.random.Generator,
                          rng_z: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized batch generation for one node over iterations 1..n_iters.

    Returns (X, d) with X[n-1] the regressor at iteration n, shape
    (n_iters, L), and d the desired responses, shape (n_iters,).  The AR
    recursion matches step_colored sample for sample; warm-up covers
    times 2-L .. 0 so X[0] is fully formed.
    """
    L = params.length
    times = np.arange(2 - L, n_iters + 1)
    innov = rng_u.standard_normal(times.size)
    c = math.sqrt(1.0 - params.rho ** 2)
    u0 = innov[0]  # stationary N(0,1) draw at the earliest time
    u_rest = lfilter([c], [1.0, -params.rho], innov[1:], zi=[params.rho * u0])[0]
    u = np.concatenate(([u0], u_rest))
    scaled = sigma_at(profile, times) * u
    # window j ends at time j+1; reversed so the newest tap comes first
    X = np.lib.stride_tricks.sliding_window_view(scaled, L)[:, ::-1]
    d = X @ truth.w_star + sigma_z * rng_z.standard_normal(n_iters)
    return np.ascontiguousarray(X), d
