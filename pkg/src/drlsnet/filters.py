"""RLS and diffusion RLS (adapt-then-combine) filter updates.

All operations broadcast over arbitrary leading batch dimensions: a state
with w of shape (..., L) and P of shape (..., L, L) advances every filter
in the batch at once.  A single node is the degenerate case with no
leading dimensions; the network simulator uses a leading (runs, K) batch.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .network import CombinationMatrix


class NumericalBlowupError(RuntimeError):
    """Inverse-correlation matrix exceeded the configured magnitude guard."""

    def __init__(self, msg: str, mask: np.ndarray | None = None):
        super().__init__(msg)
        self.mask = mask  # leading-dims boolean mask of offending filters


@dataclass
class NodeFilterState:
    """Weight estimate w, inverse correlation matrix P, scratch estimate psi."""

    w: np.ndarray   # (..., L)
    P: np.ndarray   # (..., L, L)
    psi: np.ndarray = field(default=None)  # type: ignore[assignment]
    psi_fresh: bool = False

    @property
    def length(self) -> int:
        return self.w.shape[-1]


def init_state(L: int, delta: float, batch_shape: tuple[int, ...] = ()) -> NodeFilterState:
    """w = 0, P = delta^-1 * I; delta must be positive."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    w = np.zeros(batch_shape + (L,))
    P = np.broadcast_to(np.eye(L) / delta, batch_shape + (L, L)).copy()
    return NodeFilterState(w=w, P=P)


def update_inverse_correlation(P: np.ndarray, x: np.ndarray, lam: float,
                               guard: float | None = 1e12) -> np.ndarray:
    """Rank-one inverse update so that P' is the inverse of lam*Phi + x x^T.

    P' = lam^-1 (P - lam^-1 P x x^T P / (1 + lam^-1 x^T P x)), symmetrized.
    The guard flags entries blowing past the configured magnitude, which
    happens when the input power stays tiny for ~lam^-1 samples.
    """
    Px = np.einsum("...ij,...j->...i", P, x)
    denom = lam + np.einsum("...i,...i->...", x, Px)  # lam * (1 + x'Px/lam)
    Pnew = (P - np.einsum("...i,...j->...ij", Px, Px) / denom[..., None, None]) / lam
    Pnew = 0.5 * (Pnew + np.swapaxes(Pnew, -1, -2))
    if guard is not None:
        mags = np.abs(Pnew).max(axis=(-1, -2))
        if np.any(mags > guard):
            raise NumericalBlowupError(
                f"|P| exceeded guard {guard:g} (max {mags.max():.3e})",
                mask=np.asarray(mags > guard),
            )
    return Pnew


def adapt(state: NodeFilterState, x: np.ndarray, d: np.ndarray, lam: float,
          guard: float | None = 1e12) -> np.ndarray:
    """Local RLS step: prior error, P update, intermediate estimate psi.

    Returns the pre-update errors e = d - x^T w.
    """
    e = d - np.einsum("...i,...i->...", x, state.w)
    state.P = update_inverse_correlation(state.P, x, lam, guard=guard)
    gain = np.einsum("...ij,...j->...i", state.P, x)
    state.psi = state.w + gain * e[..., None]
    state.psi_fresh = True
    return e


def rls_iteration(state: NodeFilterState, x: np.ndarray, d: np.ndarray, lam: float,
                  guard: float | None = 1e12) -> np.ndarray:
    """Non-cooperative RLS: adapt and keep psi as the new weight estimate."""
    e = adapt(state, x, d, lam, guard=guard)
    state.w = state.psi
    state.psi_fresh = False
    return e


@dataclass
class DrlsNetworkState:
    """All K node filters stacked on the trailing batch axis, plus A."""

    nodes: NodeFilterState      # batch shape (..., K)
    combiner: CombinationMatrix
    lam: float
    delta: float
    guard: float | None = 1e12

    def __post_init__(self):
        if not 0.9 <= self.lam < 1:
            raise ValueError("forgetting factor must lie in [0.9, 1)")
        if self.delta <= 0:
            raise ValueError("delta must be positive")


def init_network(L: int, K: int, combiner: CombinationMatrix, lam: float,
                 delta: float, batch_shape: tuple[int, ...] = (),
                 guard: float | None = 1e12) -> DrlsNetworkState:
    nodes = init_state(L, delta, batch_shape=batch_shape + (K,))
    return DrlsNetworkState(nodes=nodes, combiner=combiner, lam=lam,
                            delta=delta, guard=guard)


def combine(network: DrlsNetworkState) -> np.ndarray:
    """ATC combination: w_k = sum_l a_{lk} psi_l.  Requires fresh psi."""
    if not network.nodes.psi_fresh:
        raise RuntimeError("combine called without a fresh adapt step")
    network.nodes.w = np.einsum("lk,...li->...ki", network.combiner.A,
                                network.nodes.psi)
    network.nodes.psi_fresh = False
    return network.nodes.w


def drls_iteration(network: DrlsNetworkState, x: np.ndarray,
                   d: np.ndarray) -> np.ndarray:
    """One ATC round: adapt every node on its own (x, d), then combine.

    x has shape (..., K, L) and d shape (..., K); returns the per-node
    pre-adaptation errors.
    """
    K = network.combiner.A.shape[0]
    if x.shape[-2] != K or d.shape[-1] != K:
        raise ValueError(f"expected one sample per node (K={K})")
    e = adapt(network.nodes, x, d, network.lam, guard=network.guard)
    combine(network)
    return e
