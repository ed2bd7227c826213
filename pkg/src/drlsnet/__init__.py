"""Diffusion RLS over adaptive networks with cyclostationary colored inputs.

Simulator for non-cooperative RLS and adapt-then-combine diffusion RLS,
deterministic transient models for the mean and mean-square weight error,
and a Monte Carlo harness comparing the two.
"""

__version__ = "0.1.0"
