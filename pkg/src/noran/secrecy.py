"""Capacity and secrecy-capacity formulas, plus the null-space AN baseline."""

import math
from dataclasses import dataclass

import numpy as np

from noran.channel import as_matrix, effective_gain
from noran.errors import ConstraintViolationError, NoNullSpaceError

__all__ = [
    "PowerAllocation",
    "SecrecyReport",
    "capacity_bob",
    "capacity_eve",
    "secrecy_capacity",
    "secrecy_from_gains",
    "an_feasible",
    "null_space_an",
]

BUDGET_SLACK = 1e-9
RANK_TOL = 1e-10


@dataclass(frozen=True)
class PowerAllocation:
    """Signal power ``sigma_u2`` and NORAN power ``sigma_k2`` under budget ``p_budget``.

    Construction does not validate, so infeasible points can be represented
    and reported; call :meth:`validate` where feasibility is required.
    """

    sigma_u2: float
    sigma_k2: float
    p_budget: float

    def violated_constraint(self):
        """Name of the first violated constraint, or None."""
        if not self.sigma_u2 + self.sigma_k2 <= self.p_budget + BUDGET_SLACK:
            return "budget"
        if not self.sigma_k2 >= 0:
            return "noise_nonneg"
        if not self.sigma_u2 >= 0:
            return "signal_nonneg"
        return None

    def validate(self):
        which = self.violated_constraint()
        if which == "budget":
            raise ConstraintViolationError(
                which,
                f"sigma_u2 + sigma_k2 = {self.sigma_u2 + self.sigma_k2!r} exceeds "
                f"the power budget {self.p_budget!r}",
            )
        if which == "noise_nonneg":
            raise ConstraintViolationError(which, f"sigma_k2 = {self.sigma_k2!r} is negative")
        if which == "signal_nonneg":
            raise ConstraintViolationError(which, f"sigma_u2 = {self.sigma_u2!r} is negative")
        return self

    @classmethod
    def full_signal(cls, p_budget):
        return cls(float(p_budget), 0.0, float(p_budget))


@dataclass(frozen=True)
class SecrecyReport:
    """Capacities in bits per channel use."""

    c_bob: float
    c_eve: float
    c_secrecy_raw: float
    c_secrecy: float
    cancellation: bool


def _check_noise(value, name):
    if not value > 0:
        raise ValueError(f"{name} must be positive, got {value!r}")


def capacity_bob(gain_h, alloc, sigma_n2, cancellation):
    """Bob's rate. With ``cancellation`` the NORAN term drops out of the SINR."""
    _check_noise(sigma_n2, "sigma_n2")
    if cancellation:
        sinr = gain_h * alloc.sigma_u2 / sigma_n2
    else:
        sinr = gain_h * alloc.sigma_u2 / (gain_h * alloc.sigma_k2 + sigma_n2)
    return math.log2(1.0 + sinr)


def capacity_eve(gain_g, alloc, sigma_e2):
    _check_noise(sigma_e2, "sigma_e2")
    sinr = gain_g * alloc.sigma_u2 / (gain_g * alloc.sigma_k2 + sigma_e2)
    return math.log2(1.0 + sinr)


def secrecy_from_gains(gain_h, gain_g, alloc, sigma_n2, sigma_e2, cancellation):
    c_bob = capacity_bob(gain_h, alloc, sigma_n2, cancellation)
    c_eve = capacity_eve(gain_g, alloc, sigma_e2)
    raw = c_bob - c_eve
    return SecrecyReport(c_bob, c_eve, raw, max(raw, 0.0), bool(cancellation))


def secrecy_capacity(ch, p, alloc, cancellation):
    """Secrecy report for realization ``ch`` sent along precoder ``p``."""
    return secrecy_from_gains(
        effective_gain(ch.h, p),
        effective_gain(ch.g, p),
        alloc,
        ch.sigma_n2,
        ch.sigma_e2,
        cancellation,
    )


def an_feasible(n_tx, n_rx):
    """Whether a generic ``n_rx x n_tx`` channel leaves room for orthogonal AN.

    A full-rank draw has a nontrivial kernel only when there are more
    transmit than receive antennas, so SISO and square MIMO never qualify.
    """
    if n_tx < 1 or n_rx < 1:
        raise ValueError("antenna counts must be >= 1")
    return n_tx > n_rx


def null_space_an(h, rng):
    """Unit-norm artificial-noise direction in the kernel of ``h``.

    The rank is computed explicitly (singular values above 1e-10), so
    rank-deficient channels are handled as well as wide ones. The direction
    is a random CN(0, I) combination of an orthonormal kernel basis.
    """
    h = as_matrix(h)
    _, sv, vh = np.linalg.svd(h)
    rank = int(np.sum(sv > RANK_TOL))
    basis = vh[rank:].conj().T
    if basis.shape[1] == 0:
        raise NoNullSpaceError(
            f"{h.shape[0]}x{h.shape[1]} channel of rank {rank} has a trivial null space"
        )
    w = basis @ rng.complex_normal(basis.shape[1])
    return w / np.linalg.norm(w)
