"""Physical layer model: harvested energy, uplink throughput, social welfare.

Units convention
----------------
Noise power is stored in Watt (e.g. -80 dBm -> 1e-11 W) and the bandwidth in
MHz, so throughput comes out in Mbps.  With the default parameters
(bandwidth 0.1 MHz, weight 10 per Mbps) the product weight * bandwidth is 1,
which is the normalization that reproduces the published per-pair price caps.
The block length is one second, so energy in Joule and power in Watt coincide
over a block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

LN2 = math.log(2.0)


@dataclass(frozen=True)
class SystemParams:
    """Global constants shared by every AP-source pair.

    bandwidth_mhz : channel bandwidth in MHz (Mbps convention, see module doc)
    noise_w       : noise power in Watt
    eta           : energy conversion efficiency, in (0, 1)
    p_ap          : transmit power of each AP, Watt
    p_pb          : per-band transmit power of the power beacon, Watt
    weights       : per-pair gain per unit throughput (utility per Mbps)
    e_b_tot       : total energy budget of the power beacon, Joule
    """

    bandwidth_mhz: float
    noise_w: float
    eta: float
    p_ap: float
    p_pb: float
    weights: tuple[float, ...]
    e_b_tot: float

    def __post_init__(self):
        if not 0.0 < self.eta < 1.0:
            raise DomainError(f"eta must be in (0, 1), got {self.eta}")
        for name in ("bandwidth_mhz", "noise_w", "p_ap", "p_pb"):
            if getattr(self, name) <= 0.0:
                raise DomainError(f"{name} must be positive")
        if len(self.weights) == 0 or any(w <= 0.0 for w in self.weights):
            raise DomainError("weights must be positive and non-empty")
        if self.e_b_tot < 0.0:
            raise DomainError("e_b_tot must be nonnegative")
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    @property
    def n_pairs(self) -> int:
        return len(self.weights)


@dataclass(frozen=True)
class PairChannel:
    """Equivalent power gains of one AP-source pair.

    g_pow : AP-to-source channel power gain
    k_pow : beacon-to-source gain, the squared norm of the MRT channel vector
    """

    g_pow: float
    k_pow: float

    def __post_init__(self):
        if self.g_pow <= 0.0:
            raise DomainError("g_pow must be positive")
        if self.k_pow < 0.0:
            raise DomainError("k_pow must be nonnegative")


@dataclass(frozen=True)
class Allocation:
    """A feasible time/energy split for all pairs.

    tau       : AP charging-time fractions, one per pair
    tau_prime : beacon charging-time fractions
    e_pb      : beacon energy per pair, e_pb[i] = tau_prime[i] * p_pb
    """

    tau: tuple[float, ...]
    tau_prime: tuple[float, ...]
    e_pb: tuple[float, ...]

    def __post_init__(self):
        n = len(self.tau)
        if len(self.tau_prime) != n or len(self.e_pb) != n:
            raise DomainError("tau, tau_prime and e_pb must have equal length")
        for t, tp in zip(self.tau, self.tau_prime):
            if not (0.0 <= tp <= t < 1.0):
                raise DomainError(
                    f"need 0 <= tau_prime <= tau < 1, got tau={t}, tau_prime={tp}"
                )
        if any(e < 0.0 for e in self.e_pb):
            raise DomainError("e_pb must be nonnegative")

    @classmethod
    def from_energy(cls, params: SystemParams, tau, e_pb) -> "Allocation":
        """Build an allocation from charging times and beacon energies."""
        tau = tuple(float(t) for t in tau)
        e_pb = tuple(float(e) for e in e_pb)
        tau_prime = tuple(e / params.p_pb for e in e_pb)
        alloc = cls(tau=tau, tau_prime=tau_prime, e_pb=e_pb)
        budget = math.fsum(e_pb)
        if budget > params.e_b_tot * (1.0 + 1e-9) + 1e-12:
            raise DomainError(
                f"total beacon energy {budget} exceeds budget {params.e_b_tot}"
            )
        return alloc


def harvested_energy(
    params: SystemParams, ch: PairChannel, tau: float, tau_prime: float
) -> float:
    """Energy collected by one source during the downlink charging phase."""
    if not (0.0 <= tau < 1.0 and 0.0 <= tau_prime < 1.0):
        raise DomainError("tau and tau_prime must lie in [0, 1)")
    return params.eta * (tau * params.p_ap * ch.g_pow + tau_prime * params.p_pb * ch.k_pow)


def throughput(params: SystemParams, ch: PairChannel, tau: float, e_pb: float) -> float:
    """Achievable uplink rate in Mbps for one pair.

    The source spends fraction ``tau`` charging and the rest transmitting
    with all harvested energy; ``e_pb`` is the beacon energy allotted to it.
    """
    if not 0.0 < tau < 1.0:
        raise DomainError(f"tau must lie in (0, 1), got {tau}")
    if e_pb < 0.0 or e_pb > tau * params.p_pb * (1.0 + 1e-12):
        raise DomainError(f"e_pb must lie in [0, tau * p_pb], got {e_pb}")
    harvested = params.eta * (tau * params.p_ap * ch.g_pow + e_pb * ch.k_pow)
    snr = ch.g_pow * harvested / ((1.0 - tau) * params.noise_w)
    # log1p keeps precision when the SNR term is tiny
    return (1.0 - tau) * params.bandwidth_mhz * math.log1p(snr) / LN2


def social_welfare(params: SystemParams, channels, alloc: Allocation) -> float:
    """Weighted sum-throughput over all pairs."""
    if len(channels) != len(alloc.tau) or len(channels) != len(params.weights):
        raise DomainError("channels, weights and allocation sizes differ")
    total = 0.0
    for lam, ch, tau, e in zip(params.weights, channels, alloc.tau, alloc.e_pb):
        if tau == 0.0:
            continue  # no charging time, zero rate
        total += lam * throughput(params, ch, tau, e)
    return total
