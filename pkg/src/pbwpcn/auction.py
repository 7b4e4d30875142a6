"""Ascending clinching auction for the beacon's energy.

The beacon is the auctioneer: it raises a unit price by a fixed step until
aggregate demand no longer exceeds its energy budget.  Along the way each
bidder irrevocably clinches whatever the others' demand cannot absorb, and
at the closing round the leftover supply is split by proportional rationing
so the budget clears exactly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .errors import DomainError
from .model import PairChannel, SystemParams, throughput
from .coop import PairDerived, derive_pair, gamma, tau_of_e


@dataclass(frozen=True)
class AuctionConfig:
    reserve_price: float = 0.001
    step: float = 0.01
    max_rounds: int = 10_000_000

    def __post_init__(self):
        if self.reserve_price < 0.0:
            raise DomainError("reserve_price must be nonnegative")
        if self.step <= 0.0:
            raise DomainError("step must be positive")
        if self.max_rounds < 1:
            raise DomainError("max_rounds must be at least 1")


@dataclass
class AuctionState:
    round: int
    price: float
    bids: tuple[float, ...]
    clinch_cum: tuple[float, ...]
    concluded: bool = False
    pb_quit: bool = False


@dataclass
class AuctionOutcome:
    e_final: tuple[float, ...]
    tau_final: tuple[float, ...]
    payment: tuple[float, ...]
    ap_utility: tuple[float, ...]
    pb_utility: float
    rounds_used: int
    pb_quit: bool
    transcript: list = field(default_factory=list)

    def transcript_jsonl(self) -> str:
        return "\n".join(json.dumps(row) for row in self.transcript)


def best_response(
    params: SystemParams,
    ch: PairChannel,
    d: PairDerived,
    mu: float,
    z_hint: float | None = None,
) -> tuple[float, float]:
    """A bidder's utility-maximizing (charging time, energy demand) at price mu.

    Above the bidder's cap it drops out and keeps only its own AP's charging;
    below the cap it demands the point where marginal throughput value equals
    the price.
    """
    if mu < 0.0:
        raise DomainError(f"mu must be nonnegative, got {mu}")
    if mu >= d.alpha:
        sig = params.noise_w
        tau0 = (d.z_dag - 1.0) * sig / (
            (d.z_dag - 1.0) * sig + ch.g_pow * ch.g_pow * params.eta * params.p_ap
        )
        return tau0, 0.0
    e = gamma(params, ch, d, mu, z_hint=z_hint)
    return e / params.p_pb, e


def cumulative_clinch(e_b_tot: float, bids, i: int) -> float:
    """Energy bidder i is guaranteed: supply the others cannot absorb."""
    if not 0 <= i < len(bids):
        raise DomainError(f"bidder index {i} out of range")
    if any(b < 0.0 for b in bids):
        raise DomainError("bids must be nonnegative")
    others = math.fsum(b for j, b in enumerate(bids) if j != i)
    return max(0.0, e_b_tot - others)


def final_clinch_prr(e_b_tot: float, bids_last, bids_prev) -> list[float]:
    """Closing-round allocation under the proportional rationing rule.

    Each bidder keeps its final bid plus a share of the residual supply,
    proportional to how much it reduced its bid in the closing step.
    """
    if len(bids_last) != len(bids_prev):
        raise DomainError("bid vectors must have equal length")
    sum_last = math.fsum(bids_last)
    sum_prev = math.fsum(bids_prev)
    if not (sum_last <= e_b_tot < sum_prev):
        raise DomainError(
            f"supply not crossed: sum_last={sum_last}, sum_prev={sum_prev}, "
            f"budget={e_b_tot}"
        )
    if any(bl > bp * (1.0 + 1e-12) + 1e-300 for bl, bp in zip(bids_last, bids_prev)):
        raise DomainError("bids must be elementwise nonincreasing between rounds")
    residual = e_b_tot - sum_last
    if residual == 0.0:
        return list(bids_last)
    reduction = sum_prev - sum_last
    return [
        bl + (bp - bl) / reduction * residual
        for bl, bp in zip(bids_last, bids_prev)
    ]


def payment(mu_sequence, clinch_sequence) -> list[float]:
    """Per-bidder payment: each clinch increment priced at its round's price.

    ``clinch_sequence`` holds one cumulative-clinch vector per round, aligned
    with ``mu_sequence``.
    """
    if len(mu_sequence) != len(clinch_sequence) or not mu_sequence:
        raise DomainError("price and clinch sequences must align and be non-empty")
    n = len(clinch_sequence[0])
    pay = []
    for i in range(n):
        track = [row[i] for row in clinch_sequence]
        if any(b > a * (1.0 + 1e-12) + 1e-300 for b, a in zip(track, track[1:])):
            raise DomainError(f"clinch sequence for bidder {i} is not nondecreasing")
        terms = [mu_sequence[0] * track[0]]
        terms += [
            mu_sequence[t] * (track[t] - track[t - 1])
            for t in range(1, len(track))
        ]
        pay.append(math.fsum(terms))
    return pay


def run_auction(params: SystemParams, channels, cfg: AuctionConfig) -> AuctionOutcome:
    """Full auction loop with per-round transcript and payments."""
    deriveds = [derive_pair(params, ch, w) for ch, w in zip(channels, params.weights)]
    n = len(deriveds)
    budget = params.e_b_tot
    z_hints: list[float | None] = [None] * n

    def bids_at(mu):
        out = []
        for i, (ch, d) in enumerate(zip(channels, deriveds)):
            if mu >= d.alpha:
                out.append(0.0)
                continue
            _, e = best_response(params, ch, d, mu, z_hint=z_hints[i])
            z_hints[i] = 1.0 + d.x_const * e / (params.p_pb - e)
            out.append(e)
        return out

    transcript = []
    mu = cfg.reserve_price
    bids = bids_at(mu)
    if math.fsum(bids) <= budget:
        # demand never exceeds supply at the reserve price: no trade
        tau_final = tuple(
            best_response(params, ch, d, max(cfg.reserve_price, d.alpha))[0]
            for ch, d in zip(channels, deriveds)
        )
        transcript.append({"round": 0, "price": mu, "bids": bids, "quit": True})
        e_final = (0.0,) * n
        pay = (0.0,) * n
        ap_util = tuple(
            w * throughput(params, ch, t, 0.0)
            for w, ch, t in zip(params.weights, channels, tau_final)
        )
        return AuctionOutcome(
            e_final=e_final,
            tau_final=tau_final,
            payment=pay,
            ap_utility=ap_util,
            pb_utility=0.0,
            rounds_used=1,
            pb_quit=True,
            transcript=transcript,
        )

    mu_seq = [mu]
    clinch_rows = [[cumulative_clinch(budget, bids, i) for i in range(n)]]
    transcript.append(
        {"round": 0, "price": mu, "bids": bids, "clinch_cum": clinch_rows[0]}
    )
    prev_bids = bids
    t = 0
    while True:
        t += 1
        if t > cfg.max_rounds:
            raise RuntimeError(
                "max_rounds exceeded; demand should be monotone in price"
            )
        mu = cfg.reserve_price + t * cfg.step
        bids = bids_at(mu)
        if math.fsum(bids) > budget:
            row = [cumulative_clinch(budget, bids, i) for i in range(n)]
            mu_seq.append(mu)
            clinch_rows.append(row)
            transcript.append(
                {"round": t, "price": mu, "bids": bids, "clinch_cum": row}
            )
            prev_bids = bids
            continue
        final = final_clinch_prr(budget, bids, prev_bids)
        mu_seq.append(mu)
        clinch_rows.append(final)
        transcript.append(
            {"round": t, "price": mu, "bids": bids, "clinch_cum": final, "concluded": True}
        )
        break

    pay = payment(mu_seq, clinch_rows)
    e_final = tuple(final)
    tau_final = tuple(
        tau_of_e(params, ch, d, e)
        for ch, d, e in zip(channels, deriveds, e_final)
    )
    ap_util = tuple(
        w * throughput(params, ch, tf, e) - p
        for w, ch, tf, e, p in zip(params.weights, channels, tau_final, e_final, pay)
    )
    return AuctionOutcome(
        e_final=e_final,
        tau_final=tau_final,
        payment=tuple(pay),
        ap_utility=ap_util,
        pb_utility=math.fsum(pay),
        rounds_used=t + 1,
        pb_quit=False,
        transcript=transcript,
    )


def auction_allocation(params: SystemParams, channels, cfg: AuctionConfig):
    """Fast path to the final allocation only (no transcript, no payments).

    Demand is nonincreasing in the price, so the closing round is the first
    ladder index where aggregate demand drops to the budget; binary search
    finds it without walking every round.  Returns
    (e_final, tau_final, pb_quit, rounds_used).
    """
    deriveds = [derive_pair(params, ch, w) for ch, w in zip(channels, params.weights)]
    n = len(deriveds)
    budget = params.e_b_tot

    def bids_at(mu):
        out = []
        for ch, d in zip(channels, deriveds):
            out.append(0.0 if mu >= d.alpha else gamma(params, ch, d, mu))
        return out

    def demand(t):
        return math.fsum(bids_at(cfg.reserve_price + t * cfg.step))

    if demand(0) <= budget:
        tau_final = tuple(
            best_response(params, ch, d, max(cfg.reserve_price, d.alpha))[0]
            for ch, d in zip(channels, deriveds)
        )
        return (0.0,) * n, tau_final, True, 1

    alpha_max = max(d.alpha for d in deriveds)
    t_hi = max(1, math.ceil((alpha_max - cfg.reserve_price) / cfg.step))
    # smallest t with demand(t) <= budget
    lo, hi = 0, t_hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if demand(mid) > budget:
            lo = mid
        else:
            hi = mid
    t_close = hi
    final = final_clinch_prr(budget, bids_at(cfg.reserve_price + t_close * cfg.step),
                             bids_at(cfg.reserve_price + (t_close - 1) * cfg.step))
    tau_final = tuple(
        tau_of_e(params, ch, d, e) for ch, d, e in zip(channels, deriveds, final)
    )
    return tuple(final), tau_final, False, t_close + 1
