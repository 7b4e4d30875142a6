"""Round-based message-passing harness for both allocation algorithms.

Agents exchange scalars over an in-process bus: the beacon (agent 0) only
ever sees reported caps, knees and bids, and the APs (agents 1..N) never see
each other's channels or bids.  The bus rejects AP-to-AP delivery outright,
so a transcript doubles as an audit that the algorithms use only locally
available information.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum

from .auction import (
    AuctionConfig,
    AuctionOutcome,
    cumulative_clinch,
    final_clinch_prr,
    payment,
)
from .coop import (
    WaterfillResult,
    derive_pair,
    price_search,
    respond_to_price,
    tau_of_e,
)
from .errors import ProtocolError
from .model import Allocation, PairChannel, SystemParams, social_welfare, throughput

PB_ID = 0


class MessageKind(Enum):
    PRICE_ANNOUNCE = "PriceAnnounce"
    ALPHA_REPORT = "AlphaReport"
    ELIM_REPORT = "ElimReport"
    BID = "Bid"
    FINAL_ALLOCATION = "FinalAllocation"
    QUIT = "Quit"


@dataclass(frozen=True)
class Message:
    kind: MessageKind
    sender: int
    receiver: int
    payload: float | tuple
    round: int

    def to_record(self) -> dict:
        return {
            "kind": self.kind.value,
            "sender": self.sender,
            "receiver": self.receiver,
            "payload": self.payload,
            "round": self.round,
        }


class Bus:
    """Synchronous-round bus: append-only transcript, no AP-to-AP delivery."""

    def __init__(self):
        self.transcript: list[Message] = []

    def send(self, msg: Message) -> None:
        if msg.sender != PB_ID and msg.receiver != PB_ID:
            raise ProtocolError(
                f"AP {msg.sender} may not message AP {msg.receiver} directly"
            )
        self.transcript.append(msg)

    def transcript_jsonl(self) -> str:
        return "\n".join(json.dumps(m.to_record()) for m in self.transcript)


@dataclass
class APView:
    """What one AP knows: its own channel, weight and the shared constants."""

    agent_id: int
    params: SystemParams
    channel: PairChannel
    weight: float


@dataclass
class PBView:
    """What the beacon knows before any messages arrive."""

    e_b_tot: float


def make_views(params: SystemParams, channels) -> tuple[PBView, list[APView]]:
    pb = PBView(e_b_tot=params.e_b_tot)
    aps = [
        APView(agent_id=i + 1, params=params, channel=ch, weight=w)
        for i, (ch, w) in enumerate(zip(channels, params.weights))
    ]
    return pb, aps


class APAgent:
    """Bidder logic: derives its own constants, answers price announcements."""

    def __init__(self, view: APView):
        self.view = view
        self.derived = derive_pair(view.params, view.channel, view.weight)

    def coop_response(self, nu: float, is_marginal: bool = False) -> float:
        return respond_to_price(
            self.view.params, self.view.channel, self.derived, nu,
            is_marginal=is_marginal,
        )

    def auction_bid(self, mu: float) -> float:
        if mu >= self.derived.alpha:
            return 0.0
        return respond_to_price(self.view.params, self.view.channel, self.derived, mu)


def run_coop_protocol(
    pb_view: PBView, ap_views: list[APView]
) -> tuple[WaterfillResult, Bus]:
    """Water-filling price search executed as explicit message rounds."""
    bus = Bus()
    agents = [APAgent(v) for v in ap_views]
    params = ap_views[0].params
    channels = [v.channel for v in ap_views]

    # setup round: every AP reports its cap and knee to the beacon
    for agent in agents:
        aid = agent.view.agent_id
        bus.send(Message(MessageKind.ALPHA_REPORT, aid, PB_ID, agent.derived.alpha, 0))
        bus.send(Message(MessageKind.ELIM_REPORT, aid, PB_ID, agent.derived.e_lim, 0))

    deriveds = [a.derived for a in agents]
    round_counter = [0]

    def respond(nu, marginal):
        # the announcement carries the price and whether the receiver is the
        # marginal bidder at that price
        round_counter[0] += 1
        r = round_counter[0]
        bids = []
        for idx, agent in enumerate(agents):
            aid = agent.view.agent_id
            flag = idx in marginal
            bus.send(Message(MessageKind.PRICE_ANNOUNCE, PB_ID, aid, (nu, flag), r))
            bid = agent.coop_response(nu, is_marginal=flag)
            bus.send(Message(MessageKind.BID, aid, PB_ID, bid, r))
            bids.append(bid)
        return bids

    events: list = []
    nu, e_star, rounds = price_search(deriveds, pb_view.e_b_tot, respond, events)

    final_round = round_counter[0] + 1
    for agent, e in zip(agents, e_star):
        bus.send(
            Message(
                MessageKind.FINAL_ALLOCATION, PB_ID, agent.view.agent_id, e, final_round
            )
        )

    tau_star = tuple(
        tau_of_e(params, ch, d, e) for ch, d, e in zip(channels, deriveds, e_star)
    )
    alloc = Allocation.from_energy(params, tau_star, e_star)
    welfare = social_welfare(params, channels, alloc)
    result = WaterfillResult(
        nu=nu,
        e_star=tuple(e_star),
        tau_star=tau_star,
        welfare=welfare,
        rounds=rounds,
        transcript=events,
    )
    return result, bus


def run_auction_protocol(
    pb_view: PBView, ap_views: list[APView], cfg: AuctionConfig
) -> tuple[AuctionOutcome, Bus]:
    """Ascending clinching auction executed as explicit message rounds."""
    bus = Bus()
    agents = [APAgent(v) for v in ap_views]
    params = ap_views[0].params
    channels = [v.channel for v in ap_views]
    deriveds = [a.derived for a in agents]
    n = len(agents)
    budget = pb_view.e_b_tot

    def gather_bids(mu, r):
        bids = []
        for agent in agents:
            aid = agent.view.agent_id
            bus.send(Message(MessageKind.PRICE_ANNOUNCE, PB_ID, aid, mu, r))
            bid = agent.auction_bid(mu)
            bus.send(Message(MessageKind.BID, aid, PB_ID, bid, r))
            bids.append(bid)
        return bids

    transcript = []
    mu = cfg.reserve_price
    bids = gather_bids(mu, 0)
    if math.fsum(bids) <= budget:
        for agent in agents:
            bus.send(Message(MessageKind.QUIT, PB_ID, agent.view.agent_id, mu, 1))
        tau_final = tuple(tau_of_e(params, ch, d, 0.0) for ch, d in zip(channels, deriveds))
        ap_util = tuple(
            w * throughput(params, ch, t, 0.0)
            for w, ch, t in zip(params.weights, channels, tau_final)
        )
        transcript.append({"round": 0, "price": mu, "bids": bids, "quit": True})
        outcome = AuctionOutcome(
            e_final=(0.0,) * n,
            tau_final=tau_final,
            payment=(0.0,) * n,
            ap_utility=ap_util,
            pb_utility=0.0,
            rounds_used=1,
            pb_quit=True,
            transcript=transcript,
        )
        return outcome, bus

    mu_seq = [mu]
    clinch_rows = [[cumulative_clinch(budget, bids, i) for i in range(n)]]
    transcript.append({"round": 0, "price": mu, "bids": bids, "clinch_cum": clinch_rows[0]})
    prev_bids = bids
    t = 0
    while True:
        t += 1
        if t > cfg.max_rounds:
            raise RuntimeError("max_rounds exceeded; demand should be monotone in price")
        mu = cfg.reserve_price + t * cfg.step
        bids = gather_bids(mu, t)
        if math.fsum(bids) > budget:
            row = [cumulative_clinch(budget, bids, i) for i in range(n)]
            mu_seq.append(mu)
            clinch_rows.append(row)
            transcript.append({"round": t, "price": mu, "bids": bids, "clinch_cum": row})
            prev_bids = bids
            continue
        final = final_clinch_prr(budget, bids, prev_bids)
        mu_seq.append(mu)
        clinch_rows.append(final)
        transcript.append(
            {"round": t, "price": mu, "bids": bids, "clinch_cum": final, "concluded": True}
        )
        break

    for agent, e in zip(agents, final):
        bus.send(
            Message(MessageKind.FINAL_ALLOCATION, PB_ID, agent.view.agent_id, e, t + 1)
        )

    pay = payment(mu_seq, clinch_rows)
    e_final = tuple(final)
    tau_final = tuple(
        tau_of_e(params, ch, d, e) for ch, d, e in zip(channels, deriveds, e_final)
    )
    ap_util = tuple(
        w * throughput(params, ch, tf, e) - p
        for w, ch, tf, e, p in zip(params.weights, channels, tau_final, e_final, pay)
    )
    outcome = AuctionOutcome(
        e_final=e_final,
        tau_final=tau_final,
        payment=tuple(pay),
        ap_utility=ap_util,
        pb_utility=math.fsum(pay),
        rounds_used=t + 1,
        pb_quit=False,
        transcript=transcript,
    )
    return outcome, bus
