"""Channel generation and desk-scale Monte Carlo sweeps.

Channels are quasi-static flat Rayleigh with a distance path-loss of
1e-3 * d^-zeta (30 dB attenuation at 1 m).  Draws use counter-based Philox
substreams keyed by (seed, trial, pair), so results are reproducible and
adding trials or pairs never reshuffles earlier draws.
"""

from __future__ import annotations

import dataclasses
import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .auction import AuctionConfig, auction_allocation, run_auction
from .coop import derive_pair, tau_of_e, waterfill
from .errors import DomainError
from .model import PairChannel, SystemParams, throughput


def table_params(e_b_tot: float = 1.0, n_pairs: int = 3) -> SystemParams:
    """Default system constants (Mbps units convention, see model docs)."""
    return SystemParams(
        bandwidth_mhz=0.1,
        noise_w=1e-11,
        eta=0.5,
        p_ap=1.0,
        p_pb=2.0,
        weights=(10.0,) * n_pairs,
        e_b_tot=e_b_tot,
    )


# the fixed 3-pair channel realization used for the single-instance figures
PAPER_G = (0.0446e-5, 0.1569e-5, 0.8628e-5)
PAPER_K = (0.1616e-4, 0.6486e-4, 0.4379e-4)


def load_paper_instance(e_b_tot: float = 1.0):
    """The fixed 3-pair instance with the default constants."""
    params = table_params(e_b_tot=e_b_tot, n_pairs=3)
    channels = [PairChannel(g, k) for g, k in zip(PAPER_G, PAPER_K)]
    return params, channels


@dataclass(frozen=True)
class ExperimentConfig:
    n_pairs: int = 3
    d_ap_src: float = 10.0
    d_pb_src: float = 10.0
    pathloss_zeta: float = 2.0
    antennas_m: int = 4
    trials: int = 1000
    seed: int = 0
    e_b_tot_grid: tuple[float, ...] = (0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0)
    protocol: str = "both"  # coop | auction | both
    output_path: str | None = None
    reserve_price: float = 0.001
    price_step: float = 0.01

    def __post_init__(self):
        if not 2.0 <= self.pathloss_zeta <= 5.0:
            raise DomainError("pathloss_zeta must lie in [2, 5]")
        if self.trials < 1 or self.antennas_m < 1 or self.n_pairs < 1:
            raise DomainError("trials, antennas_m and n_pairs must be >= 1")
        if self.protocol not in ("coop", "auction", "both"):
            raise DomainError(f"unknown protocol {self.protocol!r}")
        if any(e < 0.0 for e in self.e_b_tot_grid):
            raise DomainError("e_b_tot_grid entries must be nonnegative")


def pathloss(distance: float, zeta: float) -> float:
    return 1e-3 * distance ** (-zeta)


def draw_channels(cfg: ExperimentConfig, trial: int) -> list[PairChannel]:
    """One Rayleigh-fading realization for all pairs of a trial."""
    l_ap = pathloss(cfg.d_ap_src, cfg.pathloss_zeta)
    l_pb = pathloss(cfg.d_pb_src, cfg.pathloss_zeta)
    channels = []
    for pair in range(cfg.n_pairs):
        rng = np.random.Generator(
            np.random.Philox(np.random.SeedSequence((cfg.seed, trial, pair)))
        )
        h = rng.standard_normal(2)
        g = l_ap * 0.5 * float(h @ h)
        hk = rng.standard_normal(2 * cfg.antennas_m)
        k = l_pb * 0.5 * float(hk @ hk)
        channels.append(PairChannel(g_pow=g, k_pow=k))
    return channels


@dataclass
class SweepRecord:
    e_b_tot: float
    mean_e_coop: float
    mean_e_auction: float
    mean_tau_coop: float
    mean_tau_auction: float
    welfare_coop: float
    welfare_auction: float
    welfare_nopb: float
    trials: int


def _nopb_welfare(params: SystemParams, channels, deriveds) -> float:
    return math.fsum(
        w * throughput(params, ch, tau_of_e(params, ch, d, 0.0), 0.0)
        for w, ch, d in zip(params.weights, channels, deriveds)
    )


def sweep(cfg: ExperimentConfig) -> list[SweepRecord]:
    """Monte Carlo means over the budget grid; writes CSVs when configured."""
    base = table_params(n_pairs=cfg.n_pairs)
    auc_cfg = AuctionConfig(reserve_price=cfg.reserve_price, step=cfg.price_step)
    run_coop = cfg.protocol in ("coop", "both")
    run_auc = cfg.protocol in ("auction", "both")

    all_channels = [draw_channels(cfg, t) for t in range(cfg.trials)]
    records = []
    for budget in cfg.e_b_tot_grid:
        params = dataclasses.replace(base, e_b_tot=budget)
        e_coop, e_auc, t_coop, t_auc = [], [], [], []
        w_coop, w_auc, w_nopb = [], [], []
        for channels in all_channels:
            deriveds = [
                derive_pair(params, ch, w)
                for ch, w in zip(channels, params.weights)
            ]
            w_nopb.append(_nopb_welfare(params, channels, deriveds))
            if run_coop:
                res = waterfill(params, channels)
                e_coop.extend(res.e_star)
                t_coop.extend(res.tau_star)
                w_coop.append(res.welfare)
            if run_auc:
                e_fin, tau_fin, _, _ = auction_allocation(params, channels, auc_cfg)
                e_auc.extend(e_fin)
                t_auc.extend(tau_fin)
                # payments cancel between bidders and the auctioneer, so the
                # aggregate welfare is just the weighted sum-throughput
                w_auc.append(
                    math.fsum(
                        w * throughput(params, ch, t, e)
                        for w, ch, t, e in zip(
                            params.weights, channels, tau_fin, e_fin
                        )
                    )
                )
        def mean(values):
            if not values:
                return float("nan")
            return math.fsum(values) / len(values)

        records.append(
            SweepRecord(
                e_b_tot=budget,
                mean_e_coop=mean(e_coop),
                mean_e_auction=mean(e_auc),
                mean_tau_coop=mean(t_coop),
                mean_tau_auction=mean(t_auc),
                welfare_coop=mean(w_coop),
                welfare_auction=mean(w_auc),
                welfare_nopb=mean(w_nopb),
                trials=cfg.trials,
            )
        )

    if cfg.output_path is not None:
        write_sweep_csvs(cfg, records)
    return records


def _atomic_write(path: str, text: str) -> None:
    # write to a sibling temp file and rename, so failures leave no partial file
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _csv(rows) -> str:
    def fmt(v):
        if isinstance(v, float):
            return repr(v)  # shortest round-trip decimal
        return str(v)

    return "\n".join(",".join(fmt(v) for v in row) for row in rows) + "\n"


def write_sweep_csvs(cfg: ExperimentConfig, records) -> list[str]:
    """fig5 (per-pair means) and fig6 (welfare) data files."""
    outdir = cfg.output_path
    header5 = [
        "e_b_tot", "mean_e_coop", "mean_e_auction",
        "mean_tau_coop", "mean_tau_auction", "trials",
    ]
    rows5 = [header5] + [
        [r.e_b_tot, r.mean_e_coop, r.mean_e_auction,
         r.mean_tau_coop, r.mean_tau_auction, r.trials]
        for r in records
    ]
    header6 = ["e_b_tot", "welfare_coop", "welfare_auction", "welfare_nopb", "trials"]
    rows6 = [header6] + [
        [r.e_b_tot, r.welfare_coop, r.welfare_auction, r.welfare_nopb, r.trials]
        for r in records
    ]
    paths = []
    for name, rows in (("fig5_means.csv", rows5), ("fig6_welfare.csv", rows6)):
        path = os.path.join(outdir, name)
        _atomic_write(path, _csv(rows))
        paths.append(path)
    return paths


def write_instance_csvs(outdir: str, budget_grid=None) -> list[str]:
    """fig3 (convergence traces) and fig4 (allocation vs budget) data files
    for the fixed 3-pair instance."""
    if budget_grid is None:
        budget_grid = [round(0.2 * k, 10) for k in range(0, 18)]

    params, channels = load_paper_instance(e_b_tot=1.0)
    auc_cfg = AuctionConfig()

    coop = waterfill(params, channels)
    auction = run_auction(params, channels, auc_cfg)
    n = params.n_pairs
    rows3 = [["scenario", "round", "price"] + [f"bid_{i+1}" for i in range(n)] + ["aggregate"]]
    for row in coop.transcript:
        if "round" not in row:
            continue
        rows3.append(["coop", row["round"], row["nu"]] + list(row["bids"]) + [row["agg"]])
    for row in auction.transcript:
        bids = row.get("bids", [])
        rows3.append(
            ["auction", row["round"], row["price"]] + list(bids) + [math.fsum(bids)]
        )

    rows4e = [["e_b_tot"] + [f"e_coop_{i+1}" for i in range(n)] + [f"e_auction_{i+1}" for i in range(n)]]
    rows4t = [["e_b_tot"] + [f"tau_coop_{i+1}" for i in range(n)] + [f"tau_auction_{i+1}" for i in range(n)]]
    for budget in budget_grid:
        p = dataclasses.replace(params, e_b_tot=budget)
        res = waterfill(p, channels)
        e_fin, tau_fin, _, _ = auction_allocation(p, channels, auc_cfg)
        rows4e.append([budget] + list(res.e_star) + list(e_fin))
        rows4t.append([budget] + list(res.tau_star) + list(tau_fin))

    paths = []
    for name, rows in (
        ("fig3_convergence.csv", rows3),
        ("fig4_energy.csv", rows4e),
        ("fig4_time.csv", rows4t),
    ):
        path = os.path.join(outdir, name)
        _atomic_write(path, _csv(rows))
        paths.append(path)
    return paths
