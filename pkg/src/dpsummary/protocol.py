"""In-process simulation of the private summarization protocol.

One aggregator and K owners exchange messages through method calls.  Each
epoch the aggregator broadcasts a private estimate of the mean summary hash,
every owner bids its best unsent point, and the auction decides which points
the aggregator obtains and which one joins the summary.
"""

import csv
import json
import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _numeric
from .auction import AuctionParams, AuctionState, Bid, choose_winner, receive, select_requests
from .data import DataError, Dataset
from .kernel import KernelParams, ObjectiveState
from .privacy import PrivacyLedger, compose, make_schedule, practical_schedule
from .release import ReleaseParams, h2
from .rff import hash_dataset, hash_points, sample_basis

log = logging.getLogger(__name__)

MODES = ("theory", "practical", "noise_off")
BID_FORMS = ("derived", "literal")
MAX_FAILURES = 3


@dataclass
class ProtocolConfig:
    p: int
    mode: str = "practical"
    d: int = 140
    gamma: float = 0.1
    seed: int = 0
    schedule: object = None
    bid_form: str = "derived"
    # carry MWEM marginals from one epoch's release into the next
    warm_start: bool = True
    seed_size: int = 10
    seed_scale: float = 1.0
    basis_seed: Optional[int] = None
    eps_target: float = 1.0
    delta_tilde: float = 1e-4
    events_per_iter: int = 2

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("p must be at least 1")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.bid_form not in BID_FORMS:
            raise ValueError(f"bid_form must be one of {BID_FORMS}, got {self.bid_form!r}")

    def build_schedule(self, K):
        if self.schedule is not None:
            return self.schedule
        if self.mode == "theory":
            return make_schedule(self.eps_target, self.delta_tilde, max(self.p, 2), self.d, K,
                                 events_per_iter=self.events_per_iter)
        return practical_schedule(self.p, self.d, K, eps_target=self.eps_target,
                                  delta_tilde=self.delta_tilde, events_per_iter=self.events_per_iter)


def seed_streams(seed):
    """Independent generators: (basis, seed set, release, auction)."""
    children = np.random.SeedSequence(seed).spawn(4)
    basis_seed = int(children[0].generate_state(1)[0])
    return basis_seed, *(np.random.default_rng(c) for c in children[1:])


def synthetic_seed_set(size, dim, scale, rng):
    return Dataset(scale * rng.standard_normal((size, dim)), dim)


def instance_parts(config, dim):
    """(basis, seed set) a run with this config uses, for baselines on the same instance."""
    basis_seed, seed_rng, _, _ = seed_streams(config.seed)
    if config.basis_seed is not None:
        basis_seed = config.basis_seed
    basis = sample_basis(config.gamma, config.d, dim, basis_seed)
    return basis, synthetic_seed_set(config.seed_size, dim, config.seed_scale, seed_rng)


def epoch_params(ell, schedule):
    """(epsilon, T) used by the epoch-``ell`` release."""
    return schedule.epoch(ell)


def exact_mean(H, d):
    H = np.asarray(H, dtype=np.float64)
    if H.shape[0] == 0:
        return np.zeros(d)
    return H.sum(axis=0) / H.shape[0]


def bid_coefficient(q):
    return q / (q + 1.0)


def bid_values(H, g_ell, g_tilde, ell, q, bid_form="derived"):
    """Bid value of each hashed point under the current broadcasts.

    derived: g~.h - q/(q+1) * g_l.h, an affine image of the hashed marginal
    gain.  literal: g_l.h - g~.h * l/(l+1).
    """
    val = _numeric.row_dots(H, g_tilde)
    summ = _numeric.row_dots(H, g_ell)
    if bid_form == "derived":
        return val - bid_coefficient(q) * summ
    return summ - val * (ell / (ell + 1.0))


class OwnerSim:
    """A data owner holding its points and their shared-basis hashes."""

    def __init__(self, owner_id, dataset, basis, tamper: Optional[Callable] = None):
        self.owner_id = owner_id
        self.dataset = dataset
        self.basis = basis
        self.hashes = hash_dataset(basis, dataset)
        self.sent = np.zeros(len(dataset), dtype=bool)
        self.tamper = tamper
        self.failures = 0
        self.banned = False

    @property
    def available(self):
        return int((~self.sent).sum())

    def deliver(self, point_id):
        self.sent[point_id] = True
        x = np.array(self.dataset.points[point_id])
        return x if self.tamper is None else np.asarray(self.tamper(x), dtype=np.float64)


def owner_bid(owner, g_ell, g_tilde, ell, q, bid_form="derived"):
    """Best unsent point of ``owner`` as a Bid, or None if it has nothing left."""
    if owner.available == 0:
        return None
    vals = bid_values(owner.hashes, g_ell, g_tilde, ell, q, bid_form)
    vals = np.where(owner.sent, -np.inf, vals)
    pid = int(np.argmax(vals))
    return Bid(owner.owner_id, float(vals[pid]), pid)


def verify_bid(point, claimed, g_ell, g_tilde, basis, ell, q, bid_form="derived", rtol=1e-6):
    h = hash_points(basis, point)
    recomputed = float(bid_values(h, g_ell, g_tilde, ell, q, bid_form)[0])
    return abs(recomputed - claimed.value) <= rtol * max(1.0, abs(claimed.value))


@dataclass
class EpochRecord:
    epoch: int
    winner_owner: int
    winner_point: int
    winner_value: float
    top_bid: float
    n_bids: int
    requested: int
    forced: int
    rejected: int
    exact_gain: float
    j_working: float
    mmd_sq: float
    accessed_total: int
    eps_owners: float


@dataclass
class ProtocolResult:
    summary: Dataset
    trace: list
    status: str
    selected: list
    accessed_total: int
    ledgers: dict
    schedule: object
    basis: object
    meta: dict = field(default_factory=dict)

    def composed(self, channel):
        return compose(self.ledgers[channel], self.schedule.delta_tilde)


TRACE_FIELDS = list(EpochRecord.__dataclass_fields__)


def fmt(x):
    """Shortest round-trip text for floats so reruns are byte-identical."""
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def write_trace_csv(trace, path):
    """One row per epoch record."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_FIELDS)
        for rec in trace:
            w.writerow([fmt(v) for v in asdict(rec).values()])


def run_metadata(result, config):
    cfg = {k: v for k, v in asdict(config).items() if k != "schedule"}
    dt = result.schedule.delta_tilde
    return {
        "config": cfg,
        "schedule": result.schedule.to_dict(),
        "status": result.status,
        "accessed_total": result.accessed_total,
        "summary_size": len(result.summary),
        "selected": [list(k) for k in result.selected],
        "ledgers": {c: led.to_dict(dt) for c, led in result.ledgers.items()},
        **{k: v for k, v in result.meta.items() if k != "status"},
    }


def write_run_metadata(result, config, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(run_metadata(result, config), fh, indent=2, sort_keys=True)
        fh.write("\n")


def run_protocol(owners, validation, config, seed_set=None, tamper=None):
    """Run all p epochs and return the summary without the seed set.

    ``owners`` are OwnerSplit objects.  ``seed_set`` overrides the
    synthetic seed set; ``tamper`` maps owner_id to a point-perturbing
    callable for verification experiments.
    """
    validation.require_nonempty("validation set")
    if not owners:
        raise DataError("need at least one owner")
    dim = validation.dim
    K = len(owners)
    schedule = config.build_schedule(K)
    _, _, release_rng, auction_rng = seed_streams(config.seed)
    basis, default_seed = instance_parts(config, dim)
    if seed_set is None:
        seed_set = default_seed
    tamper = tamper or {}
    sims = [OwnerSim(o.owner_id, o.dataset, basis, tamper.get(o.owner_id)) for o in owners]
    by_id = {s.owner_id: s for s in sims}
    if len(by_id) != K:
        raise DataError("owner ids must be unique")
    if sum(len(s.dataset) for s in sims) < config.p:
        log.warning("owners hold fewer than p=%d points; summary will be partial", config.p)

    ledgers = {c: PrivacyLedger(c) for c in ("owners", "validation", "seed")}
    noise_off = config.mode == "noise_off"
    d = basis.d
    eta = schedule.eta
    k_ev = schedule.events_per_iter

    Hv = hash_dataset(basis, validation)
    if noise_off:
        g_tilde = exact_mean(Hv, d)
    else:
        rel = h2(Hv, ReleaseParams(schedule.eps_v, schedule.T_v, eta), rng=release_rng,
                 events_per_iter=k_ev, tag="h2-validation")
        g_tilde = rel.vector
        ledgers["validation"].extend(rel.events)

    kp = KernelParams(config.gamma)
    working = ObjectiveState(validation, kp, seed_set.points)
    output = ObjectiveState(validation, kp)
    Hs = hash_dataset(basis, seed_set)
    params = AuctionParams(schedule.eps_auc, schedule.tau)
    state = AuctionState()
    pool_hashes = {}
    marginals = None
    trace, selected = [], []
    status = "complete"

    while len(selected) < config.p:
        ell = len(selected) + 1
        q = Hs.shape[0]
        if q == 0 or noise_off:
            g_ell = exact_mean(Hs, d)
        else:
            eps, T = epoch_params(ell, schedule)
            init = marginals if (config.warm_start and marginals is not None) else None
            rel = h2(Hs, ReleaseParams(eps, T, eta), rng=release_rng, init=init,
                     events_per_iter=k_ev, tag="h2-epoch")
            g_ell = rel.vector
            marginals = rel.marginals
            # before the first owner point joins, the input is the public seed set
            ledgers["seed" if len(selected) == 0 else "owners"].extend(rel.events)

        active = [s for s in sims if not s.banned and s.available > 0]
        bids = [b for b in (owner_bid(s, g_ell, g_tilde, ell, q, config.bid_form) for s in active)
                if b is not None]
        if not bids and not state.pool:
            status = "exhausted"
            log.info("all owners exhausted after %d epochs", ell - 1)
            break
        if not noise_off and state.rounds < params.tau and bids:
            ledgers["owners"].record(params.eps_auc, tag="auction-round")

        n_requested = n_forced = n_rejected = 0
        remaining = list(bids)
        first = True
        while remaining:
            _, requested, forced = select_requests(remaining, params, state, auction_rng,
                                                   count_choices=first)
            first = False
            n_requested += len(requested)
            n_forced += len(forced)
            cheaters = set()
            for b in requested:
                owner = by_id[b.owner_id]
                x = owner.deliver(b.point_id)
                state.accessed_total += 1
                state.sent_registry.add(b.key)
                if verify_bid(x, b, g_ell, g_tilde, basis, ell, q, config.bid_form):
                    receive(state, b, count=False)
                    pool_hashes[b.key] = hash_points(basis, x)
                else:
                    n_rejected += 1
                    owner.failures += 1
                    cheaters.add(b.owner_id)
                    if owner.failures >= MAX_FAILURES:
                        owner.banned = True
                        log.warning("owner %d removed after %d failed verifications",
                                    owner.owner_id, owner.failures)
            if not cheaters:
                break
            remaining = [b for b in remaining if b.owner_id not in cheaters and b.key not in state.sent_registry]

        def current_value(bid):
            h = pool_hashes[bid.key]
            return float(bid_values(h, g_ell, g_tilde, ell, q, config.bid_form)[0])

        winner = choose_winner(state, current_value)
        if winner is None:
            if any(not s.banned and s.available > 0 for s in sims):
                # every request failed verification; repeat the epoch with a fresh release
                continue
            status = "exhausted"
            break
        x = by_id[winner.owner_id].dataset.points[winner.point_id]
        gain = float(working.gains(x)[0])
        working.add(x)
        output.add(x)
        Hs = np.vstack([Hs, pool_hashes.pop(winner.key)])
        selected.append(winner.key)
        trace.append(EpochRecord(
            epoch=ell, winner_owner=winner.owner_id, winner_point=winner.point_id,
            winner_value=winner.value, top_bid=max(b.value for b in bids) if bids else float("nan"),
            n_bids=len(bids), requested=n_requested, forced=n_forced, rejected=n_rejected,
            exact_gain=gain, j_working=working.j, mmd_sq=output.mmd_sq,
            accessed_total=state.accessed_total,
            eps_owners=compose(ledgers["owners"], schedule.delta_tilde)[0],
        ))

    points = np.array([by_id[o].dataset.points[pid] for o, pid in selected]).reshape(-1, dim)
    meta = {
        "status": status,
        "K": K,
        "seed_set_size": len(seed_set),
        "exhausted_owners": [s.owner_id for s in sims if s.available == 0],
        "banned_owners": [s.owner_id for s in sims if s.banned],
        "basis": {"seed": basis.seed, "gamma": basis.gamma, "d": basis.d, "n": basis.n},
    }
    return ProtocolResult(Dataset(points, dim), trace, status, selected, state.accessed_total,
                          ledgers, schedule, basis, meta)
