"""DP primitives, composition accounting and the epsilon schedules."""

import math
import threading
from dataclasses import asdict, dataclass, field
from typing import NamedTuple

import numpy as np

from ._numeric import _categorical_from_uniform, _laplace_from_uniform


@dataclass(frozen=True)
class PrivacyEvent:
    epsilon: float
    delta: float = 0.0
    tag: str = ""

    def __post_init__(self):
        if not self.epsilon >= 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")


class PrivacyLedger:
    """Append-only log of (epsilon, delta) releases on one protected channel."""

    def __init__(self, channel=""):
        self.channel = channel
        self._events = []
        self._lock = threading.Lock()

    def record(self, epsilon, delta=0.0, tag="", count=1):
        ev = PrivacyEvent(float(epsilon), float(delta), tag)
        with self._lock:
            self._events.extend([ev] * int(count))

    def extend(self, events):
        events = list(events)
        with self._lock:
            self._events.extend(events)

    @property
    def events(self):
        with self._lock:
            return tuple(self._events)

    def __len__(self):
        return len(self._events)

    def counts_by_tag(self):
        out = {}
        for ev in self.events:
            out[ev.tag] = out.get(ev.tag, 0) + 1
        return out

    def to_dict(self, delta_tilde):
        """Run-length encoded events plus composed totals, JSON-ready."""
        runs = []
        for ev in self.events:
            if runs and runs[-1]["epsilon"] == ev.epsilon and runs[-1]["delta"] == ev.delta \
                    and runs[-1]["tag"] == ev.tag:
                runs[-1]["count"] += 1
            else:
                runs.append({**asdict(ev), "count": 1})
        eps, delta = compose(self, delta_tilde)
        return {
            "channel": self.channel,
            "n_events": len(self),
            "events": runs,
            "delta_tilde": delta_tilde,
            "eps_total": eps,
            "delta_total": delta,
            "bounds": compose_terms(self, delta_tilde)._asdict(),
        }


class CompositionTerms(NamedTuple):
    basic: float
    advanced: float  # log(1/delta~) branch
    advanced_e: float  # log(e + sqrt(sum 2 eps^2)/delta~) branch

    @property
    def best(self):
        return min(self)


def _eps_array(events):
    if isinstance(events, PrivacyLedger):
        events = events.events
    eps, deltas = [], []
    for ev in events:
        if isinstance(ev, PrivacyEvent):
            eps.append(ev.epsilon)
            deltas.append(ev.delta)
        else:
            eps.append(float(ev))
            deltas.append(0.0)
    return np.asarray(eps, dtype=np.float64), np.asarray(deltas, dtype=np.float64)


def _check_delta_tilde(delta_tilde):
    if not 0.0 < delta_tilde <= 1.0 / math.e:
        raise ValueError(f"delta_tilde must lie in (0, 1/e], got {delta_tilde}")


def compose_terms(events, delta_tilde):
    """The three Kairouz-Oh-Viswanath bounds for heterogeneous composition."""
    _check_delta_tilde(delta_tilde)
    eps, _ = _eps_array(events)
    if eps.size == 0:
        return CompositionTerms(0.0, 0.0, 0.0)
    basic = math.fsum(eps)
    drift = math.fsum(np.expm1(eps) * eps / (np.exp(eps) + 1.0))
    sq = math.fsum(2.0 * eps * eps)
    adv = drift + math.sqrt(sq * math.log(1.0 / delta_tilde))
    adv_e = drift + math.sqrt(sq * math.log(math.e + math.sqrt(sq) / delta_tilde))
    return CompositionTerms(basic, adv, adv_e)


def compose(events, delta_tilde):
    """(eps_total, delta_total) under k-fold adaptive composition.

    ``events`` is a PrivacyLedger, a sequence of PrivacyEvent, or bare
    epsilons (delta 0).
    """
    terms = compose_terms(events, delta_tilde)
    _, deltas = _eps_array(events)
    delta_total = 1.0 - (1.0 - delta_tilde) * float(np.prod(1.0 - deltas))
    return terms.best, delta_total


# ---------------------------------------------------------------------------
# primitives


def laplace(scale, rng):
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale}")
    return _laplace_from_uniform(rng.random(), float(scale))


def exp_mech(scores, epsilon, rng):
    """Index i with probability proportional to exp(epsilon * scores[i])."""
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1 or s.size == 0:
        raise ValueError("scores must be a non-empty vector")
    if not np.all(np.isfinite(s)):
        raise ValueError("scores must be finite")
    if epsilon < 0:
        raise ValueError("epsilon must be non-negative")
    weights = np.exp(epsilon * (s - s.max()))
    return int(_categorical_from_uniform(weights, rng.random()))


# ---------------------------------------------------------------------------
# schedules


@dataclass(frozen=True)
class Schedule:
    """Per-release epsilons and iteration counts for one protocol run.

    ``mode='theory'``: T iterations and eps/sqrt(c*T*l*log(1/dt)*log p) at
    every epoch l.  ``mode='practical'``: T_init iterations at l=1 with
    ``eps_first``, then T_subs iterations at eps_subs_base/sqrt(p*T_subs).
    """

    mode: str
    p: int
    d: int
    eps_v: float
    T_v: int
    eps_auc: float
    tau: int
    eta: float
    delta_tilde: float
    eps_target: float
    T: int
    epoch_constant: float = 36.0
    T_subs: int = 5
    eps_first: float = 0.05
    eps_subs_base: float = 0.01
    events_per_iter: int = 2
    meta: dict = field(default_factory=dict, compare=False)

    def epoch(self, ell):
        """(epsilon, T) for the h2 call of epoch ``ell`` (1-based)."""
        if ell < 1:
            raise ValueError("epochs are numbered from 1")
        if self.mode == "theory":
            denom = self.epoch_constant * self.T * ell * math.log(1.0 / self.delta_tilde) * math.log(self.p)
            return self.eps_target / math.sqrt(denom), self.T
        if ell == 1:
            return self.eps_first, self.T
        return self.eps_subs_base / math.sqrt(self.p * self.T_subs), self.T_subs

    def to_dict(self):
        out = asdict(self)
        out.pop("meta")
        out.update(self.meta)
        return out


def default_tau(K):
    # floor keeps the tau auction releases within the eps/3 share of the proof
    return max(1, int(math.floor(K ** (2.0 / 3.0) + 1e-9)))


def default_eps_auc(eps_target, delta_tilde, K):
    return eps_target / (3.0 * math.sqrt(2.0) * math.log(1.0 / delta_tilde)) * K ** (-1.0 / 3.0)


def default_eta(d):
    return 1.0 / d


def make_schedule(eps_target, delta_tilde, p, d, K, T=None, *, epoch_constant=36.0,
                  eps_v_form="linear", eta=None, tau=None, eps_auc=None, events_per_iter=2):
    """Theory-regime schedule: T = d^2, eta = 1/d and the proof's constants.

    ``eps_v_form='linear'`` gives eps/(16T); ``'sqrt'`` gives eps/sqrt(16T).
    """
    if p < 2:
        raise ValueError("p must be at least 2 so that log p > 0")
    if K < 1 or d < 1:
        raise ValueError("K and d must be positive")
    if not eps_target > 0:
        raise ValueError("eps_target must be positive")
    _check_delta_tilde(delta_tilde)
    T = int(d * d if T is None else T)
    if eps_v_form == "linear":
        eps_v = eps_target / (16.0 * T)
    elif eps_v_form == "sqrt":
        eps_v = eps_target / math.sqrt(16.0 * T)
    else:
        raise ValueError(f"unknown eps_v_form {eps_v_form!r}")
    return Schedule(
        mode="theory", p=int(p), d=int(d), eps_v=eps_v, T_v=T,
        eps_auc=default_eps_auc(eps_target, delta_tilde, K) if eps_auc is None else float(eps_auc),
        tau=default_tau(K) if tau is None else int(tau),
        eta=default_eta(d) if eta is None else float(eta),
        delta_tilde=delta_tilde, eps_target=eps_target, T=T,
        epoch_constant=epoch_constant, events_per_iter=events_per_iter,
        meta={"eps_v_form": eps_v_form},
    )


def practical_schedule(p, d, K, *, eps_v=0.01, eps_first=0.05, eps_subs_base=0.01, T_init=None,
                       T_subs=5, eps_target=1.0, delta_tilde=1e-4, eta=None, tau=None,
                       eps_auc=None, events_per_iter=2):
    """Experimental regime: T_init = floor(d^1.5) for validation and epoch 1."""
    if p < 1 or K < 1 or d < 1:
        raise ValueError("p, K and d must be positive")
    _check_delta_tilde(delta_tilde)
    T_init = int(math.floor(d ** 1.5 + 1e-9)) if T_init is None else int(T_init)
    return Schedule(
        mode="practical", p=int(p), d=int(d), eps_v=float(eps_v), T_v=T_init,
        eps_auc=default_eps_auc(eps_target, delta_tilde, K) if eps_auc is None else float(eps_auc),
        tau=default_tau(K) if tau is None else int(tau),
        eta=default_eta(d) if eta is None else float(eta),
        delta_tilde=delta_tilde, eps_target=eps_target, T=T_init, T_subs=int(T_subs),
        eps_first=float(eps_first), eps_subs_base=float(eps_subs_base),
        events_per_iter=events_per_iter,
    )


def schedule_event_stream(schedule, channel="owners"):
    """Epsilons the schedule predicts for a channel over a full run.

    ``channel`` is 'owners' (epoch releases for l >= 2 plus tau auction
    rounds), 'validation', or 'all' (every release, including epoch 1 whose
    input is the public seed set).
    """
    k = schedule.events_per_iter
    val = [schedule.eps_v] * (k * schedule.T_v)
    first = 1 if channel == "all" else 2
    epochs = []
    for ell in range(first, schedule.p + 1):
        eps, T = schedule.epoch(ell)
        epochs.extend([eps] * (k * T))
    auction = [schedule.eps_auc] * schedule.tau
    if channel == "validation":
        return val
    if channel == "owners":
        return epochs + auction
    if channel == "all":
        return val + epochs + auction
    raise ValueError(f"unknown channel {channel!r}")
