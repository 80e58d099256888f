"""Deterministic protocol fuzzing on a simulated network.

A trial wires up real SiteState machines over a logical-time event queue: no
sockets, no wall clock, every choice drawn from one seeded RNG, so a seed
reproduces a trial exactly.  Local updates (random effective intents) are
scheduled across a time horizon; deliveries take a small random delay.
Without --reorder, deliveries between a pair stay FIFO like a stream socket;
with it they may overtake.  --duplicate occasionally re-enqueues a delivered
message once more, later.

A trial converges when the queue drains, every cursor is caught up, and all
site digests are equal.  Exceeding the event budget is reported as
nonterminating, which is a different failure than divergence.
"""

from __future__ import annotations

import heapq
import random
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from .core import CcrError, IntentError, OpId
from .protocol import SiteState, quiescent
from .replicas import replica_type
from .replicas.base import ReplicaType

ALPHABET = "abcdefghijklmnopqrstuvwxyz"
ESET_POOL = tuple("abcdefgh")
MEDIA_KEYS = ("p1", "p2", "p3")
COMMENT_POOL = tuple(f"c{i}" for i in range(12))


@dataclass
class SimConfig:
    kind: str
    sites: int = 3
    ops_per_site: int = 20
    seed: int = 0
    topology: str = "full"  # full | ring | chain
    reorder: bool = False
    duplicate: bool = False
    verify: bool = False
    max_events: int = 1_000_000


@dataclass
class TrialReport:
    seed: int
    converged: bool
    reason: str  # ok | divergence | nonterminating | fault: ...
    digests: Dict[int, str]
    messages_sent: int
    max_inflight: int
    events: int
    script: List[Tuple[int, int, Tuple[Any, ...]]] = field(default_factory=list)

    def summary(self) -> str:
        flag = "ok" if self.converged else f"FAIL ({self.reason})"
        return (
            f"seed={self.seed} {flag} messages={self.messages_sent} "
            f"max_inflight={self.max_inflight} events={self.events}"
        )


def topology_edges(topology: str, n: int) -> List[Tuple[int, int]]:
    if topology == "full":
        return [(i, j) for i in range(n) for j in range(i + 1, n)]
    if topology == "ring":
        if n < 2:
            return []
        edges = {tuple(sorted((i, (i + 1) % n))) for i in range(n)}
        return sorted(edges)
    if topology == "chain":
        return [(i, i + 1) for i in range(n - 1)]
    raise ValueError(f"unknown topology {topology!r}")


def random_intent(rt: ReplicaType, rng: random.Random, state: Any) -> Optional[Tuple[Any, ...]]:
    """Draw an intent effective on ``state``, or None if none can be found."""
    probe = OpId(-1, 0)
    for _ in range(40):
        intent = _draw(rt, rng, state)
        try:
            if rt.gen_effective(state, intent, probe) is not None:
                return intent
        except IntentError:
            continue
    return None


def _draw(rt: ReplicaType, rng: random.Random, state: Any) -> Tuple[Any, ...]:
    name = rt.name
    if name == "counter":
        return (rng.choice(("incr", "decr")), rng.randint(1, 9))
    if name == "addmult":
        if rng.random() < 2 / 3:
            n = rng.choice((-1, 1)) * rng.randint(1, 9)
            return ("add", n)
        return ("mult", rng.randint(2, 5))
    if name == "lww":
        return ("write", "".join(rng.choice(ALPHABET) for _ in range(rng.randint(1, 3))))
    if name == "eset":
        x = rng.choice(ESET_POOL)
        verb = "add" if x not in state else "rem"
        return (verb, x)
    if name == "queue":
        if rng.random() < 2 / 3:
            return ("enq", rng.choice(ALPHABET))
        return ("deq",)
    if name == "text":
        if state and rng.random() < 1 / 3:
            k = rng.randrange(len(state))
            n = rng.randint(1, min(3, len(state) - k))
            return ("del", k, n)
        s = "".join(rng.choice(ALPHABET) for _ in range(rng.randint(1, 3)))
        return ("ins", rng.randint(0, len(state)), s)
    if name.startswith("map<tuple<lww,eset"):
        return ("upd", rng.choice(MEDIA_KEYS), _draw_post(rng))
    if name.startswith("tuple<lww,eset"):
        return _draw_post(rng)
    raise ValueError(f"no intent generator for kind {name!r}")


def _draw_post(rng: random.Random) -> Tuple[Any, ...]:
    roll = rng.random()
    if roll < 0.25:
        return ("at", 0, ("write", rng.choice(COMMENT_POOL)))
    if roll < 0.5:
        return ("at", 1, ("add", rng.choice(COMMENT_POOL)))
    if roll < 0.75:
        return ("at", 2, ("incr", 1))
    return ("at", 3, ("incr", 1))


def run_trial(cfg: SimConfig, script: Optional[List[Tuple[int, int, Tuple[Any, ...]]]] = None) -> TrialReport:
    """Run one trial.  ``script`` replays a recorded intent schedule instead
    of drawing fresh intents (used by the shrinker); entries that turned
    ineffective or malformed after shrinking are skipped."""
    # Two independent streams so that replaying a recorded script skips the
    # intent draws without disturbing the delivery pattern: a full-script
    # replay retraces the original trial exactly.
    plan_rng = random.Random(f"{cfg.seed}:plan")
    net_rng = random.Random(f"{cfg.seed}:net")
    rt = replica_type(cfg.kind)
    sites = {i: SiteState(i, rt, verify=cfg.verify) for i in range(cfg.sites)}
    for i, j in topology_edges(cfg.topology, cfg.sites):
        sites[i].connect_peer(j)
        sites[j].connect_peer(i)

    heap: List[Tuple[int, int, str, Tuple[Any, ...]]] = []
    tick = 0

    def push(time: int, kind: str, payload: Tuple[Any, ...]) -> None:
        nonlocal tick
        heapq.heappush(heap, (time, tick, kind, payload))
        tick += 1

    horizon = max(1, cfg.ops_per_site * cfg.sites)
    if script is None:
        for site in range(cfg.sites):
            for _ in range(cfg.ops_per_site):
                push(plan_rng.randrange(horizon), "update", (site, None))
    else:
        for time, site, intent in script:
            push(time, "update", (site, intent))

    pair_clock: Dict[Tuple[int, int], int] = {}
    inflight = 0
    max_inflight = 0
    messages_sent = 0
    recorded: List[Tuple[int, int, Tuple[Any, ...]]] = []

    def send(now: int, src: int, dst: int, msg: Any, dup_allowed: bool = True) -> None:
        nonlocal inflight, max_inflight, messages_sent
        t = now + net_rng.randint(1, 3)
        if not cfg.reorder:
            t = max(t, pair_clock.get((src, dst), 0))
            pair_clock[(src, dst)] = t
        push(t, "deliver", (src, dst, msg, dup_allowed))
        inflight += 1
        max_inflight = max(max_inflight, inflight)
        messages_sent += 1

    events = 0
    fault: Optional[str] = None
    while heap:
        events += 1
        if events > cfg.max_events:
            return TrialReport(
                cfg.seed, False, "nonterminating",
                {i: s.digest() for i, s in sites.items()},
                messages_sent, max_inflight, events, recorded,
            )
        now, _, kind, payload = heapq.heappop(heap)
        try:
            if kind == "update":
                site, intent = payload
                s = sites[site]
                if intent is None:
                    intent = random_intent(rt, plan_rng, s.current)
                    if intent is None:
                        continue
                try:
                    out = s.local_update(intent)
                except IntentError:
                    continue  # scripted intent no longer fits the state
                if out:
                    recorded.append((now, site, intent))
                for dst, msg in out:
                    send(now, site, dst, msg)
            else:
                src, dst, msg, dup_allowed = payload
                inflight -= 1
                if cfg.duplicate and dup_allowed and net_rng.random() < 0.1:
                    push(now + net_rng.randint(1, 6), "deliver", (src, dst, msg, False))
                    inflight += 1
                    max_inflight = max(max_inflight, inflight)
                for nxt, reply in sites[dst].handle_message(src, msg):
                    send(now, dst, nxt, reply)
        except CcrError as e:
            fault = f"fault: {e}"
            break

    digests = {i: s.digest() for i, s in sites.items()}
    if fault is not None:
        return TrialReport(cfg.seed, False, fault, digests, messages_sent, max_inflight, events, recorded)
    if not quiescent(sites, 0):
        return TrialReport(cfg.seed, False, "drained without quiescence", digests, messages_sent, max_inflight, events, recorded)
    if len(set(digests.values())) != 1:
        return TrialReport(cfg.seed, False, "divergence", digests, messages_sent, max_inflight, events, recorded)
    return TrialReport(cfg.seed, True, "ok", digests, messages_sent, max_inflight, events, recorded)


def shrink_trial(cfg: SimConfig, report: TrialReport) -> Tuple[SimConfig, TrialReport]:
    """Shrink a failing trial: drop trailing intents, shorten payloads, then
    drop sites.  Every kept candidate re-runs red, so the result replays."""
    if report.converged:
        return cfg, report
    script = list(report.script)

    def fails(c: SimConfig, s):
        r = run_trial(c, script=s)
        return (not r.converged), r

    best = report
    # Trailing intents first.
    changed = True
    while changed:
        changed = False
        i = len(script) - 1
        while i >= 0:
            cand = script[:i] + script[i + 1:]
            bad, r = fails(cfg, cand)
            if bad:
                script, best, changed = cand, r, True
            i -= 1
    # Then payload strings.
    for i, (t, site, intent) in enumerate(script):
        intent = list(intent)
        for j, arg in enumerate(intent):
            while isinstance(arg, str) and len(arg) > 1:
                cand_intent = intent[:j] + [arg[: len(arg) // 2]] + intent[j + 1:]
                cand = script[:i] + [(t, site, tuple(cand_intent))] + script[i + 1:]
                bad, r = fails(cfg, cand)
                if not bad:
                    break
                arg = arg[: len(arg) // 2]
                intent = cand_intent
                script, best = cand, r
    # Then site count.
    while cfg.sites > 2:
        used = {s for (_, s, _) in script}
        if cfg.sites - 1 in used:
            break
        cand_cfg = SimConfig(**{**cfg.__dict__, "sites": cfg.sites - 1})
        bad, r = fails(cand_cfg, script)
        if not bad:
            break
        cfg, best = cand_cfg, r
    return cfg, best
