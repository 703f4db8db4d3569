"""Asynchronous engine: one message-driven agent per unit plus a sample driver.

Units never touch each other's state.  All interaction is by messages over
near/far links; the only other addresses a unit may use are those it learned
from a message it received (the best-so-far unit carried by a search probe,
or the sender of a query).  The driver injects samples and detects
quiescence through a count of in-flight messages.

Two executors are provided: an inline scheduler (``workers=1``) that delivers
messages by picking a random agent with pending mail, reproducible from the
training seed, and a thread pool (``workers>1``) where interleaving is
decided by the OS.
"""

from __future__ import annotations

import logging
import math
import threading
import time
from collections import deque

import numpy as np

from ._backend import get_kernels
from .dataset import epoch_order
from .engine import TrainConfig, TrainedMap, prepare
from .errors import CascadeOverflow, DeadlockError, InvalidArgument, UnitAutonomyViolation
from .metrics import EventLog
from .schedules import schedule_arrays

log = logging.getLogger(__name__)

# message kinds
PROBE = "search-probe"        # exploration hop; carries the best-so-far unit
GREEDY = "search-greedy"      # hand the search token to the current best unit
QUERY = "search-query"        # ask a neighbor for its distance to the sample
REPLY = "search-reply"
BROADCAST = "weight-broadcast"  # firing: sender weight plus a grain offer
KINDS = (PROBE, GREEDY, QUERY, REPLY, BROADCAST)


class Message:
    __slots__ = ("kind", "sender", "i", "sample", "remaining", "best", "best_q", "weight", "q")

    def __init__(self, kind, sender, i, sample=None, remaining=0, best=-1,
                 best_q=math.inf, weight=None, q=math.inf):
        self.kind = kind
        self.sender = sender
        self.i = i
        self.sample = sample
        self.remaining = remaining
        self.best = best
        self.best_q = best_q
        self.weight = weight
        self.q = q


class _Greedy:
    __slots__ = ("sample", "q_self", "waiting", "cand", "cand_q")

    def __init__(self, sample, q_self, waiting):
        self.sample = sample
        self.q_self = q_self
        self.waiting = waiting
        self.cand = -1
        self.cand_q = math.inf


class UnitAgent:
    """Owns one weight vector and one grain counter."""

    def __init__(self, uid, weight, near, far, ctx, rng):
        self.uid = uid
        self.w = weight  # private row; only this agent writes it
        self.counter = 0
        self.near = near
        self.far = far
        self.links = frozenset(near) | frozenset(far)
        self.ctx = ctx
        self.rng = rng
        self.pending: dict[int, _Greedy] = {}
        self.sqdist = ctx.sqdist

    # -- handlers -----------------------------------------------------------
    def handle(self, msg: Message) -> None:
        kind = msg.kind
        if kind is PROBE:
            self._on_probe(msg)
        elif kind is BROADCAST:
            self._on_broadcast(msg)
        elif kind is QUERY:
            self._on_query(msg)
        elif kind is REPLY:
            self._on_reply(msg)
        elif kind is GREEDY:
            self._start_greedy(msg.i, msg.sample)
        else:
            raise ValueError(f"unknown message kind {kind!r}")

    def _on_query(self, msg):
        q = self.ctx.sqdist(self.w, msg.sample)
        self.ctx.send(self, msg.sender, Message(REPLY, self.uid, msg.i, q=q),
                      reply_to=msg.sender)

    def _on_probe(self, msg):
        q = self.sqdist(self.w, msg.sample)
        if msg.best < 0 or q < msg.best_q:
            msg.best, msg.best_q = self.uid, q
        if msg.remaining > 0:
            # the probe token travels on: forwarded in place rather than copied
            far = self.far
            k = int(self.rng.random() * len(far))
            nxt = far[k] if k < len(far) else far[-1]
            msg.sender = self.uid
            msg.remaining -= 1
            self.ctx.send(self, nxt, msg, msg.best)
        elif msg.best == self.uid:
            self._start_greedy(msg.i, msg.sample)
        else:
            self.ctx.send(self, msg.best, Message(GREEDY, self.uid, msg.i, msg.sample),
                          reply_to=msg.best)

    def _start_greedy(self, i, sample):
        q_self = self.ctx.sqdist(self.w, sample)
        targets = self.near + (self.far if self.ctx.include_far else [])
        self.pending[i] = _Greedy(sample, q_self, len(targets))
        for k in targets:
            self.ctx.send(self, k, Message(QUERY, self.uid, i, sample))

    def _on_reply(self, msg):
        st = self.pending[msg.i]
        q, k = msg.q, msg.sender
        if q < st.cand_q or (q == st.cand_q and k < st.cand):
            st.cand, st.cand_q = k, q
        st.waiting -= 1
        if st.waiting:
            return
        del self.pending[msg.i]
        if st.cand_q < st.q_self:
            self.ctx.send(self, st.cand, Message(GREEDY, self.uid, msg.i, st.sample))
        else:
            self._finish_search(msg.i, st.sample, st.q_self)

    def _finish_search(self, i, sample, q):
        ctx = self.ctx
        ctx.on_search_done(i, self.uid, sample, q)
        self.w += ctx.l_s * (sample - self.w)
        self._maybe_grain(i)

    def _on_broadcast(self, msg):
        ctx = self.ctx
        l_c = ctx.l_c[msg.i]
        if ctx.repulsive:
            self.w += l_c * (self.w - msg.weight)
        else:
            self.w += l_c * (msg.weight - self.w)
        ctx.on_update(msg.i)
        self._maybe_grain(msg.i)

    def _maybe_grain(self, i):
        if self.rng.random() < self.ctx.p[i]:
            self.counter += 1
        if self.counter >= self.ctx.theta:
            self._fire(i)

    def _fire(self, i):
        ctx = self.ctx
        self.counter -= ctx.theta
        ctx.on_firing(i, len(self.near))
        snapshot = self.w.copy()
        for k in self.near:
            ctx.send(self, k, Message(BROADCAST, self.uid, i, weight=snapshot))
        if self.counter >= ctx.theta:
            self._fire(i)


class Runtime:
    """Message transport, in-flight accounting, and driver-side telemetry."""

    def __init__(self, config: TrainConfig, topology, state, l_c, p, i_max, rng_seed):
        self.theta = config.theta
        self.l_s = config.l_s
        self.repulsive = config.repulsive_cascade
        self.include_far = config.include_far_in_greedy
        self.max_firings = config.resolved_max_firings
        self.audit_from = config.audit_from
        self.l_c = l_c.tolist()
        self.p = p.tolist()
        self.sqdist = get_kernels(config.backend).sqdist
        self.weights = state.weights
        ss = np.random.SeedSequence(rng_seed)
        agent_ss = ss.spawn(topology.n_units + 1)
        self.sched_rng = np.random.default_rng(agent_ss[-1])
        self.agents = [
            UnitAgent(j, state.weights[j], topology.near_of(j), topology.far_of(j), self,
                      np.random.default_rng(agent_ss[j]))
            for j in range(topology.n_units)
        ]
        self.mailboxes = [deque() for _ in self.agents]
        self.inflight = 0
        self.sent = dict.fromkeys(KINDS, 0)
        self.autonomy_checks = 0
        # per-sample telemetry
        self.gmu = np.full(i_max, -1, np.int64)
        self.bmu = np.full(i_max, -1, np.int64)
        self.q = np.zeros(i_max)
        self.firings = np.zeros(i_max, np.int64)
        self.updates = np.zeros(i_max, np.int64)
        self.broadcast_degree_sum = 0
        self.results = deque()

    # -- transport ------------------------------------------------------------
    def send(self, src: UnitAgent, dst: int, msg: Message, reply_to: int | None = None):
        self.autonomy_checks += 1
        if dst != src.uid and dst not in src.links and dst != reply_to:
            raise UnitAutonomyViolation(
                f"unit {src.uid} addressed unit {dst}, which is not a declared link"
            )
        self._deliver(dst, msg)

    def inject(self, dst: int, msg: Message):
        self._deliver(dst, msg)

    def _deliver(self, dst, msg):
        self.sent[msg.kind] = self.sent.get(msg.kind, 0) + 1
        self.inflight += 1
        self.mailboxes[dst].append(msg)
        self._mark_ready(dst)

    def _mark_ready(self, dst):
        raise NotImplementedError

    # -- telemetry hooks (observer side; not part of unit state) ----------------
    def on_search_done(self, i, gmu, sample, q):
        if i >= self.audit_from:
            bmu, bq = get_kernels().exact_bmu(self.weights, sample)
            self.bmu[i] = gmu if q == bq else bmu
        self.gmu[i] = gmu
        self.q[i] = math.sqrt(q)
        self.results.append(i)

    def on_firing(self, i, degree):
        self.firings[i] += 1
        self.broadcast_degree_sum += degree
        if self.firings[i] > self.max_firings:
            raise CascadeOverflow[0](
                f"cascade of sample {i} exceeded {self.max_firings} firings")

    def on_update(self, i):
        self.updates[i] += 1


class InlineRuntime(Runtime):
    """Single worker; delivers the head message of a random ready mailbox."""

    def __init__(self, *args, **kwargs):
        super().__init__(*args, **kwargs)
        self.ready: list[int] = []
        self.ready_pos: dict[int, int] = {}

    def _mark_ready(self, dst):
        if dst not in self.ready_pos:
            self.ready_pos[dst] = len(self.ready)
            self.ready.append(dst)

    def send(self, src, dst, msg, reply_to=None):
        # same checks and accounting as Runtime.send/_deliver, inlined for speed
        self.autonomy_checks += 1
        if dst != src.uid and dst not in src.links and dst != reply_to:
            raise UnitAutonomyViolation(
                f"unit {src.uid} addressed unit {dst}, which is not a declared link"
            )
        self.sent[msg.kind] += 1
        self.inflight += 1
        self.mailboxes[dst].append(msg)
        if dst not in self.ready_pos:
            self.ready_pos[dst] = len(self.ready)
            self.ready.append(dst)

    def _deliver_one(self) -> None:
        ready = self.ready
        n = len(ready)
        uid = ready[int(self.sched_rng.random() * n)] if n > 1 else ready[0]
        box = self.mailboxes[uid]
        msg = box.popleft()
        if not box:
            pos = self.ready_pos.pop(uid)
            last = ready.pop()
            if last != uid:
                ready[pos] = last
                self.ready_pos[last] = pos
        self.agents[uid].handle(msg)
        self.inflight -= 1

    def step(self) -> None:
        if self.inflight == 0:
            raise DeadlockError("no messages in flight")
        self._deliver_one()

    def run_until(self, done, watchdog: float) -> None:
        """Deliver messages until ``done()``; ``done=None`` means quiescence."""
        # body of _deliver_one inlined: this loop carries every message
        ready, ready_pos = self.ready, self.ready_pos
        boxes, agents = self.mailboxes, self.agents
        rand = self.sched_rng.random
        while (self.inflight > 0) if done is None else not done():
            if self.inflight == 0:
                raise DeadlockError("no messages in flight but the wait condition is unmet")
            n = len(ready)
            uid = ready[int(rand() * n)] if n > 1 else ready[0]
            box = boxes[uid]
            msg = box.popleft()
            if not box:
                pos = ready_pos.pop(uid)
                last = ready.pop()
                if last != uid:
                    ready[pos] = last
                    ready_pos[last] = pos
            agents[uid].handle(msg)
            self.inflight -= 1


class ThreadedRuntime(Runtime):
    """Agents multiplexed onto ``workers`` threads; one message per agent at a time."""

    def __init__(self, *args, workers: int = 2, **kwargs):
        super().__init__(*args, **kwargs)
        self.lock = threading.Lock()
        self.cond = threading.Condition(self.lock)
        self.scheduled = [False] * len(self.agents)
        self.run_queue: deque[int] = deque()
        self.error: BaseException | None = None
        self.last_progress = time.monotonic()
        self.stop = False
        self.telemetry_lock = threading.Lock()
        self.threads = [threading.Thread(target=self._worker, daemon=True)
                        for _ in range(workers)]
        for t in self.threads:
            t.start()

    def _deliver(self, dst, msg):
        with self.lock:
            self.sent[msg.kind] = self.sent.get(msg.kind, 0) + 1
            self.inflight += 1
            self.mailboxes[dst].append(msg)
            if not self.scheduled[dst]:
                self.scheduled[dst] = True
                self.run_queue.append(dst)
                self.cond.notify_all()

    def _worker(self):
        while True:
            with self.lock:
                while not self.run_queue and not self.stop:
                    self.cond.wait()
                if self.stop:
                    return
                uid = self.run_queue.popleft()
                msg = self.mailboxes[uid].popleft()
            try:
                self.agents[uid].handle(msg)
            except BaseException as exc:  # surfaced to the driver
                with self.lock:
                    self.error = exc
                    self.stop = True
                    self.cond.notify_all()
                return
            with self.lock:
                self.inflight -= 1
                self.last_progress = time.monotonic()
                if self.mailboxes[uid]:
                    self.run_queue.append(uid)
                else:
                    self.scheduled[uid] = False
                self.cond.notify_all()

    def on_search_done(self, i, gmu, sample, q):
        with self.telemetry_lock:
            super().on_search_done(i, gmu, sample, q)

    def on_firing(self, i, degree):
        with self.telemetry_lock:
            super().on_firing(i, degree)

    def on_update(self, i):
        with self.telemetry_lock:
            super().on_update(i)

    def run_until(self, done, watchdog: float) -> None:
        if done is None:
            done = lambda: self.inflight == 0  # noqa: E731
        with self.lock:
            while not done():
                if self.error is not None:
                    raise self.error
                if self.inflight == 0 and not self.run_queue:
                    raise DeadlockError("no messages in flight but the wait condition is unmet")
                self.cond.wait(timeout=min(watchdog, 0.5))
                if self.error is not None:
                    raise self.error
                idle = time.monotonic() - self.last_progress
                if self.inflight > 0 and idle > watchdog:
                    raise DeadlockError(
                        f"no message processed for {idle:.1f}s with {self.inflight} in flight"
                    )

    def shutdown(self):
        with self.lock:
            self.stop = True
            self.cond.notify_all()
        for t in self.threads:
            t.join(timeout=5)


def train_async(config: TrainConfig, dataset, *, topology=None, progress=None) -> TrainedMap:
    """Train with autonomous unit agents.

    Drive policies: ``quiescent`` waits for global quiescence before the next
    sample (exact per-sample cascade attribution); ``overlapped`` injects the
    next sample as soon as the previous search has completed, and cascades
    are attributed through the training index carried on every message.
    """
    topology, state = prepare(config, dataset, topology)
    if config.workers < 1:
        raise InvalidArgument("workers must be >= 1")
    i_max = config.resolved_i_max
    order_rng, _ = _rngs(config.seed_training)
    order = epoch_order(len(dataset), i_max, order_rng)
    l_c, p = schedule_arrays(config.schedules(), i_max) if i_max else (np.zeros(0), np.zeros(0))
    args = (config, topology, state, l_c, p, i_max, config.seed_training + 7919)
    rt = InlineRuntime(*args) if config.workers == 1 else ThreadedRuntime(*args, workers=config.workers)
    driver_rng = np.random.default_rng(np.random.SeedSequence(config.seed_training).spawn(3)[2])
    e = config.resolved_e
    samples = dataset.samples
    n = topology.n_units
    results = rt.results
    try:
        for t in range(i_max):
            start = min(int(driver_rng.random() * n), n - 1)
            rt.inject(start, Message(PROBE, -1, t, samples[order[t]], e))
            if config.drive == "quiescent":
                rt.run_until(None, config.watchdog_seconds)
                if not results or results[-1] != t:
                    raise DeadlockError(f"sample {t} finished without a search result")
            else:
                rt.run_until(lambda: bool(results) and results[-1] == t, config.watchdog_seconds)
            if progress is not None and (t + 1) % 10_000 == 0:
                progress(t + 1, i_max)
        rt.run_until(None, config.watchdog_seconds)
    finally:
        if isinstance(rt, ThreadedRuntime):
            rt.shutdown()

    for agent in rt.agents:
        state.counters[agent.uid] = agent.counter
    ev = EventLog(
        n_units=n,
        i=np.arange(i_max, dtype=np.int64),
        sample_idx=order.astype(np.int64),
        gmu=rt.gmu,
        bmu=rt.bmu,
        q_gmu=rt.q,
        cascade_firings=rt.firings,
        cascade_weight_updates=rt.updates,
        p_i=p,
        l_c_i=l_c,
    )
    trained = TrainedMap(topology, state, config, ev)
    trained.runtime_stats = {
        "messages": dict(rt.sent),
        "broadcast_degree_sum": rt.broadcast_degree_sum,
        "autonomy_checks": rt.autonomy_checks,
        "results": len(results),
    }
    return trained


def _rngs(seed):
    from .engine import training_rngs

    return training_rngs(seed)
