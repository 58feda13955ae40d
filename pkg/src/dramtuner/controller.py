"""Configurable memory controller executing trace partitions against the
DRAM model.

All ten policy axes of the tuning action space live here: page policy,
scheduler, scheduler-buffer organization, arbiter, response queue, refresh
policy with postpone/pull-in windows, request buffer size and the active
transaction cap. One trace record is one line-sized access: ACT (plus PRE on
a conflict) followed by one RD or WR.

Concurrency model inside a partition: per bank at most one transaction is in
its command phase at a time; across banks transactions overlap up to
`max_active_transactions`, counted from scheduler pick to end of data burst.
The command bus carries one command per cycle.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Sequence

from .dram import (ACT, PRE, RD, REF, WR, DramDevice, SystemParams,
                   background_energy, peak_bandwidth_bps)
from . import trace as trace_mod

# Canonical metric order; rewards, targets and report columns all follow it.
METRIC_NAMES = ("latency", "power", "energy", "bandwidth",
                "bank_switches", "bank_group_switches", "row_hit_rate")

# Direction tags, used only for reporting.
LOWER_IS_BETTER = {"latency", "power", "energy",
                   "bank_switches", "bank_group_switches"}
HIGHER_IS_BETTER = {"bandwidth", "row_hit_rate"}


class PagePolicy(Enum):
    OPEN = "Open"
    OPEN_ADAPTIVE = "OpenAdaptive"
    CLOSED = "Closed"
    CLOSED_ADAPTIVE = "ClosedAdaptive"


class Scheduler(Enum):
    FIFO = "FIFO"
    FRFCFS = "FRFCFS"
    FRFCFS_GRP = "FRFCFSGrp"


class SchedulerBuffer(Enum):
    BANKWISE = "Bankwise"
    READ_WRITE = "ReadWrite"
    SHARED = "Shared"


class Arbiter(Enum):
    SIMPLE = "Simple"
    FIFO = "FIFO"
    REORDER = "Reorder"


class RespQueue(Enum):
    FIFO = "FIFO"
    REORDER = "Reorder"


class RefreshPolicy(Enum):
    NO_REFRESH = "NoRefresh"
    ALL_BANK = "AllBank"


_BUFFER_SIZES = (1, 2, 4, 8, 16, 32, 64, 128)
_MAX_ACTIVE = (1, 2, 4, 8, 16, 32, 64, 128)


@dataclass(frozen=True)
class ControllerConfig:
    """The joint action vector: one value per configurable parameter."""

    page_policy: PagePolicy = PagePolicy.OPEN_ADAPTIVE
    scheduler: Scheduler = Scheduler.FRFCFS
    scheduler_buffer: SchedulerBuffer = SchedulerBuffer.BANKWISE
    arbiter: Arbiter = Arbiter.REORDER
    resp_queue: RespQueue = RespQueue.FIFO
    refresh_policy: RefreshPolicy = RefreshPolicy.ALL_BANK
    refresh_max_postponed: int = 7
    refresh_max_pulledin: int = 7
    request_buffer_size: int = 8
    max_active_transactions: int = 128

    def __post_init__(self):
        if not 0 <= self.refresh_max_postponed <= 7:
            raise ValueError("controller.refresh_max_postponed: must be in 0..7")
        if not 0 <= self.refresh_max_pulledin <= 7:
            raise ValueError("controller.refresh_max_pulledin: must be in 0..7")
        if self.request_buffer_size not in _BUFFER_SIZES:
            raise ValueError(f"controller.request_buffer_size: must be one of {_BUFFER_SIZES}")
        if self.max_active_transactions not in _MAX_ACTIVE:
            raise ValueError("controller.max_active_transactions: must be a power of two in 1..128")


# The action space, in fixed order. Index i of an action vector selects a
# value from domain i; arities are (4, 3, 3, 3, 2, 2, 8, 8, 8, 8).
ACTION_SPACE: tuple[tuple[str, tuple], ...] = (
    ("page_policy", tuple(PagePolicy)),
    ("scheduler", tuple(Scheduler)),
    ("scheduler_buffer", tuple(SchedulerBuffer)),
    ("arbiter", tuple(Arbiter)),
    ("resp_queue", tuple(RespQueue)),
    ("refresh_policy", tuple(RefreshPolicy)),
    ("refresh_max_postponed", tuple(range(8))),
    ("refresh_max_pulledin", tuple(range(8))),
    ("request_buffer_size", _BUFFER_SIZES),
    ("max_active_transactions", _MAX_ACTIVE),
)

ACTION_ARITIES = tuple(len(domain) for _, domain in ACTION_SPACE)
NUM_AGENTS = len(ACTION_SPACE)


def config_from_action(action: Sequence[int]) -> ControllerConfig:
    if len(action) != NUM_AGENTS:
        raise ValueError(f"action vector must have {NUM_AGENTS} entries")
    kwargs = {}
    for (name, domain), idx in zip(ACTION_SPACE, action):
        if not 0 <= idx < len(domain):
            raise ValueError(f"action index {idx} out of range for {name}")
        kwargs[name] = domain[idx]
    return ControllerConfig(**kwargs)


def action_from_config(config: ControllerConfig) -> tuple[int, ...]:
    return tuple(domain.index(getattr(config, name))
                 for name, domain in ACTION_SPACE)


def action_labels() -> tuple[tuple[str, ...], ...]:
    """Human-readable value labels per parameter, for reports."""
    out = []
    for _, domain in ACTION_SPACE:
        out.append(tuple(d.value if isinstance(d, Enum) else str(d) for d in domain))
    return tuple(out)


# Baseline controller: postpone/pull-in windows are clamped to the action
# domain maximum of 7.
DEFAULT_BASELINE = ControllerConfig(
    page_policy=PagePolicy.OPEN_ADAPTIVE,
    scheduler=Scheduler.FRFCFS,
    scheduler_buffer=SchedulerBuffer.BANKWISE,
    arbiter=Arbiter.REORDER,
    resp_queue=RespQueue.FIFO,
    refresh_policy=RefreshPolicy.ALL_BANK,
    refresh_max_postponed=7,
    refresh_max_pulledin=7,
    request_buffer_size=8,
    max_active_transactions=128,
)


@dataclass(frozen=True)
class MemoryRequest:
    request_id: int
    arrival_cycle: int
    is_write: bool
    address: int


@dataclass(frozen=True)
class MetricsSnapshot:
    """The seven observed performance metrics for one partition."""

    avg_latency_ps: float
    avg_power_mw: float
    total_energy_pj: float
    avg_bandwidth_bps: float
    bank_switches: int
    bank_group_switches: int
    row_hit_rate: float

    def as_tuple(self) -> tuple[float, ...]:
        return (self.avg_latency_ps, self.avg_power_mw, self.total_energy_pj,
                self.avg_bandwidth_bps, float(self.bank_switches),
                float(self.bank_group_switches), self.row_hit_rate)


@dataclass(frozen=True)
class RequestOutcome:
    request_id: int
    arrival: int
    completed: int   # data burst end
    delivered: int   # response handed back (resp-queue policy applied)
    is_write: bool
    row_hit: bool


@dataclass
class SimulationState:
    """Carryover between partitions of one trace: device state, the current
    cycle and the count of refreshes issued so far."""

    device: DramDevice
    cycle: int = 0
    ref_issued: int = 0

    @classmethod
    def fresh(cls, system: SystemParams) -> "SimulationState":
        return cls(device=DramDevice(system))


def apply_page_policy(policy: PagePolicy, open_row: int,
                      pending_rows: Sequence[int]) -> bool:
    """Precharge decision after a column access.

    `pending_rows` are the rows of requests still buffered for the same bank.
    Open never auto-precharges; Closed always does. OpenAdaptive keeps the
    row open unless the pending work for the bank exists and none of it
    targets the open row; ClosedAdaptive precharges unless some pending
    request targets the open row (so with an empty queue OpenAdaptive stays
    open and ClosedAdaptive closes).
    """
    if policy is PagePolicy.OPEN:
        return False
    if policy is PagePolicy.CLOSED:
        return True
    hits_pending = open_row in pending_rows
    if policy is PagePolicy.OPEN_ADAPTIVE:
        return bool(pending_rows) and not hits_pending
    # CLOSED_ADAPTIVE
    return not hits_pending


def schedule_next(candidates: Sequence, scheduler: Scheduler, banks: Sequence,
                  last_bank_group: int = -1):
    """Pick the next request to serve from `candidates`.

    Candidates need `.index` (age), `.flat` (flat bank id), `.row` and `.bg`
    attributes; `banks[flat].open_row` gives the open row. FIFO returns the
    oldest. FRFCFS returns the oldest row hit if any, else the oldest.
    FRFCFSGrp restricts to the bank group of the last column access when it
    is represented, then applies FRFCFS, ties broken by age.
    """
    if not candidates:
        raise ValueError("schedule_next: empty candidate set")
    if scheduler is Scheduler.FIFO:
        return min(candidates, key=lambda c: c.index)
    pool = candidates
    if scheduler is Scheduler.FRFCFS_GRP and last_bank_group >= 0:
        same_group = [c for c in candidates if c.bg == last_bank_group]
        if same_group:
            pool = same_group
    hits = [c for c in pool if banks[c.flat].open_row == c.row]
    return min(hits or pool, key=lambda c: c.index)


def refresh_step(now: int, ref_issued: int, config: ControllerConfig,
                 tREFI: int, buffer_occupied: bool) -> bool:
    """Whether an all-bank refresh should be initiated at `now`.

    One refresh is owed every tREFI. A due refresh may be postponed while the
    buffer is occupied and the owed count stays within the postpone window;
    beyond the window it is forced. An idle controller pulls a refresh in
    early while the credit stays below the pull-in window.
    """
    if config.refresh_policy is RefreshPolicy.NO_REFRESH:
        return False
    debt = now // tREFI - ref_issued
    if debt >= 1:
        if buffer_occupied and debt <= config.refresh_max_postponed:
            return False
        return True
    return not buffer_occupied and -debt < config.refresh_max_pulledin


class _Entry:
    __slots__ = ("index", "req", "arrival", "is_write", "bg", "bank", "flat",
                 "row", "column", "promoted", "done")

    def __init__(self, index, req, decoded, banks_per_group):
        self.index = index
        self.req = req
        self.arrival = req.arrival_cycle
        self.is_write = req.is_write
        self.bg = decoded.bank_group
        self.bank = decoded.bank
        self.flat = decoded.bank_group * banks_per_group + decoded.bank
        self.row = decoded.row
        self.column = decoded.column
        self.promoted = False
        self.done = False


class _Txn:
    __slots__ = ("entry", "stamp", "seq", "did_act")

    def __init__(self, entry, stamp, seq):
        self.entry = entry
        self.stamp = stamp
        self.seq = seq
        self.did_act = False


class _BufferSet:
    """Request storage organized per the scheduler-buffer policy.

    Entries occupy capacity from injection until their column access issues.
    A promoted entry (picked by the scheduler, commands in flight) still
    holds its slot but is no longer a scheduling candidate.
    """

    def __init__(self, config: ControllerConfig, nbanks: int):
        self.kind = config.scheduler_buffer
        self.cap = config.request_buffer_size
        if self.kind is SchedulerBuffer.BANKWISE:
            nqueues = nbanks
        elif self.kind is SchedulerBuffer.READ_WRITE:
            nqueues = 2
        else:
            nqueues = 1
        self.queues: list[list[_Entry]] = [[] for _ in range(nqueues)]
        self.counts = [0] * nqueues
        self.by_bank: list[list[_Entry]] = [[] for _ in range(nbanks)]
        self.total = 0

    def _queue_index(self, entry: _Entry) -> int:
        if self.kind is SchedulerBuffer.BANKWISE:
            return entry.flat
        if self.kind is SchedulerBuffer.READ_WRITE:
            return 1 if entry.is_write else 0
        return 0

    def has_space(self, entry: _Entry) -> bool:
        return self.counts[self._queue_index(entry)] < self.cap

    def inject(self, entry: _Entry) -> None:
        qi = self._queue_index(entry)
        self.queues[qi].append(entry)
        self.counts[qi] += 1
        self.by_bank[entry.flat].append(entry)
        self.total += 1

    def promote(self, entry: _Entry) -> None:
        entry.promoted = True
        self.by_bank[entry.flat].remove(entry)

    def remove(self, entry: _Entry) -> None:
        entry.done = True
        qi = self._queue_index(entry)
        self.counts[qi] -= 1
        self.total -= 1
        queue = self.queues[qi]
        if len(queue) > 32 and len(queue) > 2 * self.counts[qi]:
            queue[:] = [e for e in queue if not e.done]

    def pending_rows(self, flat: int) -> list[int]:
        return [e.row for e in self.by_bank[flat]]

    def candidates(self, bank_busy: Sequence[bool]) -> list[_Entry]:
        if self.kind is SchedulerBuffer.BANKWISE:
            out = []
            for queue in self.queues:
                for e in queue:
                    if e.done:
                        continue
                    # Head of line per bank; a promoted head blocks its queue.
                    if not e.promoted and not bank_busy[e.flat]:
                        out.append(e)
                    break
            return out
        if self.kind is SchedulerBuffer.READ_WRITE:
            # Reads drain preferentially.
            reads = [e for e in self.queues[0]
                     if not e.done and not e.promoted and not bank_busy[e.flat]]
            if reads:
                return reads
            return [e for e in self.queues[1]
                    if not e.done and not e.promoted and not bank_busy[e.flat]]
        return [e for e in self.queues[0]
                if not e.done and not e.promoted and not bank_busy[e.flat]]


def _arbiter_pick(pre_cas: list[_Txn], arbiter: Arbiter, device: DramDevice,
                  now: int):
    """Choose which pending command goes to the command bus next.

    Simple: fixed priority, commands serving reads over those serving writes,
    among commands issuable at the first cycle anything is issuable. FIFO:
    strict command arrival order (a command "arrives" when its transaction is
    picked or its predecessor issues), waiting out timing. Reorder: earliest
    issuable first, ties by age.
    """
    if arbiter is Arbiter.FIFO:
        txn = min(pre_cas, key=lambda t: (t.stamp, t.seq))
        kind = device.next_command_kind(txn.entry)
        return txn, kind, device.command_earliest(kind, txn.entry)
    infos = []
    for txn in pre_cas:
        kind = device.next_command_kind(txn.entry)
        infos.append((device.command_earliest(kind, txn.entry), txn, kind))
    if arbiter is Arbiter.REORDER:
        earliest, txn, kind = min(infos, key=lambda x: (x[0], x[1].stamp, x[1].seq))
        return txn, kind, earliest
    # SIMPLE
    first = max(now, min(e for e, _, _ in infos))
    ready = [(e, t, k) for e, t, k in infos if e <= first]
    reads = [x for x in ready if not x[1].entry.is_write]
    pool = reads or ready
    earliest, txn, kind = min(pool, key=lambda x: (x[1].stamp, x[1].seq))
    return txn, kind, earliest


def compute_metrics(commands: Sequence[tuple[int, str, int, int]],
                    outcomes: Sequence[RequestOutcome],
                    elapsed_cycles: int,
                    system: SystemParams) -> MetricsSnapshot:
    """Fold a partition's command log and request outcomes into the seven
    observed metrics."""
    if elapsed_cycles <= 0 or not outcomes:
        raise ValueError("compute_metrics: empty partition (no elapsed time or requests)")
    e = system.energy
    clock = e.clock_period_ps
    n_act = n_pre = n_rd = n_wr = n_ref = 0
    bank_switches = 0
    bg_switches = 0
    prev_bg = prev_bank = -1
    for _, kind, bg, bank in commands:
        if kind == ACT:
            n_act += 1
        elif kind == PRE:
            n_pre += 1
        elif kind == REF:
            n_ref += 1
        else:
            if kind == RD:
                n_rd += 1
            else:
                n_wr += 1
            if prev_bg >= 0:
                if bg != prev_bg:
                    bg_switches += 1
                elif bank != prev_bank:
                    bank_switches += 1
            prev_bg, prev_bank = bg, bank
    total_energy = (n_act * e.e_act + n_pre * e.e_pre + n_rd * e.e_rd
                    + n_wr * e.e_wr
                    + n_ref * e.e_ref_per_bank * system.topology.total_banks
                    + background_energy(elapsed_cycles, e))
    elapsed_ps = elapsed_cycles * clock
    avg_power_mw = total_energy / elapsed_ps * 1e3  # pJ/ps = W
    total_latency = sum(o.delivered - o.arrival for o in outcomes)
    avg_latency_ps = total_latency / len(outcomes) * clock
    bits = len(outcomes) * system.topology.line_bytes * 8
    avg_bandwidth = bits / (elapsed_ps * 1e-12)
    hits = sum(1 for o in outcomes if o.row_hit)
    return MetricsSnapshot(
        avg_latency_ps=avg_latency_ps,
        avg_power_mw=avg_power_mw,
        total_energy_pj=total_energy,
        avg_bandwidth_bps=avg_bandwidth,
        bank_switches=bank_switches,
        bank_group_switches=bg_switches,
        row_hit_rate=hits / len(outcomes),
    )


def simulate_partition(requests: Sequence[MemoryRequest],
                       config: ControllerConfig,
                       system: SystemParams,
                       state: SimulationState | None = None,
                       debug: dict | None = None
                       ) -> tuple[MetricsSnapshot, SimulationState]:
    """Serve every request of one partition and return its metrics plus the
    carryover state.

    Pass the previous partition's state to carry bank/timing state across a
    trace; pass None to start fresh. `debug`, when given, is filled with the
    command log, per-request outcomes and scheduler decisions for
    introspection; it does not affect behavior.
    """
    if not requests:
        raise ValueError("simulate_partition: empty partition")
    prev_id, prev_arrival = -1, -(1 << 62)
    for r in requests:
        if r.request_id <= prev_id:
            raise ValueError("simulate_partition: request ids must be unique and increasing")
        if r.arrival_cycle < prev_arrival:
            raise ValueError("simulate_partition: arrival cycles must be non-decreasing")
        prev_id, prev_arrival = r.request_id, r.arrival_cycle

    st = state if state is not None else SimulationState.fresh(system)
    dev = st.device
    dev.begin_partition()
    topo = system.topology
    timing = system.timing
    mapping = system.mapping
    start = st.cycle
    now = st.cycle

    n = len(requests)
    entries = [_Entry(i, r, mapping.decode(r.address), topo.banks_per_group)
               for i, r in enumerate(requests)]
    buf = _BufferSet(config, topo.total_banks)
    banks = dev.banks
    bank_busy = [False] * topo.total_banks
    pre_cas: list[_Txn] = []
    bursts: list[int] = []  # heap of burst-end cycles of active transactions
    completed: list[tuple[int, bool] | None] = [None] * n  # (burst end, row hit)
    injected = 0
    cased = 0
    active = 0
    seq = 0
    allbank = config.refresh_policy is RefreshPolicy.ALL_BANK
    ref_pending = False
    max_active = config.max_active_transactions
    tREFI = timing.tREFI
    decisions: list[tuple[bool, bool]] | None = [] if debug is not None else None

    def next_wake() -> int | None:
        """Earliest upcoming event strictly after `now` that could change
        what is schedulable: an injectable arrival, a burst completing, or a
        refresh window boundary."""
        wake = None
        if injected < n:
            e = entries[injected]
            if e.arrival > now and buf.has_space(e):
                wake = e.arrival
        if bursts and bursts[0] > now:
            wake = bursts[0] if wake is None else min(wake, bursts[0])
        if allbank:
            forced = (st.ref_issued + config.refresh_max_postponed + 1) * tREFI
            if forced > now:
                wake = forced if wake is None else min(wake, forced)
            if buf.total == 0:
                due = (st.ref_issued + 1) * tREFI
                if due > now:
                    wake = due if wake is None else min(wake, due)
                pull = (st.ref_issued - config.refresh_max_pulledin + 1) * tREFI
                if pull > now:
                    wake = pull if wake is None else min(wake, pull)
        return wake

    while True:
        while bursts and bursts[0] <= now:
            heapq.heappop(bursts)
            active -= 1
        while injected < n:
            e = entries[injected]
            if e.arrival > now or not buf.has_space(e):
                break  # backpressure: injection stalls in arrival order
            buf.inject(e)
            injected += 1
        if injected == n and cased == n and not bursts:
            break

        if allbank:
            if not ref_pending:
                ref_pending = refresh_step(now, st.ref_issued, config, tREFI,
                                           buf.total > 0)
            if ref_pending and not pre_cas:
                flat = dev.first_open_bank()
                if flat is not None:
                    cycle = max(now, dev.pre_earliest(flat))
                    dev.issue_pre(flat, cycle)
                else:
                    cycle = max(now, dev.refresh_earliest())
                    dev.issue_refresh(cycle)
                    st.ref_issued += 1
                    ref_pending = False
                now = cycle
                continue

        if not ref_pending:
            while active < max_active:
                cands = buf.candidates(bank_busy)
                if not cands:
                    break
                chosen = schedule_next(cands, config.scheduler, banks,
                                       dev.chan_last_cas_bg)
                if decisions is not None:
                    decisions.append(
                        (banks[chosen.flat].open_row == chosen.row,
                         any(banks[c.flat].open_row == c.row for c in cands)))
                buf.promote(chosen)
                pre_cas.append(_Txn(chosen, now, seq))
                seq += 1
                bank_busy[chosen.flat] = True
                active += 1
                assert active <= max_active, "active transaction cap exceeded"

        if pre_cas:
            txn, kind, earliest = _arbiter_pick(pre_cas, config.arbiter, dev, now)
            cycle = earliest if earliest > now else now
            wake = next_wake()
            if wake is not None and wake < cycle:
                now = wake
                continue
            e = txn.entry
            if kind == ACT:
                dev.issue_act(e, cycle)
                txn.did_act = True
                txn.stamp, txn.seq = cycle, seq
                seq += 1
            elif kind == PRE:
                dev.issue_pre(e.flat, cycle)
                txn.stamp, txn.seq = cycle, seq
                seq += 1
            else:
                precharge = apply_page_policy(config.page_policy, e.row,
                                              buf.pending_rows(e.flat))
                end = dev.issue_cas(e, cycle, autoprecharge=precharge)
                completed[e.index] = (end, not txn.did_act)
                buf.remove(e)
                pre_cas.remove(txn)
                bank_busy[e.flat] = False
                heapq.heappush(bursts, end)
                cased += 1
            now = cycle
            continue

        wake = next_wake()
        if wake is None:
            raise AssertionError("simulation stalled with work outstanding")
        now = wake

    # Response delivery: FIFO returns responses in request order, Reorder in
    # completion order. Delivery does not contend for device resources.
    outcomes: list[RequestOutcome] = []
    prev_delivered = 0
    for e, done in zip(entries, completed):
        end, row_hit = done
        delivered = end
        if config.resp_queue is RespQueue.FIFO:
            delivered = max(end, prev_delivered)
            prev_delivered = delivered
        outcomes.append(RequestOutcome(e.req.request_id, e.arrival, end,
                                       delivered, e.is_write, row_hit))
    end_cycle = max(o.delivered for o in outcomes)
    elapsed = end_cycle - start
    st.cycle = end_cycle

    # Settle refresh debt beyond the postpone window against the elapsed
    # window just measured, so the owed count carried forward stays bounded.
    if allbank:
        target_due = end_cycle // tREFI
        cursor = now
        while target_due - st.ref_issued > config.refresh_max_postponed:
            flat = dev.first_open_bank()
            if flat is not None:
                cursor = max(cursor, dev.pre_earliest(flat))
                dev.issue_pre(flat, cursor)
            else:
                cursor = max(cursor, dev.refresh_earliest())
                dev.issue_refresh(cursor)
                st.ref_issued += 1

    metrics = compute_metrics(dev.commands, outcomes, elapsed, system)
    if debug is not None:
        debug["commands"] = list(dev.commands)
        debug["outcomes"] = outcomes
        debug["decisions"] = decisions
        debug["elapsed_cycles"] = elapsed
    return metrics, st


def requests_from_records(records: Sequence[trace_mod.TraceRecord],
                          first_id: int = 0) -> list[MemoryRequest]:
    return [MemoryRequest(first_id + i, r.cycle, r.op == trace_mod.WRITE, r.address)
            for i, r in enumerate(records)]


def partitions_to_requests(partitions: Sequence[trace_mod.Partition]
                           ) -> list[list[MemoryRequest]]:
    out = []
    base = 0
    for p in partitions:
        out.append(requests_from_records(p.records, base))
        base += len(p.records)
    return out


class TuningEnvironment:
    """Adapter the learner steps: apply an action vector, run one partition,
    observe metrics.

    Partitions are consumed in order and replayed cyclically when the episode
    outlives the trace; replayed arrivals are rebased onto the current cycle
    so inter-arrival spacing is preserved and cycles never run backwards.
    """

    def __init__(self, partitions: Sequence[Sequence[MemoryRequest]],
                 system: SystemParams):
        if not partitions:
            raise ValueError("TuningEnvironment: need at least one partition")
        self.partitions = [list(p) for p in partitions]
        self.system = system
        self.state: SimulationState | None = None
        self.steps_taken = 0

    @property
    def action_arities(self) -> tuple[int, ...]:
        return ACTION_ARITIES

    def step(self, action: Sequence[int]) -> MetricsSnapshot:
        count = len(self.partitions)
        part = self.partitions[self.steps_taken % count]
        lap = self.steps_taken // count
        if lap > 0:
            offset = self.state.cycle - part[0].arrival_cycle
            part = [replace(r, arrival_cycle=r.arrival_cycle + offset)
                    for r in part]
        config = config_from_action(action)
        metrics, self.state = simulate_partition(part, config, self.system,
                                                 self.state)
        self.steps_taken += 1
        return metrics
