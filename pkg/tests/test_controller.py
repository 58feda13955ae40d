from types import SimpleNamespace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dramtuner.controller import (ACT, ACTION_ARITIES, DEFAULT_BASELINE, PRE,
                                  RD, REF, WR, Arbiter, ControllerConfig,
                                  MetricsSnapshot, PagePolicy, RefreshPolicy,
                                  RespQueue, Scheduler, SchedulerBuffer,
                                  SimulationState, TuningEnvironment,
                                  action_from_config, apply_page_policy,
                                  compute_metrics, config_from_action,
                                  partitions_to_requests, refresh_step,
                                  requests_from_records, schedule_next,
                                  simulate_partition)
from dramtuner.dram import (BankState, EnergyParams, SystemParams,
                            TimingParams, background_energy,
                            peak_bandwidth_bps)
from dramtuner import trace as T

SYS = SystemParams()


def run(records, config, state=None, system=SYS):
    debug = {}
    reqs = requests_from_records(records)
    metrics, st = simulate_partition(reqs, config, system, state, debug=debug)
    return metrics, st, debug


def cfg(**kw):
    return ControllerConfig(**{**dict(
        page_policy=PagePolicy.OPEN,
        scheduler=Scheduler.FRFCFS,
        scheduler_buffer=SchedulerBuffer.SHARED,
        arbiter=Arbiter.REORDER,
        resp_queue=RespQueue.REORDER,
        refresh_policy=RefreshPolicy.NO_REFRESH,
        refresh_max_postponed=0,
        refresh_max_pulledin=0,
        request_buffer_size=16,
        max_active_transactions=16,
    ), **kw})


class TestActionSpace:
    def test_arities(self):
        assert ACTION_ARITIES == (4, 3, 3, 3, 2, 2, 8, 8, 8, 8)

    def test_roundtrip(self):
        action = (3, 2, 1, 0, 1, 0, 5, 2, 7, 6)
        assert action_from_config(config_from_action(action)) == action

    def test_power_of_two_ladders(self):
        c = config_from_action((0, 0, 0, 0, 0, 0, 0, 0, 3, 7))
        assert c.request_buffer_size == 8
        assert c.max_active_transactions == 128

    def test_baseline_defaults(self):
        b = DEFAULT_BASELINE
        assert b.page_policy is PagePolicy.OPEN_ADAPTIVE
        assert b.scheduler is Scheduler.FRFCFS
        assert b.scheduler_buffer is SchedulerBuffer.BANKWISE
        assert b.arbiter is Arbiter.REORDER
        assert b.resp_queue is RespQueue.FIFO
        assert b.refresh_policy is RefreshPolicy.ALL_BANK
        # windows clamped to the action-domain maximum
        assert b.refresh_max_postponed == 7
        assert b.refresh_max_pulledin == 7
        assert b.request_buffer_size == 8
        assert b.max_active_transactions == 128

    def test_invalid_values_rejected(self):
        with pytest.raises(ValueError):
            ControllerConfig(request_buffer_size=3)
        with pytest.raises(ValueError):
            ControllerConfig(refresh_max_postponed=8)


class TestPagePolicySemantics:
    def test_open_two_reads_same_row(self):
        records = [T.TraceRecord(0, "R", 0x0), T.TraceRecord(4, "R", 0x0)]
        metrics, _, _ = run(records, cfg(page_policy=PagePolicy.OPEN))
        assert metrics.row_hit_rate == pytest.approx(0.5)  # 1 hit, 1 miss

    def test_closed_two_reads_same_row(self):
        records = [T.TraceRecord(0, "R", 0x0), T.TraceRecord(4, "R", 0x0)]
        metrics, _, _ = run(records, cfg(page_policy=PagePolicy.CLOSED))
        assert metrics.row_hit_rate == 0.0  # row precharged after each access

    def test_two_reads_different_bank_groups(self):
        records = [T.TraceRecord(0, "R", 0x0), T.TraceRecord(4, "R", 0x40)]
        metrics, _, _ = run(records, cfg())
        assert metrics.bank_group_switches == 1
        assert metrics.bank_switches == 0

    def test_bank_switch_within_group(self):
        records = [T.TraceRecord(0, "R", 0x0), T.TraceRecord(4, "R", 0x100)]
        metrics, _, _ = run(records, cfg())
        assert metrics.bank_switches == 1
        assert metrics.bank_group_switches == 0

    def test_apply_policy_open_keeps(self):
        assert apply_page_policy(PagePolicy.OPEN, 5, []) is False

    def test_apply_policy_closed_precharges_despite_pending(self):
        assert apply_page_policy(PagePolicy.CLOSED, 5, [5]) is True

    def test_apply_policy_open_adaptive(self):
        assert apply_page_policy(PagePolicy.OPEN_ADAPTIVE, 5, [5, 9]) is False
        assert apply_page_policy(PagePolicy.OPEN_ADAPTIVE, 5, [9]) is True
        assert apply_page_policy(PagePolicy.OPEN_ADAPTIVE, 5, []) is False

    def test_apply_policy_closed_adaptive(self):
        assert apply_page_policy(PagePolicy.CLOSED_ADAPTIVE, 5, [5]) is False
        assert apply_page_policy(PagePolicy.CLOSED_ADAPTIVE, 5, [9]) is True
        assert apply_page_policy(PagePolicy.CLOSED_ADAPTIVE, 5, []) is True


def _cand(index, flat, row, bg=0):
    return SimpleNamespace(index=index, flat=flat, row=row, bg=bg)


class TestScheduleNext:
    def setup_method(self):
        self.banks = [BankState() for _ in range(16)]
        self.banks[0].open_row = 7  # bank 0 has row 7 open

    def test_frfcfs_prefers_row_hit(self):
        q = [_cand(0, 1, 3), _cand(1, 0, 7)]
        assert schedule_next(q, Scheduler.FRFCFS, self.banks).index == 1

    def test_fifo_prefers_oldest(self):
        q = [_cand(0, 1, 3), _cand(1, 0, 7)]
        assert schedule_next(q, Scheduler.FIFO, self.banks).index == 0

    def test_frfcfs_falls_back_to_oldest(self):
        q = [_cand(0, 1, 3), _cand(1, 2, 4)]
        assert schedule_next(q, Scheduler.FRFCFS, self.banks).index == 0

    def test_frfcfs_grp_prefers_last_group(self):
        q = [_cand(0, 1, 3, bg=0), _cand(1, 5, 4, bg=1)]
        chosen = schedule_next(q, Scheduler.FRFCFS_GRP, self.banks,
                               last_bank_group=1)
        assert chosen.index == 1

    def test_frfcfs_grp_row_hit_within_group(self):
        self.banks[4].open_row = 9
        q = [_cand(0, 5, 3, bg=1), _cand(1, 4, 9, bg=1), _cand(2, 0, 7, bg=0)]
        chosen = schedule_next(q, Scheduler.FRFCFS_GRP, self.banks,
                               last_bank_group=1)
        assert chosen.index == 1

    def test_frfcfs_grp_without_history_is_frfcfs(self):
        q = [_cand(0, 1, 3), _cand(1, 0, 7)]
        chosen = schedule_next(q, Scheduler.FRFCFS_GRP, self.banks,
                               last_bank_group=-1)
        assert chosen.index == 1

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            schedule_next([], Scheduler.FIFO, self.banks)


class TestRefreshStep:
    def test_no_refresh_never_fires(self):
        c = cfg(refresh_policy=RefreshPolicy.NO_REFRESH)
        assert refresh_step(10**6, 0, c, 100, buffer_occupied=False) is False

    def test_max_postponed_zero_forces_immediately(self):
        c = cfg(refresh_policy=RefreshPolicy.ALL_BANK, refresh_max_postponed=0)
        assert refresh_step(100, 0, c, 100, buffer_occupied=True) is True

    def test_postpone_twice_then_forced(self):
        # hand-simulated debt counter: due refreshes at t=100, 200, 300 with a
        # postpone window of 2 are deferred twice, the third is forced
        c = cfg(refresh_policy=RefreshPolicy.ALL_BANK, refresh_max_postponed=2)
        issued = 0
        assert refresh_step(100, issued, c, 100, buffer_occupied=True) is False
        assert refresh_step(200, issued, c, 100, buffer_occupied=True) is False
        assert refresh_step(300, issued, c, 100, buffer_occupied=True) is True

    def test_due_with_empty_buffer_fires(self):
        c = cfg(refresh_policy=RefreshPolicy.ALL_BANK, refresh_max_postponed=7)
        assert refresh_step(100, 0, c, 100, buffer_occupied=False) is True

    def test_pull_in_only_when_idle_and_credit_available(self):
        c = cfg(refresh_policy=RefreshPolicy.ALL_BANK, refresh_max_pulledin=2)
        assert refresh_step(50, 0, c, 100, buffer_occupied=False) is True
        assert refresh_step(50, 2, c, 100, buffer_occupied=False) is False
        assert refresh_step(50, 0, c, 100, buffer_occupied=True) is False


class TestComputeMetrics:
    def test_latency_formula(self):
        system = SystemParams(energy=EnergyParams(clock_period_ps=1000.0))
        commands = [(0, ACT, 0, 0), (16, RD, 0, 0)]
        outcomes = [SimpleNamespace(request_id=0, arrival=0, completed=32,
                                    delivered=32, is_write=False, row_hit=False)]
        m = compute_metrics(commands, outcomes, 32, system)
        assert m.avg_latency_ps == pytest.approx(32000.0)

    def test_energy_additivity(self):
        e = SYS.energy
        commands = [(0, ACT, 0, 0), (16, RD, 0, 0)]
        outcomes = [SimpleNamespace(request_id=0, arrival=0, completed=36,
                                    delivered=36, is_write=False, row_hit=False)]
        m = compute_metrics(commands, outcomes, 100, SYS)
        assert m.total_energy_pj == e.e_act + e.e_rd + background_energy(100, e)

    def test_zero_requests_rejected(self):
        with pytest.raises(ValueError):
            compute_metrics([], [], 100, SYS)

    def test_zero_elapsed_rejected(self):
        outcomes = [SimpleNamespace(request_id=0, arrival=0, completed=1,
                                    delivered=1, is_write=False, row_hit=True)]
        with pytest.raises(ValueError):
            compute_metrics([], outcomes, 0, SYS)


class TestSimulationBehavior:
    def test_conservation_and_ledger(self):
        records = T.gen_irregular(400, address_space_bytes=1 << 22, seed=11)
        metrics, _, dbg = run(records, cfg())
        assert len(dbg["outcomes"]) == 400  # requests in == responses out
        counts = {k: 0 for k in (ACT, PRE, RD, WR, REF)}
        for _, kind, _, _ in dbg["commands"]:
            counts[kind] += 1
        e = SYS.energy
        expected = (counts[ACT] * e.e_act + counts[PRE] * e.e_pre
                    + counts[RD] * e.e_rd + counts[WR] * e.e_wr
                    + counts[REF] * e.e_ref_per_bank * SYS.topology.total_banks
                    + background_energy(dbg["elapsed_cycles"], e))
        assert metrics.total_energy_pj == expected
        assert counts[RD] + counts[WR] == 400

    def test_single_row_open_vs_closed(self):
        records = T.gen_stream(200, stride_bytes=0)
        open_m, _, _ = run(records, cfg(page_policy=PagePolicy.OPEN))
        closed_m, _, _ = run(records, cfg(page_policy=PagePolicy.CLOSED))
        assert open_m.row_hit_rate >= 0.99
        assert closed_m.row_hit_rate == 0.0
        assert open_m.row_hit_rate >= closed_m.row_hit_rate

    def test_frfcfs_never_bypasses_row_hit(self):
        records = T.gen_irregular(3000, address_space_bytes=1 << 20, seed=5)
        _, _, dbg = run(records, cfg(scheduler=Scheduler.FRFCFS))
        for chosen_hit, any_hit in dbg["decisions"]:
            assert chosen_hit or not any_hit

    def test_bandwidth_below_peak(self):
        records = T.gen_stream(500)
        metrics, _, _ = run(records, cfg())
        assert metrics.avg_bandwidth_bps <= peak_bandwidth_bps(SYS)

    def test_determinism_bit_identical(self):
        records = T.gen_irregular(600, seed=3)
        m1, _, d1 = run(records, DEFAULT_BASELINE)
        m2, _, d2 = run(records, DEFAULT_BASELINE)
        assert m1 == m2
        assert d1["commands"] == d2["commands"]

    def test_state_carryover_keeps_rows_open(self):
        # same row across two partitions: with Open policy the second
        # partition starts with the row already open, so every access hits
        records = T.gen_stream(100, stride_bytes=0)
        c = cfg(page_policy=PagePolicy.OPEN)
        _, state, _ = run(records[:50], c)
        reqs = requests_from_records(records[50:], first_id=50)
        metrics2, _ = simulate_partition(reqs, c, SYS, state)
        assert metrics2.row_hit_rate == 1.0

    def test_empty_partition_rejected(self):
        with pytest.raises(ValueError):
            simulate_partition([], cfg(), SYS)

    def test_max_active_one_serializes(self):
        records = T.gen_stream(64)
        m1, _, _ = run(records, cfg(max_active_transactions=1))
        m16, _, _ = run(records, cfg(max_active_transactions=16))
        assert m1.avg_bandwidth_bps <= m16.avg_bandwidth_bps

    def test_resp_queue_fifo_orders_deliveries(self):
        records = T.gen_irregular(300, seed=8)
        _, _, dbg = run(records, cfg(resp_queue=RespQueue.FIFO))
        delivered = [o.delivered for o in dbg["outcomes"]]
        assert delivered == sorted(delivered)

    def test_resp_queue_reorder_tracks_completion(self):
        records = T.gen_irregular(300, seed=8)
        _, _, dbg = run(records, cfg(resp_queue=RespQueue.REORDER))
        assert all(o.delivered == o.completed for o in dbg["outcomes"])


class TestRefreshBehavior:
    def test_no_refresh_means_zero_refreshes(self):
        records = T.gen_stream(500)
        _, _, dbg = run(records, cfg(refresh_policy=RefreshPolicy.NO_REFRESH))
        assert all(kind != REF for _, kind, _, _ in dbg["commands"])

    def test_allbank_ref_count_bounds(self):
        system = SystemParams(timing=TimingParams(tREFI=100, tRFC=20))
        records = T.gen_stream(2500, gap_cycles=4)  # spans ~1e4 cycles
        c = cfg(refresh_policy=RefreshPolicy.ALL_BANK,
                refresh_max_postponed=2, refresh_max_pulledin=3)
        debug = {}
        reqs = requests_from_records(records)
        metrics, st = simulate_partition(reqs, c, system, debug=debug)
        refs = sum(1 for _, kind, _, _ in debug["commands"] if kind == REF)
        due = debug["elapsed_cycles"] // 100
        assert due - c.refresh_max_postponed <= refs <= due + c.refresh_max_pulledin

    def test_postponed_refresh_carries_over(self):
        system = SystemParams(timing=TimingParams(tREFI=500, tRFC=20))
        c = cfg(refresh_policy=RefreshPolicy.ALL_BANK,
                refresh_max_postponed=7, refresh_max_pulledin=0)
        records = T.gen_stream(300, gap_cycles=4)
        reqs = requests_from_records(records)
        _, st = simulate_partition(reqs, c, system)
        assert st.ref_issued >= st.cycle // 500 - 7


class TestBufferPolicies:
    @pytest.mark.parametrize("buffer_kind", list(SchedulerBuffer))
    def test_all_buffer_kinds_conserve(self, buffer_kind):
        records = T.gen_irregular(500, seed=21)
        metrics, _, dbg = run(records, cfg(scheduler_buffer=buffer_kind,
                                           request_buffer_size=4))
        assert len(dbg["outcomes"]) == 500

    @pytest.mark.parametrize("arbiter", list(Arbiter))
    def test_all_arbiters_conserve(self, arbiter):
        records = T.gen_irregular(500, seed=22)
        metrics, _, dbg = run(records, cfg(arbiter=arbiter))
        assert len(dbg["outcomes"]) == 500

    def test_tiny_buffer_still_serves(self):
        records = T.gen_irregular(200, seed=23)
        metrics, _, dbg = run(records, cfg(request_buffer_size=1,
                                           max_active_transactions=1))
        assert len(dbg["outcomes"]) == 200


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31 - 1), st.sampled_from(list(PagePolicy)),
       st.sampled_from(list(Scheduler)), st.sampled_from(list(Arbiter)))
def test_property_conservation_across_configs(seed, policy, sched, arb):
    records = T.gen_irregular(120, address_space_bytes=1 << 18, seed=seed)
    c = cfg(page_policy=policy, scheduler=sched, arbiter=arb,
            request_buffer_size=8, max_active_transactions=4)
    metrics, _, dbg = run(records, c)
    assert len(dbg["outcomes"]) == 120
    assert metrics.avg_bandwidth_bps <= peak_bandwidth_bps(SYS)
    assert 0.0 <= metrics.row_hit_rate <= 1.0


class TestTuningEnvironment:
    def test_replays_cyclically_with_rebase(self):
        records = T.gen_stream(60)
        parts = T.split(records, 20)
        env = TuningEnvironment(partitions_to_requests(parts), SYS)
        action = action_from_config(cfg())
        for _ in range(5):  # 5 steps > 3 partitions forces a replay
            m = env.step(action)
        assert env.steps_taken == 5
        assert env.state.cycle > 0

    def test_metrics_sequence_deterministic(self):
        records = T.gen_stream(60)
        parts = T.split(records, 20)
        a = action_from_config(DEFAULT_BASELINE)
        runs = []
        for _ in range(2):
            env = TuningEnvironment(partitions_to_requests(parts), SYS)
            runs.append([env.step(a) for _ in range(4)])
        assert runs[0] == runs[1]
