"""Tests for the simulated network state machine."""

import pytest

from oransim.kpi import CellId, KpiSeries
from oransim.network import SimulatedNetwork
from oransim.splitting import SplitPolicy
from oransim.traffic import SyntheticProfile


def flat_network(n_hours=48, util=80.0, thr=2.0, cells=2, cap=10.0, history=0):
    base = [
        KpiSeries.from_arrays(CellId(0, c), 0, [util] * n_hours, [thr] * n_hours)
        for c in range(cells)
    ]
    return SimulatedNetwork(base, throughput_cap=cap, history_hours=history)


class TestRealization:
    def test_unsplit_cells_realize_base_exactly(self):
        profile = SyntheticProfile(n_enb=1, cells_per_enb=2, n_days=2, seed=3)
        net = SimulatedNetwork.from_profile(profile, history_hours=48)
        for key in net.active_keys():
            series = net.series(key)
            base = net.baseline_series(0, 48)
            match = [b for b in base if (b.cell.enb, b.cell.cell) == key]
            assert series == match[0]

    def test_history_prerealized(self):
        net = flat_network(history=10)
        assert net.hour == 10
        assert all(net.cells[k].n_samples == 10 for k in net.active_keys())

    def test_exhausting_base_traffic_raises(self):
        net = flat_network(n_hours=5, history=5)
        with pytest.raises(ValueError):
            net.realize_hour()

    def test_rejects_mismatched_series(self):
        a = KpiSeries.from_arrays(CellId(0, 0), 0, [1.0, 2.0], [1.0, 1.0])
        b = KpiSeries.from_arrays(CellId(0, 1), 0, [1.0], [1.0])
        with pytest.raises(ValueError):
            SimulatedNetwork([a, b], throughput_cap=10.0)


class TestSplitEffects:
    def test_split_scales_util_and_throughput(self):
        net = flat_network(util=90.0, thr=0.9, history=4)
        policy = SplitPolicy(r_min=60.0, r_max=60.0, max_factor=2)
        event = net.split((0, 0), policy, policy.rng(), hour=4)
        assert event.parent == CellId(0, 0, 0)
        assert event.child == CellId(0, 2, 1)  # next free index in the eNB
        samples = net.realize_hour()
        parent, child = samples[(0, 0)], samples[(0, 2)]
        assert parent.prb_util == pytest.approx(90.0 * 0.4)
        assert child.prb_util == pytest.approx(90.0 * 0.6)
        assert parent.ip_throughput == pytest.approx(0.9 / 0.4)
        assert child.ip_throughput == pytest.approx(0.9 / 0.6)

    def test_throughput_capped_after_split(self):
        net = flat_network(util=20.0, thr=6.0, cap=10.0, history=4)
        policy = SplitPolicy(r_min=75.0, r_max=75.0, max_factor=2)
        net.split((0, 0), policy, policy.rng(), hour=4)
        samples = net.realize_hour()
        assert samples[(0, 0)].ip_throughput == 10.0  # 6/0.25 = 24, capped
        assert samples[(0, 2)].ip_throughput == pytest.approx(6.0 / 0.75)

    def test_generation_advances_for_both_halves(self):
        net = flat_network(history=4)
        policy = SplitPolicy(r_min=70.0, r_max=70.0, max_factor=4)
        net.split((0, 0), policy, policy.rng(), hour=4)
        assert net.cells[(0, 0)].generation == 1
        assert net.cells[(0, 2)].generation == 1
        assert net.max_factor_reached() == 2

    def test_composed_splits_multiply_fractions(self):
        net = flat_network(util=80.0, thr=1.0, history=2)
        policy = SplitPolicy(r_min=50.0, r_max=50.0, max_factor=4)
        rng = policy.rng()
        net.split((0, 0), policy, rng, hour=2)
        net.split((0, 0), policy, rng, hour=2)
        assert net.cells[(0, 0)].load_fraction == pytest.approx(0.25)
        sample = net.realize_hour()[(0, 0)]
        assert sample.prb_util == pytest.approx(20.0)
        assert sample.ip_throughput == pytest.approx(4.0)

    def test_child_history_starts_at_split(self):
        net = flat_network(history=6)
        policy = SplitPolicy(r_min=70.0, r_max=70.0)
        net.split((0, 0), policy, policy.rng(), hour=6)
        net.realize_hour()
        child = net.cells[(0, 2)]
        assert child.created_at == 6
        assert child.n_samples == 1
        assert net.trailing_window((0, 2), 2) is None
        assert net.trailing_window((0, 0), 2).shape == (2, 2)

    def test_training_history_truncated_at_split(self):
        net = flat_network(history=6)
        policy = SplitPolicy(r_min=70.0, r_max=70.0)
        net.split((0, 0), policy, policy.rng(), hour=6)
        net.realize_hour()
        net.realize_hour()
        hist = net.training_history((0, 0))
        assert hist.start == 6 and len(hist) == 2
        untouched = net.training_history((0, 1))
        assert untouched.start == 0 and len(untouched) == 8

    def test_active_cells_after_split(self):
        net = flat_network(history=2)
        policy = SplitPolicy(r_min=70.0, r_max=70.0)
        net.split((0, 1), policy, policy.rng(), hour=2)
        ids = net.active_cell_ids()
        assert ids == [CellId(0, 0, 0), CellId(0, 1, 1), CellId(0, 2, 1)]


class TestWindows:
    def test_realized_series_clipping(self):
        net = flat_network(history=4)
        policy = SplitPolicy(r_min=70.0, r_max=70.0)
        net.split((0, 0), policy, policy.rng(), hour=4)
        for _ in range(3):
            net.realize_hour()
        window = net.realized_series(2, 5)
        by_cell = {s.cell: s for s in window}
        assert len(by_cell[CellId(0, 1, 0)]) == 5
        assert len(by_cell[CellId(0, 2, 1)]) == 3  # born at hour 4

    def test_window_skips_hours_before_birth(self):
        net = flat_network(history=4)
        policy = SplitPolicy(r_min=70.0, r_max=70.0)
        net.split((0, 0), policy, policy.rng(), hour=4)
        net.realize_hour()
        samples = net.window((0, 2), 3, 2)
        assert [s.timestamp for s in samples] == [4]
