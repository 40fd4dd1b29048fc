"""Test the LoRaWAN uplink simulation."""

import numpy as np
import pytest

from lorawan_gateway_planner.config import TrafficConfig
from lorawan_gateway_planner.errors import InfeasiblePlanError
from lorawan_gateway_planner.lorawan_sim import (
    avg_pdr,
    payload_symbols,
    preamble_duration,
    run_sim,
    schedule_transmissions,
    sensitivity,
    symbol_duration,
    time_on_air,
)
from lorawan_gateway_planner.models import (
    GainMatrix,
    PlacementSolution,
    PlacementStatus,
    Position,
    Scenario,
)


def one_gateway_setup(powers_dbm):
    """Scenario, placement and alpha for EDs heard by a single gateway."""
    scenario = Scenario(
        gw_candidates=[Position(x_m=0.0, y_m=0.0, z_m=30.0)],
        eds=[Position(x_m=10.0 * (d + 1), y_m=0.0, z_m=1.5) for d in range(len(powers_dbm))],
    )
    placement = PlacementSolution(selected=[1], objective=1, status=PlacementStatus.OPTIMAL)
    alpha = GainMatrix(alpha_dbm=np.array([[p] for p in powers_dbm]), source="test")
    return scenario, placement, alpha


class TestAirtime:
    """Test symbol, preamble and frame durations."""

    def test_symbol_duration_sf7(self):
        """SF7 at 125 kHz lasts 1.024 ms."""
        assert symbol_duration(7, 125_000) == pytest.approx(1.024e-3, abs=1e-12)

    def test_time_on_air_default_frame(self):
        """23-byte SF7 frame takes 61.696 ms."""
        assert time_on_air(TrafficConfig()) == pytest.approx(61.696e-3, abs=1e-9)

    def test_payload_symbols_default(self):
        """23 bytes at SF7, CR 4/5 need 48 payload symbols."""
        assert payload_symbols(TrafficConfig()) == 48

    def test_empty_payload_sf12(self):
        """Empty payload with low data rate optimization keeps the 8 base symbols."""
        assert payload_symbols(TrafficConfig(sf=12, payload_bytes=0)) == 8

    def test_preamble_doubles_per_sf(self):
        """Each SF step doubles the preamble time."""
        durations = [preamble_duration(TrafficConfig(sf=sf)) for sf in range(7, 13)]

        for shorter, longer in zip(durations, durations[1:]):
            assert longer == pytest.approx(2 * shorter)

    def test_higher_coding_rate_is_longer(self):
        """CR 4/8 frames outlast CR 4/5 frames."""
        assert time_on_air(TrafficConfig(coding_rate="4/8")) > time_on_air(TrafficConfig())

    def test_unsupported_bandwidth(self):
        """Only 125, 250 and 500 kHz are accepted."""
        with pytest.raises(ValueError, match="bandwidth"):
            symbol_duration(7, 200_000)


class TestSensitivity:
    """Test the receiver sensitivity table."""

    def test_defaults(self):
        """SF7 and SF12 at 125 kHz."""
        assert sensitivity(7, 125_000) == -130.0
        assert sensitivity(12, 125_000) == -142.5

    def test_override(self):
        """Overrides replace or add entries."""
        assert sensitivity(7, 125_000, {125_000: {7: -125.0}}) == -125.0
        assert sensitivity(7, 250_000, {250_000: {7: -127.0}}) == -127.0

    def test_missing_entry(self):
        """Pairs without a table entry are refused."""
        with pytest.raises(ValueError, match="No sensitivity"):
            sensitivity(7, 250_000)

    def test_simulation_refuses_missing_entry(self):
        """The simulation checks the table before running."""
        scenario, placement, alpha = one_gateway_setup([-100.0])

        with pytest.raises(ValueError, match="No sensitivity"):
            run_sim(scenario, placement, alpha, TrafficConfig(bandwidth_hz=250_000, packets_per_ed=5))


class TestScheduleTransmissions:
    """Test packet start times."""

    def test_periodic_without_random_start(self):
        """Every ED starts at 0 and repeats each period."""
        cfg = TrafficConfig(packets_per_ed=4, duration_s=40.0, random_start=False)

        starts, channels = schedule_transmissions(3, cfg, time_on_air(cfg), np.random.default_rng(0))

        assert starts.tolist() == [[0.0, 10.0, 20.0, 30.0]] * 3
        assert (channels == 0).all()

    def test_radio_sends_one_frame_at_a_time(self):
        """Frames of one ED never overlap even when the period is shorter than the airtime."""
        cfg = TrafficConfig(packets_per_ed=10, duration_s=0.1)
        toa = time_on_air(cfg)

        starts, _ = schedule_transmissions(5, cfg, toa, np.random.default_rng(3))

        assert (np.diff(starts, axis=1) >= toa - 1e-12).all()

    def test_duty_cycle_spacing(self):
        """A 1 % duty cycle spaces frames by at least 100 airtimes."""
        cfg = TrafficConfig(packets_per_ed=10, duration_s=1.0, duty_cycle_limit=0.01)
        toa = time_on_air(cfg)

        starts, _ = schedule_transmissions(4, cfg, toa, np.random.default_rng(1))

        assert (np.diff(starts, axis=1) >= 100 * toa - 1e-9).all()

    def test_channels_in_range(self):
        """Channel draws stay within the configured count."""
        cfg = TrafficConfig(packets_per_ed=50, n_channels=3)

        _, channels = schedule_transmissions(6, cfg, time_on_air(cfg), np.random.default_rng(2))

        assert set(np.unique(channels)) <= {0, 1, 2}


class TestRunSim:
    """Test simulated packet delivery."""

    def test_single_ed_always_delivered(self):
        """A lone ED above sensitivity delivers everything."""
        scenario, placement, alpha = one_gateway_setup([-100.0])

        report = run_sim(scenario, placement, alpha, TrafficConfig(packets_per_ed=50))

        assert report.pdr_overall == 1.0
        assert report.per_ed[0].delivered == 50
        assert report.collisions == 0

    def test_below_sensitivity(self):
        """Packets under the receiver floor are all lost."""
        scenario, placement, alpha = one_gateway_setup([-140.0])

        report = run_sim(scenario, placement, alpha, TrafficConfig(packets_per_ed=20))

        assert report.pdr_overall == 0.0
        assert report.below_sensitivity_drops == 20

    def test_equal_power_overlap_collides(self):
        """Two equally strong EDs sending together lose every packet."""
        scenario, placement, alpha = one_gateway_setup([-100.0, -100.0])
        cfg = TrafficConfig(packets_per_ed=10, random_start=False)

        report = run_sim(scenario, placement, alpha, cfg)

        assert report.pdr_overall == 0.0
        assert report.collisions == 20

    def test_capture_keeps_stronger_packet(self):
        """A 40 dB margin captures the receiver; the weaker packet collides."""
        scenario, placement, alpha = one_gateway_setup([-60.0, -100.0])
        cfg = TrafficConfig(packets_per_ed=10, random_start=False)

        report = run_sim(scenario, placement, alpha, cfg)

        assert report.pdr_per_ed == [1.0, 0.0]
        assert report.collisions == 10

    def test_small_margin_collides_both(self):
        """Below the 6 dB threshold neither packet survives."""
        scenario, placement, alpha = one_gateway_setup([-95.0, -100.0])
        cfg = TrafficConfig(packets_per_ed=10, random_start=False)

        report = run_sim(scenario, placement, alpha, cfg)

        assert report.pdr_overall == 0.0

    def test_demodulation_paths_exhausted(self):
        """With one path the second concurrent packet is blocked."""
        scenario, placement, alpha = one_gateway_setup([-60.0, -100.0])
        cfg = TrafficConfig(packets_per_ed=10, random_start=False, gw_demod_paths=1)

        report = run_sim(scenario, placement, alpha, cfg)

        assert report.pdr_per_ed == [1.0, 0.0]
        assert report.demod_blocked_drops == 10
        assert report.collisions == 0

    def test_separate_channels_do_not_interfere(self):
        """Packets on different channels are independent."""
        scenario, placement, alpha = one_gateway_setup([-100.0] * 4)
        cfg = TrafficConfig(packets_per_ed=30, n_channels=200, random_start=False, seed=5)

        report = run_sim(scenario, placement, alpha, cfg)

        assert report.pdr_overall > 0.9

    def test_deterministic(self):
        """Same inputs and seed give byte-identical reports."""
        scenario, placement, alpha = one_gateway_setup([-100.0, -105.0, -110.0])
        cfg = TrafficConfig(packets_per_ed=100, duration_s=30.0, seed=11)

        first = run_sim(scenario, placement, alpha, cfg)
        second = run_sim(scenario, placement, alpha, cfg)

        assert first.model_dump_json() == second.model_dump_json()
        assert first.seed == 11

    def test_more_load_lowers_pdr(self):
        """Doubling the packet rate lowers the mean PDR."""
        scenario, placement, alpha = one_gateway_setup([-100.0] * 10)

        def mean_pdr(packets):
            return np.mean([
                run_sim(scenario, placement, alpha, TrafficConfig(packets_per_ed=packets, duration_s=60.0, seed=s)).pdr_overall
                for s in range(20)
            ])

        assert mean_pdr(100) <= mean_pdr(50)

    def test_weaker_links_lower_pdr(self):
        """Lowering every received power at fixed traffic lowers the PDR."""
        powers = [-95.0, -105.0, -112.0, -118.0, -121.0, -124.0]
        cfg = TrafficConfig(packets_per_ed=200, duration_s=60.0, seed=4)
        scenario, placement, alpha = one_gateway_setup(powers)
        _, _, weaker = one_gateway_setup([p - 10.0 for p in powers])

        strong = run_sim(scenario, placement, alpha, cfg)
        weak = run_sim(scenario, placement, weaker, cfg)

        assert weak.pdr_overall < strong.pdr_overall
        assert all(w <= s for w, s in zip(weak.pdr_per_ed, strong.pdr_per_ed))

    @pytest.mark.parametrize(
        "powers, paths, seed",
        [
            ([-100.0] * 8, 8, 1),
            ([-60.0, -100.0, -126.0, -140.0, -90.0], 1, 2),
            ([-70.0, -75.0, -110.0, -118.0, -135.0, -100.0, -100.0], 2, 3),
        ],
    )
    def test_every_packet_has_one_outcome(self, powers, paths, seed):
        """Delivered plus each drop counter adds up to the packets sent."""
        scenario, placement, alpha = one_gateway_setup(powers)
        cfg = TrafficConfig(packets_per_ed=150, duration_s=20.0, gw_demod_paths=paths, seed=seed)

        report = run_sim(scenario, placement, alpha, cfg)

        delivered = sum(e.delivered for e in report.per_ed)
        drops = report.collisions + report.below_sensitivity_drops + report.demod_blocked_drops
        assert delivered + drops == sum(e.sent for e in report.per_ed) == 150 * len(powers)

    def test_second_gateway_rescues_packet(self):
        """A packet lost at one gateway can still be received at another."""
        scenario = Scenario(
            gw_candidates=[Position(x_m=0.0, y_m=0.0, z_m=30.0), Position(x_m=500.0, y_m=0.0, z_m=30.0)],
            eds=[Position(x_m=10.0, y_m=0.0, z_m=1.5), Position(x_m=490.0, y_m=0.0, z_m=1.5)],
        )
        alpha = GainMatrix(alpha_dbm=np.array([[-60.0, -100.0], [-100.0, -60.0]]), source="test")
        placement = PlacementSolution(selected=[1, 2], objective=2, status=PlacementStatus.OPTIMAL)

        report = run_sim(scenario, placement, alpha, TrafficConfig(packets_per_ed=10, random_start=False))

        assert report.pdr_overall == 1.0

    def test_infeasible_placement_refused(self):
        """Infeasible placements cannot be simulated."""
        scenario, _, alpha = one_gateway_setup([-100.0])
        placement = PlacementSolution(status=PlacementStatus.INFEASIBLE, uncovered=[1])

        with pytest.raises(InfeasiblePlanError):
            run_sim(scenario, placement, alpha, TrafficConfig())

    def test_dimension_mismatch(self):
        """Alpha must match the scenario."""
        scenario, placement, _ = one_gateway_setup([-100.0])
        alpha = GainMatrix(alpha_dbm=np.full((2, 1), -100.0), source="test")

        with pytest.raises(ValueError, match="alpha is 2x1"):
            run_sim(scenario, placement, alpha, TrafficConfig())


class TestAvgPdr:
    """Test averaging of reports."""

    def test_mean_of_reports(self):
        """Averages overall PDRs."""
        scenario, placement, alpha = one_gateway_setup([-100.0])
        delivered = run_sim(scenario, placement, alpha, TrafficConfig(packets_per_ed=5))
        scenario, placement, alpha = one_gateway_setup([-140.0])
        lost = run_sim(scenario, placement, alpha, TrafficConfig(packets_per_ed=5))

        assert avg_pdr([delivered, lost]) == 0.5

    def test_empty(self):
        """No reports, no average."""
        with pytest.raises(ValueError, match="at least one"):
            avg_pdr([])
