import pytest

from primework.netsim import (
    SelfishAction,
    SelfishEvent,
    SelfishState,
    SimConfig,
    revenue_share,
    run_simulation,
    selfish_step,
)


def honest_config(**overrides):
    base = dict(
        shares=(0.25, 0.25, 0.25, 0.25),
        strategies=("HONEST",) * 4,
        blocks=2000,
        seed=1,
    )
    base.update(overrides)
    return SimConfig(**base)


class TestSelfishStep:
    def test_no_lead_adopts_public_chain(self):
        state, action = selfish_step(SelfishState(lead=0), SelfishEvent.RIVAL_BLOCK)
        assert action == SelfishAction.ADOPT
        assert state == SelfishState(lead=0, in_race=False)

    def test_lead_two_publishes_everything(self):
        state, action = selfish_step(SelfishState(lead=2), SelfishEvent.RIVAL_BLOCK)
        assert action == SelfishAction.PUBLISH_ALL
        assert not state.in_race

    def test_lead_one_races(self):
        state, action = selfish_step(SelfishState(lead=1), SelfishEvent.RIVAL_BLOCK)
        assert action == SelfishAction.PUBLISH_ALL
        assert state.in_race

    def test_long_lead_reveals_one(self):
        state, action = selfish_step(SelfishState(lead=4), SelfishEvent.RIVAL_BLOCK)
        assert action == SelfishAction.PUBLISH_ONE
        assert state.lead == 3

    def test_own_find_extends_secret_lead(self):
        state, action = selfish_step(SelfishState(lead=1), SelfishEvent.OWN_BLOCK_FOUND)
        assert action == SelfishAction.WITHHOLD
        assert state.lead == 2 and not state.in_race

    def test_own_find_during_race_wins_it(self):
        state, action = selfish_step(
            SelfishState(lead=0, in_race=True), SelfishEvent.OWN_BLOCK_FOUND
        )
        assert action == SelfishAction.PUBLISH_ALL
        assert state == SelfishState(lead=0, in_race=False)

    def test_tick_is_noop(self):
        state, action = selfish_step(SelfishState(lead=3), SelfishEvent.TICK)
        assert action == SelfishAction.NONE
        assert state.lead == 3


class TestConfig:
    def test_shares_must_sum_to_one(self):
        with pytest.raises(ValueError):
            SimConfig(shares=(0.5, 0.4), strategies=("HONEST", "HONEST"), blocks=10)

    def test_rejects_unknown_strategy(self):
        with pytest.raises(ValueError):
            SimConfig(shares=(1.0,), strategies=("GREEDY",), blocks=10)

    def test_rejects_bad_gamma(self):
        with pytest.raises(ValueError):
            SimConfig(shares=(1.0,), strategies=("HONEST",), blocks=10, gamma=1.5)

    def test_rejects_unknown_keys(self):
        with pytest.raises(ValueError):
            SimConfig.from_dict({"shares": [1.0], "strategies": ["HONEST"], "blocks": 1, "x": 2})

    def test_json_round_trip(self):
        cfg = honest_config(gamma=0.5, delay_min=2, delay_max=7)
        assert SimConfig.from_json(cfg.to_json()) == cfg


class TestHonestRuns:
    def test_single_node_takes_everything(self):
        metrics = run_simulation(SimConfig(shares=(1.0,), strategies=("HONEST",), blocks=50))
        assert metrics.revenue_shares == [1.0]
        assert metrics.orphans == 0
        assert revenue_share(metrics) == [1.0]

    def test_equal_shares_split_evenly(self):
        metrics = run_simulation(honest_config())
        for share in metrics.revenue_shares:
            assert abs(share - 0.25) <= 0.03
        assert metrics.orphans / sum(metrics.produced) < 0.01

    def test_deterministic_metrics(self):
        cfg = honest_config(blocks=500)
        assert run_simulation(cfg).to_json() == run_simulation(cfg).to_json()

    def test_seed_changes_outcome(self):
        a = run_simulation(honest_config(blocks=500, seed=1))
        b = run_simulation(honest_config(blocks=500, seed=2))
        assert a.to_json() != b.to_json()

    def test_conservation(self):
        for cfg in (
            honest_config(blocks=400),
            honest_config(blocks=400, delay_min=5, delay_max=40),
            SimConfig(
                shares=(0.4, 0.6),
                strategies=("SELFISH", "HONEST"),
                blocks=800,
                gamma=1.0,
                seed=9,
            ),
        ):
            metrics = run_simulation(cfg)
            assert metrics.orphans + metrics.best_chain_length == sum(metrics.produced)

    def test_revenue_shares_sum_to_one(self):
        metrics = run_simulation(honest_config(blocks=300, seed=8))
        assert abs(sum(revenue_share(metrics)) - 1.0) < 1e-9

    def test_proportional_one_to_three(self):
        metrics = run_simulation(
            SimConfig(shares=(0.25, 0.75), strategies=("HONEST", "HONEST"), blocks=2000, seed=6)
        )
        small, big = metrics.in_best_chain
        assert abs((small / big) / (1 / 3) - 1) <= 0.15

    def test_low_rate_miner_wins_at_least_once(self):
        metrics = run_simulation(
            SimConfig(shares=(0.01, 0.99), strategies=("HONEST", "HONEST"), blocks=500, seed=3)
        )
        assert metrics.in_best_chain[0] >= 1

    def test_delayed_network_still_converges(self):
        metrics = run_simulation(honest_config(blocks=600, delay_min=10, delay_max=60, seed=4))
        assert metrics.best_chain_length > 0
        assert sum(metrics.in_best_chain) == metrics.best_chain_length


class TestSelfishRuns:
    def test_strong_selfish_beats_fair_share(self):
        cfg = SimConfig(
            shares=(0.4, 0.6),
            strategies=("SELFISH", "HONEST"),
            blocks=4000,
            gamma=1.0,
            seed=2,
        )
        metrics = run_simulation(cfg)
        assert metrics.revenue_shares[0] > 0.4

    def test_gamma_helps_the_attacker(self):
        base = dict(
            shares=(0.3, 0.7), strategies=("SELFISH", "HONEST"), blocks=6000, seed=12
        )
        with_gamma = run_simulation(SimConfig(gamma=1.0, **base))
        without = run_simulation(SimConfig(gamma=0.0, **base))
        assert with_gamma.revenue_shares[0] > without.revenue_shares[0]

    def test_withheld_blocks_become_orphans(self):
        cfg = SimConfig(
            shares=(0.2, 0.8),
            strategies=("SELFISH", "HONEST"),
            blocks=1500,
            gamma=0.0,
            seed=5,
        )
        metrics = run_simulation(cfg)
        # a weak attacker loses races regularly: orphans must appear
        assert metrics.orphans > 0
        assert metrics.orphans + metrics.best_chain_length == sum(metrics.produced)

    def test_reorgs_recorded(self):
        cfg = SimConfig(
            shares=(0.4, 0.6),
            strategies=("SELFISH", "HONEST"),
            blocks=2000,
            gamma=1.0,
            seed=7,
        )
        metrics = run_simulation(cfg)
        assert sum(metrics.reorg_depths.values()) > 0


class TestRealMode:
    def test_real_blocks_validate_and_reproduce(self):
        cfg = SimConfig(
            shares=(0.6, 0.4),
            strategies=("HONEST", "HONEST"),
            blocks=6,
            seed=2,
            mining_model="REAL",
        )
        metrics = run_simulation(cfg)
        assert metrics.invalid_blocks == 0
        assert metrics.best_chain_length >= 1
        assert run_simulation(cfg).to_json() == metrics.to_json()


class TestDifficultyLoop:
    def test_interval_regulation_and_recovery(self):
        cfg = SimConfig(
            shares=(0.5, 0.5),
            strategies=("HONEST", "HONEST"),
            blocks=1600,
            seed=5,
            initial_target=3.0,
            compute_profile=((0, 1.0), (800, 2.0)),
        )
        metrics = run_simulation(cfg)
        intervals = [
            b - a
            for a, b in zip([0] + metrics.chain_timestamps, metrics.chain_timestamps)
        ]
        spacing = cfg.target_spacing
        steady = sum(intervals[200:800]) / 600
        assert abs(steady - spacing) / spacing <= 0.2
        recovered = sum(intervals[900:1100]) / 200
        assert abs(recovered - spacing) / spacing <= 0.2
        # target roughly doubles after compute doubles (window means; the
        # instantaneous target wobbles with the interval noise)
        before = sum(metrics.chain_targets[600:800]) / 200
        after = sum(metrics.chain_targets[1400:1600]) / 200
        assert after / before > 1.7
