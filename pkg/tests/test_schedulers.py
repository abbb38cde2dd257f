import random

from byzmatch.analysis import ResolvedScenario, run_simulation
from byzmatch.adversary import StrategySpec
from byzmatch.protocol import NodeState, all_null_config
from byzmatch.schedulers import (
    AdversarialGreedy,
    RoundRobinAge,
    SeededRandomFair,
    fairness_audit,
    fairness_threshold,
    make_policy,
    new_daemon_state,
    next_actor,
)

from conftest import random_configuration, random_connected_topology


class TestNextActor:
    def test_max_age_wins(self, p5):
        state = new_daemon_state(RoundRobinAge(), 5)
        state.ages = [0, 5, 0, 2, 0]
        cfg = all_null_config(p5)
        choice = next_actor(RoundRobinAge(), state, p5, cfg, (1, 3), False, ())
        assert choice == ("honest", 1)

    def test_age_tie_breaks_to_lowest_index(self, p5):
        state = new_daemon_state(RoundRobinAge(), 5)
        state.ages = [0, 3, 0, 3, 0]
        choice = next_actor(RoundRobinAge(), state, p5, all_null_config(p5), (3, 1), False, ())
        assert choice.node == 1

    def test_quiescent_when_nothing_enabled(self, p5):
        state = new_daemon_state(RoundRobinAge(), 5)
        choice = next_actor(RoundRobinAge(), state, p5, all_null_config(p5), (), False, ())
        assert choice.kind == "quiescent"

    def test_byz_turn_preempts(self, p5):
        state = new_daemon_state(RoundRobinAge(), 5)
        choice = next_actor(RoundRobinAge(), state, p5, all_null_config(p5), (1, 2), True, (0,))
        assert choice == ("byz", 0)

    def test_byz_rotation(self, p5):
        state = new_daemon_state(RoundRobinAge(), 5)
        cfg = all_null_config(p5)
        first = next_actor(RoundRobinAge(), state, p5, cfg, (), True, (0, 4))
        state.byz_cursor += 1
        second = next_actor(RoundRobinAge(), state, p5, cfg, (), True, (0, 4))
        assert (first.node, second.node) == (0, 4)

    def test_random_policy_starvation_guard(self, p5):
        policy = SeededRandomFair(seed=1)
        state = new_daemon_state(policy, 5)
        state.ages = [0, 2 * 5, 0, 0, 0]  # node 1 hit the guard
        for _ in range(10):
            choice = next_actor(policy, state, p5, all_null_config(p5), (1, 2, 3), False, ())
            assert choice.node == 1

    def test_greedy_picks_worst_next_potential(self, p5):
        # node 0 accepting marries immediately (big drop); node 4 soliciting
        # only turns single into proposing (small drop): greedy delays.
        cfg = (
            NodeState(None, 0),
            NodeState(0, 0),
            NodeState(None, 0),
            NodeState(None, 0),
            NodeState(None, 0),
        )
        from byzmatch.analysis import potential
        from byzmatch.protocol import apply_rule

        policy = AdversarialGreedy()
        state = new_daemon_state(policy, 5)
        choice = next_actor(
            policy, state, p5, cfg, (0, 4), False, (),
            apply_fn=apply_rule, score_fn=lambda c: potential(p5, c, frozenset()),
        )
        assert choice.node == 4

    def test_make_policy(self):
        assert make_policy("round-robin-age").kind == "round-robin-age"
        assert make_policy("seeded-random", seed=9).seed == 9
        assert make_policy("adversarial-greedy").kind == "adversarial-greedy"


class TestBoundedWaiting:
    def test_round_robin_age_waits_at_most_honest_count(self):
        rng = random.Random(31)
        for _ in range(25):
            t = random_connected_topology(rng)
            resolved = ResolvedScenario(
                topology=t,
                initial=random_configuration(rng, t),
                policy=RoundRobinAge(),
                max_steps=200,
            )
            summary = run_simulation(resolved).summary
            assert summary["fairness"]["max_wait"] <= t.node_count
            assert summary["fairness"]["violations"] == []

    def test_guarded_policies_stay_under_audit_threshold(self, p5):
        for policy in (SeededRandomFair(seed=3), AdversarialGreedy()):
            resolved = ResolvedScenario(
                topology=p5,
                initial=all_null_config(p5),
                byz=frozenset({0}),
                strategy=StrategySpec("oscillator", period=1),
                policy=policy,
                max_steps=300,
            )
            summary = run_simulation(resolved).summary
            assert summary["fairness"]["max_wait"] <= fairness_threshold(p5)
            assert summary["fairness"]["violations"] == []


class TestDeterminism:
    def test_identical_runs_identical_traces(self, p5):
        def run_once(policy):
            resolved = ResolvedScenario(
                topology=p5,
                initial=all_null_config(p5),
                byz=frozenset({0}),
                strategy=StrategySpec("divorcer"),
                policy=policy,
                max_steps=100,
            )
            return run_simulation(resolved).events

        for policy in (RoundRobinAge(), SeededRandomFair(seed=42), AdversarialGreedy()):
            assert run_once(policy) == run_once(policy)


class TestFairnessAudit:
    def test_round_robin_trace_is_clean(self, p5):
        resolved = ResolvedScenario(topology=p5, initial=all_null_config(p5), max_steps=100)
        result = run_simulation(resolved)
        report = fairness_audit(p5, frozenset(), resolved.initial, result.events)
        assert report == []

    def test_seeded_random_trace_is_clean(self, p5):
        resolved = ResolvedScenario(
            topology=p5,
            initial=all_null_config(p5),
            policy=SeededRandomFair(seed=42),
            max_steps=100,
        )
        result = run_simulation(resolved)
        assert fairness_audit(p5, frozenset(), resolved.initial, result.events) == []

    def test_starved_node_is_named(self, p5):
        # Synthetic trace: node 0 flips its pref forever, nodes 1..4 never
        # move.  Node 2 stays enabled (null pref, uncommitted neighbors)
        # beyond any threshold and must be reported.
        initial = all_null_config(p5)
        events = []
        threshold = fairness_threshold(p5)
        for step in range(2 * threshold + 4):
            pref = 0 if step % 2 == 0 else None
            events.append(
                {
                    "step": step,
                    "actor": 0,
                    "kind": "rule",
                    "new_state": {"pref": pref, "old_pref": 0},
                }
            )
        report = fairness_audit(p5, frozenset(), initial, events)
        assert any(v.node == 2 for v in report)

    def test_threshold_is_node_count_times_state_count(self, p5):
        assert fairness_threshold(p5) == 5 * 6
