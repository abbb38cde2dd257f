import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from byzmatch.protocol import (
    NodeState,
    Predicate,
    ProtocolError,
    Rule,
    RuleNotEnabledError,
    Target,
    all_null_config,
    apply_rule,
    baseline_apply_rule,
    classify,
    config_from_jsonable,
    config_to_jsonable,
    enabled_rule,
    enabled_rules,
    in_lc,
    is_married,
    next_v,
    spec_holds,
    validate_config,
)
from byzmatch.modelcheck import enumerate_configs

from conftest import random_configuration, random_connected_topology, relabel


def independent_predicates(t, cfg, v):
    """Direct transcription of the five predicate definitions, evaluated
    separately (the implementation computes them jointly)."""

    def points_at(x):
        p = cfg[x].pref
        return None if p is None else t.adjacency[x][p]

    def married(x):
        u = points_at(x)
        return u is not None and points_at(u) == x

    u = points_at(v)
    result = {
        Predicate.PROPOSING: u is not None and points_at(u) is None,
        Predicate.MARRIED: u is not None and points_at(u) == v,
        Predicate.DOOMED: u is not None
        and points_at(u) is not None
        and points_at(u) != v,
        Predicate.DEAD: u is None and all(married(w) for w in t.adjacency[v]),
        Predicate.SINGLE: u is None and any(not married(w) for w in t.adjacency[v]),
    }
    return result


# --- classification -------------------------------------------------------

def theorem2_config():
    # 5-chain: ends married pairwise (0-1 and 3-4), middle empty
    return (
        NodeState(0, 0),
        NodeState(0, 0),
        NodeState(None, 0),
        NodeState(1, 0),
        NodeState(0, 0),
    )


class TestClassify:
    def test_edge_mutual_is_married(self, edge):
        cfg = (NodeState(0, 0), NodeState(0, 0))
        assert classify(edge, cfg, 0) is Predicate.MARRIED
        assert classify(edge, cfg, 1) is Predicate.MARRIED

    def test_edge_one_sided(self, edge):
        cfg = (NodeState(0, 0), NodeState(None, 0))
        assert classify(edge, cfg, 0) is Predicate.PROPOSING
        assert classify(edge, cfg, 1) is Predicate.SINGLE

    def test_middle_of_matched_chain_is_dead(self, p5):
        assert classify(p5, theorem2_config(), 2) is Predicate.DEAD

    def test_doomed(self, p5):
        # 1 courts 2, but 2 is married to 3
        cfg = (
            NodeState(None, 0),
            NodeState(1, 0),
            NodeState(1, 0),
            NodeState(0, 0),
            NodeState(None, 0),
        )
        assert classify(p5, cfg, 1) is Predicate.DOOMED
        assert classify(p5, cfg, 2) is Predicate.MARRIED

    def test_matches_independent_formulas_exhaustively(self, p5):
        for cfg in enumerate_configs(p5):
            for v in range(5):
                flags = independent_predicates(p5, cfg, v)
                assert flags[classify(p5, cfg, v)]

    def test_partition_on_random_graphs(self):
        rng = random.Random(13)
        for _ in range(60):
            t = random_connected_topology(rng)
            cfg = random_configuration(rng, t)
            for v in range(t.node_count):
                flags = independent_predicates(t, cfg, v)
                assert sum(flags.values()) == 1
                assert flags[classify(t, cfg, v)]


class TestSpec:
    def test_married_satisfies(self, edge):
        cfg = (NodeState(0, 0), NodeState(0, 0))
        assert spec_holds(edge, cfg, 0)

    def test_single_fails(self, edge):
        assert not spec_holds(edge, all_null_config(edge), 0)

    def test_matched_chain_satisfies_everywhere(self, p5):
        cfg = theorem2_config()
        assert all(spec_holds(p5, cfg, v) for v in range(5))


# --- next_v ----------------------------------------------------------------

class TestNextV:
    def test_scan_starts_past_old_pref(self, p5):
        # node 2 ports: 0 -> node 1, 1 -> node 3; both neighbors uncommitted.
        cfg = all_null_config(p5)
        assert next_v(p5, cfg, 2, Target.NULL) == 1

    def test_old_pref_port_examined_last(self, p5):
        # neighbor behind port 1 is committed elsewhere, so the scan wraps
        # around to the old port.
        cfg = (
            NodeState(None, 0),
            NodeState(None, 0),
            NodeState(None, 0),
            NodeState(1, 0),
            NodeState(None, 0),
        )
        assert next_v(p5, cfg, 2, Target.NULL) == 0

    def test_degree_one_rechooses_only_candidate(self, edge):
        cfg = (NodeState(None, 0), NodeState(None, 0))
        assert next_v(edge, cfg, 0, Target.NULL) == 0

    def test_no_candidate_gives_none(self, p5):
        cfg = (
            NodeState(None, 0),
            NodeState(0, 0),
            NodeState(None, 0),
            NodeState(1, 0),
            NodeState(None, 0),
        )
        assert next_v(p5, cfg, 2, Target.NULL) is None

    def test_self_target_finds_suitor(self, p5):
        # node 1 courts node 2 (port 1 at node 1 is node 2)
        cfg = (
            NodeState(None, 0),
            NodeState(1, 0),
            NodeState(None, 0),
            NodeState(None, 0),
            NodeState(None, 0),
        )
        assert next_v(p5, cfg, 2, Target.SELF) == 0

    def test_self_target_round_robin_among_suitors(self, triangle):
        # both neighbors court node 0; old_pref 0 means port 1 is examined first
        cfg = (
            NodeState(None, 0),
            NodeState(0, 0),
            NodeState(0, 0),
        )
        assert next_v(triangle, cfg, 0, Target.SELF) == 1
        cfg = (
            NodeState(None, 1),
            NodeState(0, 0),
            NodeState(0, 0),
        )
        assert next_v(triangle, cfg, 0, Target.SELF) == 0


# --- guards ----------------------------------------------------------------

class TestEnabledRules:
    def test_married_node_is_quiescent(self, edge):
        cfg = (NodeState(0, 0), NodeState(0, 0))
        assert enabled_rules(edge, cfg, 0) == frozenset()
        assert enabled_rules(edge, cfg, 1) == frozenset()

    def test_all_null_enables_solicit_only(self, edge):
        cfg = all_null_config(edge)
        assert enabled_rules(edge, cfg, 0) == {Rule.S}
        assert enabled_rules(edge, cfg, 1) == {Rule.S}

    def test_doomed_node_enables_abandon(self, p5):
        cfg = (
            NodeState(None, 0),
            NodeState(1, 0),
            NodeState(1, 0),
            NodeState(0, 0),
            NodeState(None, 0),
        )
        assert enabled_rules(p5, cfg, 1) == {Rule.A}

    def test_suitor_enables_accept_not_solicit(self, p5):
        cfg = (
            NodeState(0, 0),
            NodeState(None, 0),
            NodeState(None, 0),
            NodeState(None, 0),
            NodeState(None, 0),
        )
        assert enabled_rules(p5, cfg, 1) == {Rule.M}

    def test_at_most_one_rule_everywhere(self, p5):
        for cfg in enumerate_configs(p5):
            for v in range(5):
                assert len(enabled_rules(p5, cfg, v)) <= 1

    def test_guard_implies_candidate_exists(self, p5):
        # whenever M (resp. S) fires, the scan must find a port
        for cfg in enumerate_configs(p5):
            for v in range(5):
                r = enabled_rule(p5, cfg, v)
                if r is Rule.M:
                    assert next_v(p5, cfg, v, Target.SELF) is not None
                elif r is Rule.S:
                    assert next_v(p5, cfg, v, Target.NULL) is not None


# --- rule application -------------------------------------------------------

class TestApplyRule:
    def test_accept_forms_marriage(self, edge):
        cfg = (NodeState(0, 0), NodeState(None, 0))
        out = apply_rule(edge, cfg, 1, Rule.M)
        assert out[1].pref == 0
        assert classify(edge, out, 0) is Predicate.MARRIED
        assert classify(edge, out, 1) is Predicate.MARRIED

    def test_abandon_records_failure(self, p5):
        cfg = (
            NodeState(None, 0),
            NodeState(1, 0),
            NodeState(1, 0),
            NodeState(0, 0),
            NodeState(None, 0),
        )
        out = apply_rule(p5, cfg, 1, Rule.A)
        assert out[1] == NodeState(None, 1)

    def test_solicit_skips_old_pref_first(self, p5):
        cfg = all_null_config(p5)  # node 1 old_pref is port 0 (node 0)
        out = apply_rule(p5, cfg, 1, Rule.S)
        assert out[1].pref == 1  # proposes to node 2, not back to node 0

    def test_rejects_disabled_rule(self, edge):
        cfg = (NodeState(0, 0), NodeState(0, 0))
        with pytest.raises(RuleNotEnabledError):
            apply_rule(edge, cfg, 0, Rule.A)

    def test_changes_only_the_actor(self, p5):
        rng = random.Random(17)
        for _ in range(50):
            t = random_connected_topology(rng)
            cfg = random_configuration(rng, t)
            for v in range(t.node_count):
                r = enabled_rule(t, cfg, v)
                if r is None:
                    continue
                out = apply_rule(t, cfg, v, r)
                assert all(out[w] == cfg[w] for w in range(t.node_count) if w != v)

    def test_accept_and_solicit_do_not_touch_old_pref(self, p5):
        for cfg in enumerate_configs(p5):
            for v in range(5):
                r = enabled_rule(p5, cfg, v)
                if r in (Rule.M, Rule.S):
                    out = apply_rule(p5, cfg, v, r)
                    assert out[v].old_pref == cfg[v].old_pref


class TestBaselineVariant:
    def test_solicit_scans_from_port_zero(self, p5):
        out = baseline_apply_rule(p5, all_null_config(p5), 1, Rule.S)
        assert out[1].pref == 0

    def test_degree_one_matches_main_protocol(self, edge):
        cfg = all_null_config(edge)
        assert baseline_apply_rule(edge, cfg, 0, Rule.S) == apply_rule(edge, cfg, 0, Rule.S)

    def test_abandon_skips_memory_write(self, p5):
        cfg = (
            NodeState(None, 0),
            NodeState(1, 0),
            NodeState(1, 0),
            NodeState(0, 0),
            NodeState(None, 0),
        )
        out = baseline_apply_rule(p5, cfg, 1, Rule.A)
        assert out[1] == NodeState(None, 0)  # old_pref untouched


# --- stability (no faulty nodes) --------------------------------------------

def run_random_honest_steps(t, cfg, rng, steps=30):
    for _ in range(steps):
        enabled = [v for v in range(t.node_count) if enabled_rule(t, cfg, v)]
        if not enabled:
            break
        v = rng.choice(enabled)
        cfg = apply_rule(t, cfg, v, enabled_rule(t, cfg, v))
    return cfg


class TestStability:
    def test_married_pairs_stay_married(self):
        rng = random.Random(23)
        for _ in range(40):
            t = random_connected_topology(rng)
            cfg = run_random_honest_steps(t, random_configuration(rng, t), rng, steps=5)
            married = [v for v in range(t.node_count) if is_married(t, cfg, v)]
            out = run_random_honest_steps(t, cfg, rng)
            for v in married:
                assert is_married(t, out, v)
                assert out[v].pref == cfg[v].pref

    def test_dead_nodes_stay_dead(self):
        rng = random.Random(29)
        for _ in range(40):
            t = random_connected_topology(rng)
            cfg = run_random_honest_steps(t, random_configuration(rng, t), rng, steps=8)
            dead = [v for v in range(t.node_count) if classify(t, cfg, v) is Predicate.DEAD]
            out = run_random_honest_steps(t, cfg, rng)
            for v in dead:
                assert classify(t, out, v) is Predicate.DEAD

    def test_legitimacy_set_is_quiescent(self, p5):
        # with no faults the shielded set is everyone: legitimate => terminal
        for cfg in enumerate_configs(p5):
            if in_lc(p5, cfg, frozenset(), 2):
                assert all(enabled_rule(p5, cfg, v) is None for v in range(5))


# --- legitimacy set ----------------------------------------------------------

class TestInLc:
    def test_matched_chain_in_lc_for_every_radius(self, p5):
        cfg = theorem2_config()
        for c in range(4):
            assert in_lc(p5, cfg, frozenset(), c)

    def test_all_null_not_in_lc(self, p5):
        assert not in_lc(p5, all_null_config(p5), frozenset(), 2)

    def test_vacuous_when_everyone_faulty(self, p5):
        assert in_lc(p5, all_null_config(p5), frozenset(range(5)), 2)


# --- serialization -----------------------------------------------------------

class TestConfigJson:
    def test_round_trip(self, p5):
        cfg = theorem2_config()
        assert config_from_jsonable(p5, config_to_jsonable(cfg)) == cfg

    def test_rejects_out_of_range_port(self, edge):
        with pytest.raises(ProtocolError, match="out of range"):
            config_from_jsonable(edge, [{"pref": 3, "old_pref": 0}, {"pref": None, "old_pref": 0}])

    def test_rejects_wrong_length(self, edge):
        with pytest.raises(ProtocolError):
            validate_config(edge, (NodeState(None, 0),))


# --- anonymity: behavior must not depend on global labels --------------------

@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2**31))
def test_relabeling_equivariance(seed):
    """Classification and guards are quantified over neighbors, so they are
    invariant under relabeling.  The round-robin *choice* is not: port order
    follows node indices and any fixed order is a legitimate round robin, so
    rule application is only required to land in the same predicate class."""
    rng = random.Random(seed)
    t = random_connected_topology(rng)
    cfg = random_configuration(rng, t)
    perm = list(range(t.node_count))
    rng.shuffle(perm)
    t2, map_config = relabel(t, perm)
    cfg2 = map_config(cfg)
    for v in range(t.node_count):
        w = perm[v]
        assert classify(t, cfg, v) is classify(t2, cfg2, w)
        assert enabled_rule(t, cfg, v) == enabled_rule(t2, cfg2, w)
        r = enabled_rule(t, cfg, v)
        if r is not None:
            out = apply_rule(t, cfg, v, r)
            out2 = apply_rule(t2, cfg2, w, r)
            assert classify(t, out, v) is classify(t2, out2, w)
            assert (out[v].pref is None) == (out2[w].pref is None)
