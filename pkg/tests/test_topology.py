import pytest
from hypothesis import given, strategies as st

from otnbr.topology import (NetworkTopology, TopologyError, as_topology, make_preset, omarc, omcbr, otnbr23,
                            validate)


def test_otnbr23_sets():
    t = otnbr23()
    assert t.num_sources == 2 and t.num_destinations == 3
    assert [set(s) for s in t.decode_sets] == [{0}, {1}, {0, 1}]
    assert [set(d) for d in t.dest_sets] == [{0, 2}, {1, 2}]


@pytest.mark.parametrize("n", [1, 2, 3, 5])
def test_omarc_and_omcbr(n):
    a = omarc(n)
    assert a.num_destinations == 1 and a.decode_sets[0] == frozenset(range(n))
    b = omcbr(n)
    assert b.num_destinations == n
    assert all(b.decode_sets[d] == {d} for d in range(n))


@pytest.mark.parametrize("n", [1, 2, 4])
def test_edge_count(n):
    for t in (omarc(n), omcbr(n)):
        assert len(t.edges) == n * 1 + t.num_destinations + n


def test_edges_match_definition():
    t = otnbr23()
    expected = {(s, ("d", d)) for s, ds in enumerate(t.dest_sets) for d in ds}
    expected |= {("r", ("d", d)) for d in range(3)} | {(s, "r") for s in range(2)}
    assert t.edges == expected


def test_validation_errors():
    with pytest.raises(TopologyError, match="empty decode set"):
        NetworkTopology(2, [[], [0, 1]])
    with pytest.raises(TopologyError, match="out of range"):
        NetworkTopology(2, [[5], [0, 1]])
    with pytest.raises(TopologyError, match="empty destination set"):
        NetworkTopology(3, [[0], [1]])


def test_presets_reject_zero():
    with pytest.raises((TopologyError, ValueError)):
        make_preset("omarc", 0)
    with pytest.raises((TopologyError, ValueError)):
        make_preset("nosuch", 2)


def test_presets_validate():
    for t in (omarc(3), omcbr(3), otnbr23()):
        validate(t)


def test_roundtrip_and_as_topology():
    t = otnbr23()
    assert NetworkTopology.from_dict(t.to_dict()) == t
    assert as_topology("omcbr", 3) == omcbr(3)
    assert as_topology([[0], [0, 1]]).decode_sets == (frozenset({0}), frozenset({0, 1}))


@given(st.lists(st.sets(st.integers(0, 3), min_size=1), min_size=1, max_size=5))
def test_random_topologies(sets):
    n = 4
    covered = set().union(*sets)
    if covered != set(range(n)):
        with pytest.raises(TopologyError):
            NetworkTopology(n, sets)
        return
    t = NetworkTopology(n, sets)
    assert t.weight_total == sum(len(s) for s in sets)
    for s, ds in enumerate(t.dest_sets):
        assert ds and all(s in t.decode_sets[d] for d in ds)
