"""Connectivity of an orthogonal two-hop network with one broadcasting relay.

Sources and destinations are 0-based. Each destination ``d`` decodes the
source subset ``decode_sets[d]``; the relay hears every source and
broadcasts to every destination.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

RELAY = "r"


class TopologyError(ValueError):
    pass


@dataclass(frozen=True)
class NetworkTopology:
    num_sources: int
    decode_sets: tuple[frozenset[int], ...]
    name: str = "custom"

    def __init__(self, num_sources: int, decode_sets: Iterable[Iterable[int]], name: str = "custom"):
        object.__setattr__(self, "num_sources", int(num_sources))
        object.__setattr__(self, "decode_sets", tuple(frozenset(int(s) for s in ds) for ds in decode_sets))
        object.__setattr__(self, "name", name)
        validate(self)

    @property
    def num_destinations(self) -> int:
        return len(self.decode_sets)

    @property
    def dest_sets(self) -> tuple[frozenset[int], ...]:
        """``D_s`` for every source: the destinations that decode it."""
        return tuple(
            frozenset(d for d, ds in enumerate(self.decode_sets) if s in ds)
            for s in range(self.num_sources)
        )

    def sorted_decode_set(self, d: int) -> tuple[int, ...]:
        return tuple(sorted(self.decode_sets[d]))

    @property
    def edges(self) -> frozenset[tuple]:
        """Directed links as (sender, receiver); the relay is the string ``"r"``.

        Destinations are tagged ``("d", index)`` so they cannot collide with
        source indices.
        """
        g = set()
        for s, dset in enumerate(self.dest_sets):
            for d in dset:
                g.add((s, ("d", d)))
            g.add((s, RELAY))
        for d in range(self.num_destinations):
            g.add((RELAY, ("d", d)))
        return frozenset(g)

    @property
    def weight_total(self) -> int:
        """Sum of |S_d| over destinations, the normaliser of the average MSE."""
        return sum(len(ds) for ds in self.decode_sets)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "num_sources": self.num_sources,
            "decode_sets": [sorted(ds) for ds in self.decode_sets],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "NetworkTopology":
        return cls(doc["num_sources"], doc["decode_sets"], doc.get("name", "custom"))


def validate(topology: NetworkTopology) -> None:
    """Raise :class:`TopologyError` naming the first violated invariant."""
    n = topology.num_sources
    if n < 1:
        raise TopologyError("num_sources must be >= 1")
    if not topology.decode_sets:
        raise TopologyError("at least one destination is required")
    for d, ds in enumerate(topology.decode_sets):
        if not ds:
            raise TopologyError(f"empty decode set for destination {d}")
        bad = [s for s in ds if not 0 <= s < n]
        if bad:
            raise TopologyError(f"source index out of range in decode set {d}: {bad}")
    covered = set().union(*topology.decode_sets)
    missing = sorted(set(range(n)) - covered)
    if missing:
        raise TopologyError(f"sources {missing} have an empty destination set")


def omarc(n: int) -> NetworkTopology:
    """Multiple-access relay channel: one destination decodes every source."""
    _check_n(n)
    return NetworkTopology(n, [range(n)], name="omarc")


def omcbr(n: int) -> NetworkTopology:
    """Multi-user channel with broadcasting relay: destination d decodes source d."""
    _check_n(n)
    return NetworkTopology(n, [[d] for d in range(n)], name="omcbr")


def otnbr23() -> NetworkTopology:
    """Two sources, three destinations; the third decodes both.

    In 1-based terms S_1={1}, S_2={2}, S_3={1,2}; here {0}, {1}, {0,1}.
    """
    return NetworkTopology(2, [[0], [1], [0, 1]], name="otnbr23")


def _check_n(n: int) -> None:
    if int(n) < 1:
        raise TopologyError("preset requires N >= 1")


def make_preset(kind: str, n: int | None = None) -> NetworkTopology:
    kind = kind.lower().replace("_", "").replace("-", "")
    if kind == "omarc":
        return omarc(2 if n is None else n)
    if kind == "omcbr":
        return omcbr(2 if n is None else n)
    if kind in ("otnbr23", "otnbr(2,3)"):
        if n not in (None, 2):
            raise TopologyError("otnbr23 has exactly two sources")
        return otnbr23()
    raise TopologyError(f"unknown topology preset {kind!r}")


def as_topology(desc: str | dict | Sequence, n: int | None = None) -> NetworkTopology:
    """Build a topology from a preset name, a dict, or a list of decode sets."""
    if isinstance(desc, NetworkTopology):
        return desc
    if isinstance(desc, str):
        return make_preset(desc, n)
    if isinstance(desc, dict):
        if "preset" in desc:
            return make_preset(desc["preset"], desc.get("n", n))
        return NetworkTopology.from_dict(desc)
    sets = [list(ds) for ds in desc]
    num = n if n is not None else 1 + max(max(ds) for ds in sets if ds)
    return NetworkTopology(num, sets)
