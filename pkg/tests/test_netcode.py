from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from otnbr.netcode import (LinearCode, NotApplicableError, StructuredCode, TableCode, code_from_dict, code_to_dict,
                           encode, is_linear, network_code_rate, num_structured_slots, slot_table,
                           structured_relay_rate, structured_slot, to_table)


def example_table():
    """A nonlinear 8x8 table carrying the witness values f(1,1)=6, f(2,4)=0, f(3,5)=0."""
    t = np.arange(64).reshape(8, 8) % 8
    t[1, 1], t[2, 4], t[3, 5] = 6, 0, 0
    return TableCode(t, 3)


def test_table_encode():
    code = example_table()
    assert encode(code, (1, 1)) == 6 and encode(code, (2, 4)) == 0
    with pytest.raises(ValueError):
        encode(code, (8, 0))
    with pytest.raises(ValueError):
        TableCode(np.full((8, 8), 8), 3)
    with pytest.raises(ValueError):
        TableCode(np.zeros((3, 8), dtype=int), 3)


def test_linear_encode_and_table():
    assert LinearCode((3, 3), 3, (1, 1)).encode((3, 5)) == 6
    assert to_table(LinearCode((1, 1), 1, (1, 1))).table.tolist() == [[0, 1], [1, 0]]


def test_is_linear_examples():
    assert not is_linear(example_table())
    xor = TableCode(np.bitwise_xor.outer(np.arange(8), np.arange(8)), 3)
    assert is_linear(xor)
    with pytest.raises(NotApplicableError):
        is_linear(TableCode(np.zeros((8, 8), dtype=int), 5))


@settings(max_examples=20, deadline=None)
@given(st.tuples(st.integers(1, 7), st.integers(1, 7)))
def test_linear_codes_are_linear(coeffs):
    assert is_linear(to_table(LinearCode((3, 3), 3, coeffs)))


def test_mixed_rate_linear_embedding():
    code = LinearCode((3, 3, 3), 5, (6, 6, 18))
    t = to_table(code)
    assert t.table.shape == (8, 8, 8) and t.table.max() < 32
    assert is_linear(t, allow_mixed_rates=True)


def test_structured_slots():
    rates = (3, 3)
    assert structured_slot(rates, (0, 3)) == 0          # a_0
    assert structured_slot(rates, (4, 6)) == 2 + 3      # b_{0,3}
    assert structured_slot(rates, (7, 1)) == 2 + 4 + 0  # e_0
    assert num_structured_slots(rates) == 8
    st_code = StructuredCode(rates, 3, tuple(range(8)))
    fam = st_code.families()
    assert fam["a"].shape == (2,) and fam["b"].shape == (1, 4) and fam["e"].shape == (2,)
    tab = to_table(st_code).table
    assert len(np.unique(tab)) == 8
    # region shape: rows 0-1 split by the top bit of source 2, rows 2-5 by its top two bits
    assert np.array_equal(tab[0], [0, 0, 0, 0, 1, 1, 1, 1])
    assert np.array_equal(tab[3], [2, 2, 3, 3, 4, 4, 5, 5])
    assert np.array_equal(tab[7], [6, 6, 6, 6, 7, 7, 7, 7])


def test_structured_n3_and_validation():
    rates = (3, 3, 3)
    assert num_structured_slots(rates) == 24
    code = StructuredCode(rates, 5, tuple(range(24)))
    assert len(np.unique(to_table(code).table)) == 24
    with pytest.raises(ValueError):
        StructuredCode((3, 3), 3, (0,) * 8)
    with pytest.raises(ValueError):
        StructuredCode((3, 3), 2, tuple(range(8)))
    assert StructuredCode((2, 2), 2, (0, 1, 2, 3)).band_degenerate


def test_slot_table_covers_all_slots():
    for rates in [(2, 2), (3, 3), (4, 4), (3, 3, 3)]:
        s = slot_table(rates)
        assert set(np.unique(s)) == set(range(num_structured_slots(rates)))


def test_rates():
    assert network_code_rate((3, 3), 3) == Fraction(1, 2)
    assert structured_relay_rate(3, 3) == 5 and network_code_rate((3, 3, 3), 5) == Fraction(5, 9)
    assert structured_relay_rate(2, 2) == 2
    for r in (2, 3, 4):
        assert network_code_rate((r, r), structured_relay_rate(2, r)) == Fraction(1, 2)


@pytest.mark.parametrize("code", [example_table(), LinearCode((3, 3), 3, (2, 5), {"seed": 4}),
                                  StructuredCode((3, 3), 3, (7, 1, 2, 0, 3, 6, 5, 4))])
def test_serialisation_roundtrip(code):
    back = code_from_dict(code_to_dict(code))
    assert type(back) is type(code)
    assert np.array_equal(to_table(back).table, to_table(code).table)
    assert back.metadata == code.metadata


def test_schema_version_mismatch():
    doc = code_to_dict(example_table())
    doc["schema_version"] = 99
    with pytest.raises(ValueError, match="schema"):
        code_from_dict(doc)
