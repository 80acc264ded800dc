import pytest

from rrseg.errors import LabelError
from rrseg.labels import (
    FINE_LABELS,
    MAIN_LABELS,
    REDUCTION_MAP,
    MainLabel,
    RhetoricalRole,
    parse_main_label,
    parse_role,
    reduce_role,
)


def test_label_inventories():
    assert len(FINE_LABELS) == 13
    assert len(MAIN_LABELS) == 7
    assert len(set(FINE_LABELS)) == 13
    assert len(set(MAIN_LABELS)) == 7
    assert set(MAIN_LABELS) == {"FAC", "ARG", "PRE", "ROD", "RPC", "RLC", "STA"}


def test_parse_role_exact_codes():
    assert parse_role("ARG-P") is RhetoricalRole.ARG_P
    assert parse_role("PRE-NR") is RhetoricalRole.PRE_NR
    assert parse_role("FAC") is RhetoricalRole.FAC
    with pytest.raises(LabelError):
        parse_role("arg-p")
    with pytest.raises(LabelError):
        parse_role("XYZ")


def test_parse_main_label():
    assert parse_main_label("ROD") is MainLabel.ROD
    with pytest.raises(LabelError):
        parse_main_label("ARG-P")


def test_reduction_covers_all_fine_labels():
    assert set(REDUCTION_MAP) == set(RhetoricalRole)
    # exactly two fine labels vanish at the main level
    dropped = {r for r, m in REDUCTION_MAP.items() if m is None}
    assert dropped == {RhetoricalRole.NON, RhetoricalRole.DIS}


def test_reduction_groupings():
    assert reduce_role(RhetoricalRole.ISS) is MainLabel.FAC
    assert reduce_role(RhetoricalRole.ARG_P) is MainLabel.ARG
    assert reduce_role(RhetoricalRole.ARG_R) is MainLabel.ARG
    for fine in (RhetoricalRole.PRE_R, RhetoricalRole.PRE_NR, RhetoricalRole.PRE_O):
        assert reduce_role(fine) is MainLabel.PRE
    for fine in (RhetoricalRole.STA, RhetoricalRole.RLC, RhetoricalRole.ROD,
                 RhetoricalRole.RPC, RhetoricalRole.FAC):
        assert reduce_role(fine) is MainLabel(fine.value)
