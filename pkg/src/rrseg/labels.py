"""Rhetorical-role label sets and the fine-to-main reduction map.

Thirteen fine-grained roles are used for annotation; modeling collapses
them to seven main labels, dropping NON and DIS sentences entirely.
"""
from __future__ import annotations

import enum

from .errors import LabelError


class RhetoricalRole(enum.Enum):
    """Fine-grained sentence role. Serialized form is the exact code."""

    FAC = "FAC"
    ISS = "ISS"
    ARG_P = "ARG-P"
    ARG_R = "ARG-R"
    STA = "STA"
    DIS = "DIS"
    PRE_R = "PRE-R"
    PRE_NR = "PRE-NR"
    PRE_O = "PRE-O"
    RLC = "RLC"
    ROD = "ROD"
    RPC = "RPC"
    NON = "NON"

    def __str__(self) -> str:
        return self.value


class MainLabel(enum.Enum):
    """Reduced seven-class label set used for modeling."""

    FAC = "FAC"
    ARG = "ARG"
    PRE = "PRE"
    ROD = "ROD"
    RPC = "RPC"
    RLC = "RLC"
    STA = "STA"

    def __str__(self) -> str:
        return self.value


#: Total reduction map over the 13 fine labels. ``None`` means the sentence
#: is dropped (NON carries no role; DIS is rare and discarded). ISS reduces
#: to FAC because issues are catalogued as a fine-grained kind of fact.
REDUCTION_MAP: dict[RhetoricalRole, MainLabel | None] = {
    RhetoricalRole.FAC: MainLabel.FAC,
    RhetoricalRole.ISS: MainLabel.FAC,
    RhetoricalRole.ARG_P: MainLabel.ARG,
    RhetoricalRole.ARG_R: MainLabel.ARG,
    RhetoricalRole.PRE_R: MainLabel.PRE,
    RhetoricalRole.PRE_NR: MainLabel.PRE,
    RhetoricalRole.PRE_O: MainLabel.PRE,
    RhetoricalRole.STA: MainLabel.STA,
    RhetoricalRole.RLC: MainLabel.RLC,
    RhetoricalRole.ROD: MainLabel.ROD,
    RhetoricalRole.RPC: MainLabel.RPC,
    RhetoricalRole.NON: None,
    RhetoricalRole.DIS: None,
}

assert set(REDUCTION_MAP) == set(RhetoricalRole)

#: Canonical ordering of the main labels, used for reports and matrices.
MAIN_LABELS: tuple[str, ...] = tuple(m.value for m in MainLabel)

#: Canonical ordering of the fine labels.
FINE_LABELS: tuple[str, ...] = tuple(r.value for r in RhetoricalRole)


def parse_role(code: str) -> RhetoricalRole:
    """Parse an exact fine-label code; any other string is an error."""
    try:
        return RhetoricalRole(code)
    except ValueError:
        raise LabelError(f"unknown rhetorical-role code: {code!r}") from None


def parse_main_label(code: str) -> MainLabel:
    """Parse an exact main-label code."""
    try:
        return MainLabel(code)
    except ValueError:
        raise LabelError(f"unknown main-label code: {code!r}") from None


def reduce_role(role: RhetoricalRole) -> MainLabel | None:
    """Map a fine label to its main label, or ``None`` if it is dropped."""
    return REDUCTION_MAP[role]
