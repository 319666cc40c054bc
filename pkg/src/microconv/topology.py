"""Descriptors of the conditioner topologies considered for the three-phase micro-generator."""

from __future__ import annotations

import enum
from dataclasses import dataclass


class Topology(str, enum.Enum):
    FULL_WAVE = "FULL_WAVE"
    DUAL_STAGE = "DUAL_STAGE"
    QUASI_SINGLE = "QUASI_SINGLE"
    SINGLE_STAGE = "SINGLE_STAGE"


@dataclass(frozen=True)
class TopologyDescriptor:
    tag: Topology
    title: str
    stages: tuple
    summary: str
    simulated: bool


TOPOLOGIES = (
    TopologyDescriptor(
        Topology.FULL_WAVE, "Three-phase full-wave active rectifier",
        ("generator", "active rectifier", "storage capacitor", "load"),
        "Six comparator-driven MOSFETs with body diodes, start-up circuit and gndc sequencer.",
        True,
    ),
    TopologyDescriptor(
        Topology.DUAL_STAGE, "Dual-stage cascade (rectifier + boost)",
        ("generator", "active rectifier", "middle storage capacitor", "PFM boost", "load"),
        "The two converters are decoupled by the middle capacitor and optimised separately.",
        True,
    ),
    TopologyDescriptor(
        Topology.QUASI_SINGLE, "Quasi-single-stage AC-DC step-up",
        ("generator", "rectifier switch-gear", "high-frequency boost chopper", "load"),
        "Middle capacitor removed; the boost chopper switches the full current and uses the phase inductances.",
        False,
    ),
    TopologyDescriptor(
        Topology.SINGLE_STAGE, "Single-stage AC-DC boost rectifier",
        ("generator", "high-frequency switched bridge", "load"),
        "All bridge transistors switch far above the source frequency to rectify and step up at once.",
        False,
    ),
)


class TopologyNotImplementedError(NotImplementedError):
    pass


def describe(tag) -> TopologyDescriptor:
    tag = Topology(tag)
    return next(d for d in TOPOLOGIES if d.tag is tag)


def require_simulatable(tag) -> Topology:
    d = describe(tag)
    if not d.simulated:
        raise TopologyNotImplementedError(
            f"topology {d.tag.value} is a descriptor only and cannot be simulated; "
            "only FULL_WAVE and DUAL_STAGE are implemented")
    return d.tag


def format_topologies() -> str:
    lines = []
    for d in TOPOLOGIES:
        status = "simulated" if d.simulated else "descriptor only (not simulated)"
        lines.append(f"{d.tag.value}: {d.title} [{status}]")
        lines.append("    " + " -> ".join(d.stages))
        lines.append("    " + d.summary)
    return "\n".join(lines)
