"""Domain model of the building's electricity-heat network.

Nine components exchange power over a fixed set of directed arcs. Solar PV
and the power grid feed the electric side, solar thermal and the AC heat
byproduct feed the heat side, and a heat pump couples the two. A battery
and a seasonal heat store give the system its intertemporal structure.

All quantities use kW, kWh, hours and EUR/kWh. Self-discharge is stored
canonically as the hourly retention fraction ``rho`` (1 means lossless);
use :func:`retention_from_self_discharge` to convert a percent-per-hour
leak rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "Node",
    "Arc",
    "CANONICAL_ARCS",
    "StorageParams",
    "HeatPumpParams",
    "EnergyNetwork",
    "TimeGrid",
    "SeriesBundle",
    "DurationUndefinedError",
    "UnreachableCapacityError",
    "retention_from_self_discharge",
    "validate_network",
    "storage_durations",
    "leaky_fill_horizon",
    "inflow_nodes",
    "outflow_nodes",
]


class Node(str, Enum):
    """Component identifiers of the building energy system."""

    DE = "DE"  # electricity demand
    PV = "PV"  # solar photovoltaics
    PG = "PG"  # power grid
    SE = "SE"  # electricity storage (battery)
    HP = "HP"  # heat pump
    SH = "SH"  # seasonal heat storage
    AC = "AC"  # air conditioning heat byproduct
    ST = "ST"  # solar thermal
    DH = "DH"  # heat demand

    def __str__(self) -> str:  # keep CSV headers and LP names short
        return self.value


Arc = tuple[Node, Node]

#: Admissible directed power flows of the reference building topology.
CANONICAL_ARCS: frozenset[Arc] = frozenset(
    {
        (Node.PV, Node.DE),
        (Node.PV, Node.SE),
        (Node.PV, Node.HP),
        (Node.PV, Node.PG),
        (Node.PG, Node.DE),
        (Node.PG, Node.SE),
        (Node.PG, Node.HP),
        (Node.SE, Node.DE),
        (Node.SE, Node.HP),
        (Node.SE, Node.PG),
        (Node.ST, Node.DH),
        (Node.ST, Node.SH),
        (Node.AC, Node.SH),
        (Node.HP, Node.DH),
        (Node.HP, Node.SH),
        (Node.SH, Node.DH),
    }
)

#: Storage nodes, in deterministic order.
STORAGE_NODES: tuple[Node, Node] = (Node.SE, Node.SH)

#: Nodes that only consume (no outgoing arcs) and only produce (no incoming).
SINK_NODES: frozenset[Node] = frozenset({Node.DE, Node.DH})
SOURCE_NODES: frozenset[Node] = frozenset({Node.PV, Node.ST, Node.AC})


class DurationUndefinedError(ValueError):
    """A charge or discharge duration is requested with a zero power bound."""


class UnreachableCapacityError(ValueError):
    """Self-discharge caps the reachable level below the storage capacity."""


def retention_from_self_discharge(pct_per_hour: float) -> float:
    """Convert a self-discharge rate in percent per hour to retention ``rho``."""
    if not 0.0 <= pct_per_hour < 100.0:
        raise ValueError(f"self-discharge {pct_per_hour}%/h outside [0, 100)")
    return 1.0 - pct_per_hour / 100.0


@dataclass(frozen=True)
class StorageParams:
    """Parameters of one storage device.

    Attributes
    ----------
    eta_ch, eta_dis : float
        Charge and discharge efficiencies in (0, 1].
    rho : float
        Fraction of stored energy retained per hour, in (0, 1].
    e_min, e_max : float
        State-of-energy bounds in kWh.
    p_ch_max, p_dis_max : float
        Charge and discharge power bounds in kW.
    e_init : float
        State of energy before the first step, kWh.
    e_end : float or None
        Year-end target level in kWh, if the device has one.
    """

    eta_ch: float
    eta_dis: float
    rho: float
    e_min: float
    e_max: float
    p_ch_max: float
    p_dis_max: float
    e_init: float
    e_end: float | None = None


@dataclass(frozen=True)
class HeatPumpParams:
    """Heat pump with conversion ratio ``cop`` and heat output cap in kW."""

    cop: float
    p_heat_max: float


@dataclass(frozen=True)
class EnergyNetwork:
    """Arc set plus per-device parameters of the modeled system."""

    arcs: frozenset[Arc]
    storage_params: dict[Node, StorageParams]
    heat_pump: HeatPumpParams

    @classmethod
    def standard(
        cls,
        storage_elec: StorageParams,
        storage_heat: StorageParams,
        heat_pump: HeatPumpParams,
    ) -> "EnergyNetwork":
        """Build the canonical topology with the given device parameters."""
        return cls(
            arcs=CANONICAL_ARCS,
            storage_params={Node.SE: storage_elec, Node.SH: storage_heat},
            heat_pump=heat_pump,
        )


def inflow_nodes(net: EnergyNetwork, node: Node) -> list[Node]:
    """Nodes with an arc into ``node``, sorted for deterministic iteration."""
    return sorted((a for a, b in net.arcs if b is node), key=lambda n: n.value)


def outflow_nodes(net: EnergyNetwork, node: Node) -> list[Node]:
    """Nodes that ``node`` has an arc to, sorted."""
    return sorted((b for a, b in net.arcs if a is node), key=lambda n: n.value)


def _validate_storage(name: Node, sp: StorageParams) -> list[str]:
    out = []
    for attr in ("eta_ch", "eta_dis"):
        v = getattr(sp, attr)
        if not 0.0 < v <= 1.0:
            out.append(f"storage {name}: {attr}={v} outside (0, 1]")
    if not 0.0 < sp.rho <= 1.0:
        out.append(f"storage {name}: rho={sp.rho} outside (0, 1]")
    if not sp.e_min <= sp.e_init <= sp.e_max:
        out.append(
            f"storage {name}: e_init={sp.e_init} violates "
            f"e_min <= e_init <= e_max ({sp.e_min}, {sp.e_max})"
        )
    if sp.e_min < 0.0:
        out.append(f"storage {name}: e_min={sp.e_min} negative")
    if sp.e_end is not None and not sp.e_min <= sp.e_end <= sp.e_max:
        out.append(
            f"storage {name}: e_end={sp.e_end} outside [{sp.e_min}, {sp.e_max}]"
        )
    if sp.p_ch_max < 0.0:
        out.append(f"storage {name}: p_ch_max={sp.p_ch_max} negative")
    if sp.p_dis_max < 0.0:
        out.append(f"storage {name}: p_dis_max={sp.p_dis_max} negative")
    return out


def validate_network(net: EnergyNetwork) -> list[str]:
    """Check the topology and parameters; return one message per violation.

    An empty list means the network satisfies every structural rule:
    the arc set matches the canonical topology exactly, both storages are
    parameterized, and all device parameters are within range. Violations
    are data, not exceptions, so that malformed networks can be inspected.
    """
    violations: list[str] = []
    for arc in sorted(net.arcs - CANONICAL_ARCS, key=lambda a: (a[0].value, a[1].value)):
        detail = ""
        if arc[0] in SINK_NODES:
            detail = f" ({arc[0]} is a pure sink)"
        elif arc[1] in SOURCE_NODES:
            detail = f" ({arc[1]} is a pure source)"
        violations.append(f"arc {arc[0]}->{arc[1]} is not admissible{detail}")
    for arc in sorted(CANONICAL_ARCS - net.arcs, key=lambda a: (a[0].value, a[1].value)):
        violations.append(f"arc {arc[0]}->{arc[1]} missing from topology")

    for node in STORAGE_NODES:
        sp = net.storage_params.get(node)
        if sp is None:
            violations.append(f"storage {node}: parameters missing")
        else:
            violations.extend(_validate_storage(node, sp))
    for node in sorted(set(net.storage_params) - set(STORAGE_NODES), key=lambda n: n.value):
        violations.append(f"node {node} is not a storage but has storage parameters")

    hp = net.heat_pump
    if not hp.cop > 0.0:
        violations.append(f"heat pump: cop={hp.cop} must be positive")
    if hp.p_heat_max < 0.0:
        violations.append(f"heat pump: p_heat_max={hp.p_heat_max} negative")
    return violations


def storage_durations(sp: StorageParams) -> tuple[float, float]:
    """Hours to traverse the full capacity range at maximum power.

    Returns ``(t_charge, t_discharge)`` ignoring self-discharge: the charge
    duration is ``(e_max - e_min) / (eta_ch * p_ch_max)`` and the discharge
    duration ``(e_max - e_min) / (p_dis_max / eta_dis)``.
    """
    if sp.p_ch_max <= 0.0 or sp.p_dis_max <= 0.0:
        raise DurationUndefinedError(
            f"durations undefined for power bounds ch={sp.p_ch_max}, dis={sp.p_dis_max}"
        )
    span = sp.e_max - sp.e_min
    t_charge = span / (sp.eta_ch * sp.p_ch_max)
    t_discharge = span / (sp.p_dis_max / sp.eta_dis)
    return t_charge, t_discharge


def _geometric_crossing(rate_kwh_per_h: float, span: float, rho: float) -> float:
    """Smallest t with rate * (1 - rho**t) / (1 - rho) >= span, real-valued."""
    steady_state = rate_kwh_per_h / (1.0 - rho)
    if steady_state < span:
        raise UnreachableCapacityError(
            f"steady-state level {steady_state:.6g} kWh below capacity span "
            f"{span:.6g} kWh at rho={rho}"
        )
    return math.log1p(-span * (1.0 - rho) / rate_kwh_per_h) / math.log(rho)


def leaky_fill_horizon(sp: StorageParams) -> float:
    """Hours for a full charge followed by a full discharge under leakage.

    While charging at the power bound the stored energy follows the
    recursion ``e_t = rho * e_(t-1) + eta_ch * p_ch_max``, so the level
    after t hours is the geometric sum ``eta_ch * p_ch_max * (1-rho^t)/(1-rho)``.
    The charge horizon is the (real-valued) crossing time of the capacity
    span, the discharge horizon the analogous crossing at the discharge
    rate ``p_dis_max / eta_dis``, and the result is their sum. With
    ``rho == 1`` this reduces exactly to :func:`storage_durations`.

    Raises :class:`UnreachableCapacityError` when leakage caps the
    reachable level below the capacity span.
    """
    if sp.p_ch_max <= 0.0 or sp.p_dis_max <= 0.0:
        raise DurationUndefinedError(
            f"fill horizon undefined for power bounds ch={sp.p_ch_max}, dis={sp.p_dis_max}"
        )
    span = sp.e_max - sp.e_min
    if span == 0.0:
        return 0.0
    if sp.rho >= 1.0:
        return sum(storage_durations(sp))
    t_charge = _geometric_crossing(sp.eta_ch * sp.p_ch_max, span, sp.rho)
    t_discharge = _geometric_crossing(sp.p_dis_max / sp.eta_dis, span, sp.rho)
    return t_charge + t_discharge


@dataclass(frozen=True)
class TimeGrid:
    """Discretization of the planning problem.

    ``n_steps`` is the total horizon length in steps, ``dt_hours`` the step
    width, and ``control_steps`` the prefix of each optimization window
    whose decisions are implemented.
    """

    n_steps: int
    dt_hours: float = 1.0
    control_steps: int = 24

    def __post_init__(self) -> None:
        if self.dt_hours <= 0.0:
            raise ValueError(f"dt_hours={self.dt_hours} must be positive")
        if not self.n_steps >= self.control_steps >= 1:
            raise ValueError(
                f"need n_steps >= control_steps >= 1, got {self.n_steps}, {self.control_steps}"
            )


_SERIES_FIELDS = ("d_de", "d_dh", "p_pv", "p_st", "p_ac", "c_buy", "c_sell")
_NONNEGATIVE_FIELDS = ("d_de", "d_dh", "p_pv", "p_st", "p_ac")


@dataclass(frozen=True)
class SeriesBundle:
    """Exogenous hourly series driving the optimization.

    ``d_de`` and ``d_dh`` are the electric and heat loads in kW, ``p_pv``
    and ``p_st`` the solar productions, ``p_ac`` the AC heat byproduct
    available for storage, and ``c_buy``/``c_sell`` the grid prices in
    EUR/kWh. Loads and productions are nonnegative; prices may be negative.
    """

    d_de: np.ndarray
    d_dh: np.ndarray
    p_pv: np.ndarray
    p_st: np.ndarray
    p_ac: np.ndarray
    c_buy: np.ndarray
    c_sell: np.ndarray

    def __post_init__(self) -> None:
        lengths = set()
        for name in _SERIES_FIELDS:
            arr = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=float))
            if arr.ndim != 1:
                raise ValueError(f"series {name} must be 1-D")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
            lengths.add(arr.shape[0])
        if len(lengths) != 1:
            raise ValueError(f"series lengths differ: {sorted(lengths)}")
        for name in _NONNEGATIVE_FIELDS:
            arr = getattr(self, name)
            if arr.size and float(arr.min()) < 0.0:
                bad = int(np.argmin(arr))
                raise ValueError(f"series {name} negative at index {bad}: {arr[bad]}")

    @property
    def n_steps(self) -> int:
        return int(self.d_de.shape[0])

    def window(self, start: int, length: int) -> "SeriesBundle":
        """Slice ``length`` steps starting at ``start`` out of every series."""
        if start < 0 or length < 0 or start + length > self.n_steps:
            raise ValueError(
                f"window [{start}, {start + length}) outside series of length {self.n_steps}"
            )
        return SeriesBundle(
            **{name: getattr(self, name)[start : start + length] for name in _SERIES_FIELDS}
        )

    def series(self, name: str) -> np.ndarray:
        if name not in _SERIES_FIELDS:
            raise KeyError(name)
        return getattr(self, name)
