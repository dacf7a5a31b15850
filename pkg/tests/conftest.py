"""Shared fixtures: device parameters, small networks and window builders."""

from __future__ import annotations

import numpy as np
import pytest

import seasonmpc as sm
from seasonmpc.network import Node


@pytest.fixture(scope="session")
def study_battery() -> sm.StorageParams:
    """The case-study battery: 49 kWh, 16/10 kW, 97%, 0.01%/h leak."""
    return sm.StorageParams(
        eta_ch=0.97, eta_dis=0.97,
        rho=sm.retention_from_self_discharge(0.01),
        e_min=0.0, e_max=49.0, p_ch_max=16.0, p_dis_max=10.0,
        e_init=0.0, e_end=0.0,
    )


@pytest.fixture(scope="session")
def study_heat_storage() -> sm.StorageParams:
    """The seasonal tank: 4640 kWh, 10.2/9.18 kW, 78%, 0.007%/h leak."""
    return sm.StorageParams(
        eta_ch=0.78, eta_dis=0.78,
        rho=sm.retention_from_self_discharge(0.007),
        e_min=0.0, e_max=4640.0, p_ch_max=10.2, p_dis_max=9.18,
        e_init=3000.0, e_end=3000.0,
    )


@pytest.fixture(scope="session")
def study_network(study_battery, study_heat_storage) -> sm.EnergyNetwork:
    return sm.EnergyNetwork.standard(
        study_battery, study_heat_storage, sm.HeatPumpParams(cop=4.0, p_heat_max=15.0)
    )


@pytest.fixture(scope="session")
def small_network() -> sm.EnergyNetwork:
    """Storages small enough to cycle within hours; handy for toy windows."""
    bat = sm.StorageParams(0.9, 0.95, 0.999, 0.0, 20.0, 8.0, 6.0, 5.0, None)
    heat = sm.StorageParams(0.8, 0.85, 0.998, 0.0, 60.0, 12.0, 10.0, 20.0, None)
    return sm.EnergyNetwork.standard(bat, heat, sm.HeatPumpParams(3.5, 14.0))


def make_series(
    T: int,
    *,
    d_de=0.0, d_dh=0.0, p_pv=0.0, p_st=0.0, p_ac=0.0, c_buy=0.2, c_sell=0.05,
) -> sm.SeriesBundle:
    """Constant or per-step series of length T; scalars broadcast."""

    def arr(v):
        a = np.asarray(v, dtype=float)
        return np.full(T, float(a)) if a.ndim == 0 else a

    return sm.SeriesBundle(
        d_de=arr(d_de), d_dh=arr(d_dh), p_pv=arr(p_pv),
        p_st=arr(p_st), p_ac=arr(p_ac), c_buy=arr(c_buy), c_sell=arr(c_sell),
    )


def make_window(
    net: sm.EnergyNetwork,
    series: sm.SeriesBundle,
    *,
    start: int = 0,
    e_init=None,
    end=None,
    dt: float = 1.0,
) -> sm.WindowSpec:
    if e_init is None:
        e_init = {n: net.storage_params[n].e_init for n in (Node.SE, Node.SH)}
    bc = (
        sm.BoundaryConditions(e_init)
        if end is None
        else sm.BoundaryConditions(e_init, end)
    )
    return sm.WindowSpec(start, series.n_steps, series, bc, dt)


def random_window(
    net: sm.EnergyNetwork,
    T: int,
    seed: int,
    *,
    neg_sell_hours: int = 0,
    e_init=None,
) -> sm.WindowSpec:
    """Random feasible-ish window; negative sell prices create binaries.

    AC byproduct and heat demand stay complementary per hour, as ingested
    data always is: AC heat is only storable, so a simultaneous demand
    would make a charge-discharge passthrough genuinely optimal and break
    the positive-price exclusivity argument.
    """
    r = np.random.default_rng(seed)
    c_sell = r.uniform(0.01, 0.15, T)
    if neg_sell_hours:
        idx = r.choice(T, size=min(neg_sell_hours, T), replace=False)
        c_sell[idx] = -r.uniform(0.05, 0.3, len(idx))
    summerish = r.random(T) < 0.3
    series = sm.SeriesBundle(
        d_de=r.uniform(0, 8, T),
        d_dh=np.where(summerish, 0.0, r.uniform(0, 10, T)),
        p_pv=r.uniform(0, 10, T),
        p_st=r.uniform(0, 6, T),
        p_ac=np.where(summerish, r.uniform(0, 3, T), 0.0),
        c_buy=c_sell + 0.2,
        c_sell=c_sell,
    )
    if e_init is None:
        e_init = {Node.SE: 5.0, Node.SH: 20.0}
    return sm.WindowSpec(0, T, series, sm.BoundaryConditions(dict(e_init)))
