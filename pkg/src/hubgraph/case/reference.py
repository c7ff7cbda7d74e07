"""The remote methane hub: an inland renewable site, a coastal synthesis hub
and a destination terminal linked by LCH4 carriers.

The system is described as flat parameter dictionaries (see ``hubgraph.params``)
so that scenario overrides and the text front end act on the same data.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Mapping
from dataclasses import dataclass

import numpy as np

from ..model import ModelGraph, TimeHorizon, ValidationError
from ..params import CONVERSION, STORAGE, SystemParams, build_graph
from .series import (BUNDLED_SERIES, FIRST_YEAR, HOURS_PER_YEAR, LAST_YEAR, AvailabilitySeries, SeriesError,
                     build_vessel_schedule, load_series, year_offset)
from .tables import TechnologyTable, load_tables

DEFAULT_YEAR = 2016
FULL_HOURS = 43824

# vessel fleet
N_VESSELS = 7
VESSEL_CYCLE = 7 * 24
LOAD_WINDOW = 24
VOYAGE_HOURS = 116
VOYAGE_RETENTION = 0.994

GROUPS = ("electricity", "hydrogen", "carbon_dioxide", "water", "methane")


@dataclass(frozen=True)
class HorizonSelection:
    """Row offset into the bundled hourly series plus the LP horizon."""

    start: int
    T: int
    years: float
    label: str

    def horizon(self, dt: float = 1.0) -> TimeHorizon:
        return TimeHorizon(self.T, dt, self.years)


def resolve_horizon(selection: str | int = DEFAULT_YEAR) -> HorizonSelection:
    """``full``, a calendar year, ``start:T`` or a bare hour count.

    A bare count ``N`` means the first ``N`` hours of the default year.
    Partial horizons are weighted as ``T / 8760`` years.
    """
    s = str(selection).strip().lower()
    if s == "full":
        return HorizonSelection(0, FULL_HOURS, 5.0, "full")
    if ":" in s:
        a, b = s.split(":", 1)
        try:
            start, T = int(a), int(b)
        except ValueError:
            raise SeriesError(f"bad horizon {selection!r}; expected START:T") from None
        if start < 0 or T < 1 or start + T > FULL_HOURS:
            raise SeriesError(f"horizon {selection!r} outside the bundled {FULL_HOURS} hours")
        return HorizonSelection(start, T, T / HOURS_PER_YEAR, s)
    try:
        n = int(s)
    except ValueError:
        raise SeriesError(f"bad horizon {selection!r}; use full, a year, START:T or an hour count") from None
    if FIRST_YEAR <= n <= LAST_YEAR:
        start, T = year_offset(n)
        return HorizonSelection(start, T, 1.0, str(n))
    if n < 1:
        raise SeriesError(f"horizon must be positive, got {n}")
    start, length = year_offset(DEFAULT_YEAR)
    if start + n > FULL_HOURS:
        raise SeriesError(f"horizon of {n} hours runs past the bundled series")
    return HorizonSelection(start, n, n / HOURS_PER_YEAR, f"{DEFAULT_YEAR}+{n}h")


def load_bundled_series(sel: HorizonSelection, path=BUNDLED_SERIES) -> dict[str, AvailabilitySeries]:
    return {c: load_series(path, c, sel.T, sel.start) for c in ("solar", "wind")}


def destination_withdrawal(demand_twh: float, hhv_kwh_per_kg: float) -> float:
    """Hourly methane withdrawal in kt/h for an annual energy demand in TWh."""
    # TWh/yr -> GWh/h, then GWh / (kWh/kg) = kt
    return demand_twh * 1e3 / HOURS_PER_YEAR / hhv_kwh_per_kg


def _tech(table: TechnologyTable, tech: str, fields=("capex", "fom", "vom", "lifetime"), scale=1.0) -> dict:
    out = {}
    for f in fields:
        v = table.value("conversion_economic", tech, f)
        out[f] = v * scale if f in ("capex", "fom", "vom") else v
    return out


def _flex(table: TechnologyTable, tech: str) -> dict:
    out = {}
    rec = table.record("conversion_technical", tech)
    if "mu" in rec:
        out["mu"] = rec["mu"].value
    if "delta" in rec:
        out["delta"] = rec["delta"].value
    return out


def _storage(table: TechnologyTable, tech: str, commodity: str, group: str, flow_costs: bool = True) -> dict:
    tec = table.record("storage_technical", tech)
    retention = tec["eta_s"].value
    p = {
        "commodity": commodity,
        # a tabulated self-discharge of 1.0 reads as "fully retained"
        "eta_s": 0.0 if retention == 1.0 else retention,
        "eta_plus": tec["eta_plus"].value,
        "eta_minus": tec["eta_minus"].value,
        "sigma": tec["sigma"].value,
        "rho": tec["rho"].value,
        "group": group,
        "label": table.label("storage_technical", tech),
    }
    if "phi" in tec:
        p["auxiliary"] = "electricity"
        p["phi.electricity"] = tec["phi"].value
    for f in ("capex", "fom", "vom", "lifetime"):
        p["stock." + f] = table.value("storage_stock_economic", tech, f)
    if flow_costs and table.has("storage_flow_economic", tech):
        for f in ("capex", "fom", "vom", "lifetime"):
            p["flow." + f] = table.value("storage_flow_economic", tech, f)
    return p


def reference_parameters(tables: TechnologyTable, series: Mapping[str, AvailabilitySeries | np.ndarray],
                         T: int, demand: float = 10.0,
                         vessels: tuple[int, int, int] = (N_VESSELS, VESSEL_CYCLE, LOAD_WINDOW)) -> SystemParams:
    tv = lambda tech, f: tables.value("conversion_technical", tech, f)  # noqa: E731
    label = lambda tech: tables.label("conversion_economic", tech)  # noqa: E731
    for key in ("solar", "wind"):
        if key not in series:
            raise SeriesError(f"missing availability series {key!r}")
    solar = np.asarray(getattr(series["solar"], "values", series["solar"]), dtype=float)
    wind = np.asarray(getattr(series["wind"], "values", series["wind"]), dtype=float)
    for key, arr in (("solar", solar), ("wind", wind)):
        if arr.shape != (T,):
            raise SeriesError(f"series length {arr.size} ≠ horizon {T}")
    berth = build_vessel_schedule(*vessels, T).values
    hhv = tables.constant("methane_hhv")

    s = SystemParams()
    n = s.nodes
    n["solar_pv"] = (CONVERSION, {
        "outputs": ["electricity"], "availability": solar, **_tech(tables, "solar_pv"),
        "group": "electricity", "label": label("solar_pv")})
    n["wind"] = (CONVERSION, {
        "outputs": ["electricity"], "availability": wind, **_tech(tables, "wind"),
        "group": "electricity", "label": label("wind")})
    n["battery"] = (STORAGE, _storage(tables, "battery", "electricity", "electricity"))
    n["hvdc"] = (CONVERSION, {
        "inputs": ["electricity_inland"], "outputs": ["electricity_coastal"],
        "reference": "electricity_inland", "sizing": "electricity_inland",
        "ratio.electricity_coastal": tv("hvdc", "phi_1"), **_tech(tables, "hvdc"),
        "group": "electricity", "label": label("hvdc")})
    n["electrolysis"] = (CONVERSION, {
        "inputs": ["electricity", "water"], "outputs": ["hydrogen", "oxygen"],
        "reference": "hydrogen", "sizing": "electricity",
        "ratio.electricity": tv("electrolysis", "phi_1"), "ratio.water": tv("electrolysis", "phi_2"),
        "ratio.oxygen": tv("electrolysis", "phi_3"), **_flex(tables, "electrolysis"),
        **_tech(tables, "electrolysis"), "group": "hydrogen", "label": label("electrolysis")})
    n["hydrogen_storage"] = (STORAGE, _storage(tables, "hydrogen", "hydrogen", "hydrogen"))
    n["desalination"] = (CONVERSION, {
        "inputs": ["electricity"], "outputs": ["water"], "reference": "water", "sizing": "water",
        "ratio.electricity": tv("desalination", "phi_1"), **_flex(tables, "desalination"),
        **_tech(tables, "desalination"), "group": "water", "label": label("desalination")})
    n["water_storage"] = (STORAGE, _storage(tables, "water", "water", "water"))
    n["direct_air_capture"] = (CONVERSION, {
        "inputs": ["electricity", "hydrogen", "water"], "outputs": ["carbon_dioxide"],
        "reference": "carbon_dioxide", "sizing": "carbon_dioxide",
        "ratio.electricity": tv("direct_air_capture", "phi_1"),
        "ratio.hydrogen": tv("direct_air_capture", "phi_2"),
        "ratio.water": tv("direct_air_capture", "phi_3"), **_flex(tables, "direct_air_capture"),
        **_tech(tables, "direct_air_capture"), "group": "carbon_dioxide",
        "label": label("direct_air_capture")})
    n["co2_storage"] = (STORAGE, _storage(tables, "carbon_dioxide", "carbon_dioxide", "carbon_dioxide"))
    # methanation costs are tabulated per GW of methane (HHV); the node is sized in kt/h
    n["methanation"] = (CONVERSION, {
        "inputs": ["hydrogen", "carbon_dioxide"], "outputs": ["methane", "water"],
        "reference": "methane", "sizing": "methane",
        "ratio.hydrogen": tv("methanation", "phi_1"), "ratio.carbon_dioxide": tv("methanation", "phi_2"),
        "ratio.water": tv("methanation", "phi_3"), **_flex(tables, "methanation"),
        **_tech(tables, "methanation", scale=hhv), "group": "methane", "label": label("methanation")})
    n["liquefaction"] = (CONVERSION, {
        "inputs": ["methane", "electricity"], "outputs": ["liquefied_methane"],
        "reference": "liquefied_methane", "sizing": "liquefied_methane",
        "ratio.methane": 1.0, "ratio.electricity": tv("liquefaction", "phi_1"),
        **_flex(tables, "liquefaction"), **_tech(tables, "liquefaction"),
        "group": "methane", "label": label("liquefaction")})
    n["lch4_storage_hub"] = (STORAGE, {**_storage(tables, "methane", "liquefied_methane", "methane"),
                                       "label": "LCH4 Storage (hub)"})
    n["carriers"] = (CONVERSION, {
        "inputs": ["lch4_hub"], "outputs": ["lch4_destination"],
        "reference": "lch4_hub", "sizing": "lch4_hub",
        "ratio.lch4_destination": tv("carriers", "phi_1"), "tau.lch4_destination": VOYAGE_HOURS,
        "availability": berth, **_tech(tables, "carriers"), "group": "methane", "label": label("carriers")})
    n["lch4_storage_destination"] = (STORAGE, {
        **_storage(tables, "methane", "liquefied_methane", "methane"), "label": "LCH4 Storage (destination)"})
    # sized on the regasified methane output, matching the tabulated cost unit
    n["regasification"] = (CONVERSION, {
        "inputs": ["liquefied_methane"], "outputs": ["methane"],
        "reference": "liquefied_methane", "sizing": "methane",
        "ratio.methane": tv("regasification", "phi_1"), **_tech(tables, "regasification"),
        "group": "methane", "label": label("regasification")})

    e = s.edges
    e["inland_power"] = {
        "tail": [("solar_pv", "electricity"), ("wind", "electricity"), ("battery", "discharge")],
        "head": [("battery", "charge"), ("hvdc", "electricity_inland")]}
    e["coastal_power"] = {
        "tail": [("hvdc", "electricity_coastal")],
        "head": [("electrolysis", "electricity"), ("hydrogen_storage", "electricity"),
                 ("desalination", "electricity"), ("water_storage", "electricity"),
                 ("direct_air_capture", "electricity"), ("co2_storage", "electricity"),
                 ("liquefaction", "electricity")]}
    e["coastal_hydrogen"] = {
        "tail": [("electrolysis", "hydrogen"), ("hydrogen_storage", "discharge")],
        "head": [("hydrogen_storage", "charge"), ("direct_air_capture", "hydrogen"),
                 ("methanation", "hydrogen")]}
    e["coastal_water"] = {
        "tail": [("desalination", "water"), ("methanation", "water"), ("water_storage", "discharge")],
        "head": [("water_storage", "charge"), ("electrolysis", "water"), ("direct_air_capture", "water")],
        "sense": "geq"}
    e["coastal_co2"] = {
        "tail": [("direct_air_capture", "carbon_dioxide"), ("co2_storage", "discharge")],
        "head": [("co2_storage", "charge"), ("methanation", "carbon_dioxide")]}
    e["coastal_methane"] = {
        "tail": [("methanation", "methane")],
        "head": [("liquefaction", "methane")]}
    e["coastal_lch4"] = {
        "tail": [("liquefaction", "liquefied_methane"), ("lch4_storage_hub", "discharge")],
        "head": [("lch4_storage_hub", "charge"), ("carriers", "lch4_hub")]}
    e["destination_lch4"] = {
        "tail": [("carriers", "lch4_destination"), ("lch4_storage_destination", "discharge")],
        "head": [("lch4_storage_destination", "charge"), ("regasification", "liquefied_methane")]}
    e["destination_methane"] = {
        "tail": [("regasification", "methane")],
        "head": [],
        "withdrawal": destination_withdrawal(demand, hhv)}
    return s


Override = tuple[str, str, object]


def reference_system(tables: TechnologyTable | None = None, series: Mapping | None = None,
                     demand: float = 10.0, wacc: float = 0.07, horizon: str | int = DEFAULT_YEAR,
                     overrides: Iterable[Override] = ()) -> ModelGraph:
    """Model graph of the hub for a horizon selection of the bundled data."""
    system, sel = reference_case(tables, series, demand, horizon, overrides)
    return build_graph(system, sel.horizon(), wacc)


def reference_case(tables=None, series=None, demand: float = 10.0, horizon: str | int = DEFAULT_YEAR,
                   overrides: Iterable[Override] = ()) -> tuple[SystemParams, HorizonSelection]:
    tables = tables if tables is not None else load_tables()
    sel = resolve_horizon(horizon)
    if series is None:
        series = load_bundled_series(sel)
    if not demand > 0 or not math.isfinite(demand):
        raise ValidationError(f"demand must be positive, got {demand!r}")
    system = reference_parameters(tables, series, sel.T, demand)
    for path, op, value in overrides:
        system.override(path, op, value)
    return system, sel
