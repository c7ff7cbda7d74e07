"""Techno-economic tables of the case study, loaded from YAML."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import yaml

from .series import DATA_DIR

BUNDLED_TABLES = DATA_DIR / "technologies.yaml"
SECTIONS = (
    "conversion_technical", "conversion_economic", "storage_technical",
    "storage_stock_economic", "storage_flow_economic",
)


class TableError(KeyError):
    def __str__(self):
        return str(self.args[0])


@dataclass(frozen=True)
class Entry:
    value: float
    unit: str


@dataclass(frozen=True)
class TechnologyTable:
    """Per-technology records, each value paired with its table unit."""

    sections: dict
    constants: dict
    source: str = ""

    def record(self, section: str, tech: str) -> dict:
        if section not in self.sections:
            raise TableError(f"no table section {section!r}")
        rec = self.sections[section].get(tech)
        if rec is None:
            raise TableError(f"missing table record {section}.{tech}")
        return rec

    def has(self, section: str, tech: str) -> bool:
        return tech in self.sections.get(section, {})

    def entry(self, section: str, tech: str, field: str) -> Entry:
        rec = self.record(section, tech)
        if field not in rec:
            raise TableError(f"missing table field {section}.{tech}.{field}")
        return rec[field]

    def value(self, section: str, tech: str, field: str) -> float:
        return self.entry(section, tech, field).value

    def unit(self, section: str, tech: str, field: str) -> str:
        return self.entry(section, tech, field).unit

    def label(self, section: str, tech: str) -> str:
        return self.record(section, tech).get("label", tech)

    def constant(self, name: str) -> float:
        if name not in self.constants:
            raise TableError(f"missing constant {name!r}")
        return self.constants[name].value


def _entries(raw: dict, where: str) -> dict:
    out = {}
    for field, v in raw.items():
        if field == "label":
            out[field] = str(v)
            continue
        if not isinstance(v, dict) or set(v) != {"value", "unit"}:
            raise TableError(f"{where}.{field}: expected a mapping with 'value' and 'unit'")
        out[field] = Entry(float(v["value"]), str(v["unit"]))
    return out


def load_tables(path: str | Path | None = None) -> TechnologyTable:
    path = Path(path) if path is not None else BUNDLED_TABLES
    with path.open() as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise TableError(f"{path}: not a mapping")
    sections = {}
    for s in SECTIONS:
        techs = raw.get(s) or {}
        sections[s] = {t: _entries(rec, f"{s}.{t}") for t, rec in techs.items()}
    constants = _entries(raw.get("constants") or {}, "constants")
    return TechnologyTable(sections, constants, str(path))
