"""Mode records and the immutable, sorted spectrum table.

Serialization: CSV with the fixed column order in ``CSV_COLUMNS`` and a JSON
document carrying geometry, profile, cutoff and solver provenance. Floats are
written with ``repr`` (shortest round-trip form), so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import io
import logging
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Any

import orjson

from gradedcavity.types import (
    CavityGeometry,
    DielectricProfile,
    ModeIndex,
    ModeIndexError,
    Polarization,
    ZetaBranch,
)

logger = logging.getLogger(__name__)

CSV_COLUMNS = ("pol", "nx", "ny", "p", "omega", "nu", "zeta", "eta0", "etaL", "norm")


@dataclass(frozen=True)
class ModeRecord:
    """One solved eigenmode.

    Records produced by the homogeneous closed form carry no Bessel data:
    nu, zeta, eta0 and etaL are None.
    """

    index: ModeIndex
    omega: float
    k_x: float
    k_y: float
    nu: float | None = None
    zeta: float | None = None
    eta0: float | None = None
    etaL: float | None = None
    branch: ZetaBranch = ZetaBranch.STANDARD
    norm: float | None = None

    @property
    def pol(self) -> Polarization:
        return self.index.pol

    @property
    def has_profile(self) -> bool:
        return self.nu is not None and self.zeta is not None and self.eta0 is not None

    def with_norm(self, norm: float) -> ModeRecord:
        return replace(self, norm=norm)

    def sort_key(self) -> tuple[float, int, int, int, int]:
        return (self.omega, *self.index.sort_key())

    def to_dict(self) -> dict[str, Any]:
        return {
            "pol": self.pol.value,
            "nx": self.index.n_x,
            "ny": self.index.n_y,
            "p": self.index.p,
            "omega": self.omega,
            "k_x": self.k_x,
            "k_y": self.k_y,
            "nu": self.nu,
            "zeta": self.zeta,
            "eta0": self.eta0,
            "etaL": self.etaL,
            "branch": self.branch.value,
            "norm": self.norm,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ModeRecord:
        return cls(
            index=ModeIndex(Polarization(data["pol"]), data["nx"], data["ny"], data["p"]),
            omega=data["omega"],
            k_x=data["k_x"],
            k_y=data["k_y"],
            nu=data["nu"],
            zeta=data["zeta"],
            eta0=data["eta0"],
            etaL=data["etaL"],
            branch=ZetaBranch(data["branch"]),
            norm=data["norm"],
        )


def _cell(value: float | None) -> str:
    return "" if value is None else repr(float(value))


@dataclass(frozen=True)
class SpectrumTable:
    """Sorted, immutable collection of mode records with provenance."""

    geometry: CavityGeometry
    profile: DielectricProfile
    omega_max: float
    records: tuple[ModeRecord, ...] = ()
    provenance: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        keys = [r.sort_key() for r in self.records]
        if keys != sorted(keys):
            raise ValueError("records must be sorted by (omega, pol, n_x, n_y, p)")
        if any(r.omega > self.omega_max for r in self.records):
            raise ValueError(f"record above omega_max={self.omega_max}")
        object.__setattr__(self, "provenance", MappingProxyType(dict(self.provenance)))

    @classmethod
    def build(
        cls,
        geometry: CavityGeometry,
        profile: DielectricProfile,
        omega_max: float,
        records: Iterable[ModeRecord],
        provenance: Mapping[str, Any] | None = None,
    ) -> SpectrumTable:
        ordered = tuple(sorted(records, key=ModeRecord.sort_key))
        return cls(geometry, profile, omega_max, ordered, dict(provenance or {}))

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[ModeRecord]:
        return iter(self.records)

    @property
    def omegas(self) -> list[float]:
        return [r.omega for r in self.records]

    def with_records(self, records: Iterable[ModeRecord]) -> SpectrumTable:
        return SpectrumTable.build(
            self.geometry, self.profile, self.omega_max, records, self.provenance,
        )

    def lookup(self, index: ModeIndex) -> ModeRecord:
        for record in self.records:
            if record.index == index:
                return record
        raise ModeIndexError(
            f"mode {index.label()} not in spectrum below omega_max={self.omega_max}"
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in self.records:
            writer.writerow([
                r.pol.value, r.index.n_x, r.index.n_y, r.index.p,
                _cell(r.omega), _cell(r.nu), _cell(r.zeta),
                _cell(r.eta0), _cell(r.etaL), _cell(r.norm),
            ])
        return buf.getvalue()

    def to_dict(self) -> dict[str, Any]:
        return {
            "geometry": {
                "L_x": self.geometry.L_x,
                "L_y": self.geometry.L_y,
                "L_z": self.geometry.L_z,
            },
            "profile": {
                "beta": self.profile.beta,
                "alpha": self.profile.alpha,
                "eps0": self.profile.eps0,
                "mu0": self.profile.mu0,
                "hbar": self.profile.hbar,
            },
            "omega_max": self.omega_max,
            "provenance": dict(self.provenance),
            "records": [r.to_dict() for r in self.records],
        }

    def to_json(self) -> bytes:
        return orjson.dumps(self.to_dict(), option=orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS)

    @classmethod
    def from_json(cls, data: bytes | str) -> SpectrumTable:
        doc = orjson.loads(data)
        return cls.build(
            CavityGeometry(**doc["geometry"]),
            DielectricProfile(**doc["profile"]),
            doc["omega_max"],
            (ModeRecord.from_dict(r) for r in doc["records"]),
            doc.get("provenance", {}),
        )

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_json()).hexdigest()
