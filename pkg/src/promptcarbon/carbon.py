"""Energy to CO2e conversion with user-supplied regional grid intensities.

No intensities ship with the package: the caller provides a table file::

    #pue=1.2
    region,gco2e_per_kwh
    US-CA,210
    EU-FR,60

The ``#pue=`` line and the header row are optional; other ``#`` lines are comments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .estimator import EnergyEstimate

JOULES_PER_KWH = 3_600_000.0


class UnknownRegionError(KeyError):
    def __str__(self):
        return f"region {self.args[0]!r} is not in the intensity table"


class IntensityTableError(ValueError):
    pass


@dataclass(frozen=True)
class IntensityTable:
    intensities: dict = field(default_factory=dict)  # region -> gCO2e/kWh
    pue: float = 1.0

    def __post_init__(self):
        for region, v in self.intensities.items():
            if not (math.isfinite(v) and v > 0):
                raise IntensityTableError(f"intensity for {region!r} must be a positive number, got {v}")
        if not (math.isfinite(self.pue) and self.pue >= 1.0):
            raise IntensityTableError(f"pue must be >= 1, got {self.pue}")

    @classmethod
    def parse(cls, text: str) -> "IntensityTable":
        intensities, pue = {}, 1.0
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip().replace(" ", "")
                if body.lower().startswith("pue="):
                    try:
                        pue = float(body[4:])
                    except ValueError:
                        raise IntensityTableError(f"line {lineno}: bad pue value {body[4:]!r}") from None
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 2:
                raise IntensityTableError(f"line {lineno}: expected region,gco2e_per_kwh, got {line!r}")
            region, value = parts
            try:
                v = float(value)
            except ValueError:
                if not intensities and region.lower() == "region":
                    continue  # header row
                raise IntensityTableError(f"line {lineno}: bad intensity {value!r}") from None
            if region in intensities:
                raise IntensityTableError(f"line {lineno}: duplicate region {region!r}")
            intensities[region] = v
        return cls(intensities, pue)

    @classmethod
    def load(cls, path) -> "IntensityTable":
        with open(path, encoding="utf-8") as fh:
            return cls.parse(fh.read())


@dataclass(frozen=True)
class CarbonEstimate:
    grams_co2e: float
    region: str
    intensity_used: float
    pue_used: float
    energy: EnergyEstimate

    def to_dict(self) -> dict:
        return {
            "grams_co2e": self.grams_co2e,
            "region": self.region,
            "intensity_used": self.intensity_used,
            "pue_used": self.pue_used,
        }


def energy_to_carbon(e: EnergyEstimate, region: str, table: IntensityTable) -> CarbonEstimate:
    """grams CO2e = kWh x grid intensity x PUE."""
    try:
        intensity = table.intensities[region]
    except KeyError:
        raise UnknownRegionError(region) from None
    grams = (e.total_j / JOULES_PER_KWH) * intensity * table.pue
    return CarbonEstimate(grams, region, intensity, table.pue, e)
