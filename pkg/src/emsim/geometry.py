"""Conductor layouts and the circular computational domain.

A layout is a set of equal-radius circular conductors given by their center
points. The outer boundary is a circle centered at the centroid of the
conductor centers, sized so that the outermost center keeps a configured
margin to the boundary. All lengths are meters.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptyLayout, NonConductive

MU0 = 4.0e-7 * math.pi  # Vs/Am

# Model defaults: copper conductors of 5 mm radius, boundary margin 3 r_c,
# 1 A at 50 Hz. Overridable through config everywhere they are used.
DEFAULT_RADIUS_M = 5.0e-3
DEFAULT_BOUNDARY_MARGIN_M = 3.0 * DEFAULT_RADIUS_M
DEFAULT_CONDUCTIVITY_S_PER_M = 58.1e6
DEFAULT_CURRENT_A = 1.0
DEFAULT_FREQUENCY_HZ = 50.0

# Tangent circles are rejected: meshing degenerates when disks touch.
OVERLAP_REL_TOL = 1e-9


@dataclass(frozen=True)
class ConductorLayout:
    """Conductor center points with a shared radius and boundary margin.

    The margin defaults to three conductor radii, matching the reference
    parameter set at any scale.
    """

    centers: tuple[tuple[float, float], ...]
    radius_m: float = DEFAULT_RADIUS_M
    boundary_margin_m: float | None = None

    def __post_init__(self):
        if len(self.centers) == 0:
            raise EmptyLayout("layout needs at least one conductor center")
        for x, y in self.centers:
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ValueError(f"non-finite conductor center ({x}, {y})")
        if not (self.radius_m > 0 and math.isfinite(self.radius_m)):
            raise ValueError(f"conductor radius must be positive, got {self.radius_m}")
        if self.boundary_margin_m is None:
            object.__setattr__(self, "boundary_margin_m", 3.0 * self.radius_m)
        if not (self.boundary_margin_m > 0 and math.isfinite(self.boundary_margin_m)):
            raise ValueError(
                f"boundary margin must be positive, got {self.boundary_margin_m}"
            )

    @classmethod
    def from_points(cls, points, radius_m=DEFAULT_RADIUS_M,
                    boundary_margin_m=None) -> "ConductorLayout":
        margin = None if boundary_margin_m is None else float(boundary_margin_m)
        return cls(tuple((float(x), float(y)) for x, y in points),
                   radius_m=float(radius_m), boundary_margin_m=margin)

    @property
    def count(self) -> int:
        return len(self.centers)

    def center_array(self) -> np.ndarray:
        return np.asarray(self.centers, dtype=float)

    def to_json_dict(self) -> dict:
        return {
            "radius_m": self.radius_m,
            "boundary_margin_m": self.boundary_margin_m,
            "centers": [[x, y] for x, y in self.centers],
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "ConductorLayout":
        return cls.from_points(
            data["centers"],
            radius_m=data["radius_m"],
            boundary_margin_m=data["boundary_margin_m"],
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), indent=2) + "\n",
                              encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ConductorLayout":
        return cls.from_json_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class DomainBoundary:
    """Circular outer boundary enclosing every conductor with margin."""

    center: tuple[float, float]
    radius_m: float


@dataclass(frozen=True)
class ExcitationSpec:
    """Imposed time-harmonic current, identical amplitude for every conductor."""

    current_amplitude_A: float = DEFAULT_CURRENT_A
    frequency_Hz: float = DEFAULT_FREQUENCY_HZ

    def __post_init__(self):
        if not math.isfinite(self.current_amplitude_A):
            raise ValueError("current amplitude must be finite")
        if not (self.frequency_Hz >= 0 and math.isfinite(self.frequency_Hz)):
            raise ValueError("frequency must be non-negative and finite")

    @property
    def angular_frequency(self) -> float:
        return 2.0 * math.pi * self.frequency_Hz


@dataclass(frozen=True)
class MaterialSpec:
    """Linear material data: conductivity in the conductors, free-space reluctivity."""

    conductivity_S_per_m: float = DEFAULT_CONDUCTIVITY_S_PER_M
    reluctivity: float = 1.0 / MU0
    mu0: float = field(default=MU0, repr=False)

    def __post_init__(self):
        if self.conductivity_S_per_m < 0:
            raise ValueError("conductivity must be non-negative")
        if self.reluctivity <= 0:
            raise ValueError("reluctivity must be positive")


def centroid(centers) -> tuple[float, float]:
    """Arithmetic mean of the given 2D points."""
    pts = [(float(x), float(y)) for x, y in centers]
    if not pts:
        raise EmptyLayout("centroid of an empty point list")
    n = len(pts)
    return (math.fsum(p[0] for p in pts) / n, math.fsum(p[1] for p in pts) / n)


def boundary(layout: ConductorLayout) -> DomainBoundary:
    """Outer boundary circle: centered at the centroid, radius reaching the
    outermost conductor center plus the layout's boundary margin."""
    c = centroid(layout.centers)
    dmax = max(math.dist(c, p) for p in layout.centers)
    return DomainBoundary(center=c, radius_m=dmax + layout.boundary_margin_m)


def check_overlap(layout: ConductorLayout) -> list[tuple[int, int]]:
    """Return all conductor index pairs (i < j) closer than two radii.

    Strict separation with a small relative tolerance: tangent disks count
    as overlapping because the mesh between them would degenerate.
    """
    pts = layout.center_array()
    limit = 2.0 * layout.radius_m * (1.0 + OVERLAP_REL_TOL)
    bad = []
    for i in range(len(pts)):
        d = np.hypot(pts[i + 1:, 0] - pts[i, 0], pts[i + 1:, 1] - pts[i, 1])
        for off in np.nonzero(d < limit)[0]:
            bad.append((i, i + 1 + int(off)))
    return bad


def skin_depth(material: MaterialSpec, excitation: ExcitationSpec) -> float:
    """Penetration depth sqrt(2 / (omega * mu0 * sigma)) in meters."""
    if material.conductivity_S_per_m <= 0:
        raise NonConductive("skin depth undefined for a non-conductive material")
    if excitation.frequency_Hz <= 0:
        return math.inf
    omega = excitation.angular_frequency
    return math.sqrt(2.0 / (omega * material.mu0 * material.conductivity_S_per_m))
