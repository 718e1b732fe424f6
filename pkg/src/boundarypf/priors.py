"""Prior families: sampling and exact support membership.

Box-shaped families (uniform, truncated Gaussian, Beta, Dirichlet) live in an
axis-aligned region. The two non-convex families (star and ring sector) are
planar only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

REJECTION_BUDGET = 10_000
# Tolerance for round-off in polar membership tests (cos/sin then atan2/hypot).
_POLAR_TOL = 1e-9

FAMILIES = ("UniformBox", "TruncatedGaussian", "BetaBox", "DirichletBox", "Star", "RingSector")


class DimensionMismatch(ValueError):
    pass


class RejectionBudgetExceeded(RuntimeError):
    """Rejection sampling failed too many times in a row."""


@dataclass
class Box:
    """Closed axis-aligned box ``[lo, hi]``."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        self.hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1:
            raise ValueError("box bounds must be vectors of equal length")
        if np.any(self.hi - self.lo <= 0):
            raise ValueError(f"box has non-positive side: lo={self.lo}, hi={self.hi}")

    @classmethod
    def cube(cls, lo: float, hi: float, dim: int) -> "Box":
        return cls(np.full(dim, lo), np.full(dim, hi))

    @property
    def dim(self) -> int:
        return self.lo.size

    @property
    def sides(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    @property
    def volume(self) -> float:
        return float(np.prod(self.sides))

    def contains(self, points) -> np.ndarray:
        points = np.atleast_2d(points)
        return np.all((points >= self.lo) & (points <= self.hi), axis=1)

    def contains_box(self, other: "Box") -> bool:
        return bool(np.all(other.lo >= self.lo) and np.all(other.hi <= self.hi))

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        u = rng.random((count, self.dim))
        # lo + side*u can round past hi when u is close to 1
        return np.minimum(self.lo + self.sides * u, self.hi)


@dataclass
class PriorSpec:
    """One prior family plus its geometry.

    ``region`` is the bounding box of the support. Family parameters that do
    not apply to the chosen family are ignored. Use the ``uniform``,
    ``gaussian``, ``beta``, ``dirichlet``, ``star`` and ``ring_sector``
    constructors rather than filling fields by hand.
    """

    family: str
    region: Box
    mean: np.ndarray | None = None
    std: np.ndarray | None = None
    beta_shape: tuple[float, float] = (2.0, 2.0)
    concentration: np.ndarray | None = None
    center: np.ndarray | None = None
    outer_radius: float = 0.0
    inner_radius: float = 0.0
    points: int = 5
    fraction: float = 1.0
    start_angle: float = 0.0
    _star_vertices: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown prior family {self.family!r}")
        if self.family in ("Star", "RingSector"):
            if self.region.dim != 2:
                raise DimensionMismatch(f"{self.family} priors are planar (n=2)")
            self.center = np.asarray(self.center, dtype=float)
            if not 0 <= self.inner_radius <= self.outer_radius or self.outer_radius <= 0:
                raise ValueError("need 0 <= inner_radius <= outer_radius, outer_radius > 0")
        if self.family == "RingSector":
            if not 0 < self.fraction <= 1:
                raise ValueError("ring fraction must lie in (0, 1]")
            if self.inner_radius >= self.outer_radius:
                raise ValueError("ring inner radius must be below the outer radius")
        if self.family == "Star":
            self._star_vertices = star_polygon(
                self.center, self.outer_radius, self.inner_radius, self.points
            )
        if self.family == "TruncatedGaussian":
            self.mean = self.region.center if self.mean is None else np.asarray(self.mean, float)
            self.std = self.region.sides / 4.0 if self.std is None else np.asarray(self.std, float)
            self.std = np.broadcast_to(self.std, (self.dim,)).astype(float)
        if self.family == "DirichletBox":
            if self.concentration is None:
                self.concentration = np.full(self.dim + 1, 2.0)
            self.concentration = np.asarray(self.concentration, dtype=float)
            if self.concentration.size != self.dim + 1:
                raise ValueError("Dirichlet concentration needs dim + 1 entries")

    @property
    def dim(self) -> int:
        return self.region.dim

    @classmethod
    def uniform(cls, region: Box) -> "PriorSpec":
        return cls("UniformBox", region)

    @classmethod
    def gaussian(cls, region: Box, mean=None, std=None) -> "PriorSpec":
        return cls("TruncatedGaussian", region, mean=mean, std=std)

    @classmethod
    def beta(cls, region: Box, a: float = 2.0, b: float = 2.0) -> "PriorSpec":
        return cls("BetaBox", region, beta_shape=(a, b))

    @classmethod
    def dirichlet(cls, region: Box, concentration=None) -> "PriorSpec":
        return cls("DirichletBox", region, concentration=concentration)

    @classmethod
    def star(cls, center, outer_radius: float, inner_radius: float, points: int = 5) -> "PriorSpec":
        center = np.asarray(center, dtype=float)
        region = Box(center - outer_radius, center + outer_radius)
        return cls(
            "Star", region, center=center, outer_radius=outer_radius,
            inner_radius=inner_radius, points=points,
        )

    @classmethod
    def ring_sector(
        cls, center, inner_radius: float, outer_radius: float, fraction: float = 1.0,
        start_angle: float = 0.0,
    ) -> "PriorSpec":
        center = np.asarray(center, dtype=float)
        region = Box(center - outer_radius, center + outer_radius)
        return cls(
            "RingSector", region, center=center, outer_radius=outer_radius,
            inner_radius=inner_radius, fraction=fraction, start_angle=start_angle,
        )


def star_polygon(center, outer_radius: float, inner_radius: float, points: int = 5) -> np.ndarray:
    """Vertices of a star polygon alternating outer and inner radius, first tip straight up."""
    k = np.arange(2 * points)
    angles = np.pi / 2 + k * np.pi / points
    radii = np.where(k % 2 == 0, outer_radius, inner_radius)
    return np.asarray(center) + np.column_stack([radii * np.cos(angles), radii * np.sin(angles)])


def points_in_polygon(points: np.ndarray, vertices: np.ndarray) -> np.ndarray:
    """Even-odd ray casting, vectorized over points."""
    x, y = points[:, 0][:, None], points[:, 1][:, None]
    x0, y0 = vertices[:, 0], vertices[:, 1]
    x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
    straddles = (y0 > y) != (y1 > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        x_cross = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
    crossings = straddles & (x < x_cross)
    return (crossings.sum(axis=1) % 2) == 1


def _ring_contains(spec: PriorSpec, points: np.ndarray) -> np.ndarray:
    rel = points - spec.center
    radius = np.hypot(rel[:, 0], rel[:, 1])
    in_band = (radius >= spec.inner_radius - _POLAR_TOL) & (radius <= spec.outer_radius + _POLAR_TOL)
    if spec.fraction >= 1.0:
        return in_band
    angle = np.mod(np.arctan2(rel[:, 1], rel[:, 0]) - spec.start_angle, 2 * np.pi)
    span = 2 * np.pi * spec.fraction
    in_sector = (angle <= span + _POLAR_TOL) | (angle >= 2 * np.pi - _POLAR_TOL)
    return in_band & in_sector


def _simplex_contains(spec: PriorSpec, points: np.ndarray) -> np.ndarray:
    u = (points - spec.region.lo) / spec.region.sides
    return np.all(u >= 0, axis=1) & (u.sum(axis=1) <= 1.0 + 1e-12)


def support_contains(spec: PriorSpec, point) -> np.ndarray | bool:
    """Exact support membership.

    Accepts one point (returns a bool) or an (m, n) array (returns a boolean
    vector).
    """
    arr = np.asarray(point, dtype=float)
    single = arr.ndim == 1
    points = np.atleast_2d(arr)
    if points.shape[1] != spec.dim:
        raise DimensionMismatch(f"point has dimension {points.shape[1]}, prior has {spec.dim}")
    if spec.family == "RingSector":
        inside = _ring_contains(spec, points)
    elif spec.family == "Star":
        inside = spec.region.contains(points) & points_in_polygon(points, spec._star_vertices)
    elif spec.family == "DirichletBox":
        inside = _simplex_contains(spec, points)
    else:
        inside = spec.region.contains(points)
    return bool(inside[0]) if single else inside


def _rejection(propose, accept, count: int, dim: int, rng) -> np.ndarray:
    """Draw ``count`` accepted proposals; abort after REJECTION_BUDGET misses in a row."""
    out = np.empty((count, dim))
    filled = 0
    misses = 0
    while filled < count:
        batch = max(64, 2 * (count - filled))
        cand = propose(batch)
        ok = accept(cand)
        hits = np.flatnonzero(ok)
        if hits.size == 0:
            misses += batch
        else:
            misses = batch - 1 - hits[-1]
        if misses >= REJECTION_BUDGET:
            raise RejectionBudgetExceeded(f"{misses} consecutive rejections")
        take = cand[hits[: count - filled]]
        out[filled : filled + take.shape[0]] = take
        filled += take.shape[0]
    return out


def sample_prior(spec: PriorSpec, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``count`` points from the prior; every point satisfies support_contains."""
    if count < 1:
        raise ValueError("count must be positive")
    region = spec.region
    fam = spec.family
    if fam == "UniformBox":
        return region.sample(count, rng)
    if fam == "TruncatedGaussian":
        return _rejection(
            lambda m: spec.mean + spec.std * rng.standard_normal((m, spec.dim)),
            region.contains, count, spec.dim, rng,
        )
    if fam == "BetaBox":
        a, b = spec.beta_shape
        u = rng.beta(a, b, size=(count, spec.dim))
        return np.minimum(region.lo + region.sides * u, region.hi)
    if fam == "DirichletBox":
        u = rng.dirichlet(spec.concentration, size=count)[:, : spec.dim]
        pts = region.lo + region.sides * u
        # round-off can push a point a hair outside the simplex; redraw those
        bad = ~_simplex_contains(spec, pts)
        if np.any(bad):
            pts[bad] = _rejection(
                lambda m: region.lo + region.sides * rng.dirichlet(spec.concentration, size=m)[:, : spec.dim],
                lambda c: _simplex_contains(spec, c), int(bad.sum()), spec.dim, rng,
            )
        return pts
    if fam == "Star":
        return _rejection(
            lambda m: region.sample(m, rng),
            lambda c: support_contains(spec, c), count, 2, rng,
        )
    if fam == "RingSector":
        r2 = rng.uniform(spec.inner_radius**2, spec.outer_radius**2, size=count)
        radius = np.sqrt(r2)
        angle = spec.start_angle + rng.uniform(0.0, 2 * np.pi * spec.fraction, size=count)
        return spec.center + np.column_stack([radius * np.cos(angle), radius * np.sin(angle)])
    raise ValueError(f"unknown prior family {fam!r}")
