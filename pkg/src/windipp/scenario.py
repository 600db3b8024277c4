"""Mission region, synthetic wind fields and the RF ground truth.

Everything here is immutable after construction. Positions are meters,
wind is m/s, power is dBm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import ConfigError, DomainError

SPEED_OF_LIGHT = 299_792_458.0
D_MIN = 1.0  # path-loss clamp (m)

_EPS = 1e-9


# ---------------------------------------------------------------------------
# geometry helpers


def _orient(a, b, c) -> float:
    return (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])


def _on_segment(a, b, c) -> bool:
    # c collinear with ab; is it within the bounding box of ab?
    return (min(a[0], b[0]) - _EPS <= c[0] <= max(a[0], b[0]) + _EPS
            and min(a[1], b[1]) - _EPS <= c[1] <= max(a[1], b[1]) + _EPS)


def segments_intersect(p, q, a, b) -> bool:
    """True if closed segments pq and ab share at least one point."""
    d1 = _orient(a, b, p)
    d2 = _orient(a, b, q)
    d3 = _orient(p, q, a)
    d4 = _orient(p, q, b)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and \
            ((d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)):
        return True
    if d1 == 0 and _on_segment(a, b, p):
        return True
    if d2 == 0 and _on_segment(a, b, q):
        return True
    if d3 == 0 and _on_segment(p, q, a):
        return True
    if d4 == 0 and _on_segment(p, q, b):
        return True
    return False


def points_in_polygon(points: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Even-odd ray casting, vectorized over ``points`` of shape (N, 2)."""
    x = points[:, 0]
    y = points[:, 1]
    inside = np.zeros(len(points), dtype=bool)
    xj, yj = poly[-1]
    for xi, yi in poly:
        crosses = (yi > y) != (yj > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            x_cross = (xj - xi) * (y - yi) / (yj - yi) + xi
        inside ^= crosses & (x < x_cross)
        xj, yj = xi, yi
    return inside


def _blocked_by(pts: np.ndarray, poly: np.ndarray) -> np.ndarray:
    """Interior or boundary of one polygon."""
    hit = points_in_polygon(pts, poly)
    # ray casting is ambiguous on the boundary, check it explicitly
    for a, b in zip(poly, np.roll(poly, -1, axis=0)):
        ab = b - a
        ap = pts - a
        cross = ab[0] * ap[:, 1] - ab[1] * ap[:, 0]
        t = ap @ ab / float(ab @ ab)
        hit |= (np.abs(cross) <= _EPS * max(1.0, float(np.hypot(*ab)))) & (t >= 0) & (t <= 1)
    return hit


def _closest_on_segment(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = float(ab @ ab)
    t = 0.0 if denom == 0 else float(np.clip((p - a) @ ab / denom, 0.0, 1.0))
    return a + t * ab


def _polygon_is_simple(poly: np.ndarray) -> bool:
    k = len(poly)
    if k < 3:
        return False
    edges = [(poly[i], poly[(i + 1) % k]) for i in range(k)]
    for i in range(k):
        for j in range(i + 1, k):
            if j == i + 1 or (i == 0 and j == k - 1):
                continue  # adjacent edges share a vertex
            if segments_intersect(*edges[i], *edges[j]):
                return False
    return True


@dataclass(frozen=True, eq=False)
class Region:
    """Axis-aligned bounding rectangle with polygonal holes.

    ``bounds`` is ``(xmin, ymin, xmax, ymax)``; each obstacle is an (k, 2)
    vertex array. A point on an obstacle boundary counts as blocked.
    """

    bounds: tuple[float, float, float, float]
    obstacles: tuple[np.ndarray, ...] = ()

    def __post_init__(self):
        xmin, ymin, xmax, ymax = (float(v) for v in self.bounds)
        if not (xmax > xmin and ymax > ymin):
            raise ConfigError(f"region bounds must have positive extent, got {self.bounds}")
        object.__setattr__(self, "bounds", (xmin, ymin, xmax, ymax))
        polys = []
        for poly in self.obstacles:
            poly = np.asarray(poly, dtype=float)
            if poly.ndim != 2 or poly.shape[1] != 2:
                raise ConfigError("obstacle polygons must be (k, 2) vertex lists")
            if not _polygon_is_simple(poly):
                raise ConfigError("obstacle polygon is not simple")
            if (poly[:, 0].min() < xmin or poly[:, 0].max() > xmax
                    or poly[:, 1].min() < ymin or poly[:, 1].max() > ymax):
                raise ConfigError("obstacle polygon extends outside the region bounds")
            poly.setflags(write=False)
            polys.append(poly)
        object.__setattr__(self, "obstacles", tuple(polys))

    @property
    def width(self) -> float:
        return self.bounds[2] - self.bounds[0]

    @property
    def height(self) -> float:
        return self.bounds[3] - self.bounds[1]

    @property
    def diameter(self) -> float:
        return math.hypot(self.width, self.height)

    def in_bounds(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        xmin, ymin, xmax, ymax = self.bounds
        return ((pts[:, 0] >= xmin - _EPS) & (pts[:, 0] <= xmax + _EPS)
                & (pts[:, 1] >= ymin - _EPS) & (pts[:, 1] <= ymax + _EPS))

    def in_obstacle(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        hit = np.zeros(len(pts), dtype=bool)
        for poly in self.obstacles:
            hit |= _blocked_by(pts, poly)
        return hit

    def contains(self, points) -> np.ndarray:
        """Free-space test, vectorized over an (N, 2) array."""
        return self.in_bounds(points) & ~self.in_obstacle(points)

    def project(self, p, margin: float = 1e-6) -> tuple[np.ndarray, float]:
        """Nearest free point to ``p`` and the distance moved.

        Clamps to the bounding box first; a point that then lands inside an
        obstacle is pushed just past the nearest obstacle edge.
        """
        p = np.asarray(p, dtype=float)
        xmin, ymin, xmax, ymax = self.bounds
        q = np.array([min(max(p[0], xmin), xmax), min(max(p[1], ymin), ymax)])
        for _ in range(4):
            hits = [poly for poly in self.obstacles if _blocked_by(q[None, :], poly)[0]]
            if not hits:
                break
            poly = hits[0]
            best, best_d = None, math.inf
            for a, b in zip(poly, np.roll(poly, -1, axis=0)):
                c = _closest_on_segment(q, a, b)
                d = float(np.hypot(*(c - q)))
                if d < best_d:
                    best, best_d = c, d
            # step just past the boundary, away from the interior
            out = best - q
            norm = float(np.hypot(*out))
            if norm < 1e-12:
                out = best - poly.mean(axis=0)
                norm = float(np.hypot(*out)) or 1.0
            q = best + out / norm * max(margin, 1e-6 * self.diameter)
            q = np.array([min(max(q[0], xmin), xmax), min(max(q[1], ymin), ymax)])
        return q, float(np.hypot(*(q - p)))


def segment_free(region: Region, p, q) -> bool:
    """True iff segment pq stays inside the bounds and touches no obstacle."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if not region.in_bounds(np.vstack([p, q])).all():
        return False
    if not region.obstacles:
        return True
    if region.in_obstacle(np.vstack([p, q])).any():
        return False
    for poly in region.obstacles:
        for a, b in zip(poly, np.roll(poly, -1, axis=0)):
            if segments_intersect(p, q, a, b):
                return False
    return True


# ---------------------------------------------------------------------------
# gridded fields


@dataclass(frozen=True, eq=False)
class _Lattice:
    origin: tuple[float, float]
    spacing: float
    shape: tuple[int, int]

    @classmethod
    def covering(cls, region: Region, spacing: float, pad: int = 0) -> "_Lattice":
        """Lattice over the bounding box plus ``pad`` extra nodes on every side."""
        if not spacing > 0:
            raise ConfigError(f"grid spacing must be positive, got {spacing}")
        nx = int(math.ceil(region.width / spacing - 1e-9)) + 1 + 2 * pad
        ny = int(math.ceil(region.height / spacing - 1e-9)) + 1 + 2 * pad
        origin = (region.bounds[0] - pad * spacing, region.bounds[1] - pad * spacing)
        return cls(origin, float(spacing), (nx, ny))

    def node_coords(self) -> tuple[np.ndarray, np.ndarray]:
        xs = self.origin[0] + self.spacing * np.arange(self.shape[0])
        ys = self.origin[1] + self.spacing * np.arange(self.shape[1])
        return xs, ys

    def cell(self, pts: np.ndarray):
        """Cell indices and fractional offsets for bilinear interpolation."""
        u = (pts[:, 0] - self.origin[0]) / self.spacing
        v = (pts[:, 1] - self.origin[1]) / self.spacing
        nx, ny = self.shape
        tol = 1e-9
        bad = (u < -tol) | (v < -tol) | (u > nx - 1 + tol) | (v > ny - 1 + tol)
        bad |= ~np.isfinite(u) | ~np.isfinite(v)
        if bad.any():
            p = pts[np.argmax(bad)]
            raise DomainError(f"point ({p[0]:.3f}, {p[1]:.3f}) is outside the field coverage")
        u = np.clip(u, 0.0, nx - 1)
        v = np.clip(v, 0.0, ny - 1)
        i = np.minimum(np.floor(u).astype(int), nx - 2)
        j = np.minimum(np.floor(v).astype(int), ny - 2)
        return i, j, u - i, v - j


def _bilinear(grid: np.ndarray, i, j, fu, fv) -> np.ndarray:
    if grid.ndim == 3:
        fu = fu[:, None]
        fv = fv[:, None]
    return ((1 - fu) * (1 - fv) * grid[i, j] + fu * (1 - fv) * grid[i + 1, j]
            + (1 - fu) * fv * grid[i, j + 1] + fu * fv * grid[i + 1, j + 1])


@dataclass(frozen=True, eq=False)
class WindField:
    """Wind vectors on a square lattice; ``grid[i, j]`` sits at
    ``origin + spacing * (i, j)``."""

    origin: tuple[float, float]
    spacing: float
    grid: np.ndarray

    def __post_init__(self):
        g = np.array(self.grid, dtype=float)
        if g.ndim != 3 or g.shape[2] != 2 or g.shape[0] < 2 or g.shape[1] < 2:
            raise ConfigError("wind grid must have shape (nx>=2, ny>=2, 2)")
        if not np.isfinite(g).all():
            raise ConfigError("wind grid contains non-finite values")
        if not self.spacing > 0:
            raise ConfigError("wind grid spacing must be positive")
        g.setflags(write=False)
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "origin", (float(self.origin[0]), float(self.origin[1])))

    @property
    def lattice(self) -> _Lattice:
        return _Lattice(self.origin, self.spacing, self.grid.shape[:2])

    def sample(self, points) -> np.ndarray:
        """Vectorized :func:`wind_at` over an (N, 2) array."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return _bilinear(self.grid, *self.lattice.cell(pts))

    def max_speed(self) -> float:
        # bilinear interpolation is a convex combination of node vectors
        return float(np.hypot(self.grid[..., 0], self.grid[..., 1]).max())


def wind_at(field: WindField, p) -> np.ndarray:
    """Bilinearly interpolated wind vector at ``p``."""
    return field.sample(np.asarray(p, dtype=float)[None, :])[0]


def _smooth_noise(shape, length_nodes: float, rng: np.random.Generator) -> np.ndarray:
    """Unit-variance Gaussian random field from filtered white noise."""
    white = rng.standard_normal(shape)
    if length_nodes > 0:
        white = gaussian_filter(white, sigma=length_nodes, mode="reflect")
    std = white.std()
    return white / std if std > 0 else white


def wind_from_direction(speed: float, from_deg: float) -> tuple[float, float]:
    """Meteorological convention: ``from_deg`` is where the wind comes from,
    clockwise from north (+y). 45 means from the northeast."""
    rad = math.radians(from_deg)
    return (-speed * math.sin(rad), -speed * math.cos(rad))


WIND_KINDS = ("uniform", "vortex", "shear", "seeded-smooth-noise")


def make_wind(kind: str, params: dict, region: Region, spacing: float) -> WindField:
    """Build an analytic or seeded synthetic wind field covering ``region``.

    Kinds and their ``params``:

    * ``uniform``: ``speed``, ``from_deg`` (default 10 m/s from 45 deg, i.e. NE)
    * ``vortex``: ``center``, ``max_speed``, ``core_radius``; tangential
      speed ``max_speed * (r/rc) * exp((1 - (r/rc)^2) / 2)``, counter-clockwise
    * ``shear``: ``speed_low``, ``speed_high``, ``from_deg``; speed varies
      linearly with y across the region
    * ``seeded-smooth-noise``: ``mean_speed``, ``from_deg``, ``amplitude``,
      ``length``, ``seed``
    """
    lat = _Lattice.covering(region, spacing)
    xs, ys = lat.node_coords()
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    grid = np.zeros(lat.shape + (2,))
    params = dict(params or {})
    if kind == "uniform":
        u, v = wind_from_direction(params.get("speed", 10.0), params.get("from_deg", 45.0))
        grid[..., 0] = u
        grid[..., 1] = v
    elif kind == "vortex":
        cx, cy = params.get("center", ((region.bounds[0] + region.bounds[2]) / 2,
                                       (region.bounds[1] + region.bounds[3]) / 2))
        vmax = params.get("max_speed", 10.0)
        rc = params.get("core_radius", region.diameter / 8)
        if rc <= 0:
            raise ConfigError("vortex core_radius must be positive")
        dx, dy = X - cx, Y - cy
        s = np.hypot(dx, dy) / rc
        # speed / r, finite at the center
        k = vmax / rc * np.exp(0.5 * (1 - s * s))
        grid[..., 0] = -k * dy
        grid[..., 1] = k * dx
    elif kind == "shear":
        lo, hi = params.get("speed_low", 0.0), params.get("speed_high", 10.0)
        ux, uy = wind_from_direction(1.0, params.get("from_deg", 45.0))
        frac = (Y - region.bounds[1]) / region.height
        speed = lo + (hi - lo) * np.clip(frac, 0.0, 1.0)
        grid[..., 0] = speed * ux
        grid[..., 1] = speed * uy
    elif kind == "seeded-smooth-noise":
        if "seed" not in params:
            raise ConfigError("seeded-smooth-noise wind needs a seed")
        rng = np.random.default_rng(int(params["seed"]))
        mu, mv = wind_from_direction(params.get("mean_speed", 10.0), params.get("from_deg", 45.0))
        amp = params.get("amplitude", 2.0)
        length = params.get("length", region.diameter / 10) / lat.spacing
        grid[..., 0] = mu + amp * _smooth_noise(lat.shape, length, rng)
        grid[..., 1] = mv + amp * _smooth_noise(lat.shape, length, rng)
    else:
        raise ConfigError(f"unknown wind kind {kind!r}; expected one of {WIND_KINDS}")
    return WindField(lat.origin, lat.spacing, grid)


# ---------------------------------------------------------------------------
# RF ground truth


@dataclass(frozen=True)
class RfSource:
    """Omni-directional transmitter.

    ``altitude`` is the receiver height above the transmitter; the
    propagation distance is the slant range.
    """

    position: tuple[float, float]
    tx_power: float = 30.0
    frequency: float = 146e6
    gain_tx: float = 6.0
    gain_rx: float = 2.0
    shadowing_sigma: float = 4.0
    shadowing_length: float = 1000.0
    seed: int = 0
    altitude: float = 0.0

    def __post_init__(self):
        if not self.frequency > 0:
            raise ConfigError("frequency must be positive")
        if self.shadowing_sigma < 0:
            raise ConfigError("shadowing_sigma must be non-negative")
        if not self.shadowing_length > 0:
            raise ConfigError("shadowing_length must be positive")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.frequency


@dataclass(frozen=True, eq=False)
class ShadowField:
    """Spatially correlated shadowing offsets (dB) on a lattice."""

    origin: tuple[float, float]
    spacing: float
    grid: np.ndarray
    seed: int = 0

    def __post_init__(self):
        g = np.array(self.grid, dtype=float)
        g.setflags(write=False)
        object.__setattr__(self, "grid", g)

    @property
    def lattice(self) -> _Lattice:
        return _Lattice(self.origin, self.spacing, self.grid.shape)

    def sample(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return _bilinear(self.grid, *self.lattice.cell(pts))


SHADOW_MARGIN = 0.1  # fraction of the longer region side


def make_shadow(src: RfSource, region: Region, spacing: float,
                margin: float | None = None) -> ShadowField:
    """Seeded Gaussian random field in dB with std ``src.shadowing_sigma``;
    the smoothing kernel width is ``src.shadowing_length``.

    The field extends ``margin`` meters beyond the bounds (default 10% of the
    longer side) so a vehicle overshooting the boundary in a turn still
    measures something.
    """
    if margin is None:
        margin = SHADOW_MARGIN * max(region.width, region.height)
    lat = _Lattice.covering(region, spacing, int(math.ceil(margin / spacing - 1e-9)))
    if src.shadowing_sigma == 0:
        grid = np.zeros(lat.shape)
    else:
        rng = np.random.default_rng(src.seed)
        grid = src.shadowing_sigma * _smooth_noise(lat.shape, src.shadowing_length / lat.spacing, rng)
    return ShadowField(lat.origin, lat.spacing, grid, src.seed)


def path_loss_db(d, wavelength: float, gain: float = 1.0, d_min: float = D_MIN):
    """Free-space loss ``-10 log10(G lambda^2 / (4 pi d)^2)``; d is clamped to d_min."""
    if not wavelength > 0 or not gain > 0:
        raise ValueError("wavelength and gain must be positive")
    d = np.maximum(np.asarray(d, dtype=float), d_min)
    out = -10.0 * np.log10(gain * wavelength ** 2 / (4.0 * math.pi * d) ** 2)
    return float(out) if out.ndim == 0 else out


def rf_truth(p, src: RfSource, shadow: ShadowField):
    """Received power (dBm) at one point or an (N, 2) array of points."""
    pts = np.asarray(p, dtype=float)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    horiz = np.hypot(pts[:, 0] - src.position[0], pts[:, 1] - src.position[1])
    d = np.hypot(horiz, src.altitude)
    value = (src.tx_power + src.gain_tx + src.gain_rx
             - path_loss_db(d, src.wavelength, 1.0) + shadow.sample(pts))
    return float(value[0]) if single else value


@dataclass(frozen=True, eq=False)
class Scenario:
    """Region, wind and RF truth bundled for the downstream stages."""

    region: Region
    wind: WindField
    source: RfSource
    shadow: ShadowField = field(default=None)

    def __post_init__(self):
        if self.shadow is None:
            object.__setattr__(self, "shadow", make_shadow(self.source, self.region, self.wind.spacing))

    def truth(self, points):
        return rf_truth(points, self.source, self.shadow)
