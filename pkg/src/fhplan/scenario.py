"""Synthesis of reproducible fronthaul network realizations.

One realization consists of:
  * L access points (APs) dropped uniformly over an R x R region,
  * W distributed units (DUs) placed by K-means over the AP positions,
    each AP associated with its nearest DU,
  * a Gaussian-hotspot traffic density rescaled to [X_min, X_max] bits/s,
  * a per-AP capacity threshold sampled from that field at the AP position,
  * a per-DU backhaul rate drawn so that the all-fiber plan stays feasible.

Everything is driven by explicit numpy generators; rebuilding with the same
(config, seed) reproduces the identical scenario bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .seeding import rng_from

DEFAULT_GRID = 200  # sample points per axis used to normalize the field


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------

@dataclass
class Hotspot:
    """Gaussian bump of traffic demand: center (x, y) and spread sigma."""
    x: float
    y: float
    sigma: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError(f"hotspot sigma must be > 0, got {self.sigma}")


class TrafficField:
    """Hotspot mixture density rescaled to a bits/s traffic intensity map.

    The raw density is the mean of isotropic Gaussian bumps (one per
    hotspot). The traffic value at a point is an affine rescale of the raw
    density such that, over a uniform grid x grid sample of the region, the
    maximum maps to ``x_max_rate`` and the minimum to ``x_min_rate``;
    off-grid evaluations are clamped into [x_min_rate, x_max_rate]. The
    grid makes the normalization deterministic (a Gaussian mixture has no
    closed-form extrema).
    """

    def __init__(self, hotspots, x_min_rate, x_max_rate, region_side):
        if x_min_rate >= x_max_rate:
            raise ValueError("x_min_rate must be < x_max_rate")
        if region_side <= 0:
            raise ValueError("region_side must be > 0")
        self.hotspots = list(hotspots)
        self.x_min_rate = float(x_min_rate)
        self.x_max_rate = float(x_max_rate)
        self.region_side = float(region_side)
        self._calibrations: dict[int, tuple[float, float]] = {}

    def density(self, x, y):
        """Raw hotspot-mixture density (1/m^2), vectorized over x, y."""
        if not self.hotspots:
            raise ValueError("traffic field has no hotspots")
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        total = np.zeros(np.broadcast(x, y).shape, dtype=float)
        for h in self.hotspots:
            two_sig2 = 2.0 * h.sigma * h.sigma
            d2 = (x - h.x) ** 2 + (y - h.y) ** 2
            total = total + np.exp(-d2 / two_sig2) / (np.pi * two_sig2)
        out = total / len(self.hotspots)
        return float(out) if out.ndim == 0 else out

    def calibration(self, grid: int = DEFAULT_GRID) -> tuple[float, float]:
        """(min, max) of the raw density over the grid x grid region sample."""
        if grid < 2:
            raise ValueError("grid must be >= 2")
        if grid not in self._calibrations:
            axis = np.linspace(0.0, self.region_side, grid)
            gx, gy = np.meshgrid(axis, axis)
            values = self.density(gx, gy)
            self._calibrations[grid] = (float(values.min()), float(values.max()))
        return self._calibrations[grid]

    def value(self, x, y, grid: int = DEFAULT_GRID):
        """Traffic intensity in bits/s at (x, y), clamped to [X_min, X_max]."""
        lo, hi = self.calibration(grid)
        span = max(hi - lo, 1e-300)
        raw = self.density(x, y)
        scaled = self.x_min_rate + (self.x_max_rate - self.x_min_rate) * (raw - lo) / span
        return np.clip(scaled, self.x_min_rate, self.x_max_rate)

    def to_dict(self) -> dict:
        return {
            "hotspots": [asdict(h) for h in self.hotspots],
            "x_min_rate": self.x_min_rate,
            "x_max_rate": self.x_max_rate,
            "region_side": self.region_side,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TrafficField":
        return cls(
            hotspots=[Hotspot(**h) for h in data["hotspots"]],
            x_min_rate=data["x_min_rate"],
            x_max_rate=data["x_max_rate"],
            region_side=data["region_side"],
        )


@dataclass
class AccessPoint:
    """Radio endpoint to be fronthauled; threshold is its capacity demand."""
    id: int
    x: float
    y: float
    threshold: float | None = None  # bits/s, set by assign_thresholds


@dataclass
class DistributedUnit:
    """Aggregation hub owning an ordered cluster of AP ids."""
    id: int
    x: float
    y: float
    cluster: list[int] = field(default_factory=list)
    backhaul_rate: float | None = None  # bits/s, set by generate_backhaul_rates


@dataclass
class ScenarioConfig:
    """Knobs of the scenario generator (defaults follow the simulation setup)."""
    ap_count: int = 200
    du_count: int = 6
    region_side: float = 2000.0          # meters
    hotspot_count: int = 5
    sigma_range: tuple[float, float] = (150.0, 400.0)  # hotspot spread law, meters
    common_sigma: bool = False           # one sigma draw shared by all hotspots
    x_min_rate: float = 0.1e9            # bits/s
    x_max_rate: float = 10.0e9           # bits/s
    grid: int = DEFAULT_GRID
    alpha: float = 0.7                   # DU processing ratio for backhaul sizing
    beta_range: tuple[float, float] = (0.8, 1.0)  # backhaul load factor law
    kmeans_max_iters: int = 100
    kmeans_tol: float = 1e-6             # meters of centroid shift

    def validate(self):
        if self.ap_count < 1:
            raise ValueError("ap_count must be >= 1")
        if not (1 <= self.du_count <= self.ap_count):
            raise ValueError("du_count must satisfy 1 <= du_count <= ap_count")
        if self.region_side <= 0:
            raise ValueError("region_side must be > 0")
        if self.hotspot_count < 1:
            raise ValueError("hotspot_count must be >= 1")
        lo, hi = self.sigma_range
        if not (0 < lo <= hi):
            raise ValueError("sigma_range must satisfy 0 < lo <= hi")
        if not (0 < self.x_min_rate < self.x_max_rate):
            raise ValueError("rates must satisfy 0 < x_min_rate < x_max_rate")
        if self.grid < 2:
            raise ValueError("grid must be >= 2")
        if not (0 < self.alpha <= 1):
            raise ValueError("alpha must be in (0, 1]")
        blo, bhi = self.beta_range
        if not (0 < blo <= bhi <= 1):
            raise ValueError("beta_range must satisfy 0 < lo <= hi <= 1")
        return self


@dataclass
class Scenario:
    """Immutable snapshot of one network realization.

    Treated as read-only after construction; safe to share across workers.
    """
    region_side: float
    aps: list[AccessPoint]
    dus: list[DistributedUnit]
    field: TrafficField
    seed: int
    config: ScenarioConfig

    def to_dict(self) -> dict:
        return {
            "region_side": self.region_side,
            "seed": self.seed,
            "aps": [asdict(a) for a in self.aps],
            "dus": [asdict(d) for d in self.dus],
            "field": self.field.to_dict(),
            "config": asdict(self.config),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        cfg = dict(data["config"])
        cfg["sigma_range"] = tuple(cfg["sigma_range"])
        cfg["beta_range"] = tuple(cfg["beta_range"])
        return cls(
            region_side=data["region_side"],
            aps=[AccessPoint(**a) for a in data["aps"]],
            dus=[DistributedUnit(**d) for d in data["dus"]],
            field=TrafficField.from_dict(data["field"]),
            seed=data["seed"],
            config=ScenarioConfig(**cfg),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------------------
# Placement
# ---------------------------------------------------------------------------

def place_aps(count: int, region_side: float, rng: np.random.Generator) -> list[AccessPoint]:
    """Drop ``count`` APs uniformly over the square region, ids 0..count-1."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if region_side <= 0:
        raise ValueError("region_side must be > 0")
    coords = rng.uniform(0.0, region_side, size=(count, 2))
    return [AccessPoint(id=i, x=float(coords[i, 0]), y=float(coords[i, 1]))
            for i in range(count)]


def _farthest_point_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Greedy max-min seeding: random first center, then farthest points."""
    n = points.shape[0]
    centers = np.empty((k, 2))
    first = int(rng.integers(n))
    centers[0] = points[first]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        nxt = int(np.argmax(d2))  # argmax takes the lowest index on ties
        centers[j] = points[nxt]
        d2 = np.minimum(d2, np.sum((points - centers[j]) ** 2, axis=1))
    return centers


def _assign(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Nearest-center labels; ties resolved to the lowest center id."""
    d2 = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
    return np.argmin(d2, axis=1)


def _lloyd(points: np.ndarray, centers: np.ndarray, max_iters: int, tol: float):
    """Lloyd iteration with empty-cluster reseeding.

    Returns (centers, labels, wcss_history); the history is the
    within-cluster sum of squares after each assignment step.
    """
    k = centers.shape[0]
    centers = centers.copy()
    wcss_history = []
    labels = _assign(points, centers)
    for _ in range(max_iters):
        # Reseed any empty cluster to the point farthest from its current
        # center; one point can only be consumed by one reseed per pass.
        taken: set[int] = set()
        for j in range(k):
            if np.any(labels == j):
                continue
            dist_own = np.sum((points - centers[labels]) ** 2, axis=1)
            order = np.argsort(-dist_own, kind="stable")
            for idx in order:
                if int(idx) not in taken:
                    centers[j] = points[idx]
                    taken.add(int(idx))
                    break
            labels = _assign(points, centers)
        wcss = float(np.sum((points - centers[labels]) ** 2))
        wcss_history.append(wcss)
        new_centers = centers.copy()
        for j in range(k):
            members = points[labels == j]
            if len(members):
                new_centers[j] = members.mean(axis=0)
        shift = float(np.max(np.sqrt(np.sum((new_centers - centers) ** 2, axis=1))))
        centers = new_centers
        labels = _assign(points, centers)
        if shift < tol:
            break
    wcss_history.append(float(np.sum((points - centers[labels]) ** 2)))
    return centers, labels, wcss_history


def place_dus_kmeans(aps: list[AccessPoint], du_count: int, rng: np.random.Generator,
                     max_iters: int = 100, tol: float = 1e-6) -> list[DistributedUnit]:
    """Place DUs at K-means centroids of the AP positions.

    Uses greedy farthest-point initialization (deterministic given the
    generator) and Lloyd iteration until the largest centroid shift drops
    below ``tol`` or ``max_iters`` is hit. Every AP joins its nearest DU,
    ties to the lowest DU id; clusters are kept non-empty by reseeding.
    """
    if du_count > len(aps):
        raise ValueError(f"du_count {du_count} exceeds AP count {len(aps)}")
    points = np.array([[a.x, a.y] for a in aps])
    init = _farthest_point_init(points, du_count, rng)
    centers, labels, _ = _lloyd(points, init, max_iters, tol)
    dus = []
    for j in range(du_count):
        members = sorted(int(a.id) for a, lab in zip(aps, labels) if lab == j)
        dus.append(DistributedUnit(id=j, x=float(centers[j, 0]), y=float(centers[j, 1]),
                                   cluster=members))
    return dus


# ---------------------------------------------------------------------------
# Traffic field and thresholds
# ---------------------------------------------------------------------------

def eval_traffic_norm(field: TrafficField, x, y):
    """Raw normalized hotspot density at (x, y)."""
    return field.density(x, y)


def eval_traffic(field: TrafficField, x, y, grid: int = DEFAULT_GRID):
    """Traffic intensity in bits/s at (x, y); see TrafficField.value."""
    return field.value(x, y, grid)


def build_traffic_field(config: ScenarioConfig, rng: np.random.Generator) -> TrafficField:
    """Draw hotspot centers uniformly over the region and spreads from the
    configured law (one shared draw when common_sigma is set)."""
    lo, hi = config.sigma_range
    n = config.hotspot_count
    centers = rng.uniform(0.0, config.region_side, size=(n, 2))
    if config.common_sigma:
        sigmas = np.full(n, rng.uniform(lo, hi))
    else:
        sigmas = rng.uniform(lo, hi, size=n)
    hotspots = [Hotspot(float(centers[i, 0]), float(centers[i, 1]), float(sigmas[i]))
                for i in range(n)]
    return TrafficField(hotspots, config.x_min_rate, config.x_max_rate, config.region_side)


def assign_thresholds(aps: list[AccessPoint], field: TrafficField,
                      grid: int = DEFAULT_GRID) -> list[AccessPoint]:
    """Set each AP's capacity threshold to the traffic value at its position."""
    xs = np.array([a.x for a in aps])
    ys = np.array([a.y for a in aps])
    values = np.atleast_1d(field.value(xs, ys, grid))
    for ap, v in zip(aps, values):
        ap.threshold = float(v)
    return aps


def generate_backhaul_rates(dus: list[DistributedUnit], aps: list[AccessPoint],
                            alpha: float, beta_range: tuple[float, float],
                            rng: np.random.Generator) -> list[DistributedUnit]:
    """Draw each DU's backhaul rate as (beta/alpha) * sum of cluster thresholds.

    beta ~ Uniform[beta_range] with beta <= 1 guarantees
    alpha * backhaul <= sum(thresholds) <= sum(fiber rates), i.e. the
    all-fiber plan can always carry the required share of the backhaul.
    """
    if not (0 < alpha <= 1):
        raise ValueError("alpha must be in (0, 1]")
    lo, hi = beta_range
    if not (0 < lo <= hi <= 1):
        raise ValueError("beta_range must satisfy 0 < lo <= hi <= 1")
    thresholds = {a.id: a.threshold for a in aps}
    for du in dus:
        if not du.cluster:
            raise ValueError(f"DU {du.id} has an empty cluster")
        total = sum(thresholds[ap_id] for ap_id in du.cluster)
        beta = float(rng.uniform(lo, hi))
        du.backhaul_rate = beta * total / alpha
    return dus


# ---------------------------------------------------------------------------
# Full builder
# ---------------------------------------------------------------------------

def build_scenario(config: ScenarioConfig, seed: int) -> Scenario:
    """Generate one complete realization from (config, seed).

    Draw order is fixed (field, APs, K-means init, backhaul betas) so the
    result is reproducible bit for bit.
    """
    config.validate()
    rng = rng_from(seed, "scenario")
    field = build_traffic_field(config, rng)
    aps = place_aps(config.ap_count, config.region_side, rng)
    dus = place_dus_kmeans(aps, config.du_count, rng,
                           max_iters=config.kmeans_max_iters, tol=config.kmeans_tol)
    assign_thresholds(aps, field, config.grid)
    generate_backhaul_rates(dus, aps, config.alpha, config.beta_range, rng)
    return Scenario(region_side=config.region_side, aps=aps, dus=dus,
                    field=field, seed=seed, config=config)
