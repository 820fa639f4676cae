"""Point-pattern generators and side-information splitting."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DomainError, PointPattern, exact
from .rng import SeedSpec

KINDS = ("poisson", "renewal", "grid", "cluster", "max_count")


class SourceConfigError(ValueError):
    pass


@dataclass(frozen=True)
class SourceConfig:
    """What to sample: ``kind`` with intensity ``lam`` on ``(0, horizon]``.

    ``shape`` is the gamma shape of renewal inter-arrivals, ``burst`` the
    number of points per cluster and ``burst_width`` the length of the window
    (seconds) over which a cluster's points are spread.
    """

    lam: float
    horizon: float
    kind: str = "poisson"
    shape: float = 2.0
    burst: int = 4
    burst_width: float = 1e-3

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SourceConfigError(f"unknown source kind {self.kind!r}; expected one of {KINDS}")
        if self.lam < 0:
            raise SourceConfigError(f"intensity must be >= 0, got {self.lam}")
        if exact(self.horizon) <= 0:
            raise SourceConfigError(f"horizon must be positive, got {self.horizon}")
        if self.shape <= 0 or self.burst < 1 or self.burst_width <= 0:
            raise SourceConfigError("shape, burst and burst_width must be positive")


def _seed(seed) -> SeedSpec:
    return seed if isinstance(seed, SeedSpec) else SeedSpec(int(seed))


def _as_pattern(times, horizon) -> PointPattern:
    """Sort, clip to ``(0, T]`` and separate exact ties by one ulp."""
    T = exact(horizon)
    Tf = float(T)
    while exact(Tf) > T:
        Tf = np.nextafter(Tf, -np.inf)
    pts = np.sort(np.asarray(times, dtype=np.float64))
    pts = pts[pts > 0]
    pts = np.minimum(pts, Tf)
    for i in range(1, pts.size):
        if pts[i] <= pts[i - 1]:
            pts[i] = np.nextafter(pts[i - 1], np.inf)
    # a tie at the very top of the horizon is resolved downwards
    for i in range(pts.size - 1, 0, -1):
        if pts[i] > Tf:
            pts[i] = Tf
        if pts[i - 1] >= pts[i]:
            pts[i - 1] = np.nextafter(pts[i], -np.inf)
    return PointPattern(T, pts)


def _uniform(rng, k, Tf):
    # 1 - U lies in (0, 1], so times lie in (0, T]
    return Tf * (1.0 - rng.random(k))


def sample_poisson(lam, horizon, seed) -> PointPattern:
    """Homogeneous Poisson pattern: Poisson(lam*T) count, then sorted uniforms."""
    if lam < 0:
        raise DomainError(f"intensity must be >= 0, got {lam}")
    T = exact(horizon)
    if T <= 0:
        raise DomainError(f"horizon must be positive, got {horizon}")
    rng = _seed(seed).generator()
    k = rng.poisson(float(lam) * float(T))
    return _as_pattern(_uniform(rng, k, float(T)), T)


def sample_general(config: SourceConfig, seed) -> PointPattern:
    rng = _seed(seed).generator()
    T = exact(config.horizon)
    Tf = float(T)
    lam = config.lam
    if config.kind == "poisson":
        return sample_poisson(lam, T, seed)
    if lam == 0:
        return PointPattern(T)
    if config.kind == "grid":
        count = math.floor(exact(lam) * T)
        step = 1 / exact(lam)
        return _as_pattern([float(k * step) for k in range(1, count + 1)], T)
    if config.kind == "max_count":
        count = math.floor(exact(lam) * T)
        return _as_pattern(_uniform(rng, count, Tf), T)
    if config.kind == "renewal":
        mean_n = lam * Tf
        chunk = max(16, int(mean_n + 6 * math.sqrt(mean_n) + 16))
        scale = 1.0 / (config.shape * lam)
        times = []
        t = 0.0
        while t <= Tf:
            gaps = np.cumsum(rng.gamma(config.shape, scale, size=chunk)) + t
            times.append(gaps)
            t = gaps[-1]
        times = np.concatenate(times)
        return _as_pattern(times[times <= Tf], T)
    # cluster: burst epochs are Poisson(lam / burst); each burst spreads its
    # points uniformly over a short window after the epoch
    k = config.burst
    nb = rng.poisson(lam / k * Tf)
    epochs = _uniform(rng, nb, Tf)
    offs = rng.random((nb, k)) * config.burst_width
    times = (epochs[:, None] + offs).ravel()
    return _as_pattern(times[times <= Tf], T)


def check_adversary_constraint(p: PointPattern, lam) -> bool:
    """True iff the pattern has at most ``lam * T`` points."""
    return len(p) <= exact(lam) * p.horizon


def split_side_info(p: PointPattern, prob, seed):
    """Reveal each point independently with probability ``prob``.

    Returns ``(known, unknown)``, a partition of ``p``.
    """
    if not 0 <= prob <= 1:
        raise DomainError(f"probability must lie in [0, 1], got {prob}")
    rng = _seed(seed).generator()
    keep = rng.random(len(p)) < prob
    return PointPattern(p.horizon, p.points[keep]), PointPattern(p.horizon, p.points[~keep])


def read_pattern(path) -> PointPattern:
    """Read a pattern file: header ``T=<value>`` then one time per line."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines or not lines[0].replace(" ", "").startswith("T="):
        raise DomainError(f"{path}: first line must be 'T=<value>'")
    T = exact(lines[0].split("=", 1)[1].strip())
    try:
        return PointPattern(T, [float(x) for x in lines[1:]])
    except ValueError as e:
        raise DomainError(f"{path}: {e}") from None


def write_pattern(p: PointPattern, path):
    with open(path, "w") as fh:
        fh.write(f"T={_fmt(p.horizon)}\n")
        for t in p.points.tolist():
            fh.write(f"{t!r}\n")


def _fmt(q) -> str:
    f = float(q)
    return repr(f) if exact(f) == q else str(q)
