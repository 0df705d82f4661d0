"""Monte Carlo estimation of average SNR and ergodic rate.

Samples are drawn in fixed-size blocks.  Block ``b`` of component ``c``
(0 turbulence EW, 1 pointing, 2 turbulence GG) owns the Philox stream keyed
by ``SeedSequence(seed, spawn_key=(b, c))``, so every draw is a function of
(seed, block, component) only.  Blocks are reduced in index order, which
makes the result independent of how many workers computed them.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .channels import EwParams, LinkBudget, PointingGeometry, ew_moment, ew_sample, pointing_sample
from .errors import DomainError

Z95 = 1.959963984540054
MIN_SAMPLES = 30

_EW, _POINTING, _GG = 0, 1, 2


@dataclass(frozen=True)
class MonteCarloConfig:
    n_samples: int
    seed: int = 0
    n_workers: int = 1
    block_size: int = 2 ** 16

    def __post_init__(self):
        for name in ("n_samples", "n_workers", "block_size"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise DomainError(f"{name} must be a positive integer, got {v!r}")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise DomainError("seed must fit in 64 unsigned bits")

    def with_overrides(self, **kw) -> "MonteCarloConfig":
        vals = {k: getattr(self, k) for k in ("n_samples", "seed", "n_workers", "block_size")}
        vals.update({k: v for k, v in kw.items() if v is not None})
        return MonteCarloConfig(**vals)


@dataclass(frozen=True)
class Estimate:
    """Sample mean with a normal-approximation 95% interval."""

    mean: float
    stderr: float
    ci95_low: float
    ci95_high: float
    n: int
    seed: int

    def __post_init__(self):
        if self.n < MIN_SAMPLES:
            raise DomainError(f"an Estimate needs at least {MIN_SAMPLES} samples, got {self.n}")
        if not self.stderr >= 0:
            raise DomainError("stderr must be non-negative")
        if not self.ci95_low <= self.mean <= self.ci95_high:
            raise DomainError("confidence interval does not bracket the mean")

    @classmethod
    def from_moments(cls, n: int, mean: float, m2: float, seed: int) -> "Estimate":
        """Build from a count, mean and sum of squared deviations."""
        var = m2 / (n - 1) if n > 1 else 0.0
        se = math.sqrt(max(var, 0.0) / n)
        return cls(mean, se, mean - Z95 * se, mean + Z95 * se, n, seed)

    def covers(self, value: float) -> bool:
        return self.ci95_low <= value <= self.ci95_high


@dataclass(frozen=True)
class GgParams:
    """Gamma-Gamma turbulence: h_a = X * Y, X ~ Gamma(a, 1/a), Y ~ Gamma(b, 1/b)."""

    a_gg: float
    b_gg: float

    def __post_init__(self):
        if not (self.a_gg > 0 and self.b_gg > 0):
            raise DomainError(f"Gamma-Gamma shapes must be positive, got {self}")

    @property
    def scintillation_index(self) -> float:
        a, b = self.a_gg, self.b_gg
        return 1 / a + 1 / b + 1 / (a * b)


def gg_sample(p: GgParams, rng: np.random.Generator, size=None):
    """Unit-mean Gamma-Gamma draws as a product of two gamma variates."""
    x = rng.gamma(p.a_gg, 1 / p.a_gg, size)
    y = rng.gamma(p.b_gg, 1 / p.b_gg, size)
    return x * y


def gg_params_from_scintillation(si: float, a_gg: float | None = None) -> GgParams:
    """Shapes reproducing a target scintillation index.

    With ``a_gg`` omitted the two shapes are taken equal, which gives
    a = 1 / (sqrt(1 + si) - 1).  Otherwise b is solved for the given a.
    """
    if not si > 0:
        raise DomainError("scintillation index must be positive")
    if a_gg is None:
        a = 1 / (math.sqrt(1 + si) - 1)
        return GgParams(a, a)
    if si <= 1 / a_gg:
        raise DomainError(f"no b_gg > 0 gives si={si} with a_gg={a_gg}")
    return GgParams(a_gg, (1 + 1 / a_gg) / (si - 1 / a_gg))


def moment_matched_gg(ew: EwParams) -> tuple[GgParams, float]:
    """GG shapes and a scale matching the first two EW moments.

    Returns ``(params, mean)``; scaling unit-mean GG draws by ``mean`` gives
    the same mean and second moment as the EW law.
    """
    m1 = ew_moment(ew, 1)
    si = ew_moment(ew, 2) / m1 ** 2 - 1
    return gg_params_from_scintillation(si), m1


class Metric(str, enum.Enum):
    AVG_SNR = "avg_snr"
    ERGODIC_RATE = "ergodic_rate"


@dataclass(frozen=True)
class Channel:
    """Composition h = L * h_a * h_p.

    ``turbulence`` is EwParams, GgParams or None (h_a = 1).  ``gg_mean``
    rescales unit-mean GG draws and is ignored otherwise.
    """

    turbulence: EwParams | GgParams | None = None
    pointing: PointingGeometry | None = None
    gg_mean: float = 1.0

    def __post_init__(self):
        if not isinstance(self.turbulence, (EwParams, GgParams, type(None))):
            raise DomainError(f"unsupported turbulence model {type(self.turbulence).__name__}")
        if not self.gg_mean > 0:
            raise DomainError("gg_mean must be positive")


def _stream(seed: int, block: int, component: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(block, component))
    return np.random.Generator(np.random.Philox(ss))


def draw_gains(channel: Channel, link: LinkBudget, seed: int, block: int, size: int) -> np.ndarray:
    """Channel gains h for one block of samples."""
    h = np.full(size, link.path_loss)
    t = channel.turbulence
    if isinstance(t, EwParams):
        h *= ew_sample(t, _stream(seed, block, _EW), size)
    elif isinstance(t, GgParams):
        h *= channel.gg_mean * gg_sample(t, _stream(seed, block, _GG), size)
    if channel.pointing is not None:
        h *= pointing_sample(channel.pointing, _stream(seed, block, _POINTING), size)
    return h


def _metric_values(metric: Metric, gamma: np.ndarray) -> np.ndarray:
    if metric is Metric.AVG_SNR:
        return gamma
    return np.log1p(gamma) / math.log(2)


def _block_sizes(cfg: MonteCarloConfig) -> list[int]:
    full, rest = divmod(cfg.n_samples, cfg.block_size)
    return [cfg.block_size] * full + ([rest] if rest else [])


def _run_blocks(task, cfg: MonteCarloConfig):
    sizes = _block_sizes(cfg)
    args = list(enumerate(sizes))
    if cfg.n_workers == 1 or len(args) == 1:
        return [task(b, n) for b, n in args]
    with ThreadPoolExecutor(max_workers=cfg.n_workers) as pool:
        return list(pool.map(lambda a: task(*a), args))


def _merge(parts):
    """Ordered Chan et al. combination of (n, mean, m2) triples."""
    n, mean, m2 = 0, 0.0, 0.0
    for nb, mb, m2b in parts:
        tot = n + nb
        delta = mb - mean
        mean += delta * nb / tot
        m2 += m2b + delta * delta * n * nb / tot
        n = tot
    return n, mean, m2


def _estimates(metrics, gamma_block, cfg: MonteCarloConfig):
    def task(block, size):
        g = gamma_block(block, size)
        out = []
        for m in metrics:
            v = _metric_values(m, g)
            mu = float(np.mean(v))
            out.append((size, mu, float(np.sum((v - mu) ** 2))))
        return out

    results = _run_blocks(task, cfg)
    est = {}
    for i, m in enumerate(metrics):
        n, mean, m2 = _merge(r[i] for r in results)
        est[m] = Estimate.from_moments(n, mean, m2, cfg.seed)
    return est


def mc_estimates(channel: Channel, link: LinkBudget, cfg: MonteCarloConfig,
                 metrics=(Metric.AVG_SNR, Metric.ERGODIC_RATE)) -> dict[Metric, Estimate]:
    """Estimate several metrics from one set of channel draws."""
    metrics = tuple(Metric(m) for m in metrics)
    if cfg.n_samples < MIN_SAMPLES:
        raise DomainError(f"n_samples must be at least {MIN_SAMPLES}")
    g0 = link.gamma0

    def gamma_block(block, size):
        h = draw_gains(channel, link, cfg.seed, block, size)
        return g0 * h * h

    return _estimates(metrics, gamma_block, cfg)


def mc_estimate(metric: Metric | str, channel: Channel, link: LinkBudget,
                cfg: MonteCarloConfig) -> Estimate:
    """Monte Carlo mean of gamma (``avg_snr``) or log2(1 + gamma) (``ergodic_rate``)."""
    metric = Metric(metric)
    return mc_estimates(channel, link, cfg, (metric,))[metric]


@dataclass(frozen=True)
class Comparison:
    """Per-arm estimates from common random numbers."""

    estimates: dict = field(default_factory=dict)  # (arm, Metric) -> Estimate
    seeds: dict = field(default_factory=dict)      # arm -> seed

    def gap(self, metric: Metric | str, first: str = "EW", second: str = "GG") -> float:
        metric = Metric(metric)
        return self.estimates[(first, metric)].mean - self.estimates[(second, metric)].mean


def compare_channels(arms: dict[str, Channel], link: LinkBudget, cfg: MonteCarloConfig,
                     metrics=(Metric.AVG_SNR, Metric.ERGODIC_RATE)) -> Comparison:
    """Run every arm on the same seed.

    The pointing stream is keyed by (seed, block) alone, so all arms see the
    same pointing draws and the same path loss.
    """
    est = {}
    for name, ch in arms.items():
        for m, e in mc_estimates(ch, link, cfg, metrics).items():
            est[(name, m)] = e
    return Comparison(est, {name: cfg.seed for name in arms})


def compare_models(ew: EwParams, gg: GgParams, pointing: PointingGeometry | None,
                   link: LinkBudget, cfg: MonteCarloConfig, gg_mean: float = 1.0) -> Comparison:
    """EW against GG turbulence under shared pointing and path loss."""
    arms = {"EW": Channel(ew, pointing), "GG": Channel(gg, pointing, gg_mean)}
    return compare_channels(arms, link, cfg)
