"""Entry laws: centered, variance-1 distributions for matrix entries.

Provides the four admissible kinds (rademacher, gaussian, uniform_sym,
discrete atom laws), their samplers, characteristic functions, analytic
CDFs and absolute moments, and the subgaussian moment-ratio diagnostic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr

from .rng import RngStream

SQRT3 = math.sqrt(3.0)

_KINDS = ("rademacher", "gaussian", "uniform_sym", "discrete")

# Tolerances from the type contract.
_PROB_SUM_TOL = 1e-12
_MOMENT_TOL = 1e-9


@dataclass(frozen=True)
class EntryDistribution:
    """A centered, variance-1 entry law.

    kind is one of 'rademacher', 'gaussian', 'uniform_sym', 'discrete'.
    For 'discrete', atoms is a tuple of (value, prob) pairs; probabilities
    must sum to 1 within 1e-12 and the law must have mean 0 and variance 1
    within 1e-9.
    """

    kind: str
    atoms: tuple[tuple[float, float], ...] = field(default=())

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown distribution kind: {self.kind!r}")
        if self.kind != "discrete":
            if self.atoms:
                raise ValueError(f"atoms are only valid for kind='discrete'")
            return
        if len(self.atoms) < 2:
            raise ValueError("discrete law needs at least 2 atoms")
        vals = np.array([a[0] for a in self.atoms], dtype=float)
        probs = np.array([a[1] for a in self.atoms], dtype=float)
        if not np.all(np.isfinite(vals)):
            raise ValueError("atom values must be finite")
        if len(np.unique(vals)) != len(vals):
            raise ValueError("atom values must be distinct")
        if np.any(probs <= 0):
            raise ValueError("atom probabilities must be positive")
        if abs(probs.sum() - 1.0) > _PROB_SUM_TOL:
            raise ValueError(f"atom probabilities sum to {probs.sum()!r}, not 1")
        mean = float(probs @ vals)
        var = float(probs @ vals**2)
        if abs(mean) > _MOMENT_TOL:
            raise ValueError(f"discrete law has mean {mean!r}, not 0")
        if abs(var - 1.0) > _MOMENT_TOL:
            raise ValueError(f"discrete law has second moment {var!r}, not 1")

    # ---- derived structure ------------------------------------------------

    @property
    def finite_support(self) -> bool:
        return self.kind in ("rademacher", "discrete")

    def support(self) -> np.ndarray:
        """Atom values for finite-support laws, sorted ascending."""
        if self.kind == "rademacher":
            return np.array([-1.0, 1.0])
        if self.kind == "discrete":
            return np.sort(np.array([a[0] for a in self.atoms], dtype=float))
        raise ValueError(f"{self.kind} has no finite support")

    def support_probs(self) -> np.ndarray:
        """Probabilities aligned with support()."""
        if self.kind == "rademacher":
            return np.array([0.5, 0.5])
        if self.kind == "discrete":
            order = np.argsort([a[0] for a in self.atoms])
            return np.array([self.atoms[i][1] for i in order], dtype=float)
        raise ValueError(f"{self.kind} has no finite support")

    def support_radius(self) -> float:
        """max |value| over the support; sqrt(3) for uniform_sym, inf for gaussian."""
        if self.kind == "rademacher":
            return 1.0
        if self.kind == "discrete":
            return float(np.max(np.abs(self.support())))
        if self.kind == "uniform_sym":
            return SQRT3
        return math.inf

    @property
    def is_symmetric(self) -> bool:
        if self.kind in ("rademacher", "gaussian", "uniform_sym"):
            return True
        by_value = {v: p for v, p in self.atoms}
        for v, p in self.atoms:
            q = by_value.get(-v)
            if q is None or not math.isclose(p, q, rel_tol=1e-12, abs_tol=1e-15):
                return False
        return True

    def spec_string(self) -> str:
        if self.kind == "rademacher":
            return "rademacher"
        if self.kind == "gaussian":
            return "gaussian"
        if self.kind == "uniform_sym":
            return "uniform"
        parts = ",".join(f"{v!r}:{p!r}" for v, p in self.atoms)
        return f"discrete:{parts}"


RADEMACHER = EntryDistribution("rademacher")
GAUSSIAN = EntryDistribution("gaussian")
UNIFORM_SYM = EntryDistribution("uniform_sym")


def discrete(atoms) -> EntryDistribution:
    """Discrete law from an iterable of (value, prob) pairs."""
    return EntryDistribution("discrete", tuple((float(v), float(p)) for v, p in atoms))


def parse_dist_spec(spec: str) -> EntryDistribution:
    """Parse a CLI/config distribution string.

    Accepted forms: 'rademacher', 'gaussian', 'uniform',
    'discrete:v1:p1,v2:p2,...'.
    """
    s = spec.strip()
    if s == "rademacher":
        return RADEMACHER
    if s == "gaussian":
        return GAUSSIAN
    if s == "uniform":
        return UNIFORM_SYM
    if s.startswith("discrete:"):
        body = s[len("discrete:"):]
        atoms = []
        for pair in body.split(","):
            bits = pair.split(":")
            if len(bits) != 2:
                raise ValueError(f"bad atom {pair!r} in {spec!r} (want value:prob)")
            atoms.append((float(bits[0]), float(bits[1])))
        return discrete(atoms)
    raise ValueError(f"unknown distribution spec: {spec!r}")


# ---- sampling --------------------------------------------------------------


def sample(dist: EntryDistribution, rng: RngStream, size=None):
    """Draw from the law; deterministic given the stream state.

    Returns a scalar float when size is None, else an ndarray of that shape.
    """
    if dist.kind == "rademacher":
        out = 2.0 * rng.integers(0, 2, size=size) - 1.0
    elif dist.kind == "gaussian":
        out = rng.standard_normal(size=size)
    elif dist.kind == "uniform_sym":
        out = rng.uniform(-SQRT3, SQRT3, size=size)
    else:
        vals = dist.support()
        cum = np.cumsum(dist.support_probs())
        u = rng.random(size=size)
        out = vals[np.searchsorted(cum, u, side="right")]
    if size is None:
        return float(out)
    return np.asarray(out, dtype=float)


# ---- characteristic function, CDF, moments ---------------------------------


def char_fn(dist: EntryDistribution, t):
    """Real-valued characteristic function.

    For symmetric laws this is E cos(beta*t) (signed). For asymmetric
    discrete laws it is |E exp(i*beta*t)|, assembled from the real and
    imaginary parts. Accepts scalar or array t.
    """
    t_arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(t_arr)):
        raise ValueError("char_fn requires finite t")
    if dist.kind == "rademacher":
        out = np.cos(t_arr)
    elif dist.kind == "gaussian":
        out = np.exp(-0.5 * t_arr**2)
    elif dist.kind == "uniform_sym":
        # sin(sqrt(3) t) / (sqrt(3) t), continuous at 0
        out = np.sinc(SQRT3 * t_arr / np.pi)
    else:
        vals = dist.support()
        probs = dist.support_probs()
        re = np.cos(np.multiply.outer(t_arr, vals)) @ probs
        if dist.is_symmetric:
            out = re
        else:
            im = np.sin(np.multiply.outer(t_arr, vals)) @ probs
            out = np.hypot(re, im)
    if np.isscalar(t) or np.ndim(t) == 0:
        return float(out)
    return out


def cdf(dist: EntryDistribution, x):
    """Analytic CDF P(beta <= x); scalar or array x."""
    x_arr = np.asarray(x, dtype=float)
    if dist.kind == "gaussian":
        out = ndtr(x_arr)
    elif dist.kind == "uniform_sym":
        out = np.clip((x_arr + SQRT3) / (2.0 * SQRT3), 0.0, 1.0)
    else:
        vals = dist.support()
        probs = dist.support_probs()
        cum = np.concatenate([[0.0], np.cumsum(probs)])
        out = cum[np.searchsorted(vals, x_arr, side="right")]
    if np.isscalar(x) or np.ndim(x) == 0:
        return float(out)
    return out


def abs_third_moment(dist: EntryDistribution) -> float:
    """E |beta|^3, in closed form per law."""
    if dist.kind == "rademacher":
        return 1.0
    if dist.kind == "gaussian":
        return 2.0 * math.sqrt(2.0 / math.pi)
    if dist.kind == "uniform_sym":
        # (1/(2 sqrt(3))) * 2 * integral_0^sqrt(3) u^3 du = 3 sqrt(3) / 4
        return 3.0 * SQRT3 / 4.0
    return float(sum(p * abs(v) ** 3 for v, p in dist.atoms))


def symmetrized_atoms(dist: EntryDistribution) -> tuple[np.ndarray, np.ndarray]:
    """Atom law of beta - beta' for finite-support dist: (values, probs)."""
    vals = dist.support()
    probs = dist.support_probs()
    diff = np.subtract.outer(vals, vals).ravel()
    pp = np.multiply.outer(probs, probs).ravel()
    uniq, inv = np.unique(diff, return_inverse=True)
    agg = np.zeros_like(uniq)
    np.add.at(agg, inv, pp)
    return uniq, agg


# ---- subgaussian diagnostic -------------------------------------------------

_P_MAX_LIMIT = 12
_MIN_DIAGNOSTIC_SAMPLES = 10_000


@dataclass(frozen=True)
class MomentRatio:
    p: int
    ratio: float
    stderr: float


def subgaussian_diagnostic(
    dist: EntryDistribution,
    samples: int,
    p_max: int,
    rng: RngStream,
) -> list[MomentRatio]:
    """Monte Carlo moment-growth report.

    For each even p <= p_max, estimates (E|beta|^p)^(1/p) / sqrt(p) with a
    delta-method standard error. Bounded ratios as p grows are the
    operational subgaussian proxy; the tail constants themselves are not
    estimated.
    """
    if p_max > _P_MAX_LIMIT:
        raise ValueError(f"p_max {p_max} > {_P_MAX_LIMIT}: moment estimation unstable")
    if p_max < 2:
        raise ValueError("p_max must be at least 2")
    if samples < _MIN_DIAGNOSTIC_SAMPLES:
        raise ValueError(f"samples {samples} < {_MIN_DIAGNOSTIC_SAMPLES}")
    draws = np.abs(sample(dist, rng, size=samples))
    report = []
    for p in range(2, p_max + 1, 2):
        powers = draws**p
        mean_p = float(np.mean(powers))
        se_mean = float(np.std(powers, ddof=1) / math.sqrt(samples))
        root = mean_p ** (1.0 / p)
        ratio = root / math.sqrt(p)
        # d/dm [ m^(1/p) / sqrt(p) ] = ratio / (p m)
        stderr = ratio * se_mean / (p * mean_p) if mean_p > 0 else 0.0
        report.append(MomentRatio(p=p, ratio=ratio, stderr=stderr))
    return report
