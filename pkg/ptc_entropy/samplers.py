"""Seeded samplers and ground-truth entropies for the experiment distributions."""

from __future__ import annotations

import math
from typing import Literal, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import stats
from scipy.special import betaln, digamma

from .errors import ArgumentError
from .estimators import gaussian_entropy, uniform_entropy

Family = Literal["uniform", "gaussian", "student_t", "gaussian_mixture"]

DEFAULT_SEPARATION = 10.0


class MixtureComponent(BaseModel):
    """One Gaussian component of a mixture."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    weight: float = Field(gt=0)
    mean: list[float]
    cov: list[list[float]]


class DistributionSpec(BaseModel):
    """Distribution family plus its parameters.

    uniform uses ``low``/``high``; gaussian uses ``mean``/``cov``; student_t
    uses ``dof`` with optional ``mean`` as location and independent unit-scale
    coordinates; gaussian_mixture uses ``components``.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    family: Family
    dim: int = Field(ge=1)
    low: list[float] | None = None
    high: list[float] | None = None
    mean: list[float] | None = None
    cov: list[list[float]] | None = None
    dof: float | None = Field(default=None, gt=0)
    components: list[MixtureComponent] | None = None

    @model_validator(mode="after")
    def _check_parameters(self) -> DistributionSpec:
        d = self.dim
        if self.family == "uniform":
            if self.low is None or self.high is None or len(self.low) != d or len(self.high) != d:
                raise ValueError(f"uniform needs low and high of length {d}")
            if any(b <= a for a, b in zip(self.low, self.high)):
                raise ValueError("uniform needs high > low in every dimension")
        elif self.family == "gaussian":
            if self.mean is None or self.cov is None or len(self.mean) != d:
                raise ValueError(f"gaussian needs a mean of length {d} and a covariance")
            if np.asarray(self.cov).shape != (d, d):
                raise ValueError(f"gaussian covariance must be {d}x{d}")
        elif self.family == "student_t":
            if self.dof is None:
                raise ValueError("student_t needs dof")
            if self.mean is not None and len(self.mean) != d:
                raise ValueError(f"student_t location must have length {d}")
        else:
            if not self.components:
                raise ValueError("gaussian_mixture needs at least one component")
            total = sum(c.weight for c in self.components)
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"mixture weights must sum to 1, got {total}")
            for c in self.components:
                if len(c.mean) != d or np.asarray(c.cov).shape != (d, d):
                    raise ValueError(f"every mixture component needs a length-{d} mean and {d}x{d} covariance")
        return self

    @classmethod
    def uniform(cls, low: Sequence[float], high: Sequence[float]) -> DistributionSpec:
        return cls(family="uniform", dim=len(low), low=list(low), high=list(high))

    @classmethod
    def uniform_cube(cls, d: int, a: float = 0.0, b: float = 1.0) -> DistributionSpec:
        return cls.uniform([a] * d, [b] * d)

    @classmethod
    def gaussian(cls, mean: Sequence[float], cov) -> DistributionSpec:
        cov = np.asarray(cov, dtype=np.float64)
        return cls(family="gaussian", dim=len(mean), mean=list(mean), cov=cov.tolist())

    @classmethod
    def standard_normal(cls, d: int) -> DistributionSpec:
        return cls.gaussian([0.0] * d, np.eye(d))

    @classmethod
    def correlated_normal(cls, d: int) -> DistributionSpec:
        """N(0, (1 1^T + I) / 2): unit variances, pairwise correlation 1/2."""
        return cls.gaussian([0.0] * d, 0.5 * (np.ones((d, d)) + np.eye(d)))

    @classmethod
    def student_t(cls, d: int, dof: float, loc: Sequence[float] | None = None) -> DistributionSpec:
        return cls(family="student_t", dim=d, dof=dof, mean=None if loc is None else list(loc))

    @property
    def n_components(self) -> int:
        return len(self.components) if self.components else 0

    def marginal(self, k: int):
        """Frozen scipy distribution of coordinate k for product families.

        Raises:
            ArgumentError: For mixtures and correlated Gaussians
        """
        if self.family == "uniform":
            return stats.uniform(loc=self.low[k], scale=self.high[k] - self.low[k])
        if self.family == "gaussian":
            cov = np.asarray(self.cov)
            if np.any(cov - np.diag(np.diag(cov))):
                raise ArgumentError("Correlated gaussian has no independent coordinates")
            return stats.norm(loc=self.mean[k], scale=math.sqrt(cov[k, k]))
        if self.family == "student_t":
            loc = 0.0 if self.mean is None else self.mean[k]
            return stats.t(self.dof, loc=loc)
        raise ArgumentError(f"Unsupported distribution family for per-coordinate CDFs: {self.family}")


def _cov_factor(cov) -> np.ndarray:
    cov = np.asarray(cov, dtype=np.float64)
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(cov)
        if vals.min() < -1e-10 * max(1.0, vals.max()):
            raise ArgumentError("Covariance is not positive semi-definite")
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


def sample_with_labels(spec: DistributionSpec, s: int, seed: int) -> tuple[np.ndarray, np.ndarray | None]:
    """Draw s samples; mixtures also return the component label of each row.

    Returns:
        Tuple of (samples, labels) where labels is None for non-mixtures
    """
    if s < 1:
        raise ArgumentError(f"Need s >= 1 samples, got {s}")
    rng = np.random.default_rng(seed)
    d = spec.dim
    if spec.family == "uniform":
        return rng.uniform(spec.low, spec.high, size=(s, d)), None
    if spec.family == "gaussian":
        L = _cov_factor(spec.cov)
        return np.asarray(spec.mean) + rng.standard_normal((s, d)) @ L.T, None
    if spec.family == "student_t":
        loc = np.zeros(d) if spec.mean is None else np.asarray(spec.mean)
        return loc + rng.standard_t(spec.dof, size=(s, d)), None

    weights = np.array([c.weight for c in spec.components])
    labels = rng.choice(len(weights), size=s, p=weights / weights.sum())
    z = rng.standard_normal((s, d))
    x = np.empty((s, d))
    for c, comp in enumerate(spec.components):
        rows = labels == c
        x[rows] = np.asarray(comp.mean) + z[rows] @ _cov_factor(comp.cov).T
    return x, labels


def sample(spec: DistributionSpec, s: int, seed: int) -> np.ndarray:
    """Draw an (s, d) sample; identical (spec, s, seed) give identical output."""
    return sample_with_labels(spec, s, seed)[0]


def simplex_vertices(m: int, d: int, separation: float = DEFAULT_SEPARATION) -> np.ndarray:
    """Vertices of a regular (m-1)-simplex with the given edge length in R^d.

    The first vertex is the origin; vertex j sits above the centroid of the
    previous j vertices along coordinate j-1 at the height that makes it
    equidistant from all of them. Coordinates j >= m-1 stay zero.
    """
    if m < 1:
        raise ArgumentError(f"Need at least one vertex, got {m}")
    if d < m - 1:
        raise ArgumentError(
            f"{m} equidistant points need dimension >= {m - 1} "
            f"(at most d+1 equidistant points fit in R^d), got d={d}"
        )
    if not separation > 0:
        raise ArgumentError(f"Separation must be positive, got {separation}")
    vertices = np.zeros((m, d))
    for j in range(1, m):
        centroid = vertices[:j].mean(axis=0)
        height_sq = separation**2 - float(np.sum((centroid - vertices[0]) ** 2))
        vertices[j] = centroid
        vertices[j, j - 1] = math.sqrt(height_sq)
    return vertices


def equidistant_mixture(
    m: int,
    d: int,
    separation: float = DEFAULT_SEPARATION,
    component_cov=None,
) -> DistributionSpec:
    """Equal-weight Gaussian mixture with modes on a regular simplex.

    Args:
        m: Number of components
        d: Dimension, at least m - 1
        separation: Distance between every pair of means
        component_cov: Shared component covariance (default identity)

    Raises:
        ArgumentError: If d < m - 1
    """
    means = simplex_vertices(m, d, separation)
    cov = np.eye(d) if component_cov is None else np.asarray(component_cov, dtype=np.float64)
    components = [
        MixtureComponent(weight=1.0 / m, mean=means[c].tolist(), cov=cov.tolist())
        for c in range(m)
    ]
    return DistributionSpec(family="gaussian_mixture", dim=d, components=components)


def student_t_entropy(dof: float) -> float:
    """Entropy of the unit-scale 1-D Student t distribution.

    (nu+1)/2 * (psi((nu+1)/2) - psi(nu/2)) + log(sqrt(nu) * B(nu/2, 1/2));
    for nu = 1 this is the Cauchy entropy log(4 pi).
    """
    half = 0.5 * dof
    return float(
        (half + 0.5) * (digamma(half + 0.5) - digamma(half))
        + 0.5 * math.log(dof)
        + betaln(half, 0.5)
    )


def true_entropy(spec: DistributionSpec) -> float | None:
    """Closed-form differential entropy in nats, or None if none exists.

    Mixtures of two or more Gaussians have no closed form; experiments use a
    large-sample histogram reference for them instead.
    """
    if spec.family == "uniform":
        return uniform_entropy(list(zip(spec.low, spec.high)))
    if spec.family == "gaussian":
        return gaussian_entropy(spec.cov)
    if spec.family == "student_t":
        return spec.dim * student_t_entropy(spec.dof)
    if spec.n_components == 1:
        return gaussian_entropy(spec.components[0].cov)
    return None
