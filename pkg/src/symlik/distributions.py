"""Parametric micro-data families.

Every family stores its parameters as numpy arrays so that a single family
object can carry a whole batch of parameter vectors; all evaluation methods
broadcast parameters against their arguments.  This is what lets the
optimiser and the replicate studies evaluate many likelihoods at once.

Family methods are lenient (``logpdf`` returns ``-inf`` outside the support).
The module-level functions :func:`pdf`, :func:`cdf`, :func:`conditional_cdf`,
:func:`rect_prob` and :func:`sample` are the checked public entry points.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import ClassVar

import numpy as np
from scipy.special import log_ndtr, ndtr

from .errors import DomainError, InvalidParameterError, OrderingError
from .special import bvn_cdf, owens_t

__all__ = [
    "Family",
    "Normal1D",
    "LogNormal1D",
    "SkewNormal1D",
    "Uniform1D",
    "BivariateNormal",
    "DataMatrix",
    "FAMILIES",
    "get_family",
    "pdf",
    "cdf",
    "conditional_cdf",
    "rect_prob",
    "sample",
]

_LOG_2PI = np.log(2.0 * np.pi)
_SQRT_2_OVER_PI = np.sqrt(2.0 / np.pi)
# largest admissible |delta| for the skew-normal shape
DELTA_MAX = 0.9952


def _arr(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


def _log_diff(hi, lo) -> np.ndarray:
    """log(hi - lo) with the difference floored at zero."""
    with np.errstate(divide="ignore"):
        return np.log(np.maximum(hi - lo, 0.0))


@dataclass(frozen=True)
class DataMatrix:
    """Micro-data sample: ``values`` is n x d, ``class_labels`` optional (1..m)."""

    values: np.ndarray
    class_labels: np.ndarray | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] < 1:
            raise ValueError("DataMatrix needs an n x d array with n >= 1")
        if not np.all(np.isfinite(v)):
            raise ValueError("DataMatrix entries must be finite")
        object.__setattr__(self, "values", v)
        if self.class_labels is not None:
            lab = np.asarray(self.class_labels)
            if lab.shape != (v.shape[0],):
                raise ValueError("class_labels must have one entry per row")
            if not np.issubdtype(lab.dtype, np.integer) or lab.min() < 1:
                raise ValueError("class_labels must be integers indexing classes 1..m")
            object.__setattr__(self, "class_labels", lab)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def classes(self) -> dict[int, "DataMatrix"]:
        """Split rows by class label (a single class 1 when unlabelled)."""
        if self.class_labels is None:
            return {1: self}
        return {
            int(c): DataMatrix(self.values[self.class_labels == c])
            for c in np.unique(self.class_labels)
        }


class Family:
    """Base class for micro-data models.

    Subclasses define ``param_names`` and implement the density primitives.
    Parameters are stored as float arrays of a common (broadcast) shape.
    """

    name: ClassVar[str]
    dim: ClassVar[int] = 1
    param_names: ClassVar[tuple[str, ...]]

    def __init__(self, *params, check: bool = True):
        arrays = np.broadcast_arrays(*[_arr(p) for p in params])
        for name, value in zip(self.param_names, arrays):
            setattr(self, name, value)
        if check:
            self.validate()

    # -- parameter vector plumbing -------------------------------------
    @classmethod
    def from_vector(cls, theta, check: bool = True) -> "Family":
        theta = _arr(theta)
        if theta.shape[-1] != len(cls.param_names):
            raise InvalidParameterError(
                f"{cls.name} expects {len(cls.param_names)} parameters, got {theta.shape[-1]}"
            )
        return cls(*np.moveaxis(theta, -1, 0), check=check)

    def to_vector(self) -> np.ndarray:
        return np.stack([getattr(self, p) for p in self.param_names], axis=-1)

    @classmethod
    def to_unconstrained(cls, theta) -> np.ndarray:
        raise NotImplementedError

    @classmethod
    def from_unconstrained(cls, z) -> "Family":
        raise NotImplementedError

    def admissible(self) -> np.ndarray:
        """Boolean array: which parameter vectors satisfy the invariants."""
        return np.ones(np.shape(getattr(self, self.param_names[0])), dtype=bool)

    def validate(self) -> None:
        if not np.all(self.admissible()):
            raise InvalidParameterError(f"invalid {self.name} parameters: {self.to_vector()}")

    def __repr__(self) -> str:
        vals = ", ".join(f"{p}={np.squeeze(getattr(self, p))}" for p in self.param_names)
        return f"{type(self).__name__}({vals})"

    # -- density primitives (univariate defaults) ------------------------
    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def logcdf(self, x):
        with np.errstate(divide="ignore"):
            return np.log(self.cdf(x))

    def logsf(self, x):
        with np.errstate(divide="ignore"):
            return np.log1p(-self.cdf(x))

    def in_support(self, x) -> np.ndarray:
        return np.isfinite(_arr(x)) | np.isinf(_arr(x))

    def rect_prob(self, lower, upper):
        """Mass of [lower, upper]; univariate families use G(upper) - G(lower)."""
        return np.maximum(self.cdf(upper) - self.cdf(lower), 0.0)

    def sample(self, size, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError


class Normal1D(Family):
    name = "Normal1D"
    param_names = ("mu", "sigma")

    def admissible(self):
        return np.isfinite(self.mu) & (self.sigma > 0) & np.isfinite(self.sigma)

    @classmethod
    def to_unconstrained(cls, theta):
        theta = _arr(theta)
        return np.stack([theta[..., 0], np.log(theta[..., 1])], axis=-1)

    @classmethod
    def from_unconstrained(cls, z):
        z = _arr(z)
        return cls(z[..., 0], np.exp(z[..., 1]), check=False)

    def _z(self, x):
        return (_arr(x) - self.mu) / self.sigma

    def logpdf(self, x):
        z = self._z(x)
        return -0.5 * z * z - np.log(self.sigma) - 0.5 * _LOG_2PI

    def cdf(self, x):
        return ndtr(self._z(x))

    def logcdf(self, x):
        return log_ndtr(self._z(x))

    def logsf(self, x):
        return log_ndtr(-self._z(x))

    def ppf(self, q):
        from scipy.special import ndtri

        return self.mu + self.sigma * ndtri(q)

    def sample(self, size, rng):
        return rng.normal(self.mu, self.sigma, size=size)

    @property
    def mean(self):
        return self.mu

    @property
    def sd(self):
        return self.sigma


class LogNormal1D(Family):
    """Lognormal with (mu, sigma) on the log scale; support (0, inf)."""

    name = "LogNormal1D"
    param_names = ("mu", "sigma")

    admissible = Normal1D.admissible
    to_unconstrained = Normal1D.to_unconstrained

    @classmethod
    def from_unconstrained(cls, z):
        z = _arr(z)
        return cls(z[..., 0], np.exp(z[..., 1]), check=False)

    def in_support(self, x):
        return _arr(x) > 0

    def _z(self, x):
        x = _arr(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            return (np.log(np.where(x > 0, x, np.nan)) - self.mu) / self.sigma

    def logpdf(self, x):
        x = _arr(x)
        z = self._z(x)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = -0.5 * z * z - np.log(self.sigma) - 0.5 * _LOG_2PI - np.log(x)
        return np.where(x > 0, out, -np.inf)

    def cdf(self, x):
        x = _arr(x)
        return np.where(x > 0, ndtr(np.nan_to_num(self._z(x), nan=-np.inf)), 0.0)

    def logcdf(self, x):
        x = _arr(x)
        return np.where(x > 0, log_ndtr(np.nan_to_num(self._z(x), nan=-np.inf)), -np.inf)

    def logsf(self, x):
        x = _arr(x)
        return np.where(x > 0, log_ndtr(-np.nan_to_num(self._z(x), nan=-np.inf)), 0.0)

    def sample(self, size, rng):
        return rng.lognormal(self.mu, self.sigma, size=size)

    @property
    def mean(self):
        return np.exp(self.mu + 0.5 * self.sigma**2)

    @property
    def sd(self):
        return self.mean * np.sqrt(np.expm1(self.sigma**2))


class SkewNormal1D(Family):
    """Skew-normal parameterised by mean, variance and shape.

    The shape is Azzalini's alpha.  Direct parameters follow from
    delta = alpha / sqrt(1 + alpha^2), omega = sqrt(var / (1 - 2 delta^2 / pi))
    and xi = mean - omega * delta * sqrt(2 / pi).
    """

    name = "SkewNormal1D"
    param_names = ("mu", "var", "shape")

    @property
    def delta(self):
        return self.shape / np.sqrt(1.0 + self.shape**2)

    @property
    def omega(self):
        d = self.delta
        return np.sqrt(self.var / (1.0 - (2.0 / np.pi) * d * d))

    @property
    def xi(self):
        return self.mu - self.omega * self.delta * _SQRT_2_OVER_PI

    def admissible(self):
        return (
            np.isfinite(self.mu)
            & (self.var > 0)
            & np.isfinite(self.var)
            & np.isfinite(self.shape)
            & (np.abs(self.delta) <= DELTA_MAX)
        )

    @classmethod
    def to_unconstrained(cls, theta):
        theta = _arr(theta)
        return np.stack([theta[..., 0], np.log(theta[..., 1]), theta[..., 2]], axis=-1)

    @classmethod
    def from_unconstrained(cls, z):
        z = _arr(z)
        return cls(z[..., 0], np.exp(z[..., 1]), z[..., 2], check=False)

    def logpdf(self, x):
        z = (_arr(x) - self.xi) / self.omega
        return np.log(2.0) - np.log(self.omega) - 0.5 * z * z - 0.5 * _LOG_2PI + log_ndtr(self.shape * z)

    def cdf(self, x):
        z = (_arr(x) - self.xi) / self.omega
        out = ndtr(z) - 2.0 * owens_t(z, self.shape)
        return np.clip(out, 0.0, 1.0)

    def sample(self, size, rng):
        u0 = np.abs(rng.standard_normal(size))
        u1 = rng.standard_normal(size)
        d = self.delta
        return self.xi + self.omega * (d * u0 + np.sqrt(1.0 - d * d) * u1)

    @property
    def mean(self):
        return self.mu

    @property
    def sd(self):
        return np.sqrt(self.var)


class Uniform1D(Family):
    """Uniform on [a, b]; mainly a test family with closed-form order statistics."""

    name = "Uniform1D"
    param_names = ("a", "b")

    def admissible(self):
        return np.isfinite(self.a) & np.isfinite(self.b) & (self.b > self.a)

    @classmethod
    def to_unconstrained(cls, theta):
        theta = _arr(theta)
        return np.stack([theta[..., 0], np.log(theta[..., 1] - theta[..., 0])], axis=-1)

    @classmethod
    def from_unconstrained(cls, z):
        z = _arr(z)
        return cls(z[..., 0], z[..., 0] + np.exp(z[..., 1]), check=False)

    def in_support(self, x):
        x = _arr(x)
        return (x >= self.a) & (x <= self.b)

    def logpdf(self, x):
        x = _arr(x)
        inside = (x >= self.a) & (x <= self.b)
        return np.where(inside, -np.log(self.b - self.a), -np.inf)

    def cdf(self, x):
        return np.clip((_arr(x) - self.a) / (self.b - self.a), 0.0, 1.0)

    def sample(self, size, rng):
        return rng.uniform(self.a, self.b, size=size)


class BivariateNormal(Family):
    """Bivariate normal with parameters (mu1, mu2, sigma1, sigma2, rho).

    Points are arrays whose last axis has length 2.
    """

    name = "BivariateNormal"
    dim = 2
    param_names = ("mu1", "mu2", "sigma1", "sigma2", "rho")

    def admissible(self):
        return (
            np.isfinite(self.mu1)
            & np.isfinite(self.mu2)
            & (self.sigma1 > 0)
            & (self.sigma2 > 0)
            & (np.abs(self.rho) < 1)
        )

    @classmethod
    def to_unconstrained(cls, theta):
        theta = _arr(theta)
        return np.stack(
            [theta[..., 0], theta[..., 1], np.log(theta[..., 2]), np.log(theta[..., 3]), np.arctanh(theta[..., 4])],
            axis=-1,
        )

    @classmethod
    def from_unconstrained(cls, z):
        z = _arr(z)
        return cls(z[..., 0], z[..., 1], np.exp(z[..., 2]), np.exp(z[..., 3]), np.tanh(z[..., 4]), check=False)

    def marginal(self, i: int) -> Normal1D:
        """Univariate marginal of component ``i`` (0 or 1)."""
        if i == 0:
            return Normal1D(self.mu1, self.sigma1, check=False)
        return Normal1D(self.mu2, self.sigma2, check=False)

    def swapped(self) -> "BivariateNormal":
        """The same model with the two coordinates exchanged."""
        return BivariateNormal(self.mu2, self.mu1, self.sigma2, self.sigma1, self.rho, check=False)

    def logpdf(self, x):
        x = _arr(x)
        z1 = (x[..., 0] - self.mu1) / self.sigma1
        z2 = (x[..., 1] - self.mu2) / self.sigma2
        om = 1.0 - self.rho**2
        q = (z1 * z1 - 2.0 * self.rho * z1 * z2 + z2 * z2) / om
        return -0.5 * q - _LOG_2PI - np.log(self.sigma1) - np.log(self.sigma2) - 0.5 * np.log(om)

    def cdf(self, x):
        x = _arr(x)
        z1 = (x[..., 0] - self.mu1) / self.sigma1
        z2 = (x[..., 1] - self.mu2) / self.sigma2
        return bvn_cdf(z1, z2, self.rho)

    def cdf2(self, x1, x2):
        """Joint CDF with the two coordinates passed separately."""
        return bvn_cdf((_arr(x1) - self.mu1) / self.sigma1, (_arr(x2) - self.mu2) / self.sigma2, self.rho)

    def cond_params(self, target: int, value):
        """Mean and sd of component ``target`` given the other equals ``value``."""
        value = _arr(value)
        if target == 1:
            m = self.mu2 + self.rho * self.sigma2 / self.sigma1 * (value - self.mu1)
            s = self.sigma2 * np.sqrt(1.0 - self.rho**2)
        else:
            m = self.mu1 + self.rho * self.sigma1 / self.sigma2 * (value - self.mu2)
            s = self.sigma1 * np.sqrt(1.0 - self.rho**2)
        return m, s

    def cond_cdf(self, target: int, value, x):
        m, s = self.cond_params(target, value)
        return ndtr((_arr(x) - m) / s)

    def cond_interval_prob(self, target: int, value, lo, hi):
        """P(lo < X_target < hi | X_other = value)."""
        m, s = self.cond_params(target, value)
        return np.maximum(ndtr((_arr(hi) - m) / s) - ndtr((_arr(lo) - m) / s), 0.0)

    def rect_prob(self, lower, upper):
        lower = _arr(lower)
        upper = _arr(upper)
        return self.rect_prob2(lower[..., 0], lower[..., 1], upper[..., 0], upper[..., 1])

    def rect_prob2(self, a1, a2, b1, b2):
        """P(a1 < X1 <= b1, a2 < X2 <= b2) by inclusion-exclusion."""
        p = self.cdf2(b1, b2) - self.cdf2(a1, b2) - self.cdf2(b1, a2) + self.cdf2(a1, a2)
        return np.maximum(p, 0.0)

    def sample(self, size, rng):
        size = (size,) if np.isscalar(size) else tuple(size)
        z1 = rng.standard_normal(size)
        z2 = rng.standard_normal(size)
        r = self.rho
        x1 = self.mu1 + self.sigma1 * z1
        x2 = self.mu2 + self.sigma2 * (r * z1 + np.sqrt(1.0 - r * r) * z2)
        return np.stack([x1, x2], axis=-1)


FAMILIES: dict[str, type[Family]] = {
    cls.name: cls for cls in (Normal1D, LogNormal1D, SkewNormal1D, Uniform1D, BivariateNormal)
}


def get_family(name: str) -> type[Family]:
    try:
        return FAMILIES[name]
    except KeyError:
        raise InvalidParameterError(
            f"unknown family {name!r}; choose from {sorted(FAMILIES)}"
        ) from None


# -- checked public operations ---------------------------------------------


def _point(family: Family, x) -> np.ndarray:
    x = _arr(x)
    if family.dim == 2 and x.shape[-1:] != (2,):
        raise ValueError("bivariate families need points with a trailing axis of length 2")
    return x


def pdf(family: Family, x):
    """Density g_X(x; theta).  Raises DomainError outside the support."""
    family.validate()
    x = _point(family, x)
    if family.dim == 1 and not np.all(family.in_support(x)):
        raise DomainError(f"{family.name}: point outside support")
    return family.pdf(x)


def cdf(family: Family, x):
    """Distribution function G_X(x; theta); joint CDF for bivariate families."""
    family.validate()
    return family.cdf(_point(family, x))


def conditional_cdf(family: BivariateNormal, target_index: int, value_at_other, x):
    """CDF of component ``target_index`` (1 or 2) given the other component."""
    if not isinstance(family, BivariateNormal):
        raise InvalidParameterError("conditional_cdf needs a bivariate family")
    if target_index not in (1, 2):
        raise ValueError("target_index must be 1 or 2")
    family.validate()
    return family.cond_cdf(target_index - 1, value_at_other, x)


def rect_prob(family: Family, lower, upper):
    """Probability mass of the axis-aligned box [lower, upper]."""
    family.validate()
    lower = _point(family, lower)
    upper = _point(family, upper)
    if np.any(lower > upper):
        raise OrderingError("lower bound exceeds upper bound")
    return family.rect_prob(lower, upper)


def sample(family: Family, n: int, rng: np.random.Generator) -> DataMatrix:
    """n i.i.d. draws as a DataMatrix; deterministic given ``rng``'s state."""
    if int(n) < 1:
        raise ValueError("n must be >= 1")
    family.validate()
    if np.size(family.to_vector()) != len(family.param_names):
        raise InvalidParameterError("sample needs a single parameter vector")
    return DataMatrix(family.sample(int(n), rng))
