"""Data models: heavy-tailed innovations, AR(1)/FIR filters, fractional
Gaussian noise, Hermite subordination and the sqrt(eps) * G product model.

Every sampler takes a ``numpy.random.Generator`` and draws from it in a
fixed, documented order so that a (spec, seed) pair always reproduces the
same series bit for bit.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np
from scipy.signal import lfilter

from .errors import DomainError, NonstationaryError

FAMILIES = ("stable", "cauchy", "gaussian", "pareto", "burr", "burr-logmod")
DEPENDENCE = ("iid", "ar1", "fir", "gaussian-lm", "subordinated", "product-lm")


def sample_stable(alpha: float, skew: float, rng: np.random.Generator, size=None):
    """Standard stable draws (scale 1, location 0) by Chambers-Mallows-Stuck.

    Uses the S1 parameterization, in which a totally skewed law with
    alpha < 1 lives on the positive half-line; for skew = 0 it coincides
    with every other common parameterization.  Consumes ``size`` uniforms
    then ``size`` standard exponentials.
    """
    if not 0 < alpha <= 2:
        raise DomainError(f"stable index must be in (0, 2], got {alpha}")
    if not -1 <= skew <= 1:
        raise DomainError(f"stable skewness must be in [-1, 1], got {skew}")
    v = np.pi * (rng.random(size) - 0.5)
    w = rng.standard_exponential(size)
    if alpha == 1:
        half_pi = np.pi / 2
        bv = half_pi + skew * v
        x = (bv * np.tan(v) - skew * np.log(half_pi * w * np.cos(v) / bv)) / half_pi
    else:
        zeta = skew * np.tan(np.pi * alpha / 2)
        b = np.arctan(zeta) / alpha
        s = (1 + zeta * zeta) ** (1 / (2 * alpha))
        av = alpha * (v + b)
        x = s * np.sin(av) / np.cos(v) ** (1 / alpha) * (np.cos(v - av) / w) ** ((1 - alpha) / alpha)
    return x if size is not None else float(x)


@dataclass(frozen=True)
class InnovationSpec:
    """i.i.d. innovation law.

    pareto: survival (1 + z/scale)^(-a).  burr: survival
    (1 + (z/scale)^c)^(-k), tail index c*k.  burr-logmod maps a burr draw z
    to z * max(1, log10 z).
    """

    family: str
    alpha: float = 2.0
    skew: float = 0.0
    a: float = 2.0
    c: float = 2.0
    k: float = 0.5
    scale: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown innovation family {self.family!r}")
        if self.family == "stable" and not (0 < self.alpha <= 2 and -1 <= self.skew <= 1):
            raise DomainError("stable needs alpha in (0, 2] and skew in [-1, 1]")
        if self.family == "pareto" and not (self.a > 0 and self.scale > 0):
            raise DomainError("pareto needs a > 0 and scale > 0")
        if self.family.startswith("burr") and not (self.c > 0 and self.k > 0 and self.scale > 0):
            raise DomainError("burr needs c > 0, k > 0 and scale > 0")

    @property
    def tail_index(self) -> float:
        """Tail index capped at 2 (finite variance counts as 2)."""
        if self.family == "stable":
            return self.alpha
        if self.family == "cauchy":
            return 1.0
        if self.family == "gaussian":
            return 2.0
        if self.family == "pareto":
            return min(self.a, 2.0)
        return min(self.c * self.k, 2.0)

    @property
    def light_tailed(self) -> bool:
        return self.family == "gaussian" or (self.family == "stable" and self.alpha == 2)

    def describe(self) -> dict:
        d = {"family": self.family}
        if self.family == "stable":
            d.update(alpha=self.alpha, skew=self.skew)
        elif self.family == "pareto":
            d.update(a=self.a, scale=self.scale, survival="(1 + z/scale)^-a")
        elif self.family.startswith("burr"):
            d.update(c=self.c, scale=self.scale, k=self.k, survival="(1 + (z/scale)^c)^-k")
        return d


def sample_innovation(spec: InnovationSpec, rng: np.random.Generator, size=None):
    fam = spec.family
    if fam == "stable":
        return sample_stable(spec.alpha, spec.skew, rng, size)
    if fam == "cauchy":
        return sample_stable(1.0, 0.0, rng, size)
    if fam == "gaussian":
        return rng.standard_normal(size)
    u = 1.0 - rng.random(size)  # in (0, 1]
    if fam == "pareto":
        return spec.scale * np.expm1(-np.log(u) / spec.a)
    z = spec.scale * np.expm1(-np.log(u) / spec.k) ** (1.0 / spec.c)
    if fam == "burr-logmod":
        with np.errstate(divide="ignore"):
            z = z * np.maximum(1.0, np.log10(z))
    return z


def ar1_filter(innovations, rho: float, burn_in: int = 0) -> np.ndarray:
    """X_t = rho X_{t-1} + Z_t from X_0 = 0; the first ``burn_in`` values are dropped."""
    if not abs(rho) < 1:
        raise NonstationaryError(f"AR(1) needs |rho| < 1, got {rho}")
    z = np.asarray(innovations, dtype=float)
    if burn_in < 0 or burn_in >= z.size:
        raise DomainError(f"burn_in={burn_in} leaves no output from {z.size} innovations")
    return lfilter([1.0], [1.0, -rho], z)[burn_in:]


def fir_filter(innovations, coefficients) -> np.ndarray:
    """X_t = sum_j psi_j Z_{t-j}; output length is len(innovations) - len(psi) + 1."""
    psi = np.asarray(coefficients, dtype=float)
    if psi.size == 0 or not np.all(np.isfinite(psi)):
        raise DomainError("FIR coefficients must be a nonempty finite list")
    return np.convolve(np.asarray(innovations, dtype=float), psi, mode="valid")


def fgn_autocovariance(hurst: float, lags) -> np.ndarray:
    k = np.abs(np.asarray(lags, dtype=float))
    h2 = 2 * hurst
    return 0.5 * ((k + 1) ** h2 - 2 * k**h2 + np.abs(k - 1) ** h2)


@lru_cache(maxsize=32)
def _fgn_spectrum(hurst: float, n: int) -> np.ndarray:
    r = fgn_autocovariance(hurst, np.arange(n + 1))
    row = np.concatenate([r, r[-2:0:-1]])
    eig = np.fft.fft(row).real
    if eig.min() < -1e-10 * eig.max():
        raise DomainError(f"circulant embedding not nonnegative for H={hurst}, n={n}")
    eig = np.clip(eig, 0.0, None)
    eig.flags.writeable = False
    return eig


def fgn_embedding_covariance(hurst: float, n: int) -> np.ndarray:
    """Autocovariance implied by the embedding spectrum, lags 0..n-1."""
    eig = _fgn_spectrum(float(hurst), int(n))
    return np.fft.ifft(eig).real[:n]


def sample_fgn(hurst: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-variance fractional Gaussian noise by circulant embedding (Davies-Harte).

    Consumes 2 * (2n) standard normals (real parts first).
    """
    if not 0 < hurst < 1:
        raise DomainError(f"Hurst index must be in (0, 1), got {hurst}")
    if n < 1:
        raise DomainError("n must be positive")
    eig = _fgn_spectrum(float(hurst), int(n))
    m = eig.size
    noise = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    return np.fft.fft(np.sqrt(eig / m) * noise).real[:n]


def subordinate(g_series, h: str) -> np.ndarray:
    g = np.asarray(g_series, dtype=float)
    if h == "identity":
        return g.copy()
    if h == "hermite2":
        return g * g - 1.0
    raise DomainError(f"unknown subordinating function {h!r}")


HERMITE_RANK = {"identity": 1, "hermite2": 2}


def sample_product_lm(alpha: float, zeta: float, n: int, rng: np.random.Generator, eps_family: str = "stable"):
    """X_t = sqrt(eps_t) G_t with eps in D(alpha/2) and G Gaussian LM(zeta).

    eps is totally skewed stable(alpha/2) (or Pareto with index alpha/2);
    G is fGn with H = (1 + zeta)/2, or i.i.d. N(0, 1) when zeta = 0.  The eps
    draws are taken first.  Returns (x, eps, g).
    """
    if not 0 < alpha < 2:
        raise DomainError(f"product model needs alpha in (0, 2), got {alpha}")
    if not 0 <= zeta < 1:
        raise DomainError(f"LM exponent zeta must be in [0, 1), got {zeta}")
    if eps_family == "stable":
        eps = sample_stable(alpha / 2, 1.0, rng, n)
    elif eps_family == "pareto":
        eps = sample_innovation(InnovationSpec("pareto", a=alpha / 2), rng, n)
    else:
        raise DomainError(f"unknown eps family {eps_family!r}")
    g = sample_fgn((1 + zeta) / 2, n, rng) if zeta > 0 else rng.standard_normal(n)
    return np.sqrt(eps) * g, eps, g


@dataclass(frozen=True)
class ModelSpec:
    """A full data model.  Only the fields relevant to ``dependence`` are used."""

    n: int
    dependence: str = "iid"
    innovation: InnovationSpec = field(default_factory=lambda: InnovationSpec("gaussian"))
    rho: float = 0.0
    coefficients: tuple[float, ...] = (1.0,)
    hurst: float = 0.5
    h: str = "identity"
    alpha: float = 1.5
    zeta: float = 0.0
    eps_family: str = "stable"
    burn_in: int = 1000

    def __post_init__(self):
        if self.dependence not in DEPENDENCE:
            raise DomainError(f"unknown dependence {self.dependence!r}")
        if self.n < 1:
            raise DomainError("n must be positive")
        if self.dependence == "ar1" and not abs(self.rho) < 1:
            raise NonstationaryError(f"AR(1) needs |rho| < 1, got {self.rho}")
        if self.dependence in ("gaussian-lm", "subordinated") and not 0 < self.hurst < 1:
            raise DomainError("Hurst index must be in (0, 1)")

    def describe(self) -> dict:
        d = asdict(self)
        d["innovation"] = self.innovation.describe()
        d["coefficients"] = list(self.coefficients)
        return d


def generate(model: ModelSpec, rng: np.random.Generator) -> np.ndarray:
    """Draw one series of length ``model.n``.

    Stream use: iid draws n innovations; ar1 draws burn_in + n innovations;
    fir draws n + len(coefficients) - 1; gaussian-lm/subordinated draw one
    fGn (4n normals); product-lm as in ``sample_product_lm``.
    """
    n = model.n
    dep = model.dependence
    if dep == "iid":
        return np.asarray(sample_innovation(model.innovation, rng, n), dtype=float)
    if dep == "ar1":
        z = sample_innovation(model.innovation, rng, n + model.burn_in)
        return ar1_filter(z, model.rho, model.burn_in)
    if dep == "fir":
        z = sample_innovation(model.innovation, rng, n + len(model.coefficients) - 1)
        return fir_filter(z, model.coefficients)
    if dep == "gaussian-lm":
        return sample_fgn(model.hurst, n, rng)
    if dep == "subordinated":
        return subordinate(sample_fgn(model.hurst, n, rng), model.h)
    return sample_product_lm(model.alpha, model.zeta, n, rng, model.eps_family)[0]
