"""Elliptical data generators and the simulation covariance models."""

from dataclasses import dataclass
import math

import numpy as np

from ..errors import ContractViolation, ModelError
from ..linalg import sym_sqrt

FAMILIES = ("normal", "t3", "mixture")

# Mixture component scale and weight of the standard component.
MIX_KAPPA = 10.0
MIX_GAMMA = 0.8


def default_scale_norm(family):
    if family == "normal":
        return 1.0
    if family == "t3":
        return math.sqrt(3.0)
    if family == "mixture":
        return math.sqrt(MIX_GAMMA + (1 - MIX_GAMMA) * MIX_KAPPA**2)
    raise ContractViolation(f"unknown family {family!r}; expected one of {FAMILIES}")


@dataclass(frozen=True)
class DistSpec:
    """Elliptical family plus the divisor applied to its stochastic part.

    ``scale_norm=None`` picks the unit-variance divisor: 1 for the normal,
    sqrt(3) for t3 and sqrt(20.8) for the 0.8/0.2 normal mixture with
    component scale 10. Pass ``math.sqrt(22.8)`` to mimic the published
    mixture setting.
    """

    family: str = "normal"
    scale_norm: float = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ContractViolation(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.scale_norm is None:
            object.__setattr__(self, "scale_norm", default_scale_norm(self.family))
        if not self.scale_norm > 0:
            raise ContractViolation("scale_norm must be positive")


def _ar(p, rho=0.6):
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def _model_iv_precision(p):
    if p < 6:
        raise ModelError("model IV needs p >= 6")
    band_vals = {0: 2.0, 1: 0.8, 2: 0.4, 3: 0.4, 4: 0.2}
    idx = np.arange(p)
    off = np.abs(idx[:, None] - idx[None, :])
    omega = np.zeros((p, p))
    for k, val in band_vals.items():
        omega[off == k] = val
    return omega


def _inverse(m):
    inv = np.linalg.inv(m)
    return 0.5 * (inv + inv.T)


def make_cov(model, p):
    """Scatter and precision matrices of location-test model I, II, III or IV."""
    model = str(model).upper()
    if p < 2:
        raise ContractViolation("p must be at least 2")
    if model == "I":
        sigma = _ar(p)
        omega = _inverse(sigma)
    elif model == "II":
        sigma = 0.5 * np.eye(p) + 0.5 * np.ones((p, p))
        omega = _inverse(sigma)
    elif model == "III":
        omega = _ar(p)
        sigma = _inverse(omega)
    elif model == "IV":
        omega = _model_iv_precision(p)
        if np.linalg.eigvalsh(omega)[0] <= 0:
            raise ModelError(f"model IV precision is not positive definite at p={p}")
        sigma = _inverse(omega)
    else:
        raise ContractViolation(f"unknown covariance model {model!r}")
    return sigma, omega


def make_qda_cov(model, p):
    """``((Sigma1, Omega1), (Sigma2, Omega2))`` for QDA model I, II or III."""
    model = str(model).upper().lstrip("Q")
    ar = _ar(p)
    if model == "I":
        s1, s2 = ar, np.eye(p)
    elif model == "II":
        s1, s2 = ar, 0.5 * np.eye(p) + 0.5 * np.ones((p, p))
    elif model == "III":
        s1, s2 = _inverse(ar), ar
    else:
        raise ContractViolation(f"unknown QDA model {model!r}")
    return (s1, _inverse(s1)), (s2, _inverse(s2))


def gen_elliptical(spec, mu, sigma, n, rng, sigma_sqrt=None):
    """Draw ``n`` rows from the elliptical law ``spec`` centred at ``mu``.

    Draw order per call: the n x p standard normal block first, then the
    family-specific row variables (chi-square(3) for t3, component uniforms
    for the mixture). The location is added after the stochastic part is
    divided by ``spec.scale_norm``.
    """
    if n < 1:
        raise ContractViolation("n must be at least 1")
    sigma = np.asarray(sigma, dtype=float)
    p = sigma.shape[0]
    mu = np.zeros(p) if mu is None else np.asarray(mu, dtype=float)
    root = sym_sqrt(sigma) if sigma_sqrt is None else sigma_sqrt
    Z = rng.standard_normal((n, p)) @ root
    if spec.family == "t3":
        w = rng.chisquare(3.0, size=n)
        Z = Z / np.sqrt(w / 3.0)[:, None]
    elif spec.family == "mixture":
        wide = rng.random(n) >= MIX_GAMMA
        Z[wide] *= MIX_KAPPA
    return mu + Z / spec.scale_norm


def alt_mean(kappa, s, n, p, sigma_sqrt):
    """``kappa * sqrt(log p / (n s)) * Sigma^{1/2} (1_s, 0_{p-s})``."""
    if not 1 <= s <= p:
        raise ContractViolation(f"sparsity s must lie in [1, {p}], got {s}")
    if kappa < 0:
        raise ContractViolation("kappa must be non-negative")
    e = np.zeros(p)
    e[:s] = 1.0
    return kappa * math.sqrt(math.log(p) / (n * s)) * (np.asarray(sigma_sqrt) @ e)
