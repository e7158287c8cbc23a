"""Periodic Green operator of an isotropic reference medium, in Fourier space.

The operator maps a stress (or polarization) spectrum to the compatible
strain spectrum it induces in the homogeneous reference medium. Under
generalized plane strain the frequency vector has no out-of-plane component,
so all rows and columns touching the 33 component vanish.

Two independent constructions are implemented. The production path is the
closed-form expression in Lame coefficients, vectorized over the whole
frequency grid in :func:`green_increment`. The cross-check path assembles
the operator from the acoustic tensor and its inverse
(:func:`gamma_from_acoustic`); tests hold the two to 1e-12 of each other.

At the highest frequency of an even axis the single stored coefficient
stands for both signs of that frequency, which the closed form cannot
represent faithfully (it is not even in each frequency component
separately). On those frequencies the operator is replaced by the reference
compliance, which drives the corresponding stress coefficients to zero at
convergence and suppresses grid oscillations at low resolution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .spectral import FrequencyGrid, HighestFrequencyMask
from .tensor_field import (
    C11,
    C12,
    C22,
    C33,
    FOURIER,
    SymTensorField,
    as_matrix,
    from_matrix,
)


@dataclass(frozen=True)
class IsotropicModuli:
    """Isotropic stiffness given by the Lame coefficients (lam, mu)."""

    lam: float
    mu: float

    def __post_init__(self):
        if not (np.isfinite(self.lam) and np.isfinite(self.mu)):
            raise ValueError("moduli must be finite")
        if self.mu <= 0.0:
            raise ValueError("shear modulus must be positive")
        if 3.0 * self.lam + 2.0 * self.mu <= 0.0:
            raise ValueError("stiffness must be positive definite (3*lam + 2*mu > 0)")

    @classmethod
    def from_young_poisson(cls, young: float, poisson: float) -> "IsotropicModuli":
        if young <= 0.0 or not -1.0 < poisson < 0.5:
            raise ValueError("require young > 0 and -1 < poisson < 0.5")
        lam = young * poisson / ((1.0 + poisson) * (1.0 - 2.0 * poisson))
        mu = young / (2.0 * (1.0 + poisson))
        return cls(lam, mu)

    @property
    def young(self) -> float:
        return self.mu * (3.0 * self.lam + 2.0 * self.mu) / (self.lam + self.mu)

    @property
    def poisson(self) -> float:
        return self.lam / (2.0 * (self.lam + self.mu))

    @property
    def bulk(self) -> float:
        return self.lam + 2.0 * self.mu / 3.0


def apply_isotropic_stiffness(lam, mu, eps):
    """sigma = lam tr(eps) Id + 2 mu eps, with scalar or per-pixel moduli."""
    tr = eps[C11] + eps[C22] + eps[C33]
    out = 2.0 * mu * eps
    out[:3] += lam * tr
    return out


def apply_isotropic_compliance(lam, mu, sig):
    """Inverse of :func:`apply_isotropic_stiffness`."""
    tr = sig[C11] + sig[C22] + sig[C33]
    out = sig / (2.0 * mu)
    out[:3] -= lam / (3.0 * lam + 2.0 * mu) * tr / (2.0 * mu)
    return out


def stiffness_apply(m: IsotropicModuli, e) -> np.ndarray:
    return apply_isotropic_stiffness(m.lam, m.mu, np.asarray(e))


def compliance_apply(m: IsotropicModuli, s) -> np.ndarray:
    return apply_isotropic_compliance(m.lam, m.mu, np.asarray(s))


def acoustic_tensor(m: IsotropicModuli, xi) -> np.ndarray:
    """In-plane acoustic tensor K(xi) = (lam+mu) xi x xi + mu |xi|^2 Id."""
    xi = np.asarray(xi, dtype=float)
    xisq = xi @ xi
    if xisq == 0.0:
        raise ValueError("acoustic tensor undefined at zero frequency")
    return (m.lam + m.mu) * np.outer(xi, xi) + m.mu * xisq * np.eye(2)


def gamma_hat(m: IsotropicModuli, xi) -> np.ndarray:
    """Green operator at one in-plane frequency, as a (3,3,3,3) array.

    Closed form in the Lame coefficients; this is the production expression
    that :func:`green_increment` vectorizes.
    """
    xi = np.asarray(xi, dtype=float)
    if xi @ xi == 0.0:
        raise ValueError("use zero-frequency rule")
    x = np.array([xi[0], xi[1], 0.0])
    xisq = x @ x
    delta = np.eye(3)
    g = np.einsum("ki,h,j->ijkh", delta, x, x)
    g = g + np.einsum("hi,k,j->ijkh", delta, x, x)
    g = g + np.einsum("kj,h,i->ijkh", delta, x, x)
    g = g + np.einsum("hj,k,i->ijkh", delta, x, x)
    g /= 4.0 * m.mu * xisq
    beta = (m.lam + m.mu) / (m.mu * (m.lam + 2.0 * m.mu))
    g -= beta * np.einsum("i,j,k,h->ijkh", x, x, x, x) / xisq**2
    return g


def gamma_from_acoustic(m: IsotropicModuli, xi) -> np.ndarray:
    """Green operator assembled from the inverse acoustic tensor.

    Independent of :func:`gamma_hat`; serves as its cross-check oracle.
    """
    xi = np.asarray(xi, dtype=float)
    if xi @ xi == 0.0:
        raise ValueError("use zero-frequency rule")
    x = np.array([xi[0], xi[1], 0.0])
    xisq = x @ x
    k3 = (m.lam + m.mu) * np.outer(x, x) + m.mu * xisq * np.eye(3)
    n3 = np.linalg.inv(k3)
    g = np.einsum("hi,j,k->khij", n3, x, x)
    g = g + np.einsum("ki,j,h->khij", n3, x, x)
    g = g + np.einsum("hj,i,k->khij", n3, x, x)
    g = g + np.einsum("kj,i,h->khij", n3, x, x)
    return g / 4.0


def apply_rank4(g: np.ndarray, a) -> np.ndarray:
    """Contract a (3,3,3,3) operator with a 4-component symmetric tensor."""
    return from_matrix(np.einsum("ijkh,kh->ij", g, as_matrix(a)))


def green_increment(sig_hat, xi1, xi2, mask, m: IsotropicModuli):
    """Strain-update spectrum -Gamma:sigma_hat over a whole frequency grid.

    ``sig_hat`` is (4, k1, k2) complex; ``xi1``/``xi2`` are the per-axis
    frequencies of that storage (full or half spectrum) and ``mask`` flags
    the highest frequencies, where the reference compliance replaces the
    operator. The zero-frequency entry is returned as zero; the caller pins
    it to the prescribed average.
    """
    x1 = np.asarray(xi1, dtype=float).reshape(-1, 1)
    x2 = np.asarray(xi2, dtype=float).reshape(1, -1)
    xisq = x1**2 + x2**2
    xisq_safe = np.where(xisq == 0.0, 1.0, xisq)
    mu, lam = m.mu, m.lam
    beta = (lam + mu) / (mu * (lam + 2.0 * mu))

    # t = sigma . xi restricted to the in-plane rows; the 33 row never couples.
    t1 = x1 * sig_hat[C11] + x2 * sig_hat[C12]
    t2 = x1 * sig_hat[C12] + x2 * sig_hat[C22]
    xt = (x1 * t1 + x2 * t2) / xisq_safe**2

    out = np.empty_like(sig_hat)
    out[C11] = beta * x1 * x1 * xt - (x1 * t1) / (mu * xisq_safe)
    out[C22] = beta * x2 * x2 * xt - (x2 * t2) / (mu * xisq_safe)
    out[C33] = 0.0
    out[C12] = beta * x1 * x2 * xt - (x2 * t1 + x1 * t2) / (2.0 * mu * xisq_safe)

    # Highest frequencies: -(reference compliance):sigma_hat.
    tr = sig_hat[C11] + sig_hat[C22] + sig_hat[C33]
    hydro = lam / (3.0 * lam + 2.0 * mu) * tr
    for c in range(4):
        repl = sig_hat[c]
        if c != C12:
            repl = repl - hydro
        np.copyto(out[c], -repl / (2.0 * mu), where=mask)

    out[:, xisq == 0.0] = 0.0
    return out


@dataclass(frozen=True)
class GreenApplyPlan:
    """Reference medium plus the frequency grid and mask it acts on."""

    reference: IsotropicModuli
    freq: FrequencyGrid
    mask: HighestFrequencyMask

    def __post_init__(self):
        if self.freq.grid != self.mask.grid:
            raise ValueError("frequency grid and mask describe different grids")


def apply_green_field(plan: GreenApplyPlan, sigma_hat: SymTensorField, e_macro) -> SymTensorField:
    """Per-frequency strain update -Gamma:sigma_hat with the average pinned.

    Unmasked nonzero frequencies get -Gamma applied, masked ones the
    reference-compliance replacement, and the zero frequency is set to the
    prescribed macroscopic strain ``e_macro``.
    """
    if sigma_hat.domain != FOURIER:
        raise ValueError("apply_green_field expects a fourier-domain field")
    if sigma_hat.grid != plan.freq.grid:
        raise ValueError("field grid does not match plan grid")
    out = green_increment(sigma_hat.data, plan.freq.xi1, plan.freq.xi2,
                          plan.mask.flags, plan.reference)
    out[:, 0, 0] = np.asarray(e_macro, dtype=float)
    return SymTensorField(sigma_hat.grid, out, domain=FOURIER)
