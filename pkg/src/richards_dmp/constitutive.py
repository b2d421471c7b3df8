"""Soil constitutive maps written in the bounded auxiliary variable ``u``.

Every map is extended to the whole real line:

* ``theta(u) = u`` for ``u < 0`` and ``theta(u) = 2 - theta(2 u* - u)`` for
  ``u > u*`` (point symmetry about the saturation point ``(u*, 1)``);
* ``K(u) = K(u*)`` for ``u > u*`` and ``K(u) = K(-u)`` for ``u < 0``; the
  advective conductivity ``Kbar`` is extended the same way.

Two saturation cores are available. ``identity`` (``u* = 1``) is the
default. ``vgm`` is the van Genuchten--Mualem core for which the
conductivity ``K(u)`` below makes ``K(u) grad u`` equal the capillary
diffusive flux; it satisfies ``du/dS = (1 - S^(1/m))^(-m)`` and
``u* = m pi / sin(m pi)`` (``arcsin`` for ``n = 2``).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import special

DEGENERATE_EPS = 1e-12
TAYLOR_SWITCH = 1e-8


class SoilKind(str, Enum):
    VAN_GENUCHTEN_MUALEM = "vgm"
    GARDNER = "gardner"
    BROOKS_COREY = "brooks_corey"
    HAVERKAMP = "haverkamp"


class InvalidSoilParameters(ValueError):
    pass


class IllPosedRatio(ArithmeticError):
    """Raised when beta is finite and nonzero but K has vanished."""


@dataclass(frozen=True)
class SoilModel:
    """Constitutive parameter bundle.

    ``B`` and ``lam`` are Brooks--Corey parameters (``K_r = S^B``, pore-size
    index ``lam``); ``A``, ``beta_hk`` and ``gamma`` are Haverkamp
    parameters. ``alpha`` is the inverse capillary length for every model.
    """

    kind: SoilKind = SoilKind.VAN_GENUCHTEN_MUALEM
    Ks: float = 1.0
    alpha: float = 1.0
    n: float = 2.0
    theta_s: float = 0.45
    theta_r: float = 0.05
    B: float | None = None
    lam: float = 2.0
    A: float | None = None
    beta_hk: float | None = None
    gamma: float | None = None
    core: str = "identity"

    def __post_init__(self):
        object.__setattr__(self, "kind", SoilKind(self.kind))
        if not self.Ks > 0:
            raise InvalidSoilParameters("Ks must be positive")
        if not self.alpha > 0:
            raise InvalidSoilParameters("alpha must be positive")
        if not self.theta_s > self.theta_r:
            raise InvalidSoilParameters("theta_s must exceed theta_r")
        if self.kind is SoilKind.VAN_GENUCHTEN_MUALEM and not self.n > 1:
            raise InvalidSoilParameters("van Genuchten n must exceed 1")
        if self.kind is SoilKind.BROOKS_COREY:
            if self.B is None or not self.B > 1:
                raise InvalidSoilParameters("Brooks-Corey requires B > 1 for a finite beta limit")
            if not self.lam > 0:
                raise InvalidSoilParameters("Brooks-Corey lam must be positive")
        if self.kind is SoilKind.HAVERKAMP:
            if self.A is None or self.beta_hk is None or self.gamma is None:
                raise InvalidSoilParameters("Haverkamp requires A, beta_hk and gamma")
            if not (self.A > 0 and self.beta_hk > 0):
                raise InvalidSoilParameters("Haverkamp A and beta_hk must be positive")
            if not self.gamma > self.beta_hk:
                raise InvalidSoilParameters("Haverkamp requires gamma > beta_hk for a finite beta limit")
        if self.core not in ("identity", "vgm"):
            raise InvalidSoilParameters(f"unknown saturation core {self.core!r}")
        if self.core == "vgm" and self.kind is not SoilKind.VAN_GENUCHTEN_MUALEM:
            raise InvalidSoilParameters("the vgm core requires the van Genuchten-Mualem model")

    @property
    def m(self) -> float:
        return 1.0 - 1.0 / self.n

    @property
    def h_cap(self) -> float:
        return 1.0 / self.alpha

    @property
    def porosity(self) -> float:
        return self.theta_s - self.theta_r

    @property
    def u_star(self) -> float:
        if self.core == "vgm":
            m = self.m
            return m * math.pi / math.sin(m * math.pi)
        return 1.0


# -- saturation cores (valid on [0, u*]) ------------------------------------


def _core_theta(model: SoilModel, u: np.ndarray) -> np.ndarray:
    if model.core == "identity":
        return u.copy()
    m = model.m
    beta_mm = special.beta(m, 1.0 - m)
    y = np.clip(u / (m * beta_mm), 0.0, 1.0)
    return special.betaincinv(m, 1.0 - m, y) ** m


def _core_dtheta(model: SoilModel, u: np.ndarray) -> np.ndarray:
    if model.core == "identity":
        return np.ones_like(u)
    s = _core_theta(model, u)
    return (1.0 - s ** (1.0 / model.m)) ** model.m


def _core_inverse(model: SoilModel, s: np.ndarray) -> np.ndarray:
    if model.core == "identity":
        return s.copy()
    m = model.m
    x = np.clip(s, 0.0, 1.0) ** (1.0 / m)
    return m * special.beta(m, 1.0 - m) * special.betainc(m, 1.0 - m, x)


def _reflect(model: SoilModel, u: np.ndarray) -> np.ndarray:
    """Map any real u into [0, u*] the way K and Kbar are extended."""
    return np.minimum(np.abs(u), model.u_star)


# -- public maps ----------------------------------------------------------


def effective_saturation(model: SoilModel, u) -> np.ndarray:
    """theta(u) on the whole real line (strictly increasing)."""
    u = np.asarray(u, dtype=float)
    us = model.u_star
    w = np.where(u > us, 2.0 * us - u, u)  # reflected argument
    core = _core_theta(model, np.clip(w, 0.0, us))
    base = np.where(w < 0.0, w, core)
    return np.where(u > us, 2.0 - base, base)


def theta_prime(model: SoilModel, u) -> np.ndarray:
    """d theta / du; right derivative at kinks."""
    u = np.asarray(u, dtype=float)
    us = model.u_star
    w = np.where(u > us, 2.0 * us - u, u)
    core = _core_dtheta(model, np.clip(w, 0.0, us))
    return np.where(w < 0.0, 1.0, core)


def inverse_saturation(model: SoilModel, s) -> np.ndarray:
    """u such that theta(u) = s."""
    s = np.asarray(s, dtype=float)
    w = np.where(s > 1.0, 2.0 - s, s)
    core = _core_inverse(model, np.clip(w, 0.0, 1.0))
    base = np.where(w < 0.0, w, core)
    return np.where(s > 1.0, 2.0 * model.u_star - base, base)


def _vgm_inner(s: np.ndarray, m: float) -> np.ndarray:
    """1 - (1 - s^(1/m))^m without cancellation."""
    x = s ** (1.0 / m)
    with np.errstate(divide="ignore"):
        return -np.expm1(m * np.log1p(-x))


def relative_conductivity(model: SoilModel, s) -> np.ndarray:
    """K_rel(S) = K_s * k_r(S) for S in [0, 1] (clipped)."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    Ks = model.Ks
    kind = model.kind
    if kind is SoilKind.VAN_GENUCHTEN_MUALEM:
        m = model.m
        small = s < TAYLOR_SWITCH
        taylor = m * m * s ** (0.5 + 2.0 / m)
        full = np.sqrt(s) * _vgm_inner(s, m) ** 2
        return Ks * np.where(small, taylor, full)
    if kind is SoilKind.GARDNER:
        return Ks * s
    if kind is SoilKind.BROOKS_COREY:
        return Ks * s**model.B
    p = model.gamma / model.beta_hk
    c = (model.A / model.alpha) ** model.gamma
    sp = s**p
    return Ks * sp / (sp + c * (1.0 - s) ** p)


def _diffusive_core(model: SoilModel, s: np.ndarray) -> np.ndarray:
    Ks, h = model.Ks, model.h_cap
    kind = model.kind
    if kind is SoilKind.VAN_GENUCHTEN_MUALEM:
        m, n = model.m, model.n
        small = s < TAYLOR_SWITCH
        taylor = Ks * m * m * s ** (0.5 + 1.0 / m)
        with np.errstate(divide="ignore", invalid="ignore"):
            full = relative_conductivity(model, s) / s ** (1.0 / m)
        return h / (n - 1.0) * np.where(small, taylor, full)
    if kind is SoilKind.GARDNER:
        return np.full_like(s, Ks * h)
    if kind is SoilKind.BROOKS_COREY:
        expo = model.B - 1.0 - 1.0 / model.lam
        if expo < 0:
            raise InvalidSoilParameters("Brooks-Corey K(u) is unbounded unless B >= 1 + 1/lam")
        return Ks * h / model.lam * s**expo
    b, g = model.beta_hk, model.gamma
    expo = (g - 1.0) / b - 1.0
    if expo < 0:
        raise InvalidSoilParameters("Haverkamp K(u) is unbounded unless gamma >= 1 + beta_hk")
    p = g / b
    c = (model.A / model.alpha) ** g
    return Ks * h / b * s**expo / (s**p + c * (1.0 - s) ** p)


def diffusive_K(model: SoilModel, u) -> np.ndarray:
    """Diffusive conductivity K(u), bounded and nonnegative on the real line.

    For van Genuchten--Mualem this is ``h_cap/(n-1) K_rel(theta) theta^(-1/m)``.
    """
    u = np.asarray(u, dtype=float)
    s = effective_saturation(model, _reflect(model, u))
    return _diffusive_core(model, np.clip(s, 0.0, 1.0))


def advective_Kbar(model: SoilModel, u) -> np.ndarray:
    """Advective conductivity Kbar(u) = K_rel(theta(u)), extended like K."""
    u = np.asarray(u, dtype=float)
    s = effective_saturation(model, _reflect(model, u))
    return relative_conductivity(model, s)


def beta_limit(model: SoilModel) -> float:
    """lim_{u -> 0} Kbar(u) / u."""
    if model.kind is SoilKind.GARDNER:
        return model.Ks
    # Brooks-Corey (B > 1), Haverkamp (gamma > beta_hk) and VGM all vanish;
    # the parameter regimes are enforced by SoilModel.
    return 0.0


def beta(model: SoilModel, u, eps: float = DEGENERATE_EPS) -> np.ndarray:
    """Advective ratio Kbar(u)/u, replaced by its analytic limit for u <= eps.

    Callers clamp negative states to zero before calling.
    """
    u = np.asarray(u, dtype=float)
    safe = np.where(u > eps, u, 1.0)
    ratio = advective_Kbar(model, safe) / safe
    return np.where(u > eps, ratio, beta_limit(model))


def _rho_limit(model: SoilModel) -> float:
    if model.kind is SoilKind.GARDNER:
        return model.alpha  # Ks / (Ks h_cap)
    return 0.0


def peclet_ratio(model: SoilModel, u, eps: float = DEGENERATE_EPS) -> np.ndarray:
    """rho(u) = beta(u) / K(u) as a direct quotient.

    Note: for VGM with the identity core this equals
    ``alpha (n-1) theta^(1/m) / u``.
    """
    u = np.asarray(u, dtype=float)
    b = beta(model, u, eps)
    k = diffusive_K(model, u)
    bad = (u > eps) & (k <= eps) & (b > eps)
    if np.any(bad):
        raise IllPosedRatio(
            f"K(u) vanished while beta(u) > {eps:g} at u={np.asarray(u)[bad].ravel()[:5]}"
        )
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(k > 0.0, b / np.where(k > 0.0, k, 1.0), 0.0)
    return np.where(u > eps, q, _rho_limit(model))
