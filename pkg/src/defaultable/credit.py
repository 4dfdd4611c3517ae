"""Credit-side analytics: survival curves, bonds, recovery legs, CDS.

Everything here reduces to the exponential-affine transform.  Writing
T(z) for exp(Phi(u-t, z) + Psi(u-t, z) @ x) under the relevant flavor:

* survival probability: physical flavor at z = 0;
* defaultable bond Pi(t, u): discounted risk-neutral flavor at z = 0;
* zero-recovery claims paying G(X_T) = sum_k c_k exp(z_k @ X_T) at T on
  survival: sum_k c_k T(z_k) (the survival-measure change of numeraire
  collapses into the transform itself);
* recovery-at-default legs: a time integral of the hazard-weighted
  transform, evaluated with the directional sensitivity along the
  intensity loadings, since E[lambda G] = lbar E[G] + Lam . grad E[G];
* CDS spreads: ratio of a recovery leg to the premium-leg annuity.

Time integrals use composite Gauss-Legendre panels aligned with the
payment schedule, refined by doubling until two successive estimates
agree to 1e-9.

A :class:`PricingContext` bundles the physical and risk-neutral models
with a valuation time and state, and picks the closed-form transform
engine whenever the model qualifies, the adaptive ODE engine otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .affine import AffineModelParams, ModelBundle, SpecAffine
from .heston import (ClosedFormTransformEngine, HestonJtdParams, HestonPremium,
                     assemble_premium, default_free_q_model, to_affine)
from .measures import QModelParams, RiskPremiumSpec, apply_measure_change
from .riccati import (DEFAULT_ATOL, DEFAULT_RTOL, MeasureFlavor,
                      OdeTransformEngine)

__all__ = [
    "PricingContext",
    "CdsSchedule",
    "survival_probability",
    "defaultable_bond",
    "riskfree_bond",
    "zero_recovery_value",
    "pure_recovery_value",
    "cds_spread",
    "parity_residual",
    "QUAD_TOL",
]

QUAD_TOL = 1e-9
_GL_NODES = 8


@dataclass(frozen=True)
class CdsSchedule:
    """Premium payment dates t0 < t1 < ... < tN and recovery fraction.

    ``dates`` includes the start date t0 (no payment there); accruals
    are the gaps between consecutive dates.
    """

    dates: np.ndarray
    delta: float

    def __post_init__(self):
        dates = np.asarray(self.dates, dtype=float)
        if dates.ndim != 1 or len(dates) < 2:
            raise ValueError("schedule needs at least a start and one payment date")
        if np.any(np.diff(dates) <= 0.0):
            raise ValueError("schedule dates must be strictly increasing")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("recovery fraction must lie in (0, 1)")
        dates.setflags(write=False)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "delta", float(self.delta))

    @classmethod
    def regular(cls, start: float, end: float, payments_per_year: int,
                delta: float) -> CdsSchedule:
        n = round((end - start) * payments_per_year)
        if n < 1 or abs(start + n / payments_per_year - end) > 1e-9:
            raise ValueError("regular schedule does not fit the horizon")
        return cls(np.linspace(start, end, n + 1), delta)


class PricingContext:
    """Valuation frame: physical and risk-neutral models, time, state.

    ``engine`` selects the transform backend: "auto" uses the closed
    form when the model shape allows and the ODE solver otherwise;
    "ode"/"closed" force one (the latter raising if unavailable).
    """

    def __init__(self, p_params: AffineModelParams, lambdaP: SpecAffine,
                 q_model: QModelParams, *, t: float = 0.0,
                 x: np.ndarray | None = None, engine: str = "auto",
                 rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL):
        self.p_params = p_params
        self.lambdaP = lambdaP
        self.q = q_model
        self.rate = q_model.rate
        self.t = float(t)
        self.x = np.asarray(p_params.x0 if x is None else x, dtype=float)
        if np.any(self.x[:p_params.m] <= 0.0):
            raise ValueError("state must be pre-default and interior")
        self.rtol = rtol
        self.atol = atol
        self.last_quadrature_nodes = 0

        zero = SpecAffine.zero(p_params.d)
        self.p_engine = self._make_engine(
            p_params, MeasureFlavor.physical(lambdaP), zero, engine)
        self.q_engine = self._make_engine(
            q_model.params, MeasureFlavor.risk_neutral(q_model.lambdaQ),
            q_model.rate, engine)
        self.rf_engine = self._make_engine(
            q_model.params, MeasureFlavor.risk_neutral(zero), q_model.rate, engine)

    def _make_engine(self, params, flavor, rate, choice):
        if choice in ("auto", "closed"):
            try:
                return ClosedFormTransformEngine(params, flavor, rate)
            except ValueError:
                if choice == "closed":
                    raise
        elif choice != "ode":
            raise ValueError(f"unknown engine choice {choice!r}")
        return OdeTransformEngine(params, flavor, rate, rtol=self.rtol, atol=self.atol)

    # -- constructors -------------------------------------------------

    @classmethod
    def from_premium(cls, params: AffineModelParams, lambdaP: SpecAffine,
                     premium: RiskPremiumSpec, rate: SpecAffine | None = None,
                     **kw) -> PricingContext:
        return cls(params, lambdaP, apply_measure_change(params, premium, rate), **kw)

    @classmethod
    def from_heston(cls, h: HestonJtdParams, premium: HestonPremium,
                    **kw) -> PricingContext:
        params, lamP, rate = to_affine(h)
        qm = apply_measure_change(params, assemble_premium(h, premium), rate)
        return cls(params, lamP, qm, **kw)

    @classmethod
    def default_free(cls, h: HestonJtdParams, premium: HestonPremium,
                     **kw) -> PricingContext:
        """Reference context with the default channel removed.

        Prices pure diffusion claims under the premium's volatility
        dynamics; survival-side quantities keep the physical hazard.
        """
        params, lamP, rate = to_affine(h)
        return cls(params, lamP, default_free_q_model(h, premium), **kw)

    @classmethod
    def from_bundle(cls, bundle: ModelBundle,
                    premium: RiskPremiumSpec | None = None, **kw) -> PricingContext:
        """Context from a model document.

        Without an explicit premium, the document's risk-neutral
        intensity is used with an identity diffusion premium (same state
        dynamics under both measures).
        """
        if bundle.intensity_p is None:
            raise ValueError("model document carries no physical intensity")
        bundle.intensity_p.validate_nonnegative(bundle.params.m, strict=True,
                                                name="intensity_P")
        bundle.rate.validate_nonnegative(bundle.params.m, name="rate")
        if premium is None:
            lamQ = bundle.intensity_q if bundle.intensity_q is not None else bundle.intensity_p
            premium = RiskPremiumSpec.identity(lamQ)
        qm = apply_measure_change(bundle.params, premium, bundle.rate)
        return cls(bundle.params, bundle.intensity_p, qm, **kw)

    # -- transform helpers --------------------------------------------

    def _value_at(self, engine, z, tau: float) -> complex:
        Phi, Psi = engine.transform_pair(np.asarray(z, dtype=complex)[None, :], tau)
        return complex(np.exp(Phi[0] + Psi[0] @ self.x))

    def stock(self) -> float:
        """Current (pre-default) stock price exp(L_t)."""
        return float(np.exp(self.x[-1]))


def _as_real(value: complex, what: str) -> float:
    if abs(value.imag) > 1e-9 * (1.0 + abs(value.real)):
        raise ArithmeticError(f"{what} has a non-negligible imaginary part: {value}")
    return float(value.real)


def survival_probability(ctx: PricingContext, T: float) -> float:
    """P(tau > T | survival to t), the physical z = 0 transform."""
    tau = float(T) - ctx.t
    if tau < 0.0:
        raise ValueError("horizon before valuation time")
    value = _as_real(ctx._value_at(ctx.p_engine, np.zeros(ctx.p_params.d), tau),
                     "survival probability")
    return min(value, 1.0)


def defaultable_bond(ctx: PricingContext, T: float) -> float:
    """Zero-recovery defaultable zero-coupon bond price."""
    tau = float(T) - ctx.t
    if tau < 0.0:
        raise ValueError("horizon before valuation time")
    return _as_real(ctx._value_at(ctx.q_engine, np.zeros(ctx.q.params.d), tau),
                    "bond price")


def riskfree_bond(ctx: PricingContext, T: float) -> float:
    """Default-free zero-coupon bond price (discounting only)."""
    tau = float(T) - ctx.t
    if tau < 0.0:
        raise ValueError("horizon before valuation time")
    return _as_real(ctx._value_at(ctx.rf_engine, np.zeros(ctx.q.params.d), tau),
                    "risk-free bond price")


def _bundle(payoff) -> list[tuple[complex, np.ndarray]]:
    if payoff is None:
        return [(1.0, None)]  # G identically 1
    out = []
    for coef, z in payoff:
        out.append((complex(coef), np.asarray(z, dtype=complex)))
    return out


def zero_recovery_value(ctx: PricingContext, T: float, payoff=None) -> float:
    """Price of a claim paying G(X_T) at T if no default occurred.

    ``payoff`` is a bundle of (coefficient, z-vector) terms representing
    G(x) = sum_k c_k exp(z_k @ x); None means G identically one, which
    reproduces the defaultable bond.
    """
    tau = float(T) - ctx.t
    d = ctx.q.params.d
    total = 0.0 + 0.0j
    for coef, z in _bundle(payoff):
        zv = np.zeros(d, dtype=complex) if z is None else z
        total += coef * ctx._value_at(ctx.q_engine, zv, tau)
    return _as_real(total, "zero-recovery value")


def _composite_panels(edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(_GL_NODES)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * np.diff(edges)
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _adaptive_integral(ctx: PricingContext, f, edges: np.ndarray,
                       tol: float = QUAD_TOL, max_rounds: int = 8) -> float:
    """Integrate f over the panel edges, doubling panels until stable."""
    prev = None
    for _ in range(max_rounds):
        nodes, weights = _composite_panels(edges)
        value = float(weights @ f(nodes))
        ctx.last_quadrature_nodes = len(nodes)
        if prev is not None and abs(value - prev) < tol:
            return value
        prev = value
        edges = np.sort(np.concatenate([edges, 0.5 * (edges[1:] + edges[:-1])]))
    return value


def _hazard_leg_integrand(ctx: PricingContext, coef: complex,
                          z: np.ndarray | None):
    """u -> c Pi(t,u) E^{Q_u}[lambda_Q G(X_u)] as a vectorized function."""
    d = ctx.q.params.d
    lamQ = ctx.q.lambdaQ
    direction = lamQ.vec.astype(complex)
    zv = np.zeros(d, dtype=complex) if z is None else z

    def f(u_nodes: np.ndarray) -> np.ndarray:
        taus = np.asarray(u_nodes, dtype=float) - ctx.t
        Phi, Psi, p, P = ctx.q_engine.transform_grid(zv, taus, direction=direction)
        base = np.exp(Phi + Psi @ ctx.x)
        vals = coef * base * (lamQ.bar + p + P @ ctx.x)
        return vals.real

    return f


def pure_recovery_value(ctx: PricingContext, T: float, payoff=None) -> float:
    """Price of receiving G(X_tau) at the default time, if before T.

    Computed as the time integral of the hazard-weighted transform; the
    expectation of lambda G under each survival measure comes from the
    directional transform sensitivity along the intensity loadings.
    """
    tau_end = float(T) - ctx.t
    if tau_end < 0.0:
        raise ValueError("horizon before valuation time")
    if tau_end == 0.0:
        return 0.0
    if ctx.q.lambdaQ.is_zero:
        return 0.0
    edges = np.linspace(ctx.t, float(T), 5)  # 4 panels * 8 nodes to start
    total = 0.0
    nodes_used = 0
    for coef, z in _bundle(payoff):
        total += _adaptive_integral(ctx, _hazard_leg_integrand(ctx, coef, z), edges)
        nodes_used += ctx.last_quadrature_nodes
    ctx.last_quadrature_nodes = nodes_used
    return total


def cds_spread(ctx: PricingContext, schedule: CdsSchedule,
               T: float | None = None) -> float:
    """Fair running spread: recovery leg over premium-leg annuity.

    Protection covers [t, T] (default: the last schedule date); premium
    accrues on the schedule gaps and is paid on survival.
    """
    dates = schedule.dates
    if abs(dates[0] - ctx.t) > 1e-12:
        raise ValueError("schedule must start at the valuation time")
    horizon = float(T) if T is not None else float(dates[-1])
    if horizon < dates[-1] - 1e-12:
        raise ValueError("protection horizon ends before the last payment")

    # panels aligned with payment dates (plus a stub if T > t_N)
    edges = dates if abs(horizon - dates[-1]) < 1e-12 else np.append(dates, horizon)
    numerator = schedule.delta * _adaptive_integral(
        ctx, _hazard_leg_integrand(ctx, 1.0, None), edges)
    leg_nodes = ctx.last_quadrature_nodes

    taus = dates[1:] - ctx.t
    zero = np.zeros(ctx.q.params.d, dtype=complex)
    Phi, Psi = ctx.q_engine.transform_grid(zero, taus)
    pi = np.exp(Phi + Psi @ ctx.x).real
    annuity = float(np.diff(dates) @ pi)
    ctx.last_quadrature_nodes = leg_nodes
    return numerator / annuity


def parity_residual(ctx: PricingContext, K: float, T: float,
                    damping=None) -> float:
    """Deviation from C - P = S_t - K Pi_rf(t, T).

    Zero (to numerical tolerance) whenever the discounted stock is a
    true martingale under the pricing measure, which holds for the
    jump-to-default models used here.
    """
    from . import fourier  # late import: fourier builds on this module

    call = fourier.call_price(ctx, K, T, damping=damping)
    put = fourier.put_price(ctx, K, T, damping=damping)
    return call - put - ctx.stock() + K * riskfree_bond(ctx, T)
