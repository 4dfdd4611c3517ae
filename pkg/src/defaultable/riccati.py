"""Exponential-affine transform machinery.

For an admissible model the conditional expectation

    E[ exp(-int_t^u (lambda_s + r_s 1_disc) ds) exp(z @ X_u) | F_t ]
        = exp( Phi(u - t, z) + Psi(u - t, z) @ X_t )

holds, where (Phi, Psi) solve a Riccati system

    Psi'(t) = A.T Psi + beta @ (Sigma.T Psi)^2 / 2 - Lam - Ups 1_disc,
    Phi'(t) = b @ Psi + alpha @ (Sigma.T Psi)^2 / 2 - lam_bar - r_bar 1_disc,

with Phi(0) = 0, Psi(0) = z and the square taken elementwise.  The
switch 1_disc discounts at the interest rate (risk-neutral flavors) or
not (physical flavor); the intensity spec likewise depends on the
measure.  Solutions exist for all z with nonpositive real part on the
first m components and purely imaginary elsewhere; outside that region
the system may blow up in finite time, which the solver detects and
reports as :class:`MomentExplosionError`.

This module integrates the system numerically (adaptive RK45, complex
state, dense output) and differentiates the transform in its initial
condition via the forward sensitivity ODE.  Model classes with a known
solution provide their own engine; see :mod:`defaultable.heston`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np
from scipy.integrate import solve_ivp

from .affine import AffineModelParams, SpecAffine

__all__ = [
    "MeasureFlavor",
    "TransformDomain",
    "RiccatiSolution",
    "SensitivitySolution",
    "MomentExplosionError",
    "solve",
    "solve_batch",
    "solve_with_gradient",
    "transform",
    "transform_gradient",
    "in_guaranteed_domain",
    "TransformEngine",
    "OdeTransformEngine",
    "DEFAULT_RTOL",
    "DEFAULT_ATOL",
]

DEFAULT_RTOL = 1e-9
DEFAULT_ATOL = 1e-10
BLOWUP_NORM = 1e8          # |Psi| beyond this is treated as finite-time explosion
MIN_STEP_FRACTION = 1e-13  # step underflow threshold relative to the horizon


class MomentExplosionError(RuntimeError):
    """The Riccati system blew up before the requested horizon."""

    def __init__(self, time_estimate: float, horizon: float):
        self.time_estimate = float(time_estimate)
        self.horizon = float(horizon)
        super().__init__(
            f"moment explosion near t = {time_estimate:.6g} "
            f"before horizon T = {horizon:.6g}"
        )


@dataclass(frozen=True)
class MeasureFlavor:
    """Which intensity enters the transform and whether to discount.

    Physical-measure functionals use the P intensity and no
    discounting; risk-neutral ones use the Q intensity and discount at
    the interest rate.
    """

    intensity: SpecAffine
    discount_rate: bool

    @classmethod
    def physical(cls, intensity: SpecAffine) -> MeasureFlavor:
        return cls(intensity, False)

    @classmethod
    def risk_neutral(cls, intensity: SpecAffine) -> MeasureFlavor:
        return cls(intensity, True)


def in_guaranteed_domain(z: np.ndarray, m: int) -> bool:
    """True when existence of the transform holds unconditionally.

    That is the set of z with Re z <= 0 on the positive components and
    Re z = 0 on the rest.  Other z are admitted by the solver but may
    trigger :class:`MomentExplosionError`.
    """
    z = np.asarray(z, dtype=complex)
    return bool(np.all(z[:m].real <= 0.0) and np.all(z[m:].real == 0.0))


@dataclass(frozen=True)
class TransformDomain:
    """An initial condition z together with its domain classification."""

    z: np.ndarray

    def guaranteed(self, m: int) -> bool:
        return in_guaranteed_domain(self.z, m)


@dataclass(frozen=True)
class RiccatiSolution:
    """Solution path of the Riccati system for one initial condition.

    ``grid`` holds the accepted solver steps; ``Phi``/``Psi`` the values
    there.  ``at`` evaluates the solver's dense output (a high-order
    local interpolant) anywhere in [0, T].
    """

    z: np.ndarray
    T: float
    grid: np.ndarray
    Phi: np.ndarray       # (n,) complex
    Psi: np.ndarray       # (n, d) complex
    _dense: Callable[[float], np.ndarray]

    def at(self, t) -> tuple[np.ndarray, np.ndarray]:
        """Evaluate (Phi, Psi) at scalar or vector times in [0, T]."""
        t = np.asarray(t, dtype=float)
        y = self._dense(t)  # (1+d,) or (1+d, len(t))
        return y[0], np.moveaxis(y[1:], 0, -1)


@dataclass(frozen=True)
class SensitivitySolution:
    """Riccati path plus its derivative along one direction in z.

    The derivative pair (p, P) solves the linearized system with
    p(0) = 0, P(0) = direction; the derivative of the transform itself
    is (p + P @ x) times the transform.
    """

    base: RiccatiSolution
    direction: np.ndarray
    p: np.ndarray         # (n,) complex
    P: np.ndarray         # (n, d) complex
    _dense: Callable[[float], np.ndarray]

    def at(self, t):
        """Evaluate (Phi, Psi, p, P) at scalar or vector times."""
        t = np.asarray(t, dtype=float)
        d = self.base.Psi.shape[1]
        y = self._dense(t)
        return (y[0], np.moveaxis(y[1:1 + d], 0, -1),
                y[1 + d], np.moveaxis(y[2 + d:], 0, -1))


def _total_intensity(flavor: MeasureFlavor, rate: SpecAffine) -> tuple[float, np.ndarray]:
    disc = 1.0 if flavor.discount_rate else 0.0
    return flavor.intensity.bar + disc * rate.bar, flavor.intensity.vec + disc * rate.vec


def _constant_dense(y0: np.ndarray):
    def dense(t):
        t = np.asarray(t, dtype=float)
        if t.ndim == 0:
            return y0.copy()
        return np.repeat(y0[:, None], len(t), axis=1)
    return dense


def _integrate(rhs, y0: np.ndarray, T: float, rtol: float, atol: float, width: int):
    """Run solve_ivp with blow-up detection; return the OdeResult."""

    def blowup(t, y):
        # largest |Psi| over the batch; crossing the threshold stops the solve
        psi = y.reshape(-1, width)[:, 1:]
        return BLOWUP_NORM - np.max(np.abs(psi))

    blowup.terminal = True

    sol = solve_ivp(rhs, (0.0, T), y0, method="RK45", rtol=rtol, atol=atol,
                    dense_output=True, events=blowup)
    if sol.status == 1:  # terminated by the blow-up event
        t_star = sol.t_events[0][0] if len(sol.t_events[0]) else sol.t[-1]
        raise MomentExplosionError(t_star, T)
    if not sol.success:
        # step-size underflow is the other explosion signature
        if len(sol.t) > 1 and (sol.t[-1] - sol.t[-2]) < MIN_STEP_FRACTION * T:
            raise MomentExplosionError(sol.t[-1], T)
        raise RuntimeError(f"Riccati integration failed: {sol.message}")
    return sol


def solve(params: AffineModelParams, flavor: MeasureFlavor, rate: SpecAffine,
          z: np.ndarray, T: float, *, rtol: float = DEFAULT_RTOL,
          atol: float = DEFAULT_ATOL) -> RiccatiSolution:
    """Integrate the Riccati system from (0, z) up to horizon T."""
    d = params.d
    z = np.asarray(z, dtype=complex)
    if z.shape != (d,):
        raise ValueError(f"z must have shape ({d},)")
    y0 = np.concatenate(([0.0 + 0.0j], z))
    if T == 0.0:
        return RiccatiSolution(z, 0.0, np.array([0.0]), y0[:1].copy(),
                               z[None, :].copy(), _constant_dense(y0))
    if T < 0.0:
        raise ValueError("horizon must be nonnegative")

    A_T = params.A.T
    Sig_T = params.Sigma.T
    beta, alpha, b = params.beta, params.alpha, params.b
    bar0, vec0 = _total_intensity(flavor, rate)

    def rhs(t, y):
        psi = y[1:]
        q = (Sig_T @ psi) ** 2
        dpsi = A_T @ psi + 0.5 * (beta @ q) - vec0
        dphi = b @ psi + 0.5 * (alpha @ q) - bar0
        out = np.empty_like(y)
        out[0] = dphi
        out[1:] = dpsi
        return out

    sol = _integrate(rhs, y0, float(T), rtol, atol, d + 1)
    return RiccatiSolution(z, float(T), sol.t, sol.y[0], sol.y[1:].T, sol.sol)


def solve_batch(params: AffineModelParams, flavor: MeasureFlavor, rate: SpecAffine,
                Z: np.ndarray, tau: float, *, rtol: float = DEFAULT_RTOL,
                atol: float = DEFAULT_ATOL) -> tuple[np.ndarray, np.ndarray]:
    """Terminal (Phi, Psi) at horizon tau for a batch of initial conditions.

    ``Z`` has one initial condition per row.  All rows are advanced by a
    single adaptive solve, sharing step-size control; this is how the
    Fourier module evaluates whole quadrature panels at once.
    """
    Z = np.atleast_2d(np.asarray(Z, dtype=complex))
    n, d = Z.shape
    if d != params.d:
        raise ValueError(f"Z rows must have length {params.d}")
    if tau == 0.0:
        return np.zeros(n, dtype=complex), Z.copy()

    A, Sig = params.A, params.Sigma
    beta_T = params.beta.T
    alpha, b = params.alpha, params.b
    bar0, vec0 = _total_intensity(flavor, rate)

    def rhs(t, y):
        Y = y.reshape(n, d + 1)
        Psi = Y[:, 1:]
        Q = (Psi @ Sig) ** 2
        out = np.empty_like(Y)
        out[:, 0] = Psi @ b + 0.5 * (Q @ alpha) - bar0
        out[:, 1:] = Psi @ A + 0.5 * (Q @ beta_T) - vec0
        return out.ravel()

    y0 = np.concatenate([np.zeros((n, 1), dtype=complex), Z], axis=1).ravel()
    sol = _integrate(rhs, y0, float(tau), rtol, atol, d + 1)
    Y = sol.y[:, -1].reshape(n, d + 1)
    return Y[:, 0], Y[:, 1:]


def solve_with_gradient(params: AffineModelParams, flavor: MeasureFlavor,
                        rate: SpecAffine, z: np.ndarray, T: float,
                        direction: np.ndarray, *, rtol: float = DEFAULT_RTOL,
                        atol: float = DEFAULT_ATOL) -> SensitivitySolution:
    """Integrate the Riccati system together with one directional sensitivity.

    Differentiating the system in its initial condition along
    ``direction`` gives a linear ODE for the pair (p, P):

        P' = A.T P + beta @ ((Sigma.T Psi) * (Sigma.T P)),
        p' = b @ P + alpha @ ((Sigma.T Psi) * (Sigma.T P)),

    with p(0) = 0 and P(0) = direction, solved alongside the base pair.
    """
    d = params.d
    z = np.asarray(z, dtype=complex)
    direction = np.asarray(direction, dtype=complex)
    if z.shape != (d,) or direction.shape != (d,):
        raise ValueError(f"z and direction must have shape ({d},)")
    y0 = np.concatenate(([0.0], z, [0.0], direction)).astype(complex)
    if T == 0.0:
        base = RiccatiSolution(z, 0.0, np.array([0.0]), np.zeros(1, complex),
                               z[None, :].copy(), _constant_dense(y0[:d + 1]))
        return SensitivitySolution(base, direction, np.zeros(1, complex),
                                   direction[None, :].copy(), _constant_dense(y0))

    A_T = params.A.T
    Sig_T = params.Sigma.T
    beta, alpha, b = params.beta, params.alpha, params.b
    bar0, vec0 = _total_intensity(flavor, rate)

    def rhs(t, y):
        psi = y[1:d + 1]
        P = y[d + 2:]
        u = Sig_T @ psi
        q = u * u
        uw = u * (Sig_T @ P)
        out = np.empty_like(y)
        out[0] = b @ psi + 0.5 * (alpha @ q) - bar0
        out[1:d + 1] = A_T @ psi + 0.5 * (beta @ q) - vec0
        out[d + 1] = b @ P + alpha @ uw
        out[d + 2:] = A_T @ P + beta @ uw
        return out

    sol = _integrate(rhs, y0, float(T), rtol, atol, 2 * (d + 1))
    base = RiccatiSolution(z, float(T), sol.t, sol.y[0], sol.y[1:d + 1].T,
                           lambda t: sol.sol(t)[:d + 1])
    return SensitivitySolution(base, direction, sol.y[d + 1], sol.y[d + 2:].T, sol.sol)


def transform(params: AffineModelParams, flavor: MeasureFlavor, rate: SpecAffine,
              z: np.ndarray, t: float, u: float, x: np.ndarray, *,
              rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL) -> complex:
    """The conditional expectation exp(Phi(u-t, z) + Psi(u-t, z) @ x)."""
    tau = float(u) - float(t)
    if tau < 0.0:
        raise ValueError("need t <= u")
    sol = solve(params, flavor, rate, z, tau, rtol=rtol, atol=atol)
    x = np.asarray(x, dtype=float)
    return complex(np.exp(sol.Phi[-1] + sol.Psi[-1] @ x))


def transform_gradient(params: AffineModelParams, flavor: MeasureFlavor,
                       rate: SpecAffine, z0: np.ndarray, k: int, t: float,
                       u: float, x: np.ndarray, *, rtol: float = DEFAULT_RTOL,
                       atol: float = DEFAULT_ATOL) -> complex:
    """Partial derivative of :func:`transform` in the k-th component of z.

    Computed with the forward sensitivity ODE, not finite differences:
    at z0 = 0 the guaranteed domain ends, so one-sided difference
    quotients there are both biased and ill-conditioned.
    """
    tau = float(u) - float(t)
    if tau < 0.0:
        raise ValueError("need t <= u")
    x = np.asarray(x, dtype=float)
    direction = np.zeros(params.d, dtype=complex)
    direction[k] = 1.0
    if tau == 0.0:
        z0 = np.asarray(z0, dtype=complex)
        return complex(x[k] * np.exp(z0 @ x))
    sens = solve_with_gradient(params, flavor, rate, z0, tau, direction,
                               rtol=rtol, atol=atol)
    value = np.exp(sens.base.Phi[-1] + sens.base.Psi[-1] @ x)
    return complex((sens.p[-1] + sens.P[-1] @ x) * value)


class TransformEngine(Protocol):
    """Anything that can evaluate the transform pair for batches of z.

    Two implementations exist: the generic ODE engine below and the
    closed-form engine for the Heston jump-to-default class.  Pricing
    code is written against this protocol only.
    """

    params: AffineModelParams

    def transform_pair(self, Z: np.ndarray, tau: float) -> tuple[np.ndarray, np.ndarray]:
        """Return (Phi (n,), Psi (n, d)) at horizon tau for rows of Z."""
        ...

    def transform_grid(self, z: np.ndarray, taus: np.ndarray,
                       direction: np.ndarray | None = None):
        """(Phi, Psi) at many horizons for one z; with ``direction``
        also the sensitivity pair (p, P).  Returns (Phi (k,), Psi (k, d))
        or (Phi, Psi, p, P)."""
        ...


class OdeTransformEngine:
    """Transform evaluation backed by the adaptive Riccati solver.

    Caches batch results keyed by (tau, content of Z): the Fourier
    module re-uses one quadrature rule across strikes and levels, so
    identical (Z, tau) requests are frequent.
    """

    def __init__(self, params: AffineModelParams, flavor: MeasureFlavor,
                 rate: SpecAffine, *, rtol: float = DEFAULT_RTOL,
                 atol: float = DEFAULT_ATOL):
        self.params = params
        self.flavor = flavor
        self.rate = rate
        self.rtol = rtol
        self.atol = atol
        self._cache: dict = {}

    def transform_pair(self, Z: np.ndarray, tau: float):
        Z = np.atleast_2d(np.asarray(Z, dtype=complex))
        key = (float(tau), Z.tobytes())
        hit = self._cache.get(key)
        if hit is None:
            hit = solve_batch(self.params, self.flavor, self.rate, Z, tau,
                              rtol=self.rtol, atol=self.atol)
            self._cache[key] = hit
        return hit

    def transform_grid(self, z, taus, direction=None):
        taus = np.asarray(taus, dtype=float)
        T = float(taus.max()) if taus.size else 0.0
        if direction is None:
            sol = solve(self.params, self.flavor, self.rate, z, T,
                        rtol=self.rtol, atol=self.atol)
            return sol.at(taus)
        sens = solve_with_gradient(self.params, self.flavor, self.rate, z, T,
                                   np.asarray(direction, dtype=complex),
                                   rtol=self.rtol, atol=self.atol)
        return sens.at(taus)
