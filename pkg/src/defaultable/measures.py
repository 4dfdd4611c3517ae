"""Structure-preserving changes of measure.

A risk-neutral measure keeps the model tractable when (a) the state
keeps an affine diffusion law with the same Sigma, alpha, beta, and (b)
the default intensity stays affine.  Such measures are parametrized by
a market price of diffusive risk theta(x) = R(x)^{-1/2} (thetahat +
Theta x) and a default-event premium gamma(x) = (lambda_Q(x) -
lambda_P(x)) / lambda_P(x).  The parameter shift is

    A -> A + Sigma Theta,        b -> b + Sigma thetahat,

subject to two conditions keeping the shifted parameters admissible
(:class:`MeasureChangeError` names the failing one), plus a drift
identity tying the stock's drift to the rate and the risk-neutral
intensity.  The identity is affine in the state, so
:func:`verify_drift_condition` checks it by matching coefficients
channel by channel instead of sampling states.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .affine import (AffineModelParams, SpecAffine, stock_coefficients,
                     validate_admissibility, _readonly)
from . import riccati

__all__ = [
    "RiskPremiumSpec",
    "QModelParams",
    "ResidualReport",
    "MeasureChangeError",
    "apply_measure_change",
    "verify_drift_condition",
    "risk_premia_at",
    "survival_cf_P",
    "survival_cf_Q",
    "DRIFT_RESIDUAL_TOL",
]

DRIFT_RESIDUAL_TOL = 1e-12


class MeasureChangeError(ValueError):
    """A premium specification violates one of the preservation clauses.

    ``clause`` is machine-readable: ``drift-floor`` (the shifted b would
    break the positive-component drift floor), ``mean-reversion`` (the
    shifted A would break block structure or off-diagonal signs), or
    ``intensity`` (the risk-neutral intensity spec is invalid).
    """

    def __init__(self, clause: str, indices: tuple[int, ...], detail: str):
        self.clause = clause
        self.indices = indices
        super().__init__(f"[{clause}]{list(indices)}: {detail}")


@dataclass(frozen=True)
class RiskPremiumSpec:
    """Premium parameters (thetahat, Theta, lambdaQ) defining a candidate Q.

    Validity against a concrete model is checked by
    :func:`apply_measure_change`, not here: the conditions involve the
    model's Sigma, beta, b and A.
    """

    thetahat: np.ndarray
    Theta: np.ndarray
    lambdaQ: SpecAffine

    def __post_init__(self):
        th = np.atleast_1d(np.asarray(self.thetahat, dtype=float))
        d = th.shape[0]
        object.__setattr__(self, "thetahat", _readonly(th, (d,), "thetahat"))
        object.__setattr__(self, "Theta", _readonly(self.Theta, (d, d), "Theta"))
        if self.lambdaQ.vec.shape != (d,):
            raise ValueError("lambdaQ dimension does not match thetahat")

    @classmethod
    def identity(cls, lambdaP: SpecAffine) -> RiskPremiumSpec:
        d = lambdaP.vec.shape[0]
        return cls(np.zeros(d), np.zeros((d, d)), lambdaP)


@dataclass(frozen=True)
class QModelParams:
    """Risk-neutral model: shifted diffusion parameters plus specs.

    ``params`` carries A + Sigma Theta and b + Sigma thetahat with the
    unchanged Sigma, alpha, beta; it passes admissibility whenever the
    premium satisfied the preservation clauses.
    """

    params: AffineModelParams
    lambdaQ: SpecAffine
    rate: SpecAffine


def apply_measure_change(params: AffineModelParams, p: RiskPremiumSpec,
                         rate: SpecAffine | None = None) -> QModelParams:
    """Shift (A, b) by the premium and return the risk-neutral model.

    Raises :class:`MeasureChangeError` when the premium violates a
    preservation clause; the resulting parameters are re-validated as a
    belt-and-braces check.
    """
    d, m = params.d, params.m
    if rate is None:
        rate = SpecAffine.zero(d)
    if p.thetahat.shape != (d,):
        raise ValueError("premium dimension does not match model")

    sig_shift = params.Sigma @ p.thetahat       # added to b
    slope_shift = params.Sigma @ p.Theta        # added to A

    # shifted drift floor on positive components
    for i in range(m):
        floor = 0.5 * params.Sigma[i, i] ** 2 * params.beta[i, i] - params.b[i]
        if sig_shift[i] < floor:
            raise MeasureChangeError(
                "drift-floor", (i,),
                f"(Sigma thetahat)[{i}] = {sig_shift[i]:.6g} < {floor:.6g}")

    # shifted A must keep zero blocks and off-diagonal signs
    for i in range(m):
        for j in range(m, d):
            if slope_shift[i, j] != 0.0:
                raise MeasureChangeError(
                    "mean-reversion", (i, j),
                    f"(Sigma Theta)[{i},{j}] = {slope_shift[i, j]:.6g} must vanish")
        for j in range(m):
            if j != i and slope_shift[i, j] < -params.A[i, j]:
                raise MeasureChangeError(
                    "mean-reversion", (i, j),
                    f"(Sigma Theta)[{i},{j}] = {slope_shift[i, j]:.6g} "
                    f"< {-params.A[i, j]:.6g}")

    lamQ = p.lambdaQ
    if lamQ.bar < 0.0 or np.any(lamQ.vec[:m] < 0.0) or lamQ.vec[m:].any():
        raise MeasureChangeError(
            "intensity", (),
            "risk-neutral intensity must be nonnegative on the cone")
    if lamQ.bar + lamQ.vec[:m].sum() <= 0.0:
        raise MeasureChangeError(
            "intensity", (), "risk-neutral intensity is identically zero")

    qparams = AffineModelParams(
        d=d, m=m,
        A=params.A + slope_shift,
        b=params.b + sig_shift,
        Sigma=params.Sigma, alpha=params.alpha, beta=params.beta,
        x0=params.x0,
    )
    report = validate_admissibility(qparams, eps=1e-12)
    if not report.ok:
        v = report.violations[0]
        raise MeasureChangeError(v.clause, v.indices, "shifted parameters not admissible")
    return QModelParams(qparams, lamQ, rate)


@dataclass(frozen=True)
class ResidualReport:
    """Channel-by-channel residuals of the drift identity.

    The identity equates two affine functions of the state, so it holds
    iff the constant residual and every state-component residual vanish.
    ``state[-1]`` is the log-price channel: a nonzero value there cannot
    be repaired by any intensity or rate choice, since neither loads on
    the log price.
    """

    constant: float
    state: np.ndarray
    tol: float = DRIFT_RESIDUAL_TOL

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.state, dtype=float))
        s.setflags(write=False)
        object.__setattr__(self, "state", s)

    @property
    def ok(self) -> bool:
        return abs(self.constant) < self.tol and bool(np.all(np.abs(self.state) < self.tol))

    @property
    def max_abs(self) -> float:
        return max(abs(self.constant), float(np.max(np.abs(self.state))))

    def to_dict(self) -> dict:
        out = {
            "ok": self.ok,
            "tol": self.tol,
            "constant": self.constant,
            "state": self.state.tolist(),
        }
        if abs(self.state[-1]) >= self.tol:
            out["note"] = ("log-price channel residual is nonzero: no "
                           "structure-preserving risk-neutral measure exists "
                           "with this log-price drift coefficient")
        return out


def verify_drift_condition(params: AffineModelParams, p: RiskPremiumSpec,
                           rate: SpecAffine, lambdaP: SpecAffine) -> ResidualReport:
    """Match coefficients of the local-martingale drift identity.

    After substituting the premium form of theta, the square roots of
    R(x) cancel and both sides are affine in the state.  The left side
    collects the stock drift plus the Brownian premium contribution; the
    right side is r(x) + lambda_Q(x).  (lambdaP only sets the identity's
    frame: lambda_P (1 + gamma) reduces to lambda_Q identically.)
    """
    d, m = params.d, params.m
    coefs = stock_coefficients(params)
    lamQ = p.lambdaQ

    drift_row = (params.Sigma @ p.Theta)[d - 1]  # state loadings added by theta
    shift = (params.Sigma @ p.thetahat)[d - 1]

    constant = coefs.sbar + shift - rate.bar - lamQ.bar
    state = np.empty(d)
    state[0] = coefs.mu2
    for i in range(1, d - 1):
        state[i] = coefs.eta[i - 1] + (coefs.etabar[i - 1] if i < m else 0.0)
    state[d - 1] = coefs.mu1
    state += drift_row - rate.vec - lamQ.vec
    return ResidualReport(float(constant), state)


def risk_premia_at(params: AffineModelParams, p: RiskPremiumSpec,
                   lambdaP: SpecAffine, x: np.ndarray) -> tuple[np.ndarray, float]:
    """Evaluate the pointwise risk premia (theta(x), gamma(x)).

    Requires an interior state: every diffusion variance positive and
    lambda_P(x) > 0.  gamma > -1 always holds for valid premium specs
    because lambda_Q(x) > 0 on the interior.
    """
    x = np.asarray(x, dtype=float)
    R = params.alpha + x @ params.beta
    if np.any(R <= 0.0):
        raise ValueError("state is not interior: some diffusion variance is nonpositive")
    lamP = float(lambdaP(x))
    if lamP <= 0.0:
        raise ValueError("state is not interior: physical intensity is nonpositive")
    theta = (p.thetahat + p.Theta @ x) / np.sqrt(R)
    gamma = (float(p.lambdaQ(x)) - lamP) / lamP
    return theta, gamma


def survival_cf_P(params: AffineModelParams, lambdaP: SpecAffine, z: np.ndarray,
                  t: float, T: float, x: np.ndarray, *,
                  rtol: float = riccati.DEFAULT_RTOL,
                  atol: float = riccati.DEFAULT_ATOL) -> complex:
    """Characteristic function of X_T under the physical survival measure.

    The survival reweighting divides out the z = 0 transform, so the
    value is exp(Phi(tau,z) - Phi(tau,0) + (Psi(tau,z) - Psi(tau,0)) @ x).
    """
    d = params.d
    flavor = riccati.MeasureFlavor.physical(lambdaP)
    zero_rate = SpecAffine.zero(d)
    tau = float(T) - float(t)
    Z = np.vstack([np.asarray(z, dtype=complex), np.zeros(d, dtype=complex)])
    Phi, Psi = riccati.solve_batch(params, flavor, zero_rate, Z, tau,
                                   rtol=rtol, atol=atol)
    x = np.asarray(x, dtype=float)
    return complex(np.exp(Phi[0] - Phi[1] + (Psi[0] - Psi[1]) @ x))


def survival_cf_Q(qparams: QModelParams, rate: SpecAffine | None, z: np.ndarray,
                  t: float, u: float, x: np.ndarray, *,
                  rtol: float = riccati.DEFAULT_RTOL,
                  atol: float = riccati.DEFAULT_ATOL) -> complex:
    """Characteristic function of X_u under the discounted survival measure.

    Same construction as :func:`survival_cf_P` with the risk-neutral
    flavor, which discounts at the rate on top of the intensity.
    """
    params = qparams.params
    if rate is None:
        rate = qparams.rate
    flavor = riccati.MeasureFlavor.risk_neutral(qparams.lambdaQ)
    tau = float(u) - float(t)
    Z = np.vstack([np.asarray(z, dtype=complex), np.zeros(params.d, dtype=complex)])
    Phi, Psi = riccati.solve_batch(params, flavor, rate, Z, tau, rtol=rtol, atol=atol)
    x = np.asarray(x, dtype=float)
    return complex(np.exp(Phi[0] - Phi[1] + (Psi[0] - Psi[1]) @ x))
