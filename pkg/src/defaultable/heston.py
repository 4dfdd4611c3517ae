"""Stochastic-volatility jump-to-default model with explicit transforms.

The d = 3, m = 2 specialization: CIR variance v, an independent CIR
factor Y feeding the hazard rate, and the log price L,

    dv = k (vhat - v) dt + sigmabar sqrt(v) dW1,
    dY = k0 (yhat - Y) dt + sigma0 sqrt(Y) dW2,
    dL = (mu - v/2) dt + rho sqrt(v) dW1 + sqrt(1 - rho^2) sqrt(v) dW3,

with hazard rate lambda = lbar + L1 v + L2 Y and a constant interest
rate.  Risk premia that keep this shape under the risk-neutral measure
have two free slope parameters (Theta11, Theta22), two free shift
parameters (theta1hat, theta2hat) and a free risk-neutral intensity;
the stock-drift identity then pins down the remaining premium entries,
see :func:`assemble_premium`.

For this class the transform pair (Phi, Psi) is available in closed
form: the two variance factors decouple into scalar Riccati equations

    psi' = (s2/2) psi^2 + b psi + c,      psi(0) = z0,

whose solution and time integral are elementary.  They are evaluated
here in an overflow-safe parametrization (only decaying exponentials
appear for Re sqrt(D) >= 0, D = b^2 - 2 s2 c) that is smooth through
D = 0, with the logarithm's branch tracked continuously in time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .affine import (AffineModelParams, SpecAffine, ValidationReport, Violation,
                     validate_admissibility)
from .measures import (MeasureChangeError, QModelParams, RiskPremiumSpec,
                       apply_measure_change, verify_drift_condition)
from .riccati import MeasureFlavor, MomentExplosionError

__all__ = [
    "HestonJtdParams",
    "HestonPremium",
    "to_affine",
    "assemble_premium",
    "validate_heston_preserving",
    "q_model",
    "default_free_q_model",
    "closed_form_riccati",
    "solve_scalar_riccati",
    "ClosedFormTransformEngine",
    "heston_from_dict",
    "heston_to_dict",
    "premium_from_dict",
    "premium_to_dict",
]


@dataclass(frozen=True)
class HestonJtdParams:
    """Physical-measure parameters of the jump-to-default model.

    ``lambdaP`` packs (lbar, L1, L2): constant, variance loading and
    factor loading of the hazard rate.  ``v0``/``y0`` default to the
    long-run means and ``s0`` to 1.
    """

    k: float
    vhat: float
    sigmabar: float
    k0: float
    yhat: float
    sigma0: float
    mu: float
    rho: float
    rbar: float
    lambdaP: tuple[float, float, float]
    v0: float | None = None
    y0: float | None = None
    s0: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "lambdaP", tuple(float(v) for v in self.lambdaP))
        if len(self.lambdaP) != 3:
            raise ValueError("lambdaP must have three entries (constant, v, Y)")
        if self.v0 is None:
            object.__setattr__(self, "v0", self.vhat)
        if self.y0 is None:
            object.__setattr__(self, "y0", self.yhat)
        for name in ("k", "vhat", "sigmabar", "k0", "yhat", "sigma0", "v0", "y0", "s0"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if abs(self.rho) > 1.0:
            raise ValueError("rho must lie in [-1, 1]")
        if self.rbar < 0.0:
            raise ValueError("rbar must be nonnegative")
        # mean-reversion strong enough to keep each square-root factor positive
        if self.k * self.vhat < self.sigmabar ** 2 / 2:
            raise ValueError("need k*vhat >= sigmabar^2/2 (variance can hit zero)")
        if self.k0 * self.yhat < self.sigma0 ** 2 / 2:
            raise ValueError("need k0*yhat >= sigma0^2/2 (factor can hit zero)")
        lbar, l1, l2 = self.lambdaP
        if min(lbar, l1, l2) < 0.0 or lbar + l1 + l2 <= 0.0:
            raise ValueError("lambdaP entries must be nonnegative with positive sum")

    @property
    def lambda_spec(self) -> SpecAffine:
        lbar, l1, l2 = self.lambdaP
        return SpecAffine(lbar, np.array([l1, l2, 0.0]))

    @property
    def rate_spec(self) -> SpecAffine:
        return SpecAffine(self.rbar, np.zeros(3))

    @property
    def x0(self) -> np.ndarray:
        return np.array([self.v0, self.y0, np.log(self.s0)])


@dataclass(frozen=True)
class HestonPremium:
    """Free premium parameters for a structure-preserving measure change.

    Only shapes and finiteness are enforced here; the bound
    theta1hat >= sigmabar/2 - k vhat/sigmabar (and its factor-2
    analogue), the intensity conditions and the degenerate-correlation
    case are reported by :func:`validate_heston_preserving`.  The third
    components of thetahat and Theta are never free: they are implied
    by the drift identity, see :func:`assemble_premium`.
    """

    theta1hat: float
    theta2hat: float
    Theta11: float
    Theta22: float
    lambdaQ: tuple[float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "lambdaQ", tuple(float(v) for v in self.lambdaQ))
        if len(self.lambdaQ) != 3:
            raise ValueError("lambdaQ must have three entries (constant, v, Y)")
        vals = (self.theta1hat, self.theta2hat, self.Theta11, self.Theta22) + self.lambdaQ
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("premium entries must be finite")

    @property
    def lambda_spec(self) -> SpecAffine:
        lbar, l1, l2 = self.lambdaQ
        return SpecAffine(lbar, np.array([l1, l2, 0.0]))


def to_affine(h: HestonJtdParams) -> tuple[AffineModelParams, SpecAffine, SpecAffine]:
    """Embed the model into the general state space.

    Returns (params, hazard spec, rate spec) with state (v, Y, L).  The
    squared-diffusion factors are R = diag(v, Y, v), i.e. the log price
    borrows the variance process through its own Brownian driver.
    """
    rho_c = np.sqrt(1.0 - h.rho ** 2)
    A = np.array([
        [-h.k, 0.0, 0.0],
        [0.0, -h.k0, 0.0],
        [-0.5, 0.0, 0.0],
    ])
    b = np.array([h.k * h.vhat, h.k0 * h.yhat, h.mu])
    Sigma = np.array([
        [h.sigmabar, 0.0, 0.0],
        [0.0, h.sigma0, 0.0],
        [h.rho, 0.0, rho_c],
    ])
    alpha = np.zeros(3)
    beta = np.array([
        [1.0, 0.0, 1.0],   # v drives its own variance and the third driver's
        [0.0, 1.0, 0.0],   # Y drives the second
        [0.0, 0.0, 0.0],
    ])
    params = AffineModelParams(d=3, m=2, A=A, b=b, Sigma=Sigma,
                               alpha=alpha, beta=beta, x0=h.x0)
    report = validate_admissibility(params)
    if not report.ok:  # unreachable for validated inputs; guard regardless
        raise ValueError(f"embedding produced inadmissible parameters: {report.summary()}")
    return params, h.lambda_spec, h.rate_spec


def assemble_premium(h: HestonJtdParams, p: HestonPremium) -> RiskPremiumSpec:
    """Fill in the implied premium entries and return the full spec.

    The stock-drift identity forces, channel by channel,

        thetahat3 = (rbar + lbarQ - mu - rho theta1hat) / sqrt(1 - rho^2),
        Theta[2]  = ((L1Q - rho Theta11) / sqrt(1 - rho^2),
                     L2Q / sqrt(1 - rho^2), 0).
    """
    if h.rho ** 2 == 1.0:
        raise ValueError("degenerate correlation, premium not representable")
    rho_c = np.sqrt(1.0 - h.rho ** 2)
    lbar_q, l1_q, l2_q = p.lambdaQ
    theta3 = (h.rbar + lbar_q - h.mu - h.rho * p.theta1hat) / rho_c
    thetahat = np.array([p.theta1hat, p.theta2hat, theta3])
    Theta = np.array([
        [p.Theta11, 0.0, 0.0],
        [0.0, p.Theta22, 0.0],
        [(l1_q - h.rho * p.Theta11) / rho_c, l2_q / rho_c, 0.0],
    ])
    return RiskPremiumSpec(thetahat, Theta, p.lambda_spec)


def validate_heston_preserving(h: HestonJtdParams, p: HestonPremium) -> ValidationReport:
    """Check whether the premium defines a structure-preserving measure.

    Verifies the two shift bounds, the intensity conditions, and (belt
    and braces) that the assembled full premium passes the generic
    preservation clauses and zeroes the drift identity.
    """
    if h.rho ** 2 == 1.0:
        raise ValueError("degenerate correlation, premium not representable")
    bad: list[Violation] = []

    bound1 = h.sigmabar / 2 - h.k * h.vhat / h.sigmabar
    if p.theta1hat < bound1:
        bad.append(Violation("drift-floor", (0,), p.theta1hat, bound1))
    bound2 = h.sigma0 / 2 - h.k0 * h.yhat / h.sigma0
    if p.theta2hat < bound2:
        bad.append(Violation("drift-floor", (1,), p.theta2hat, bound2))

    lbar_q, l1_q, l2_q = p.lambdaQ
    for idx, val in enumerate(p.lambdaQ):
        if val < 0.0:
            bad.append(Violation("intensity", (idx,), val, 0.0))
    if min(p.lambdaQ) >= 0.0 and lbar_q + l1_q + l2_q <= 0.0:
        bad.append(Violation("intensity", (), lbar_q + l1_q + l2_q, 0.0))

    if not bad:
        params, _, rate = to_affine(h)
        spec = assemble_premium(h, p)
        try:
            apply_measure_change(params, spec, rate)
        except MeasureChangeError as exc:
            bad.append(Violation(exc.clause, exc.indices, np.nan, np.nan))
        residual = verify_drift_condition(params, spec, rate, h.lambda_spec)
        if not residual.ok:
            bad.append(Violation("drift-identity", (), residual.max_abs, 0.0))

    return ValidationReport(not bad, bad)


def q_model(h: HestonJtdParams, p: HestonPremium) -> QModelParams:
    """The risk-neutral model induced by the premium."""
    params, _, rate = to_affine(h)
    return apply_measure_change(params, assemble_premium(h, p), rate)


def default_free_q_model(h: HestonJtdParams, p: HestonPremium) -> QModelParams:
    """Risk-neutral model with the default channel switched off.

    Keeps the premium's variance and factor dynamics but prices as if
    the stock never jumps to zero: the hazard rate is identically zero
    and the log-price drift is repinned to the rate alone.  Used as the
    reference when isolating the value of default risk; this is the one
    construction that bypasses the positive-intensity requirement.
    """
    params, _, rate = to_affine(h)
    A_q = params.A.copy()
    A_q[0, 0] = -h.k + h.sigmabar * p.Theta11
    A_q[1, 1] = -h.k0 + h.sigma0 * p.Theta22
    b_q = np.array([h.k * h.vhat + h.sigmabar * p.theta1hat,
                    h.k0 * h.yhat + h.sigma0 * p.theta2hat,
                    h.rbar])
    qp = AffineModelParams(d=3, m=2, A=A_q, b=b_q, Sigma=params.Sigma,
                           alpha=params.alpha, beta=params.beta, x0=params.x0)
    return QModelParams(qp, SpecAffine.zero(3), rate)


# ---------------------------------------------------------------------------
# scalar Riccati building block
#
# psi' = (s2/2) psi^2 + b psi + c, psi(0) = z0.  With s = sqrt(b^2 - 2 s2 c)
# (principal branch, Re s >= 0), E = exp(-s t) and th = (1 - E)/s:
#
#   psi(t)        = (2 c th + (1 + E + b th) z0) / D,
#   D(t)          = (1 + E) - (b + s2 z0) th,
#   int_0^t psi   = (-(s + b) t - 2 Log(D/2)) / s2,
#
# where Log is the distinguished (continuous-in-t) logarithm with
# Log(D(0)/2) = Log(1) = 0.  Every exponential decays, so nothing
# overflows at large t, and th is evaluated by series for small |s t|,
# which makes the expressions smooth through s = 0 (degenerate
# discriminant).  Both psi and the integral are invariant under the
# branch flip s -> -s.

_SMALL_W = 1e-2


def _h(w):
    """(1 - exp(-w))/w, entire in w, series below |w| = 1e-2."""
    w = np.asarray(w, dtype=complex)
    small = np.abs(w) < _SMALL_W
    ws = np.where(small, 0.0, w)
    with np.errstate(invalid="ignore"):
        direct = np.where(small, 1.0, -np.expm1(-ws) / np.where(small, 1.0, ws))
    series = 1.0 + w * (-1.0 / 2 + w * (1.0 / 6 + w * (-1.0 / 24 + w / 120)))
    return np.where(small, series, direct)


def _h2(w):
    """(exp(-w) - 1 + w)/w^2, entire, series below |w| = 1e-2."""
    w = np.asarray(w, dtype=complex)
    small = np.abs(w) < _SMALL_W
    ws = np.where(small, 1.0, w)
    direct = (np.exp(-ws) - 1.0 + ws) / (ws * ws)
    series = 0.5 + w * (-1.0 / 6 + w * (1.0 / 24 + w * (-1.0 / 120 + w / 720)))
    return np.where(small, series, direct)


def _riccati_denominator(b, s2z, s, t, frac, ndim):
    """D(frac * t)/2 with the fractions on a fresh leading axis.

    ``ndim`` is the rank of the broadcast coefficient/time shape, so the
    fraction axis never collides with a batch axis of the same length.
    """
    tf = frac.reshape((-1,) + (1,) * ndim) * t
    w = s * tf
    E = np.exp(-w)
    th = tf * _h(w)
    return np.broadcast_to(((1.0 + E) - (b + s2z) * th) / 2.0,
                           (frac.size,) + np.broadcast(b, s2z, s, t).shape)


def _continuous_log_G(b, s2z, s, t, G_final):
    """log of D/2 at time t with the branch tracked from D(0)/2 = 1.

    Walks a time subdivision accumulating wrapped phase increments;
    refines (doubling) until every increment is below pi/2, which rules
    out missed windings.  A near-zero denominator along the way means
    the transform blows up: that is a moment explosion, reported as
    such with the crossing time.
    """
    shape = np.broadcast(b, s2z, s, t).shape
    t_arr = np.broadcast_to(t, shape)
    w_span = np.abs(np.imag(s) * t_arr)
    L = int(min(max(16, 4 * int(np.ceil(w_span.max() if w_span.size else 0.0))), 2 ** 18))
    floor = 1e-13

    for _ in range(6):
        total = np.zeros(shape)
        max_inc = 0.0
        prev = np.ones(shape, dtype=complex)
        # chunked walk keeps memory at O(chunk * batch)
        fracs = np.linspace(0.0, 1.0, L + 1)[1:]
        for lo in range(0, L, 64):
            chunk = fracs[lo:lo + 64]
            G = _riccati_denominator(b, s2z, s, t, chunk, len(shape))
            Gm = np.abs(G)
            if Gm.min() < floor:
                j, *rest = np.unravel_index(int(np.argmin(Gm)), Gm.shape)
                t_cross = chunk[j] * (t_arr[tuple(rest)] if rest else float(t_arr))
                raise MomentExplosionError(float(t_cross), float(np.max(t_arr)))
            seq = np.concatenate([prev[None], G], axis=0)
            inc = np.angle(seq[1:] * np.conj(seq[:-1]))
            total += inc.sum(axis=0)
            max_inc = max(max_inc, float(np.abs(inc).max()))
            prev = G[-1]
        if max_inc < np.pi / 2:
            return np.log(np.abs(G_final)) + 1j * total
        L *= 2
        if L > 2 ** 20:
            break
    raise RuntimeError("log branch tracking did not converge (pathological parameters)")


def solve_scalar_riccati(s2, b, c, z0, t, *, with_gradient: bool = False):
    """Solution and time integral of the scalar Riccati equation.

    Returns (psi, integral) evaluated at t, broadcasting all inputs;
    with ``with_gradient`` also (dpsi/dz0, dintegral/dz0).  ``s2`` must
    be a scalar; zero selects the linear branch.
    """
    b = np.asarray(b, dtype=complex)
    c = np.asarray(c, dtype=complex)
    z0 = np.asarray(z0, dtype=complex)
    t = np.asarray(t, dtype=float)
    s2 = complex(s2).real

    if s2 == 0.0:
        # linear equation: psi' = b psi + c
        w = -b * t
        grow = np.exp(b * t)
        th = t * _h(w)
        psi = z0 * grow + c * th
        integral = z0 * th + c * t * t * _h2(w)
        if not with_gradient:
            return psi, integral
        return psi, integral, grow + np.zeros_like(psi), th + np.zeros_like(psi)

    s = np.sqrt(b * b - 2.0 * s2 * c)
    w = s * t
    E = np.exp(-w)
    th = t * _h(w)
    s2z = s2 * z0
    N = 2.0 * c * th + (1.0 + E + b * th) * z0
    D = (1.0 + E) - (b + s2z) * th
    psi = N / D
    logG = _continuous_log_G(b, s2z, s, t, D / 2.0)
    integral = (-(s + b) * t - 2.0 * logG) / s2
    if not with_gradient:
        return psi, integral
    dpsi = ((1.0 + E + b * th) * D + N * s2 * th) / (D * D)
    dintegral = 2.0 * th / D
    return psi, integral, dpsi, dintegral


class ClosedFormTransformEngine:
    """Transform evaluation through the factorized closed form.

    Works for any admissible d = 3, m = 2 model whose drift matrix is
    diagonal on the positive block and has no log-price feedback
    (A[2, 2] = 0), with an intensity/rate that does not load on the log
    price; the measure-changed jump-to-default models all qualify.  The
    third transform component is then constant in time, and the first
    two decouple into scalar Riccati equations parametrized by z3.
    """

    def __init__(self, params: AffineModelParams, flavor: MeasureFlavor,
                 rate: SpecAffine):
        if params.d != 3 or params.m != 2:
            raise ValueError("closed form requires d = 3 with two positive components")
        A = params.A
        if A[0, 1] != 0.0 or A[1, 0] != 0.0:
            raise ValueError("closed form requires decoupled positive components")
        if A[2, 2] != 0.0:
            raise ValueError("closed form requires zero log-price drift feedback")
        disc = 1.0 if flavor.discount_rate else 0.0
        lam_vec = flavor.intensity.vec + disc * rate.vec
        if lam_vec[2] != 0.0:
            raise ValueError("closed form requires no log-price intensity loading")

        self.params = params
        self.flavor = flavor
        self.rate = rate
        Sigma, beta, alpha, b = params.Sigma, params.beta, params.alpha, params.b
        s33 = Sigma[2, 2]
        # scalar Riccati coefficients per factor i: b_i(z3) = lin0 + lin1 z3,
        # c_i(z3) = c0 + c1 z3 + c2 z3^2
        self._s2 = np.array([beta[0, 0] * Sigma[0, 0] ** 2,
                             beta[1, 1] * Sigma[1, 1] ** 2])
        self._lin0 = np.array([A[0, 0], A[1, 1]])
        self._lin1 = np.array([beta[0, 0] * Sigma[0, 0] * Sigma[2, 0],
                               beta[1, 1] * Sigma[1, 1] * Sigma[2, 1]])
        self._c0 = -lam_vec[:2]
        self._c1 = np.array([A[2, 0], A[2, 1]])
        self._c2 = np.array([
            0.5 * (beta[0, 0] * Sigma[2, 0] ** 2 + beta[0, 2] * s33 ** 2),
            0.5 * (beta[1, 1] * Sigma[2, 1] ** 2 + beta[1, 2] * s33 ** 2),
        ])
        self._bdrift = b[:2]
        self._const_lin = b[2]
        self._const_quad = 0.5 * alpha[2] * s33 ** 2
        self._const0 = -(flavor.intensity.bar + disc * rate.bar)
        self._cache: dict = {}

    def _pieces(self, z1, z2, z3, t, with_gradient=False):
        out_psi, out_int, out_dpsi, out_dint = [], [], [], []
        for i, z0 in enumerate((z1, z2)):
            bcoef = self._lin0[i] + self._lin1[i] * z3
            c = self._c0[i] + z3 * (self._c1[i] + self._c2[i] * z3)
            res = solve_scalar_riccati(self._s2[i], bcoef, c, z0, t,
                                       with_gradient=with_gradient)
            out_psi.append(res[0])
            out_int.append(res[1])
            if with_gradient:
                out_dpsi.append(res[2])
                out_dint.append(res[3])
        Phi = (self._bdrift[0] * out_int[0] + self._bdrift[1] * out_int[1]
               + (self._const0 + z3 * (self._const_lin + self._const_quad * z3)) * t)
        if with_gradient:
            return Phi, out_psi, out_dpsi, out_dint
        return Phi, out_psi

    def transform_pair(self, Z: np.ndarray, tau: float):
        """(Phi (n,), Psi (n, 3)) at horizon tau for rows of Z."""
        Z = np.atleast_2d(np.asarray(Z, dtype=complex))
        key = (float(tau), Z.tobytes())
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        z1, z2, z3 = Z[:, 0], Z[:, 1], Z[:, 2]
        Phi, (psi1, psi2) = self._pieces(z1, z2, z3, float(tau))
        Psi = np.stack([psi1, psi2, z3 + np.zeros_like(psi1)], axis=-1)
        self._cache[key] = (Phi, Psi)
        return Phi, Psi

    def transform_grid(self, z: np.ndarray, taus: np.ndarray,
                       direction: np.ndarray | None = None):
        """(Phi, Psi[, p, P]) at many horizons for one initial condition."""
        z = np.asarray(z, dtype=complex)
        taus = np.asarray(taus, dtype=float)
        z1, z2, z3 = z[0], z[1], z[2]
        if direction is None:
            Phi, (psi1, psi2) = self._pieces(z1, z2, z3, taus)
            Psi = np.stack(np.broadcast_arrays(psi1, psi2, z3 + 0 * psi1), axis=-1)
            return Phi, Psi
        direction = np.asarray(direction, dtype=complex)
        if direction[2] != 0.0:
            raise ValueError("closed-form sensitivities cover the two factor "
                             "components only (zero log-price direction)")
        Phi, psis, dpsis, dints = self._pieces(z1, z2, z3, taus, with_gradient=True)
        Psi = np.stack(np.broadcast_arrays(psis[0], psis[1], z3 + 0 * psis[0]), axis=-1)
        p = (direction[0] * self._bdrift[0] * dints[0]
             + direction[1] * self._bdrift[1] * dints[1])
        P = np.stack(np.broadcast_arrays(direction[0] * dpsis[0],
                                         direction[1] * dpsis[1],
                                         np.zeros_like(psis[0])), axis=-1)
        return Phi, Psi, p, P


def closed_form_riccati(h: HestonJtdParams, p: HestonPremium, z: np.ndarray,
                        t) -> tuple[complex, np.ndarray]:
    """Explicit risk-neutral transform pair (Phi, Psi) at time t.

    ``t`` may be a scalar or an array of times (vectorized evaluation).
    """
    qm = q_model(h, p)
    engine = ClosedFormTransformEngine(
        qm.params, MeasureFlavor.risk_neutral(qm.lambdaQ), qm.rate)
    t_arr = np.asarray(t, dtype=float)
    Phi, Psi = engine.transform_grid(np.asarray(z, dtype=complex), t_arr)
    if t_arr.ndim == 0:
        return complex(Phi), Psi.reshape(3)
    return Phi, Psi


# ---------------------------------------------------------------------------
# flat JSON round-trip


def heston_from_dict(obj: dict) -> HestonJtdParams:
    kwargs = {name: obj[name] for name in
              ("k", "vhat", "sigmabar", "k0", "yhat", "sigma0", "mu", "rho", "rbar")}
    kwargs["lambdaP"] = tuple(obj["lambdaP"])
    for opt in ("v0", "y0", "s0"):
        if opt in obj:
            kwargs[opt] = obj[opt]
    return HestonJtdParams(**kwargs)


def heston_to_dict(h: HestonJtdParams) -> dict:
    return {
        "k": h.k, "vhat": h.vhat, "sigmabar": h.sigmabar,
        "k0": h.k0, "yhat": h.yhat, "sigma0": h.sigma0,
        "mu": h.mu, "rho": h.rho, "rbar": h.rbar,
        "lambdaP": list(h.lambdaP),
        "v0": h.v0, "y0": h.y0, "s0": h.s0,
    }


def premium_from_dict(obj: dict) -> HestonPremium:
    return HestonPremium(
        theta1hat=obj["theta1hat"], theta2hat=obj["theta2hat"],
        Theta11=obj["Theta11"], Theta22=obj["Theta22"],
        lambdaQ=tuple(obj["lambdaQ"]),
    )


def premium_to_dict(p: HestonPremium) -> dict:
    return {
        "theta1hat": p.theta1hat, "theta2hat": p.theta2hat,
        "Theta11": p.Theta11, "Theta22": p.Theta22,
        "lambdaQ": list(p.lambdaQ),
    }
