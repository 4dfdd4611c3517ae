"""Reference values the test suite trusts.

Everything here is independent of the package under test: textbook
closed forms written out with nothing beyond exp/log/sqrt/erf, plus a
handful of parameter combinations evaluated by hand.  Tests compare
package output against these, never the other way around.  Do not
import from ``defaultable`` in this file.
"""

from __future__ import annotations

import math

# ---------------------------------------------------------------------------
# Black-Scholes


def norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def black_scholes(sigma: float, s0: float, K: float, T: float,
                  discount: float = 1.0, kind: str = "call") -> float:
    """Vanilla option on a lognormal forward F = s0/discount."""
    forward = s0 / discount
    total = sigma * math.sqrt(T)
    d1 = (math.log(forward / K) + 0.5 * total * total) / total
    d2 = d1 - total
    call = discount * (forward * norm_cdf(d1) - K * norm_cdf(d2))
    if kind == "call":
        return call
    return call - s0 + K * discount  # parity


def black_scholes_vega(sigma: float, s0: float, K: float, T: float,
                       discount: float = 1.0) -> float:
    forward = s0 / discount
    total = sigma * math.sqrt(T)
    d1 = (math.log(forward / K) + 0.5 * total * total) / total
    pdf = math.exp(-0.5 * d1 * d1) / math.sqrt(2.0 * math.pi)
    return discount * forward * pdf * math.sqrt(T)


# ---------------------------------------------------------------------------
# square-root diffusion: Laplace transform of the integrated process
#
# For dv = kappa (mean - v) dt + vol sqrt(v) dW and c >= 0,
#   E[exp(-c * int_0^t v_s ds)] = A(t) * exp(-B(t) v_0)
# with gamma = sqrt(kappa^2 + 2 vol^2 c),
#   A(t) = (2 gamma e^{(gamma+kappa)t/2} / D)^{2 kappa mean / vol^2},
#   B(t) = 2 c (e^{gamma t} - 1) / D,
#   D    = (gamma + kappa)(e^{gamma t} - 1) + 2 gamma.


def cir_integrated_laplace(c: float, v0: float, kappa: float, mean: float,
                           vol: float, t: float) -> float:
    gamma = math.sqrt(kappa * kappa + 2.0 * vol * vol * c)
    e = math.expm1(gamma * t)  # e^{gamma t} - 1
    denom = (gamma + kappa) * e + 2.0 * gamma
    A = (2.0 * gamma * math.exp(0.5 * (gamma + kappa) * t) / denom) \
        ** (2.0 * kappa * mean / (vol * vol))
    B = 2.0 * c * e / denom
    return A * math.exp(-B * v0)


# ---------------------------------------------------------------------------
# constant-hazard credit: everything in closed form when the intensity
# and the short rate are flat


def flat_survival(lam: float, T: float) -> float:
    return math.exp(-lam * T)


def flat_bond(lam: float, r: float, T: float) -> float:
    return math.exp(-(lam + r) * T)


def flat_protection_leg(lam: float, r: float, T: float) -> float:
    """E[e^{-r tau} 1_{tau <= T}] = int_0^T lam e^{-(lam+r)u} du."""
    total = lam + r
    if total == 0.0:
        return 0.0
    return lam / total * -math.expm1(-total * T)


def flat_annuity(lam: float, r: float, dates) -> float:
    """Premium leg per unit spread: accruals paid on survival."""
    out = 0.0
    for t_prev, t_pay in zip(dates[:-1], dates[1:]):
        out += (t_pay - t_prev) * math.exp(-(lam + r) * t_pay)
    return out


def flat_cds_spread(lam: float, r: float, dates, delta: float) -> float:
    return delta * flat_protection_leg(lam, r, dates[-1]) \
        / flat_annuity(lam, r, dates)


# ---------------------------------------------------------------------------
# numerical differentiation


def central_difference(f, x: float, h: float = 1e-6):
    return (f(x + h) - f(x - h)) / (2.0 * h)


# ---------------------------------------------------------------------------
# hand-evaluated values for the calibrated scenario
#
# Scenario: k = 0.565, vhat = 0.07, sigmabar = 0.281, k0 = 0.325,
# yhat = 0.003, sigma0 = 0.036, mu = 0.1, rho = -0.558, rbar = 0,
# lambdaP = (0.1225, 0.1225, 0.1225), x0 = (0.07, 0.003, 0); premium
# theta1hat = theta2hat = 0.001, Theta11 = Theta22 = 0.002,
# lambdaQ = (0.001, 0.1225, 0.1225).

CAL = {
    # drift at x0: v and y start at their long-run means, so only the
    # log-price component moves: mu - v0/2 = 0.1 - 0.035
    "drift_at_x0": (0.0, 0.0, 0.065),
    # diffusion variances at x0 are (v0, y0, v0)
    "variance_at_x0": (0.07, 0.003, 0.07),
    # risk-neutral shift of the variance mean reversion:
    # -0.565 + 0.281 * 0.002
    "A_Q_00": -0.564438,
    # risk-neutral variance drift constant: 0.565 * 0.07 + 0.281 * 0.001
    "b_Q_0": 0.039831,
    # default-event premium at x0:
    #   lamP(x0) = 0.1225 * (1 + 0.07 + 0.003) = 0.13144250
    #   lamQ(x0) = 0.001 + 0.1225 * 0.073     = 0.00994250
    #   gamma    = lamQ/lamP - 1
    "gamma_at_x0": 0.0099425 / 0.131442500 - 1.0,   # -0.92435855985...
    # lowest diffusive premium keeping the variance floor:
    # sigmabar/2 - k*vhat/sigmabar = 0.1405 - 0.03955/0.281
    "theta_floor": 0.1405 - 0.03955 / 0.281,        # -2.47331e-4
    # variance-floor margins of the base parameters:
    # k*vhat - sigmabar^2/2 and k0*yhat - sigma0^2/2
    "feller_margin_v": 0.03955 - 0.5 * 0.281**2,    # 6.95e-5
    "feller_margin_y": 0.000975 - 0.5 * 0.036**2,   # 3.27e-4
}
