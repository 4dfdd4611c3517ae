"""Shared fixtures: the calibrated jump-to-default scenario."""

from __future__ import annotations

import numpy as np
import pytest

from defaultable import (HestonJtdParams, HestonPremium, PricingContext,
                         to_affine)


@pytest.fixture(scope="session")
def jtd() -> HestonJtdParams:
    return HestonJtdParams(k=0.565, vhat=0.07, sigmabar=0.281,
                           k0=0.325, yhat=0.003, sigma0=0.036,
                           mu=0.1, rho=-0.558, rbar=0.0,
                           lambdaP=(0.1225, 0.1225, 0.1225))


@pytest.fixture(scope="session")
def premium() -> HestonPremium:
    return HestonPremium(theta1hat=0.001, theta2hat=0.001,
                         Theta11=0.002, Theta22=0.002,
                         lambdaQ=(0.001, 0.1225, 0.1225))


@pytest.fixture(scope="session")
def jtd_affine(jtd):
    """(params, lambdaP, rate) triple of the calibrated scenario."""
    return to_affine(jtd)


@pytest.fixture(scope="session")
def ctx(jtd, premium) -> PricingContext:
    return PricingContext.from_heston(jtd, premium)


@pytest.fixture(scope="session")
def x0(jtd_affine) -> np.ndarray:
    return jtd_affine[0].x0
