"""Random model and premium generators for property tests.

The samplers construct parameters satisfying every restriction by
building each block directly on its constraint set; the violators take
an admissible draw and push exactly one quantity past its bound, so a
correct validator must flag that clause and no other.
"""

from __future__ import annotations

import numpy as np

from defaultable import AffineModelParams, RiskPremiumSpec, SpecAffine

ADMISSIBILITY_CLAUSES = ("drift-floor", "mean-reversion", "diffusion-rows",
                         "variance-loadings", "variance-offset")
PREMIUM_CLAUSES = ("drift-floor", "mean-reversion", "intensity")


def random_admissible(rng: np.random.Generator, d: int | None = None,
                      m: int | None = None) -> AffineModelParams:
    if d is None:
        d = int(rng.integers(2, 6))
    if m is None:
        m = int(rng.integers(1, d))
    A = rng.normal(scale=0.5, size=(d, d))
    for i in range(m):
        A[i, m:] = 0.0                      # no feedback from the free block
        for j in range(m):
            if j != i:
                A[i, j] = abs(A[i, j])      # off-diagonal inflows nonnegative
        A[i, i] = -0.1 - abs(A[i, i])

    Sigma = rng.normal(scale=0.4, size=(d, d))
    for i in range(m):
        Sigma[i] = 0.0
        Sigma[i, i] = 0.1 + rng.random()

    beta = np.zeros((d, d))
    for i in range(m):
        beta[i, i] = 0.1 + rng.random()
        beta[i, m:] = rng.random(d - m)     # free-block variances may load

    alpha = np.zeros(d)
    alpha[m:] = 0.05 + rng.random(d - m)

    b = rng.normal(scale=0.3, size=d)
    for i in range(m):
        b[i] = 0.5 * Sigma[i, i] ** 2 * beta[i, i] + 0.05 + 0.3 * rng.random()

    x0 = rng.normal(scale=0.5, size=d)
    x0[:m] = 0.05 + rng.random(m)
    return AffineModelParams(d=d, m=m, A=A, b=b, Sigma=Sigma,
                             alpha=alpha, beta=beta, x0=x0)


def _rebuild(p: AffineModelParams, **changes) -> AffineModelParams:
    fields = dict(d=p.d, m=p.m, A=p.A.copy(), b=p.b.copy(),
                  Sigma=p.Sigma.copy(), alpha=p.alpha.copy(),
                  beta=p.beta.copy(), x0=p.x0.copy())
    fields.update(changes)
    return AffineModelParams(**fields)


def violate_admissibility(rng: np.random.Generator, p: AffineModelParams,
                          clause: str) -> AffineModelParams:
    """Push one parameter of an admissible draw past the named bound."""
    d, m = p.d, p.m
    i = int(rng.integers(m))
    bump = 0.01 + 0.1 * rng.random()

    if clause == "drift-floor":
        b = p.b.copy()
        b[i] = 0.5 * p.Sigma[i, i] ** 2 * p.beta[i, i] - bump
        return _rebuild(p, b=b)

    if clause == "mean-reversion":
        A = p.A.copy()
        if m < d and rng.random() < 0.5:
            A[i, int(rng.integers(m, d))] = bump * (1 if rng.random() < 0.5 else -1)
        elif m > 1:
            j = (i + 1 + int(rng.integers(m - 1))) % m
            A[i, j] = -bump
        else:
            A[i, m] = bump  # single positive component: break the zero block
        return _rebuild(p, A=A)

    if clause == "diffusion-rows":
        Sigma = p.Sigma.copy()
        j = (i + 1 + int(rng.integers(d - 1))) % d
        Sigma[i, j] = bump
        return _rebuild(p, Sigma=Sigma)

    if clause == "variance-loadings":
        beta = p.beta.copy()
        choice = rng.random()
        if choice < 1 / 3:
            beta[i, i] = 0.0                      # own loading must be positive
        elif choice < 2 / 3 and m < d:
            beta[i, int(rng.integers(m, d))] = -min(bump, 0.04)
        else:
            beta[int(rng.integers(m, d)), int(rng.integers(d))] = bump
        return _rebuild(p, beta=beta)

    if clause == "variance-offset":
        alpha = p.alpha.copy()
        if m < d and rng.random() < 0.5:
            alpha[int(rng.integers(m, d))] = -bump
        else:
            alpha[i] = bump
        return _rebuild(p, alpha=alpha)

    raise ValueError(f"unknown clause {clause!r}")


def random_premium(rng: np.random.Generator,
                   p: AffineModelParams) -> RiskPremiumSpec:
    """A premium satisfying every preservation condition for ``p``."""
    d, m = p.d, p.m
    thetahat = rng.normal(scale=0.3, size=d)
    for i in range(m):
        floor = (0.5 * p.Sigma[i, i] ** 2 * p.beta[i, i] - p.b[i]) / p.Sigma[i, i]
        thetahat[i] = floor + 1e-6 + 0.3 * rng.random()

    Theta = rng.normal(scale=0.2, size=(d, d))
    for i in range(m):
        Theta[i, m:] = 0.0                        # keep the zero block exactly
        for j in range(m):
            if j != i:
                lo = -p.A[i, j] / p.Sigma[i, i]
                Theta[i, j] = lo + 1e-6 + 0.2 * rng.random()

    vec = np.zeros(d)
    vec[:m] = rng.random(m) * 0.2
    lamQ = SpecAffine(0.01 + 0.2 * rng.random(), vec)
    return RiskPremiumSpec(thetahat=thetahat, Theta=Theta, lambdaQ=lamQ)


def violate_premium(rng: np.random.Generator, p: AffineModelParams,
                    good: RiskPremiumSpec, clause: str) -> RiskPremiumSpec:
    """Break exactly one preservation clause of an otherwise valid premium."""
    d, m = p.d, p.m
    i = int(rng.integers(m))
    bump = 0.01 + 0.1 * rng.random()

    if clause == "drift-floor":
        thetahat = good.thetahat.copy()
        floor = (0.5 * p.Sigma[i, i] ** 2 * p.beta[i, i] - p.b[i]) / p.Sigma[i, i]
        thetahat[i] = floor - bump / p.Sigma[i, i]
        return RiskPremiumSpec(thetahat, good.Theta, good.lambdaQ)

    if clause == "mean-reversion":
        Theta = good.Theta.copy()
        if m < d and rng.random() < 0.5:
            Theta[i, int(rng.integers(m, d))] = bump
        elif m > 1:
            j = (i + 1 + int(rng.integers(m - 1))) % m
            Theta[i, j] = (-p.A[i, j] - bump) / p.Sigma[i, i]
        else:
            Theta[i, m] = bump
        return RiskPremiumSpec(good.thetahat, Theta, good.lambdaQ)

    if clause == "intensity":
        choice = rng.random()
        if choice < 1 / 3:
            lamQ = SpecAffine(-bump, good.lambdaQ.vec)
        elif choice < 2 / 3:
            vec = good.lambdaQ.vec.copy()
            vec[i] = -bump
            lamQ = SpecAffine(good.lambdaQ.bar, vec)
        else:
            lamQ = SpecAffine(0.0, np.zeros(d))   # identically zero
        return RiskPremiumSpec(good.thetahat, good.Theta, lamQ)

    raise ValueError(f"unknown clause {clause!r}")
