"""Core state-space model: affine diffusions on the cone R^m_{++} x R^(d-m).

The state vector X = (v, Y_1, ..., Y_{d-2}, L) collects the variance
process, additional factors and the pre-default log stock price L, and
follows

    dX_t = (A X_t + b) dt + Sigma sqrt(R_t) dW_t,

where R_t is diagonal with R_t[k, k] = alpha[k] + beta[:, k] @ X_t.
The first ``m`` components are kept strictly positive by a set of
parameter restrictions (drift floor, block structure of A, Sigma and
beta); :func:`validate_admissibility` checks them and reports every
violation in machine-readable form.

Scalar affine maps of the state (hazard rates, interest rates) are
represented by :class:`SpecAffine`.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SpecAffine",
    "AffineModelParams",
    "StockCoefficients",
    "Violation",
    "ValidationReport",
    "validate_admissibility",
    "drift",
    "diffusion_squared",
    "stock_coefficients",
    "ModelBundle",
    "model_from_dict",
    "model_to_dict",
    "load_model",
    "save_model",
]


def _readonly(a, shape, name):
    """Coerce to a float array of the given shape and freeze it."""
    out = np.array(a, dtype=float)
    if out.shape != shape:
        raise ValueError(f"{name} must have shape {shape}, got {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite entries")
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class SpecAffine:
    """Scalar affine function of the state, x -> bar + vec @ x.

    Used for hazard rates and interest rates. ``vec`` has one entry per
    state component.
    """

    bar: float
    vec: np.ndarray

    def __post_init__(self):
        vec = np.atleast_1d(np.array(self.vec, dtype=float))
        if vec.ndim != 1:
            raise ValueError("vec must be a vector")
        if not (np.isfinite(self.bar) and np.all(np.isfinite(vec))):
            raise ValueError("SpecAffine entries must be finite")
        vec.setflags(write=False)
        object.__setattr__(self, "bar", float(self.bar))
        object.__setattr__(self, "vec", vec)

    @classmethod
    def zero(cls, d: int) -> SpecAffine:
        return cls(0.0, np.zeros(d))

    @property
    def is_zero(self) -> bool:
        return self.bar == 0.0 and not self.vec.any()

    def __call__(self, x: np.ndarray) -> np.ndarray | float:
        # batched evaluation: x may be (d,) or (..., d)
        x = np.asarray(x, dtype=float)
        return self.bar + x @ self.vec

    def validate_nonnegative(self, m: int, *, strict: bool = False, name: str = "spec") -> None:
        """Check nonnegativity on the cone R^m_{++} x R^(d-m).

        The function bar + vec @ x is nonnegative on the whole cone iff
        bar >= 0, vec[:m] >= 0 and vec[m:] == 0.  With ``strict`` the
        function must also be nondegenerate: bar + sum(vec) > 0.
        """
        if self.bar < 0.0:
            raise ValueError(f"{name}: constant term must be nonnegative, got {self.bar}")
        if np.any(self.vec[:m] < 0.0):
            raise ValueError(f"{name}: loadings on positive components must be nonnegative")
        if self.vec[m:].any():
            raise ValueError(f"{name}: loadings on real-valued components must vanish")
        if strict and self.bar + self.vec.sum() <= 0.0:
            raise ValueError(f"{name}: must not be identically zero")


@dataclass(frozen=True)
class AffineModelParams:
    """Parameters (A, b, Sigma, alpha, beta) of the state diffusion.

    ``m`` of the ``d`` components live on the positive half-line.  The
    diagonal variance matrix is R[k, k](x) = alpha[k] + beta[:, k] @ x,
    so column k of beta holds the state loadings of the k-th squared
    diffusion factor.
    """

    d: int
    m: int
    A: np.ndarray
    b: np.ndarray
    Sigma: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    x0: np.ndarray

    def __post_init__(self):
        d, m = int(self.d), int(self.m)
        if not 1 <= m < d:
            raise ValueError(f"need 1 <= m < d, got m={m}, d={d}")
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "A", _readonly(self.A, (d, d), "A"))
        object.__setattr__(self, "b", _readonly(self.b, (d,), "b"))
        object.__setattr__(self, "Sigma", _readonly(self.Sigma, (d, d), "Sigma"))
        object.__setattr__(self, "alpha", _readonly(self.alpha, (d,), "alpha"))
        object.__setattr__(self, "beta", _readonly(self.beta, (d, d), "beta"))
        object.__setattr__(self, "x0", _readonly(self.x0, (d,), "x0"))
        if np.any(self.x0[:m] <= 0.0):
            raise ValueError("x0 must start inside the cone: first m components > 0")

    def with_x0(self, x0) -> AffineModelParams:
        return AffineModelParams(self.d, self.m, self.A, self.b, self.Sigma,
                                 self.alpha, self.beta, x0)


@dataclass(frozen=True)
class StockCoefficients:
    """Coefficients of the scalar SDE satisfied by the stock price.

    dS/S = (sbar + mu1 log S + mu2 v + sum_i eta[i] Y^i
            + sum_{i<m} etabar[i] Y^i) dt + sigma sqrt(v) dW^1 + ...
    """

    sbar: float
    mu1: float
    mu2: float
    eta: np.ndarray      # length d-2, drift loadings of all factors Y^i
    etabar: np.ndarray   # length m-1, extra loadings of the positive factors
    sigma: float


@dataclass(frozen=True)
class Violation:
    """One failed parameter restriction.

    ``clause`` identifies the restriction group, ``indices`` the entry,
    and ``lhs``/``rhs`` the two sides of the violated (in)equality.
    """

    clause: str
    indices: tuple[int, ...]
    lhs: float
    rhs: float

    def __str__(self):
        ij = ",".join(str(i) for i in self.indices)
        return f"[{self.clause}]({ij}) lhs={self.lhs:.6g} rhs={self.rhs:.6g}"


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of :func:`validate_admissibility`."""

    ok: bool
    violations: list[Violation] = field(default_factory=list)

    def __bool__(self):
        return self.ok

    def summary(self) -> str:
        if self.ok:
            return "admissible"
        lines = [f"{len(self.violations)} violation(s):"]
        lines += [f"  {v}" for v in self.violations]
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "violations": [
                {"clause": v.clause, "indices": list(v.indices), "lhs": v.lhs, "rhs": v.rhs}
                for v in self.violations
            ],
        }


def validate_admissibility(params: AffineModelParams, eps: float = 0.0) -> ValidationReport:
    """Check the parameter restrictions that keep X on the cone.

    Equalities fail when |lhs| > eps, weak inequalities when
    lhs < rhs - eps, and strict ones when lhs <= rhs - eps.  Structural
    problems (wrong shapes, non-finite entries) raise at construction
    time and never appear in the report.

    Clauses:

    * ``drift-floor``      b[i] >= Sigma[i,i]^2 beta[i,i] / 2 on positive components
    * ``mean-reversion``   A[i, j] = 0 into real components, A[i, j] >= 0 off-diagonal
    * ``diffusion-rows``   Sigma rows of positive components are diagonal
    * ``variance-loadings`` beta >= 0, real components load no variance,
                            positive block diagonal with beta[i, i] > 0
    * ``variance-offset``  alpha >= 0, zero on positive components,
                            alpha[j] > -sum_i beta[i, j] on the rest
    """
    d, m = params.d, params.m
    A, b, Sigma, alpha, beta = params.A, params.b, params.Sigma, params.alpha, params.beta
    bad: list[Violation] = []

    def eq(clause, idx, lhs):
        if abs(lhs) > eps:
            bad.append(Violation(clause, idx, float(lhs), 0.0))

    def ge(clause, idx, lhs, rhs=0.0):
        if lhs < rhs - eps:
            bad.append(Violation(clause, idx, float(lhs), float(rhs)))

    def gt(clause, idx, lhs, rhs=0.0):
        if lhs <= rhs - eps:
            bad.append(Violation(clause, idx, float(lhs), float(rhs)))

    I, J = range(m), range(m, d)

    for i in I:
        ge("drift-floor", (i,), b[i], 0.5 * Sigma[i, i] ** 2 * beta[i, i])

    for i in I:
        for j in J:
            eq("mean-reversion", (i, j), A[i, j])
        for j in I:
            if j != i:
                ge("mean-reversion", (i, j), A[i, j])

    for i in I:
        for j in range(d):
            if j != i:
                eq("diffusion-rows", (i, j), Sigma[i, j])

    for j in J:
        for i in range(d):
            eq("variance-loadings", (j, i), beta[j, i])
    for i in I:
        gt("variance-loadings", (i, i), beta[i, i])
        for j in range(d):
            if j != i:
                if j < m:
                    eq("variance-loadings", (i, j), beta[i, j])
                else:
                    ge("variance-loadings", (i, j), beta[i, j])

    for i in I:
        eq("variance-offset", (i,), alpha[i])
    for j in J:
        ge("variance-offset", (j,), alpha[j])
        gt("variance-offset", (j,), alpha[j], -beta[:m, j].sum())

    return ValidationReport(not bad, bad)


def drift(params: AffineModelParams, x: np.ndarray) -> np.ndarray:
    """Drift A x + b, batched over leading axes of x."""
    x = np.asarray(x, dtype=float)
    return x @ params.A.T + params.b


def diffusion_squared(params: AffineModelParams, x: np.ndarray) -> np.ndarray:
    """Diagonal of R(x): alpha[k] + beta[:, k] @ x, batched like :func:`drift`."""
    x = np.asarray(x, dtype=float)
    return params.alpha + x @ params.beta


def stock_coefficients(params: AffineModelParams) -> StockCoefficients:
    """Read the scalar stock-price SDE coefficients off the matrix parameters.

    The log price is the last state component; the variance v the first.
    Requires d >= 2 and the log price to sit outside the positive block.
    """
    d, m = params.d, params.m
    if d < 2:
        raise ValueError("stock dynamics need at least two state components")
    A, b, Sigma, alpha, beta = params.A, params.b, params.Sigma, params.alpha, params.beta
    k = np.arange(m, d)  # components whose squared diffusion can load on any factor
    w = Sigma[d - 1, k] ** 2
    sbar = b[d - 1] + 0.5 * w @ alpha[k]
    mu1 = A[d - 1, d - 1]
    mu2 = A[d - 1, 0] + 0.5 * Sigma[d - 1, 0] ** 2 * beta[0, 0] + 0.5 * w @ beta[0, k]
    eta = A[d - 1, 1:d - 1].copy()
    etabar = np.array([0.5 * Sigma[d - 1, i] ** 2 * beta[i, i] + 0.5 * w @ beta[i, k]
                       for i in range(1, m)])
    sigma = Sigma[d - 1, 0] * np.sqrt(beta[0, 0])
    return StockCoefficients(float(sbar), float(mu1), float(mu2), eta, etabar, float(sigma))


# ---------------------------------------------------------------------------
# model documents: JSON round-trip for parameters plus rate/intensity specs


@dataclass(frozen=True)
class ModelBundle:
    """A model document: diffusion parameters plus the attached scalar specs."""

    params: AffineModelParams
    intensity_p: SpecAffine | None
    intensity_q: SpecAffine | None
    rate: SpecAffine


def _spec_from(obj, d: int, name: str) -> SpecAffine:
    if isinstance(obj, (int, float)):
        return SpecAffine(float(obj), np.zeros(d))
    return SpecAffine(float(obj["bar"]), np.asarray(obj["vec"], dtype=float))


def model_from_dict(obj: dict) -> ModelBundle:
    """Build a :class:`ModelBundle` from a plain dict (parsed JSON)."""
    try:
        params = AffineModelParams(
            d=int(obj["d"]), m=int(obj["m"]),
            A=np.asarray(obj["A"], dtype=float),
            b=np.asarray(obj["b"], dtype=float),
            Sigma=np.asarray(obj["Sigma"], dtype=float),
            alpha=np.asarray(obj["alpha"], dtype=float),
            beta=np.asarray(obj["beta"], dtype=float),
            x0=np.asarray(obj["x0"], dtype=float),
        )
    except KeyError as exc:
        raise ValueError(f"model document is missing field {exc}") from None
    d = params.d
    ip = _spec_from(obj["intensity_P"], d, "intensity_P") if "intensity_P" in obj else None
    iq = _spec_from(obj["intensity_Q"], d, "intensity_Q") if "intensity_Q" in obj else None
    rate = _spec_from(obj["rate"], d, "rate") if "rate" in obj else SpecAffine.zero(d)
    return ModelBundle(params, ip, iq, rate)


def model_to_dict(bundle: ModelBundle) -> dict:
    p = bundle.params
    out = {
        "d": p.d, "m": p.m,
        "A": p.A.tolist(), "b": p.b.tolist(),
        "Sigma": p.Sigma.tolist(),
        "alpha": p.alpha.tolist(), "beta": p.beta.tolist(),
        "x0": p.x0.tolist(),
    }
    if bundle.intensity_p is not None:
        out["intensity_P"] = {"bar": bundle.intensity_p.bar, "vec": bundle.intensity_p.vec.tolist()}
    if bundle.intensity_q is not None:
        out["intensity_Q"] = {"bar": bundle.intensity_q.bar, "vec": bundle.intensity_q.vec.tolist()}
    out["rate"] = {"bar": bundle.rate.bar, "vec": bundle.rate.vec.tolist()}
    return out


def load_model(path) -> ModelBundle:
    with open(path) as f:
        obj = json.load(f)
    return model_from_dict(obj)


def save_model(bundle: ModelBundle, path) -> None:
    with open(path, "w") as f:
        json.dump(model_to_dict(bundle), f, indent=2)
        f.write("\n")
