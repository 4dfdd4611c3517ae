"""Simulation oracle for the defaultable affine model.

Simulates the diffusion under either measure, the default time by the
exponential-threshold construction on the integrated intensity, and turns
path batches into estimates (with standard errors) of every quantity the
transform machinery computes analytically.  Two step schemes: a
full-truncation Euler step for any admissible model, and an exact
noncentral chi-square transition for models whose positive block is
diagonal (the jump-to-default Heston class), with the log price driven by
the exact Brownian increments recovered from the factor paths.

Reproducibility contract: paths are generated in fixed-size blocks, each
from its own counter-based substream keyed by (seed, block index), and
estimates reduce arrays in deterministic order, so results are bit-equal
for a given seed no matter how many worker threads run the blocks.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .affine import AffineModelParams, SpecAffine, validate_admissibility
from .credit import CdsSchedule
from .measures import QModelParams

__all__ = [
    "SimConfig",
    "PathBatch",
    "simulate",
    "estimate",
    "save_batch",
    "load_batch",
]

BLOCK_PATHS = 65536  # substream granularity; part of the draw sequence, fixed

SCHEMES = ("full-truncation-euler", "exact-cir")


@dataclass(frozen=True)
class SimConfig:
    """Path count, step density, seed and step scheme for one run."""

    n_paths: int
    n_steps_per_year: int = 128
    seed: int = 0
    scheme: str = "full-truncation-euler"
    antithetic: bool = False

    def __post_init__(self) -> None:
        if self.n_paths < 1:
            raise ValueError("need at least one path")
        if self.n_steps_per_year < 1:
            raise ValueError("need at least one step per year")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; pick one of {SCHEMES}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if self.antithetic:
            if self.scheme != "full-truncation-euler":
                raise ValueError("antithetic pairing is defined for the Euler "
                                 "scheme only (the exact transition draws are "
                                 "not sign-symmetric)")
            if self.n_paths % 2:
                raise ValueError("antithetic runs need an even path count")


@dataclass
class PathBatch:
    """Simulation output: per-path terminal data plus observation snapshots.

    ``measure`` records which probability the paths were drawn under so the
    estimators can refuse a mismatched functional.  Snapshots at the sorted
    ``obs_times`` (the horizon is always the last entry) carry the log
    price, integrated intensity and integrated rate; default is resolved
    against ``threshold`` per path, with the crossing time interpolated on
    the step grid.
    """

    measure: str
    horizon: float
    obs_times: np.ndarray          # (K,)
    X_T: np.ndarray                # (n, d) terminal state (positive block clipped)
    log_price_obs: np.ndarray      # (n, K)
    cum_lambda_obs: np.ndarray     # (n, K) trapezoid integral of the intensity
    cum_rate_obs: np.ndarray       # (n, K) trapezoid integral of the short rate
    threshold: np.ndarray          # (n,) unit-exponential default triggers
    default_time: np.ndarray       # (n,) crossing time, nan while alive at horizon
    disc_at_default: np.ndarray    # (n,) exp(-int r) at the crossing, nan if alive
    substream: np.ndarray          # (n,) block id the path was drawn in
    truncation_count: int          # Euler steps that clipped a negative component
    config: SimConfig

    @property
    def n_paths(self) -> int:
        return self.X_T.shape[0]

    def alive_at(self, k: int) -> np.ndarray:
        return self.cum_lambda_obs[:, k] < self.threshold

    def obs_index(self, t: float) -> int:
        hits = np.nonzero(np.abs(self.obs_times - t) <= 1e-9 * max(1.0, abs(t)))[0]
        if hits.size == 0:
            raise ValueError(f"time {t} is not among the recorded observation "
                             f"times {self.obs_times.tolist()}")
        return int(hits[0])


def _split_model(model, intensity, rate):
    if isinstance(model, QModelParams):
        if intensity is not None or rate is not None:
            raise ValueError("a risk-neutral model carries its own intensity "
                             "and rate; pass them only with plain parameters")
        return model.params, model.lambdaQ, model.rate, "Q"
    if not isinstance(model, AffineModelParams):
        raise TypeError("model must be AffineModelParams or QModelParams")
    if intensity is None:
        raise ValueError("physical-measure simulation needs an intensity")
    params = model
    intensity.validate_nonnegative(params.m, name="intensity")
    rate = SpecAffine.zero(params.d) if rate is None else rate
    rate.validate_nonnegative(params.m, name="rate")
    return params, intensity, rate, "P"


def _step_grid(T: float, obs_times, steps_per_year: int):
    n_steps = max(1, math.ceil(T * steps_per_year - 1e-9))
    grid = np.linspace(0.0, T, n_steps + 1)
    obs = np.sort(np.asarray(obs_times, dtype=float))
    if obs[0] <= 0.0 or obs[-1] > T + 1e-12:
        raise ValueError("observation times must lie in (0, T]")
    obs[-1] = min(obs[-1], T)
    grid = np.union1d(grid, obs)
    # collapse float near-duplicates from the union
    keep = np.concatenate([[True], np.diff(grid) > 1e-12 * max(1.0, T)])
    grid = grid[keep]
    obs_idx = np.array([int(np.argmin(np.abs(grid - t))) for t in obs])
    return grid, obs, obs_idx


def _exact_cir_applicable(params: AffineModelParams) -> str | None:
    """Reason the exact transition does not apply, or None if it does."""
    m, d = params.m, params.d
    A, Sigma, beta = params.A, params.Sigma, params.beta
    I = np.arange(m)
    if np.any(np.diag(A)[I] >= 0.0):
        return "positive components must all mean-revert (negative diagonal drift)"
    off = A[:m, :m].copy()
    np.fill_diagonal(off, 0.0)
    if np.any(off != 0.0):
        return "positive block of the drift matrix must be diagonal"
    if np.any(A[m:, m:] != 0.0):
        return "unconstrained components must not feed back on each other"
    if np.any(np.diag(Sigma)[I] * np.sqrt(np.diag(beta)[:m]) <= 0.0):
        return "each positive component needs its own noise (exact transition " \
               "of a deterministic component is not implemented)"
    return None


def _simulate_block(params, intensity, rate, grid, obs_idx, cfg, block_id,
                    n_block):
    d, m = params.d, params.m
    A, b, Sigma, alpha, beta = params.A, params.b, params.Sigma, params.alpha, params.beta
    rng = np.random.Generator(np.random.Philox(key=(cfg.seed, block_id)))
    n = n_block
    K = len(obs_idx)

    x = np.broadcast_to(params.x0, (n, d)).copy()
    cum_lam = np.zeros(n)
    cum_r = np.zeros(n)
    lam_prev = np.full(n, intensity(params.x0[None, :])[0])
    r_prev = np.full(n, rate(params.x0[None, :])[0])

    log_price_obs = np.empty((n, K))
    cum_lam_obs = np.empty((n, K))
    cum_r_obs = np.empty((n, K))
    default_time = np.full(n, np.nan)
    disc_at_default = np.full(n, np.nan)
    truncations = 0

    if cfg.antithetic:
        u = rng.random(n // 2)
        threshold = np.empty(n)
        threshold[0::2] = -np.log1p(-u)
        threshold[1::2] = -np.log(u)
    else:
        threshold = rng.exponential(size=n)

    euler = cfg.scheme == "full-truncation-euler"
    if not euler:
        kappa = -np.diag(A)[:m]
        s2 = (np.diag(Sigma)[:m] * np.sqrt(np.diag(beta)[:m])) ** 2
        dof = 4.0 * b[:m] / s2
        # Brownians of the positive factors are pinned by the factor paths;
        # the rest need an independent Gaussian wherever some row loads on them
        gauss_k = [k for k in range(m, d) if np.any(Sigma[m:, k] != 0.0)]

    obs_cursor = 0
    next_obs = obs_idx[obs_cursor]
    for step in range(1, len(grid)):
        dt = grid[step] - grid[step - 1]
        if euler:
            clipped = x.copy()
            np.maximum(clipped[:, :m], 0.0, out=clipped[:, :m])
            truncations += int(np.count_nonzero(clipped[:, :m] != x[:, :m]))
            var = np.maximum(alpha + clipped @ beta, 0.0) * dt
            Z = rng.standard_normal((n, d))
            if cfg.antithetic:
                Z[1::2] = -Z[0::2]
            x = x + (clipped @ A.T + b) * dt + (Z * np.sqrt(var)) @ Sigma.T
            state = x.copy()
            np.maximum(state[:, :m], 0.0, out=state[:, :m])
        else:
            state = x.copy()
            integrals = np.empty((n, m))
            shocks = np.zeros((n, d))
            for i in range(m):
                decay = math.exp(-kappa[i] * dt)
                c = s2[i] * (1.0 - decay) / (4.0 * kappa[i])
                nc = x[:, i] * decay / c
                if dof[i] > 1.0:
                    zi = rng.standard_normal(n)
                    gi = rng.gamma((dof[i] - 1.0) / 2.0, 2.0, size=n)
                    nxt = c * ((zi + np.sqrt(nc)) ** 2 + gi)
                else:
                    counts = rng.poisson(0.5 * nc)
                    nxt = c * rng.gamma(0.5 * dof[i] + counts, 2.0)
                integrals[:, i] = 0.5 * dt * (x[:, i] + nxt)
                state[:, i] = nxt
                if Sigma[i, i] != 0.0:
                    # the factor's own equation pins its Brownian integral
                    shocks[:, i] = (nxt - x[:, i] - A[i, i] * integrals[:, i]
                                    - b[i] * dt) / Sigma[i, i]
            for k in gauss_k:
                var_k = alpha[k] * dt + integrals @ beta[:m, k]
                shocks[:, k] = rng.standard_normal(n) * np.sqrt(np.maximum(var_k, 0.0))
            state[:, m:] = (x[:, m:] + b[m:] * dt
                            + integrals @ A[m:, :m].T + shocks @ Sigma[m:, :].T)
            x = state

        lam_now = intensity(state)
        r_now = rate(state)
        new_lam = cum_lam + 0.5 * dt * (lam_prev + lam_now)
        new_r = cum_r + 0.5 * dt * (r_prev + r_now)

        crossing = np.isnan(default_time) & (new_lam >= threshold)
        if np.any(crossing):
            frac = (threshold[crossing] - cum_lam[crossing]) \
                / np.maximum(new_lam[crossing] - cum_lam[crossing], 1e-300)
            default_time[crossing] = grid[step - 1] + frac * dt
            disc_at_default[crossing] = np.exp(
                -(cum_r[crossing] + frac * (new_r[crossing] - cum_r[crossing])))

        cum_lam, cum_r = new_lam, new_r
        lam_prev, r_prev = lam_now, r_now

        while obs_cursor < K and step == next_obs:
            log_price_obs[:, obs_cursor] = state[:, -1]
            cum_lam_obs[:, obs_cursor] = cum_lam
            cum_r_obs[:, obs_cursor] = cum_r
            obs_cursor += 1
            next_obs = obs_idx[obs_cursor] if obs_cursor < K else -1

    return (state, log_price_obs, cum_lam_obs, cum_r_obs, threshold,
            default_time, disc_at_default, truncations)


def simulate(model, intensity: SpecAffine | None = None,
             rate: SpecAffine | None = None, *, T: float, cfg: SimConfig,
             obs_times=None, threads: int = 1) -> PathBatch:
    """Simulate paths of the state, intensity integral and default trigger.

    ``model`` is either plain ``AffineModelParams`` with an explicit
    ``intensity`` (physical-measure batch) or a ``QModelParams`` carrying
    its own intensity and rate (risk-neutral batch).  Snapshots are taken
    at ``obs_times`` (default: the horizon only); each requested time is
    inserted into the step grid, so it need not divide evenly.
    """
    params, lam, rt, measure = _split_model(model, intensity, rate)
    report = validate_admissibility(params, eps=1e-12)
    if not report.ok:
        raise ValueError(f"parameters are not admissible: {report.summary()}")
    if T <= 0.0:
        raise ValueError("horizon must be positive")
    if cfg.scheme == "exact-cir":
        reason = _exact_cir_applicable(params)
        if reason is not None:
            raise ValueError(f"exact-cir scheme does not apply: {reason}")
    if obs_times is None:
        obs_times = [T]
    grid, obs, obs_idx = _step_grid(T, obs_times, cfg.n_steps_per_year)

    n = cfg.n_paths
    n_blocks = (n + BLOCK_PATHS - 1) // BLOCK_PATHS
    sizes = [min(BLOCK_PATHS, n - i * BLOCK_PATHS) for i in range(n_blocks)]
    if cfg.antithetic:
        # pairs must not straddle a block boundary
        assert all(s % 2 == 0 for s in sizes[:-1]) and sizes[-1] % 2 == 0

    d = params.d
    K = len(obs)
    batch = PathBatch(
        measure=measure, horizon=float(T), obs_times=obs,
        X_T=np.empty((n, d)), log_price_obs=np.empty((n, K)),
        cum_lambda_obs=np.empty((n, K)), cum_rate_obs=np.empty((n, K)),
        threshold=np.empty(n), default_time=np.empty(n),
        disc_at_default=np.empty(n),
        substream=np.repeat(np.arange(n_blocks, dtype=np.int64),
                            sizes)[:n],
        truncation_count=0, config=cfg)

    def run(block_id: int) -> int:
        lo = block_id * BLOCK_PATHS
        hi = lo + sizes[block_id]
        out = _simulate_block(params, lam, rt, grid, obs_idx, cfg, block_id,
                              sizes[block_id])
        (batch.X_T[lo:hi], batch.log_price_obs[lo:hi],
         batch.cum_lambda_obs[lo:hi], batch.cum_rate_obs[lo:hi],
         batch.threshold[lo:hi], batch.default_time[lo:hi],
         batch.disc_at_default[lo:hi]) = out[:7]
        return out[7]

    if threads > 1 and n_blocks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            truncs = list(pool.map(run, range(n_blocks)))
    else:
        truncs = [run(i) for i in range(n_blocks)]
    batch.truncation_count = int(sum(truncs))
    return batch


# ---------------------------------------------------------------------------
# estimators

_P_ONLY = {"survival", "cdf"}
_Q_ONLY = {"bond", "call", "put", "cds"}


def _pair_stats(payoff: np.ndarray, antithetic: bool) -> tuple[float, float]:
    if antithetic:
        payoff = payoff.reshape(-1, 2).mean(axis=1)
    n = payoff.size
    mean = float(payoff.mean())
    if n < 2:
        return mean, float("nan")
    return mean, float(payoff.std(ddof=1) / math.sqrt(n))


def _binomial(indicator: np.ndarray, antithetic: bool) -> tuple[float, float]:
    if antithetic:
        # pair means are no longer 0/1; fall back to the sample SE
        return _pair_stats(indicator.astype(float), True)
    n = indicator.size
    p = float(indicator.mean())
    return p, math.sqrt(p * (1.0 - p) / n)


def estimate(batch: PathBatch, kind: str, *, strike: float | None = None,
             level: float | None = None, z=None,
             schedule: CdsSchedule | None = None,
             at: float | None = None):
    """Turn a path batch into (estimate, standard error) for one functional.

    Kinds: ``survival`` and ``cdf`` (physical batches), ``bond``, ``call``,
    ``put`` and ``cds`` (risk-neutral batches), and ``transform`` (either;
    the estimate and reported SE are then complex, componentwise).
    ``at`` picks one of the recorded observation times (default: horizon).
    """
    if kind in _P_ONLY and batch.measure != "P":
        raise ValueError(f"{kind!r} is a physical-measure functional; this "
                         "batch was simulated under Q")
    if kind in _Q_ONLY and batch.measure != "Q":
        raise ValueError(f"{kind!r} is a priced functional; this batch was "
                         "simulated under P")
    anti = batch.config.antithetic
    k = batch.obs_index(batch.horizon if at is None else float(at))
    alive = batch.alive_at(k)

    if kind == "survival":
        return _binomial(alive, anti)

    if kind == "cdf":
        if level is None or level <= 0.0:
            raise ValueError("cdf needs a positive price level")
        hit = alive & (batch.log_price_obs[:, k] <= math.log(level))
        return _binomial(hit, anti)

    if kind == "bond":
        payoff = alive * np.exp(-batch.cum_rate_obs[:, k])
        return _pair_stats(payoff, anti)

    if kind in ("call", "put"):
        if strike is None or strike < 0.0:
            raise ValueError(f"{kind} needs a nonnegative strike")
        disc = np.exp(-batch.cum_rate_obs[:, k])
        stock = np.exp(batch.log_price_obs[:, k])
        if kind == "call":
            payoff = disc * alive * np.maximum(stock - strike, 0.0)
        else:
            payoff = disc * np.where(alive, np.maximum(strike - stock, 0.0),
                                     strike)
        return _pair_stats(payoff, anti)

    if kind == "transform":
        if z is None:
            raise ValueError("transform needs an initial vector z")
        if k != len(batch.obs_times) - 1:
            raise ValueError("the full state is recorded at the horizon only")
        z = np.asarray(z, dtype=complex)
        weight = alive.astype(float)
        if batch.measure == "Q":
            weight = weight * np.exp(-batch.cum_rate_obs[:, k])
        vals = weight * np.exp(batch.X_T @ z)
        re, re_se = _pair_stats(vals.real, anti)
        im, im_se = _pair_stats(vals.imag, anti)
        return complex(re, im), complex(re_se, im_se)

    if kind == "cds":
        if schedule is None:
            raise ValueError("cds needs a payment schedule")
        dates = schedule.dates
        if dates[0] != 0.0:
            raise ValueError("schedule must start at the simulation start")
        horizon = dates[-1]
        if horizon > batch.horizon + 1e-12:
            raise ValueError("schedule extends past the simulated horizon")
        defaulted = ~np.isnan(batch.default_time) \
            & (batch.default_time <= horizon)
        protection = np.where(defaulted, batch.disc_at_default, 0.0)
        protection = np.nan_to_num(protection)
        annuity = np.zeros(batch.n_paths)
        for t_prev, t_pay in zip(dates[:-1], dates[1:]):
            kk = batch.obs_index(float(t_pay))
            annuity += (t_pay - t_prev) * batch.alive_at(kk) \
                * np.exp(-batch.cum_rate_obs[:, kk])
        if anti:
            protection = protection.reshape(-1, 2).mean(axis=1)
            annuity = annuity.reshape(-1, 2).mean(axis=1)
        n = protection.size
        pm, am = protection.mean(), annuity.mean()
        if am <= 0.0:
            raise ValueError("no surviving premium payments in the batch")
        spread = schedule.delta * pm / am
        cov = np.cov(protection, annuity, ddof=1)
        var = (cov[0, 0] / am**2 + pm**2 * cov[1, 1] / am**4
               - 2.0 * pm * cov[0, 1] / am**3)
        se = schedule.delta * math.sqrt(max(var, 0.0) / n)
        return spread, se

    raise ValueError(f"unknown functional {kind!r}")


# ---------------------------------------------------------------------------
# binary round trip (regression pinning)

_DUMP_FIELDS = ("X_T", "log_price_obs", "cum_lambda_obs", "cum_rate_obs",
                "threshold", "default_time", "disc_at_default")


def save_batch(batch: PathBatch, path: str) -> None:
    """Dump a batch as a JSON header line plus little-endian double arrays."""
    header = {
        "measure": batch.measure,
        "horizon": batch.horizon,
        "obs_times": batch.obs_times.tolist(),
        "n_paths": batch.n_paths,
        "truncation_count": batch.truncation_count,
        "config": {
            "n_paths": batch.config.n_paths,
            "n_steps_per_year": batch.config.n_steps_per_year,
            "seed": batch.config.seed,
            "scheme": batch.config.scheme,
            "antithetic": batch.config.antithetic,
        },
        "fields": {name: list(getattr(batch, name).shape)
                   for name in _DUMP_FIELDS},
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        for name in _DUMP_FIELDS:
            fh.write(np.ascontiguousarray(
                getattr(batch, name), dtype="<f8").tobytes())


def load_batch(path: str) -> PathBatch:
    """Read back a batch written by :func:`save_batch`."""
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        arrays = {}
        for name in _DUMP_FIELDS:  # payload order, not header key order
            shape = header["fields"][name]
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(8 * count), dtype="<f8")
            arrays[name] = data.reshape(shape).copy()
    cfg = SimConfig(**header["config"])
    n = header["n_paths"]
    n_blocks = (n + BLOCK_PATHS - 1) // BLOCK_PATHS
    sizes = [min(BLOCK_PATHS, n - i * BLOCK_PATHS) for i in range(n_blocks)]
    return PathBatch(
        measure=header["measure"], horizon=header["horizon"],
        obs_times=np.asarray(header["obs_times"], dtype=float),
        substream=np.repeat(np.arange(n_blocks, dtype=np.int64), sizes)[:n],
        truncation_count=header["truncation_count"], config=cfg, **arrays)
