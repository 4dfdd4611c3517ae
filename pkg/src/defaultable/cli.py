"""Command line front end: model files in, prices and tables out.

Subcommands either print a JSON result, dump a CSV table, or (for
``run``) execute a whole scenario file and leave one artifact per task
in the output directory.  Inputs are JSON documents: either the
jump-to-default stochastic-volatility form (keys ``k``, ``vhat``, ...)
or the generic affine form (keys ``d``, ``m``, ``A``, ...), with an
optional premium document selecting the pricing measure.

Exit codes: 0 on success, 1 when a computation fails numerically
(moment explosion, no implied volatility, quadrature that will not
converge), 2 for input problems (malformed JSON, missing fields, an
inadmissible model, a premium violating the preservation conditions).
All output is deterministic for fixed inputs: floats are rendered with
``repr`` (shortest round trip) and JSON keys are sorted, so repeated
runs with the same seed are byte-identical regardless of thread count.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from .affine import (AffineModelParams, ModelBundle, SpecAffine, model_from_dict,
                     validate_admissibility)
from .credit import (CdsSchedule, PricingContext, cds_spread, defaultable_bond,
                     riskfree_bond, survival_probability)
from .fourier import (DampingConfig, call_price, call_prices_fft, implied_vol,
                      put_price, survival_distribution)
from .heston import (HestonJtdParams, HestonPremium, assemble_premium,
                     heston_from_dict, premium_from_dict, to_affine,
                     validate_heston_preserving)
from .measures import (MeasureChangeError, RiskPremiumSpec, apply_measure_change,
                       verify_drift_condition)
from .montecarlo import (SimConfig, _exact_cir_applicable, estimate, save_batch,
                         simulate)
from .riccati import DEFAULT_ATOL, DEFAULT_RTOL, MeasureFlavor, solve

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_INPUT = 2

# default pricing grids: 7 maturities spanning [0.5, 3] crossed with 13
# moneyness levels at a 0.05 step
DEFAULT_MATURITIES = tuple(np.linspace(0.5, 3.0, 7))
DEFAULT_MONEYNESS = tuple((14 + k) / 20.0 for k in range(13))


class InputError(ValueError):
    """A problem with the user's files or parameters (exit code 2)."""


# ---------------------------------------------------------------------------
# input documents


def _load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON: {exc.msg} at line "
                         f"{exc.lineno} column {exc.colno}") from None


@dataclass
class LoadedModel:
    """A model document plus (optionally) a premium, ready to price with."""

    heston: HestonJtdParams | None
    heston_premium: HestonPremium | None
    bundle: ModelBundle
    premium: RiskPremiumSpec | None   # generic-document premium, if any

    @property
    def params(self) -> AffineModelParams:
        return self.bundle.params

    @property
    def lambdaP(self) -> SpecAffine:
        lam = self.bundle.intensity_p
        if lam is None:
            raise InputError("model document carries no physical intensity")
        return lam

    def premium_spec(self) -> RiskPremiumSpec:
        if self.heston is not None:
            return assemble_premium(self.heston, self.heston_premium)
        if self.premium is not None:
            return self.premium
        lamQ = self.bundle.intensity_q or self.bundle.intensity_p
        if lamQ is None:
            raise InputError("no risk-neutral intensity: supply a premium "
                             "document or an intensity_Q field")
        return RiskPremiumSpec.identity(lamQ)

    def context(self, common: Common) -> PricingContext:
        kw = dict(engine="auto", rtol=common.rtol, atol=common.atol)
        if self.heston is not None:
            return PricingContext.from_heston(self.heston,
                                              self.heston_premium, **kw)
        return PricingContext.from_bundle(self.bundle, self.premium, **kw)

    def reference_context(self, common: Common) -> PricingContext | None:
        """Default-free twin for implied-vol comparisons (when it exists)."""
        if self.heston is None:
            return None
        return PricingContext.default_free(self.heston, self.heston_premium,
                                           engine="auto", rtol=common.rtol,
                                           atol=common.atol)


def _heston_default_premium(h: HestonJtdParams) -> HestonPremium:
    # no diffusive premium, physical hazard reused for pricing
    return HestonPremium(theta1hat=0.0, theta2hat=0.0, Theta11=0.0,
                         Theta22=0.0, lambdaQ=h.lambdaP)


def _premium_from_obj(obj: dict, kind: str):
    try:
        if kind == "heston":
            return premium_from_dict(obj)
        lamQ = obj["lambdaQ"]
        return RiskPremiumSpec(
            thetahat=np.asarray(obj["thetahat"], dtype=float),
            Theta=np.asarray(obj["Theta"], dtype=float),
            lambdaQ=SpecAffine(float(lamQ["bar"]),
                               np.asarray(lamQ["vec"], dtype=float)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"premium document: {exc}") from None


def load_inputs(model_obj: dict, premium_obj: dict | None) -> LoadedModel:
    """Assemble a :class:`LoadedModel` from parsed JSON documents."""
    if not isinstance(model_obj, dict):
        raise InputError("model document must be a JSON object")
    if "k" in model_obj:
        try:
            h = heston_from_dict(model_obj)
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"model document: {exc}") from None
        if premium_obj is not None:
            if "theta1hat" not in premium_obj:
                raise InputError("premium for this model needs the fields "
                                 "theta1hat/theta2hat/Theta11/Theta22/lambdaQ")
            hp = _premium_from_obj(premium_obj, "heston")
        else:
            hp = _heston_default_premium(h)
        params, lamP, rate = to_affine(h)
        bundle = ModelBundle(params, lamP, None, rate)
        return LoadedModel(h, hp, bundle, None)
    if "d" in model_obj:
        try:
            bundle = model_from_dict(model_obj)
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"model document: {exc}") from None
        premium = None
        if premium_obj is not None:
            premium = _premium_from_obj(premium_obj, "generic")
        return LoadedModel(None, None, bundle, premium)
    raise InputError("model document is neither the jump-to-default form "
                     "(key 'k') nor the generic affine form (key 'd')")


def _load_from_args(args) -> LoadedModel:
    model_obj = _load_json(args.model)
    premium_obj = _load_json(args.premium) if getattr(args, "premium", None) else None
    return load_inputs(model_obj, premium_obj)


# ---------------------------------------------------------------------------
# deterministic rendering


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _csv_text(header, rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(_cell(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _diagnostics(ctx: PricingContext) -> dict:
    return {"quadrature_nodes": int(ctx.last_quadrature_nodes),
            "riccati_tol": ctx.rtol}


# ---------------------------------------------------------------------------
# shared settings


@dataclass
class Common:
    tol: float | None
    seed: int
    threads: int
    output_dir: str | None

    @property
    def rtol(self) -> float:
        return self.tol if self.tol is not None else DEFAULT_RTOL

    @property
    def atol(self) -> float:
        return 0.1 * self.tol if self.tol is not None else DEFAULT_ATOL

    @classmethod
    def from_args(cls, args) -> Common:
        if args.threads < 1:
            raise InputError("--threads must be at least 1")
        if not 0 <= args.seed < 2**64:
            raise InputError("--seed must fit in an unsigned 64-bit integer")
        if args.tol is not None and not args.tol > 0.0:
            raise InputError("--tol must be positive")
        return cls(args.tol, args.seed, args.threads, args.output_dir)


def _require(params: dict, key: str, kind: str):
    if key not in params or params[key] is None:
        raise InputError(f"{kind} needs the parameter {key!r}")
    return params[key]


def _floats(value, what: str) -> list[float]:
    if isinstance(value, str):
        value = [part for part in value.split(",") if part.strip()]
    try:
        out = [float(v) for v in value]
    except (TypeError, ValueError):
        raise InputError(f"{what} must be a list of numbers") from None
    if not out:
        raise InputError(f"{what} must not be empty")
    return out


def _parse_z(value, d: int) -> np.ndarray:
    """Transform argument: comma string of complex literals, or a JSON list
    whose entries are numbers, strings, or [real, imag] pairs."""
    if isinstance(value, str):
        parts = [p.strip().replace(" ", "") for p in value.split(",")]
        try:
            entries = [complex(p) for p in parts]
        except ValueError:
            raise InputError(f"cannot parse transform argument {value!r}") from None
    elif isinstance(value, (list, tuple)):
        entries = []
        for item in value:
            if isinstance(item, (list, tuple)) and len(item) == 2:
                entries.append(complex(float(item[0]), float(item[1])))
            elif isinstance(item, str):
                entries.append(complex(item.replace(" ", "")))
            elif isinstance(item, (int, float)):
                entries.append(complex(item))
            else:
                raise InputError(f"cannot parse transform entry {item!r}")
    else:
        raise InputError("transform argument must be a string or a list")
    if len(entries) != d:
        raise InputError(f"transform argument must have {d} entries, "
                         f"got {len(entries)}")
    return np.asarray(entries, dtype=complex)


def _schedule(maturity: float, step: float, delta: float) -> CdsSchedule:
    if not (maturity > 0.0 and step > 0.0):
        raise InputError("maturity and payment step must be positive")
    n = round(maturity / step)
    if n < 1 or abs(n * step - maturity) > 1e-9 * max(1.0, maturity):
        raise InputError("maturity must be a whole number of payment periods")
    dates = np.arange(n + 1) * step
    dates[-1] = maturity
    try:
        return CdsSchedule(dates, delta)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _damping(params: dict) -> DampingConfig | None:
    w, y = params.get("damping"), params.get("put_damping")
    if w is None and y is None:
        return None
    base = DampingConfig()
    try:
        return DampingConfig(w=base.w if w is None else float(w),
                             y=base.y if y is None else float(y))
    except ValueError as exc:
        raise InputError(str(exc)) from None


# ---------------------------------------------------------------------------
# task bodies (shared between standalone subcommands and scenario files)


def _task_validate(loaded: LoadedModel, params: dict, common: Common):
    eps = float(params.get("eps", 0.0))
    report = validate_admissibility(loaded.params, eps=eps)
    out = report.to_dict()
    out["summary"] = report.summary()
    if loaded.heston is not None:
        out["premium"] = validate_heston_preserving(
            loaded.heston, loaded.heston_premium).to_dict()
    return "json", _json_text(out), report.ok


def _task_solve(loaded: LoadedModel, params: dict, common: Common):
    T = float(_require(params, "T", "solve"))
    if T < 0.0:
        raise InputError("horizon must be nonnegative")
    d = loaded.params.d
    z = _parse_z(_require(params, "z", "solve"), d)
    measure = str(params.get("measure", "Q"))
    if measure == "P":
        mparams = loaded.params
        flavor = MeasureFlavor.physical(loaded.lambdaP)
    elif measure == "Q":
        qm = apply_measure_change(loaded.params, loaded.premium_spec(),
                                  loaded.bundle.rate)
        mparams = qm.params
        flavor = MeasureFlavor.risk_neutral(qm.lambdaQ)
    else:
        raise InputError(f"measure must be 'P' or 'Q', got {measure!r}")
    points = int(params.get("points", 201))
    if points < 2:
        raise InputError("need at least two grid points")
    sol = solve(mparams, flavor, loaded.bundle.rate, z, T,
                rtol=common.rtol, atol=common.atol)
    ts = np.linspace(0.0, T, points)
    Phi, Psi = sol.at(ts)
    header = ["t", "re_phi", "im_phi"]
    for i in range(d):
        header += [f"re_psi_{i + 1}", f"im_psi_{i + 1}"]
    rows = []
    for j, t in enumerate(ts):
        row = [t, Phi[j].real, Phi[j].imag]
        for i in range(d):
            row += [Psi[j, i].real, Psi[j, i].imag]
        rows.append(row)
    return "csv", _csv_text(header, rows), True


def _task_survival(loaded: LoadedModel, params: dict, common: Common):
    T = float(_require(params, "T", "survival"))
    ctx = loaded.context(common)
    value = survival_probability(ctx, T)
    return "json", _json_text({"value": value, "diagnostics": _diagnostics(ctx)}), True


def _task_bond(loaded: LoadedModel, params: dict, common: Common):
    T = float(_require(params, "T", "bond"))
    ctx = loaded.context(common)
    value = defaultable_bond(ctx, T)
    return "json", _json_text({"value": value, "diagnostics": _diagnostics(ctx)}), True


def _task_cds(loaded: LoadedModel, params: dict, common: Common):
    maturity = float(params.get("T", 1.0))
    step = float(params.get("step", 0.25))
    delta = float(params.get("delta", 0.6))
    ctx = loaded.context(common)
    value = cds_spread(ctx, _schedule(maturity, step, delta))
    return "json", _json_text({"value": value, "diagnostics": _diagnostics(ctx)}), True


def _task_option(loaded: LoadedModel, params: dict, common: Common):
    T = float(_require(params, "T", "option"))
    ctx = loaded.context(common)
    s0 = ctx.stock()
    if params.get("strike") is not None:
        K = float(params["strike"])
    else:
        K = float(params.get("moneyness", 1.0)) * s0
    if not K > 0.0:
        raise InputError("strike must be positive")
    damping = _damping(params)
    call = call_price(ctx, K, T, damping=damping)
    put = put_price(ctx, K, T, damping=damping)
    nodes = _diagnostics(ctx)
    rf = riskfree_bond(ctx, T)
    out = {
        "strike": K,
        "maturity": T,
        "call": call,
        "put": put,
        "parity_residual": call - put - s0 + K * rf,
        "call_implied_vol": _try_vol(call, s0, K, T, rf, "call"),
        "put_implied_vol": _try_vol(put, s0, K, T, rf, "put"),
        "diagnostics": nodes,
    }
    return "json", _json_text(out), True


def _try_vol(price, s0, K, T, rf, kind):
    try:
        return implied_vol(price, s0, K, T, discount_factor=rf, kind=kind)
    except ValueError:
        return None


def _surface_rows(ctx: PricingContext, maturities, moneyness, method: str,
                  damping: DampingConfig | None):
    """Per-node price/vol table for one pricing context.

    The FFT route prices each maturity's whole strike row in one batch and
    recovers puts through parity; the quadrature route prices every node
    independently (slower, per-strike error control).
    """
    s0 = ctx.stock()
    rows = []
    for T in maturities:
        strikes = np.asarray([mny * s0 for mny in moneyness])
        rf = riskfree_bond(ctx, T)
        if method == "fft":
            calls = call_prices_fft(ctx, strikes, T, damping=damping)
            puts = calls - s0 + strikes * rf
        else:
            calls = np.array([call_price(ctx, K, T, damping=damping)
                              for K in strikes])
            puts = np.array([put_price(ctx, K, T, damping=damping)
                             for K in strikes])
        for j, mny in enumerate(moneyness):
            vol = _try_vol(calls[j], s0, strikes[j], T, rf, "call")
            if vol is None:
                vol = _try_vol(puts[j], s0, strikes[j], T, rf, "put")
            rows.append([T, mny, puts[j], calls[j],
                         math.nan if vol is None else vol])
    return rows


def _task_surface(loaded: LoadedModel, params: dict, common: Common):
    maturities = _floats(params.get("maturities", DEFAULT_MATURITIES), "maturities")
    moneyness = _floats(params.get("moneyness", DEFAULT_MONEYNESS), "moneyness")
    method = str(params.get("method", "fft"))
    if method not in ("fft", "quadrature"):
        raise InputError(f"surface method must be 'fft' or 'quadrature', "
                         f"got {method!r}")
    want_ref = params.get("reference")
    if want_ref is None:
        want_ref = loaded.heston is not None
    damping = _damping(params)

    ctx = loaded.context(common)
    rows = _surface_rows(ctx, maturities, moneyness, method, damping)
    header = ["T", "moneyness", "put_price", "call_price", "implied_vol"]
    if want_ref:
        ref_ctx = loaded.reference_context(common)
        if ref_ctx is None:
            raise InputError("a default-free reference surface is only "
                             "defined for the jump-to-default model form")
        ref_rows = _surface_rows(ref_ctx, maturities, moneyness, method, damping)
        header.append("reference_vol")
        for row, ref in zip(rows, ref_rows):
            row.append(ref[4])
    return "csv", _csv_text(header, rows), True


def _task_distribution(loaded: LoadedModel, params: dict, common: Common):
    maturities = _floats(params.get("maturities", DEFAULT_MATURITIES), "maturities")
    levels = _floats(params.get("levels", DEFAULT_MONEYNESS), "levels")
    ctx = loaded.context(common)
    rows = []
    for T in maturities:
        for level in levels:
            rows.append([T, level, survival_distribution(ctx, level, T)])
    return "csv", _csv_text(["T", "level", "value"], rows), True


def _task_verify_measure(loaded: LoadedModel, params: dict, common: Common):
    premium = loaded.premium_spec()
    rate = loaded.bundle.rate
    out = {}
    if loaded.heston is not None:
        out["clauses"] = validate_heston_preserving(
            loaded.heston, loaded.heston_premium).to_dict()
    try:
        qm = apply_measure_change(loaded.params, premium, rate)
        out["measure_change"] = {"ok": True}
        out["q_admissibility"] = validate_admissibility(qm.params).to_dict()
    except MeasureChangeError as exc:
        out["measure_change"] = {"ok": False, "error": str(exc)}
    residuals = verify_drift_condition(loaded.params, premium, rate,
                                       loaded.lambdaP)
    out["drift_identity"] = residuals.to_dict()
    ok = out["measure_change"]["ok"] and residuals.ok
    return "json", _json_text(out), ok


# ---------------------------------------------------------------------------
# simulation-backed tasks


def _resolve_scheme(requested: str | None, params: AffineModelParams) -> str:
    if requested in (None, "auto"):
        return "exact-cir" if _exact_cir_applicable(params) is None \
            else "full-truncation-euler"
    if requested == "exact-cir":
        reason = _exact_cir_applicable(params)
        if reason is not None:
            raise InputError(f"exact-cir scheme not applicable: {reason}")
    return requested


def _build_batch(loaded: LoadedModel, common: Common, *, measure: str,
                 T: float, paths: int, steps: int, scheme: str | None,
                 antithetic: bool, obs_times):
    if measure == "P":
        model = loaded.params
        intensity, rate = loaded.lambdaP, loaded.bundle.rate
    elif measure == "Q":
        model = apply_measure_change(loaded.params, loaded.premium_spec(),
                                     loaded.bundle.rate)
        intensity = rate = None
    else:
        raise InputError(f"measure must be 'P' or 'Q', got {measure!r}")
    sim_params = model.params if measure == "Q" else model
    try:
        cfg = SimConfig(n_paths=paths, n_steps_per_year=steps,
                        seed=common.seed,
                        scheme=_resolve_scheme(scheme, sim_params),
                        antithetic=antithetic)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    batch = simulate(model, intensity=intensity, rate=rate, T=T, cfg=cfg,
                     obs_times=obs_times, threads=common.threads)
    return batch


def _task_simulate(loaded: LoadedModel, params: dict, common: Common):
    measure = str(params.get("measure", "P"))
    T = float(_require(params, "T", "simulate"))
    paths = int(params.get("paths", 10000))
    steps = int(params.get("steps_per_year", 128))
    obs = params.get("obs")
    obs_times = _floats(obs, "obs") if obs is not None else None
    batch = _build_batch(loaded, common, measure=measure, T=T, paths=paths,
                         steps=steps, scheme=params.get("scheme"),
                         antithetic=bool(params.get("antithetic", False)),
                         obs_times=obs_times)
    last = len(batch.obs_times) - 1
    alive = batch.alive_at(last)
    summary = {
        "measure": batch.measure,
        "horizon": batch.horizon,
        "n_paths": batch.n_paths,
        "scheme": batch.config.scheme,
        "seed": batch.config.seed,
        "steps_per_year": batch.config.n_steps_per_year,
        "antithetic": batch.config.antithetic,
        "threads": common.threads,
        "survival_fraction": float(np.mean(alive)),
        "default_fraction": float(np.mean(~np.isnan(batch.default_time))),
        "truncation_count": int(batch.truncation_count),
        "mean_terminal_log_price": float(np.mean(batch.log_price_obs[:, last])),
    }
    dump = params.get("dump")
    if dump:
        path = dump if os.path.isabs(dump) or common.output_dir is None \
            else os.path.join(common.output_dir, dump)
        save_batch(batch, path)
        summary["dump"] = path
    return "json", _json_text(summary), True


def _compare_row(kind, T, param, analytic, mc, se):
    diff = mc - analytic
    if se > 0.0:
        zscore = diff / se
    else:
        zscore = 0.0 if diff == 0.0 else math.inf
    return [kind, T, param, analytic, mc, se, zscore, abs(diff) <= 3.0 * se]


def _task_compare(loaded: LoadedModel, params: dict, common: Common):
    side = str(params.get("side", "Q"))
    maturities = sorted(_floats(params.get("maturities", [1.0]), "maturities"))
    paths = int(params.get("paths", 200000))
    steps = int(params.get("steps_per_year", 128))
    scheme = params.get("scheme")
    ctx = loaded.context(common)
    s0 = ctx.stock()
    rows = []

    if side == "P":
        levels = _floats(params.get("levels", [0.7, 1.0, 1.3]), "levels")
        batch = _build_batch(loaded, common, measure="P", T=maturities[-1],
                             paths=paths, steps=steps, scheme=scheme,
                             antithetic=False, obs_times=maturities)
        for T in maturities:
            mc, se = estimate(batch, "survival", at=T)
            rows.append(_compare_row("survival", T, "",
                                     survival_probability(ctx, T), mc, se))
        for T in maturities:
            for level in levels:
                mc, se = estimate(batch, "cdf", level=level * s0, at=T)
                analytic = survival_distribution(ctx, level * s0, T)
                rows.append(_compare_row("cdf", T, level, analytic, mc, se))
    elif side == "Q":
        strikes = _floats(params.get("strikes", [0.7, 1.0, 1.3]), "strikes")
        cds_T = float(params.get("cds_maturity", 1.0))
        step = float(params.get("cds_step", 0.25))
        delta = float(params.get("delta", 0.6))
        schedule = _schedule(cds_T, step, delta)
        obs = sorted(set(maturities) | set(schedule.dates[1:].tolist()))
        horizon = max(maturities[-1], cds_T)
        batch = _build_batch(loaded, common, measure="Q", T=horizon,
                             paths=paths, steps=steps, scheme=scheme,
                             antithetic=False, obs_times=obs)
        for T in maturities:
            mc, se = estimate(batch, "bond", at=T)
            rows.append(_compare_row("bond", T, "",
                                     defaultable_bond(ctx, T), mc, se))
        for T in maturities:
            for mny in strikes:
                K = mny * s0
                mc, se = estimate(batch, "call", strike=K, at=T)
                rows.append(_compare_row("call", T, mny,
                                         call_price(ctx, K, T), mc, se))
                mc, se = estimate(batch, "put", strike=K, at=T)
                rows.append(_compare_row("put", T, mny,
                                         put_price(ctx, K, T), mc, se))
        mc, se = estimate(batch, "cds", schedule=schedule)
        rows.append(_compare_row("cds", cds_T, delta,
                                 cds_spread(ctx, schedule), mc, se))
    else:
        raise InputError(f"side must be 'P' or 'Q', got {side!r}")

    header = ["kind", "T", "param", "analytic", "mc", "se", "z", "pass"]
    return "csv", _csv_text(header, rows), True


_TASKS = {
    "validate": _task_validate,
    "solve": _task_solve,
    "survival": _task_survival,
    "bond": _task_bond,
    "cds": _task_cds,
    "option": _task_option,
    "surface": _task_surface,
    "distribution": _task_distribution,
    "simulate": _task_simulate,
    "compare": _task_compare,
}


# ---------------------------------------------------------------------------
# command plumbing


def _module_of(exc: BaseException) -> str:
    """Deepest package module on the exception's traceback."""
    best = None
    tb = exc.__traceback__
    while tb is not None:
        name = tb.tb_frame.f_globals.get("__name__", "")
        if name.startswith("defaultable.") and not name.endswith(".cli"):
            best = name.split(".", 1)[1]
        tb = tb.tb_next
    return best or type(exc).__module__.rsplit(".", 1)[-1]


def _emit(kind: str, ext: str, text: str, common: Common) -> None:
    if common.output_dir is not None:
        os.makedirs(common.output_dir, exist_ok=True)
        path = os.path.join(common.output_dir, f"{kind}.{ext}")
        with open(path, "wb") as fh:
            fh.write(text.encode())
        print(path)
    else:
        sys.stdout.write(text)


def _run_standalone(kind: str, args, params: dict) -> int:
    common = Common.from_args(args)
    loaded = _load_from_args(args)
    ext, text, ok = _TASKS_ALL[kind](loaded, params, common)
    _emit(kind.replace("-", "_"), ext, text, common)
    return EXIT_OK if ok else EXIT_INPUT


def cmd_run(args) -> int:
    common = Common.from_args(args)
    scenario = _load_json(args.scenario)
    if not isinstance(scenario, dict) or "model" not in scenario:
        raise InputError("scenario file must be an object with a 'model' field")
    loaded = load_inputs(scenario["model"], scenario.get("premium"))
    report = validate_admissibility(loaded.params)
    if not report.ok:
        print(report.summary(), file=sys.stderr)
        return EXIT_INPUT
    tasks = scenario.get("tasks", [])
    if not isinstance(tasks, list):
        raise InputError("scenario 'tasks' must be a list")
    out_dir = common.output_dir or "."
    os.makedirs(out_dir, exist_ok=True)
    for index, task in enumerate(tasks):
        if not isinstance(task, dict) or "kind" not in task:
            raise InputError(f"task {index} must be an object with a 'kind'")
        kind = task["kind"]
        if kind not in _TASKS:
            raise InputError(f"task {index}: unknown kind {kind!r}")
        params = {k: v for k, v in task.items() if k != "kind"}
        try:
            ext, text, ok = _TASKS[kind](loaded, params, common)
        except InputError:
            raise
        except MeasureChangeError as exc:
            print(f"task {index} ({kind}): {exc}", file=sys.stderr)
            return EXIT_INPUT
        except (ArithmeticError, RuntimeError, ValueError) as exc:
            print(f"task {index} ({kind}) failed in {_module_of(exc)}: {exc}",
                  file=sys.stderr)
            return EXIT_NUMERICAL
        path = os.path.join(out_dir, f"{kind}_{index}.{ext}")
        with open(path, "wb") as fh:
            fh.write(text.encode())
        print(path)
        if not ok:
            print(text if ext == "json" else f"task {index} ({kind}) reported "
                  "a failed check", file=sys.stderr)
            return EXIT_INPUT
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--tol", type=float, default=None,
                        help="relative tolerance for the transform solver")
    shared.add_argument("--seed", type=int, default=0,
                        help="base seed for simulation subcommands")
    shared.add_argument("--threads", type=int, default=1,
                        help="worker threads for path generation")
    shared.add_argument("--output-dir", default=None,
                        help="write artifacts here instead of stdout")

    model_args = argparse.ArgumentParser(add_help=False)
    model_args.add_argument("--model", required=True,
                            help="model JSON document")
    model_args.add_argument("--premium", default=None,
                            help="premium JSON document (pricing measure)")

    parser = argparse.ArgumentParser(
        prog="defaultable",
        description="Pricing and risk measurement for a stock that can "
                    "default, driven by an affine diffusion.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", parents=[shared, model_args],
                       help="check the parameter restrictions")
    p.add_argument("--eps", type=float, default=0.0,
                   help="slack applied to every inequality")
    p.set_defaults(func=lambda a: _run_standalone(
        "validate", a, {"eps": a.eps}))

    p = sub.add_parser("solve", parents=[shared, model_args],
                       help="dump a transform-exponent path as CSV")
    p.add_argument("--z", required=True,
                   help="initial condition, comma-separated complex entries")
    p.add_argument("--T", type=float, required=True, help="horizon")
    p.add_argument("--measure", choices=("P", "Q"), default="Q")
    p.add_argument("--points", type=int, default=201,
                   help="output grid resolution")
    p.set_defaults(func=lambda a: _run_standalone(
        "solve", a, {"z": a.z, "T": a.T, "measure": a.measure,
                     "points": a.points}))

    p = sub.add_parser("survival", parents=[shared, model_args],
                       help="probability of no default by T")
    p.add_argument("--T", type=float, required=True)
    p.set_defaults(func=lambda a: _run_standalone("survival", a, {"T": a.T}))

    p = sub.add_parser("bond", parents=[shared, model_args],
                       help="zero-recovery defaultable bond price")
    p.add_argument("--T", type=float, required=True)
    p.set_defaults(func=lambda a: _run_standalone("bond", a, {"T": a.T}))

    p = sub.add_parser("cds", parents=[shared, model_args],
                       help="fair running spread of a credit default swap")
    p.add_argument("--T", type=float, default=1.0, help="protection maturity")
    p.add_argument("--step", type=float, default=0.25,
                   help="premium payment period")
    p.add_argument("--delta", type=float, default=0.6,
                   help="loss-given-default fraction")
    p.set_defaults(func=lambda a: _run_standalone(
        "cds", a, {"T": a.T, "step": a.step, "delta": a.delta}))

    p = sub.add_parser("option", parents=[shared, model_args],
                       help="call and put prices with implied vols")
    p.add_argument("--T", type=float, required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--strike", type=float, default=None)
    group.add_argument("--moneyness", type=float, default=None)
    p.add_argument("--damping", type=float, default=None,
                   help="call contour shift (> 1)")
    p.add_argument("--put-damping", type=float, default=None,
                   help="put contour shift (< 0)")
    p.set_defaults(func=lambda a: _run_standalone(
        "option", a, {"T": a.T, "strike": a.strike,
                      "moneyness": 1.0 if a.moneyness is None else a.moneyness,
                      "damping": a.damping, "put_damping": a.put_damping}))

    p = sub.add_parser("surface", parents=[shared, model_args],
                       help="price/implied-vol grid as CSV")
    p.add_argument("--maturities", default=None,
                   help="comma-separated maturities (default 0.5..3, 7 values)")
    p.add_argument("--moneyness", default=None,
                   help="comma-separated strike/spot ratios (default "
                        "0.7..1.3 step 0.05)")
    p.add_argument("--method", choices=("fft", "quadrature"), default="fft")
    p.add_argument("--reference", action="store_true", default=None,
                   help="add an implied-vol column with default switched off")
    p.set_defaults(func=lambda a: _run_standalone(
        "surface", a,
        {k: v for k, v in (("maturities", a.maturities),
                           ("moneyness", a.moneyness),
                           ("method", a.method),
                           ("reference", a.reference)) if v is not None}))

    p = sub.add_parser("distribution", parents=[shared, model_args],
                       help="pre-default price distribution as CSV")
    p.add_argument("--maturities", default=None)
    p.add_argument("--levels", default=None,
                   help="comma-separated price levels (absolute)")
    p.set_defaults(func=lambda a: _run_standalone(
        "distribution", a,
        {k: v for k, v in (("maturities", a.maturities),
                           ("levels", a.levels)) if v is not None}))

    p = sub.add_parser("simulate", parents=[shared, model_args],
                       help="generate paths and print summary statistics")
    p.add_argument("--measure", choices=("P", "Q"), default="P")
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--paths", type=int, default=10000)
    p.add_argument("--steps-per-year", type=int, default=128)
    p.add_argument("--scheme",
                   choices=("auto", "full-truncation-euler", "exact-cir"),
                   default="auto")
    p.add_argument("--antithetic", action="store_true")
    p.add_argument("--obs", default=None,
                   help="comma-separated snapshot times")
    p.add_argument("--dump", default=None,
                   help="write the raw path batch to this file")
    p.set_defaults(func=lambda a: _run_standalone(
        "simulate", a,
        {"measure": a.measure, "T": a.T, "paths": a.paths,
         "steps_per_year": a.steps_per_year, "scheme": a.scheme,
         "antithetic": a.antithetic, "obs": a.obs, "dump": a.dump}))

    p = sub.add_parser("compare", parents=[shared, model_args],
                       help="analytic values against Monte Carlo, as CSV")
    p.add_argument("--side", choices=("P", "Q"), default="Q")
    p.add_argument("--maturities", default=None)
    p.add_argument("--strikes", default=None,
                   help="strike/spot ratios for option rows (Q side)")
    p.add_argument("--levels", default=None,
                   help="price levels for distribution rows (P side)")
    p.add_argument("--paths", type=int, default=200000)
    p.add_argument("--steps-per-year", type=int, default=128)
    p.add_argument("--scheme",
                   choices=("auto", "full-truncation-euler", "exact-cir"),
                   default="auto")
    p.add_argument("--cds-maturity", type=float, default=1.0)
    p.add_argument("--cds-step", type=float, default=0.25)
    p.add_argument("--delta", type=float, default=0.6)
    p.set_defaults(func=lambda a: _run_standalone(
        "compare", a,
        {k: v for k, v in (("side", a.side),
                           ("maturities", a.maturities),
                           ("strikes", a.strikes),
                           ("levels", a.levels),
                           ("paths", a.paths),
                           ("steps_per_year", a.steps_per_year),
                           ("scheme", a.scheme),
                           ("cds_maturity", a.cds_maturity),
                           ("cds_step", a.cds_step),
                           ("delta", a.delta)) if v is not None}))

    p = sub.add_parser("verify-measure", parents=[shared, model_args],
                       help="premium clause checks and drift-identity residuals")
    p.set_defaults(func=lambda a: _run_standalone("verify-measure", a, {}))

    p = sub.add_parser("run", parents=[shared],
                       help="execute every task in a scenario file")
    p.add_argument("scenario", help="scenario JSON document")
    p.set_defaults(func=cmd_run)

    return parser


_TASKS_ALL = dict(_TASKS)
_TASKS_ALL["verify-measure"] = _task_verify_measure


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except MeasureChangeError as exc:
        print(f"input error: premium rejected: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"numerical failure in {_module_of(exc)}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
