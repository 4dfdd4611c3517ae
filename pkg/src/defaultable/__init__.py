"""Pricing and risk measurement for defaultable stocks.

The model: an admissible affine diffusion drives the pre-default log
price, its stochastic volatility and any extra hazard factors, while
default arrives at an affine intensity, killing the stock to zero.
Everything observable reduces to exponential-affine transforms of the
state, which this package evaluates by numerical Riccati integration
(any admissible model) or in closed form (the Heston-type
jump-to-default class), prices by one-dimensional Fourier inversion,
and cross-checks by exact-transition Monte Carlo.
"""

from .affine import (AffineModelParams, ModelBundle, SpecAffine,
                     StockCoefficients, ValidationReport, Violation,
                     diffusion_squared, drift, load_model, model_from_dict,
                     model_to_dict, save_model, stock_coefficients,
                     validate_admissibility)
from .riccati import (MeasureFlavor, MomentExplosionError, RiccatiSolution,
                      OdeTransformEngine, TransformDomain, in_guaranteed_domain,
                      solve, solve_batch, solve_with_gradient, transform,
                      transform_gradient)
from .measures import (MeasureChangeError, QModelParams, ResidualReport,
                       RiskPremiumSpec, apply_measure_change, risk_premia_at,
                       survival_cf_P, survival_cf_Q, verify_drift_condition)
from .heston import (ClosedFormTransformEngine, HestonJtdParams, HestonPremium,
                     assemble_premium, closed_form_riccati, default_free_q_model,
                     heston_from_dict, heston_to_dict, premium_from_dict,
                     premium_to_dict, q_model, to_affine,
                     validate_heston_preserving)
from .credit import (CdsSchedule, PricingContext, cds_spread, defaultable_bond,
                     parity_residual, pure_recovery_value, riskfree_bond,
                     survival_probability, zero_recovery_value)
from .fourier import (DampingConfig, QuadratureConfig, call_price,
                      call_prices_fft, implied_vol, put_price,
                      survival_distribution)
from .montecarlo import (PathBatch, SimConfig, estimate, load_batch,
                         save_batch, simulate)

__version__ = "0.1.0"
