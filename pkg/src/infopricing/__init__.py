"""Information-based pricing of credit-risky securities under stochastic interest rates."""
from ._backend import BACKEND
from .bonds import (
    BondSpec,
    MarketRecovery,
    NoRecovery,
    TwoFactorRecovery,
    defaultable_price,
    defaultable_price_generalized,
    exponential_recovery,
    sovereign_price,
    sovereign_prices,
    two_factor_recovery_price,
    yield_spread,
)
from .credit_sensitive import (
    CreditSensitiveKernel,
    credit_sensitive_bond_price,
    debt_sensitive_kernel,
    gamma_supermartingale_diagnostic,
    sovereign_price_2d,
)
from .derivatives import (
    CouponBondSpec,
    HybridSpec,
    OptionSpec,
    alpha_variance,
    call_price,
    coupon_bond_price,
    coupon_bond_with_recovery_price,
    hybrid_ilcr_price,
    ilcr_factorized_price,
    option_critical_value,
    option_inner_value,
)
from .errors import (
    ConstructionError,
    DomainError,
    EvaluationError,
    InfoPricingError,
    IntegrationError,
    NumericsError,
    PayoffError,
    StateError,
)
from .factors import (
    ArrowDebreu,
    ContinuousFactor,
    DiscreteFactor,
    InfoProcessSpec,
    MarketState,
    arrow_debreu_density,
    bridge_coefficients,
    bridge_variance,
    conditional_density,
    sample_gamma_forward,
    simulate_gamma_bridge,
    simulate_info_path,
)
from .kernels import (
    KernelFunction,
    WeightFunction,
    build_whk_kernel,
    catalogue_kernel,
    check_differential_inequality,
    check_supermartingale,
    deterministic_kernel,
    product_kernel,
    sample_triples,
    whk_quadratic_kernel,
    whk_tabulated_kernel,
)
from .numerics import QuadratureRule, RandomStream
from .oracle import McConfig, SpreadExperiment, mc_price, spread_paths, write_spread_csv

__version__ = "0.1.0"
