"""Global goodness-of-fit tests for exponential-dispersion-family GLMs."""

from .errors import (
    DegenerateGroupError,
    DegenerateRankError,
    DomainEscapeError,
    FamilyDomainError,
    GlmGofError,
    InfeasibleGroupingError,
    SingularInformationError,
    UnsupportedFamilyError,
)
from .families import (
    Family,
    Link,
    inverse_link,
    inverse_link_deriv,
    link_transform,
    sample_response,
    validate_pair,
    variance_function,
)
from .fitting import (
    Dataset,
    FittedModel,
    fisher_information,
    fit_irls,
    hat_matrix,
    log_likelihood,
    score,
)
from .grouping import (
    GroupSpec,
    GroupTable,
    equal_count_endpoints,
    fixed_endpoints,
    group_indicators,
    group_summaries,
    variance_weighted_endpoints,
)
from .gof import (
    GofResult,
    ghl_test,
    hl_classic,
    naive_ghl,
    residual_group_vector,
    sigma_n,
    sw_test,
    sz_psi,
)
from .numerics import (
    PseudoinverseResult,
    chi_sq_cdf,
    chi_sq_sf,
    pseudoinverse,
    weighted_quantile,
)
from .simulate import (
    SettingSpec,
    SimResult,
    bonferroni,
    generate_large_model,
    generate_null,
    generate_power,
    make_setting,
    mcnemar_compare,
    power_coefficients,
    run_replications,
    wilson_ci,
)

__version__ = "0.1.0"
