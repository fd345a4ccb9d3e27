"""Global sensitivity analysis with random counting measures."""

from .counting import (
    Binomial,
    CountingMeasure,
    Dirac,
    NegativeBinomial,
    OrthogonalDie,
    Poisson,
    Zeta,
    orthogonal_die_pairs,
    riemann_zeta,
)
from .errors import (
    DefectiveIndicesError,
    InvalidParameterError,
    KernelSamplingError,
    RCMError,
    UndefinedQuantityError,
)
from .measure import (
    Bernoulli,
    DiscreteMeasure,
    Empirical,
    Kernel,
    MeasurableFn,
    MomentOnly,
    PointSample,
    ProductMeasure,
    RandomMeasure,
    cov_Nf,
    integrate,
    mc_moments,
    mean_Nf,
    product,
    sample_measure,
    var_Nf,
)
from .sensitivity import (
    AnovaDecomposition,
    Partition,
    SensitivityMeasure,
    SensitivityReport,
    anova_decompose,
    entropy,
    marginal_sensitivity,
    sensitivity_indices,
    sensitivity_measure,
)

__version__ = "0.1.0"
