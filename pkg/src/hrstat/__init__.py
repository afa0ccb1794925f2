"""High-dimensional HR (joint spatial-median and sign-scatter) estimation and its applications.

The package estimates location and scatter of elliptical data in high
dimensions (spatial median, spatial-sign covariance, SGLASSO, banded HR
iteration) and builds on the estimate for one-sample location tests and a
robust quadratic discriminant classifier.
"""

__version__ = "0.1.0"

from .errors import (
    CalibrationError,
    ContractViolation,
    DegenerateDataError,
    DimensionError,
    HrstatError,
    ModelError,
    NoConvergenceError,
    SingularMatrixError,
)
from .hr import HrConfig, HrEstimate, hr_classic, hr_estimate
from .onesample import (
    METHODS,
    TestConfig,
    TestReport,
    bootstrap_calibrate,
    cauchy_combine,
    gumbel_cdf,
    gumbel_quantile,
    one_sample_test,
    run_tests,
)
from .qda import QdaModel, classify, discriminant, hrqda_train, metrics, trace_hat
from .sglasso import SglassoConfig, lambda_default, sglasso
from .spatial import diagonal_hr, sign_cov, spatial_median, spatial_sign
