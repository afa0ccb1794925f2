"""Simulation laboratory: data generators and Monte-Carlo experiments."""

from .generators import (
    FAMILIES,
    DistSpec,
    alt_mean,
    default_scale_norm,
    gen_elliptical,
    make_cov,
    make_qda_cov,
)
from .experiments import (
    SimReport,
    SimRow,
    are_moment_ratio,
    power_experiment,
    preset,
    qda_experiment,
    run_preset,
    size_experiment,
)
