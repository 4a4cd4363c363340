"""Numerical laboratory for the Keller-Segel system with logistic growth.

Simulates the coupled cell-density / chemoattractant dynamics on periodic
boxes approximating the whole space, and instruments the a-priori estimates
that control global boundedness (uniformly local norms, cutoff-weighted
moment functionals, dyadic frequency analysis) as runtime-checkable
residual monitors.
"""

from .fields import (
    Grid,
    ScalarField,
    SpectralField,
    VectorField,
    dealias,
    divergence,
    from_spectral,
    gradient,
    heat_propagate,
    hessian_sq,
    integrate,
    laplacian,
    magnitude,
    make_grid,
    to_spectral,
)
from .norms import (
    CutoffSpec,
    UlocNormParams,
    cutoff_phi,
    cutoff_psi,
    lp_norm,
    uloc_covering_check,
    uloc_norm,
    w1inf_norm,
)
from .dyadic import DyadicConfig, dyadic_block, generalized_young_check, low_freq
from .solver import (
    Params,
    PicardConfig,
    PicardResult,
    RunConfig,
    RunResult,
    RunStatus,
    State,
    approx_initial,
    determinism_check,
    nonnegativity_report,
    picard_local_solve,
    rhs,
    run,
    step,
)

__version__ = "0.1.0"
