"""Inferential models, generalized fiducial sampling and confidence curves."""

from .confcurve import (
    ConfidenceCurve,
    cc_belief,
    cc_from_cd,
    cc_from_im,
    cc_plausibility,
    confidence_set,
    fieller_cc,
    im_from_cc,
    recalibrate_exact,
)
from .engine import (
    BeliefReport,
    belief,
    belief_via_principle,
    point_plausibility_curve,
    principle_assertion,
    realize_theta_set,
)
from .fiducial import FiducialSample, fid_probability, matching_randomset, pseudo_solve, sample_gfd
from .model import AuxDistribution, Model, aux_for, get_model, simulate_data, solve_theta
from .randomset import builtin_randomset, check_validity_condition, nested_from_gamma
from .sets import FiniteSet, IntervalSet, parse_set
from .validate import (
    CoverageReport,
    OracleTable,
    belief_validity_sim,
    build_oracle,
    cc_coverage_sim,
    check_theorems,
)

__version__ = "0.1.0"
