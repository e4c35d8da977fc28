"""Subspace-constrained minimization for low-level vision.

The library solves interactive segmentation, video segmentation, stereo
matching and optical flow by coarse-to-fine Gauss-Newton steps restricted to
a low-dimensional subspace per pyramid level.  The per-task data terms and
the projection-corrected reduced solves are the core; bases come from
deterministic analytic constructions or a weighted generation pipeline.
"""

from .basis import (
    CramerContext,
    GeneratorWeights,
    MinimizationContext,
    analytic_basis,
    build_cramer_context,
    build_min_context,
    generate_basis,
    read_weights,
    write_weights,
)
from .dataterms import (
    LabelProbabilities,
    QuadraticModel,
    Scribbles,
    flow_quadratic,
    labeling_quadratic,
    scribble_probabilities,
    stereo_quadratic,
    temporal_probabilities,
)
from .driver import (
    SolverConfig,
    TaskResult,
    run_flow,
    run_iseg,
    run_stereo,
    run_stereo_bidirectional,
    run_task,
    run_vseg,
)
from .equivalence import build_consistent_instance, fast_vtrx, verify_proposition
from .grid import bilinear_sample, bilinear_sample_map, box_mean, integral_image
from .linalg import cholesky_solve, cramer2, det2
from .pyramid import FeaturePyramid, PyramidConfig, build_pyramid, upsample_solution
from .solver import (
    FlowBasisPair,
    SolveReport,
    SubspaceBasis,
    project,
    solve_flow_subspace,
    solve_projected,
    solve_subspace,
)

__version__ = "0.1.0"

__all__ = [
    "CramerContext", "GeneratorWeights", "MinimizationContext",
    "analytic_basis", "build_cramer_context", "build_min_context",
    "generate_basis", "read_weights", "write_weights",
    "LabelProbabilities", "QuadraticModel", "Scribbles",
    "flow_quadratic", "labeling_quadratic", "scribble_probabilities",
    "stereo_quadratic", "temporal_probabilities",
    "SolverConfig", "TaskResult", "run_flow", "run_iseg", "run_stereo",
    "run_stereo_bidirectional", "run_task", "run_vseg",
    "build_consistent_instance", "fast_vtrx", "verify_proposition",
    "bilinear_sample", "bilinear_sample_map", "box_mean", "integral_image",
    "cholesky_solve", "cramer2", "det2",
    "FeaturePyramid", "PyramidConfig", "build_pyramid", "upsample_solution",
    "FlowBasisPair", "SolveReport", "SubspaceBasis", "project",
    "solve_flow_subspace", "solve_projected", "solve_subspace",
]
