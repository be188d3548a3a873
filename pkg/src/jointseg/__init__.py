"""Joint segmentation and linking of anisotropic image stacks.

Per slice, a parametric min-cut sweep yields a tree of nested foreground
components. One binary program over the whole stack then picks a
non-overlapping subset of components and links them across slices.
"""

from .config import ConfigError, PipelineConfig
from .evaluation import EditDistanceReport, GroundTruth, edit_distance
from .ilp_solver import IlpProblem, IlpSolution, Row, brute_force_ilp, solve_ilp
from .image_model import DataError, ImageStack, ProbabilityStack
from .pipeline import InvariantViolation, Reconstruction, bench_scaling, run, sweep_single_lambda
from .synthetic_data import SyntheticSpec, generate

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DataError", "EditDistanceReport", "GroundTruth", "IlpProblem", "IlpSolution",
    "ImageStack", "InvariantViolation", "PipelineConfig", "ProbabilityStack", "Reconstruction", "Row",
    "SyntheticSpec", "bench_scaling", "brute_force_ilp", "edit_distance", "generate", "run",
    "solve_ilp", "sweep_single_lambda",
]
