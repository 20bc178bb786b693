"""Recursive phase retrieval from magnitude data.

Recovers the phases of a band-limited spectrum given the modulus of the
signal on an oversampled grid and the moduli of its coefficients, by
peeling the autocorrelation spectrum row by row and selecting triangle
branches with a closest-point criterion.  Works in one and two
dimensions and ships a brute-force oracle plus an experiment CLI.
"""

from .engine1d import (
    BranchDecision,
    EmptySupport,
    ProblemInstance1D,
    RecursionState,
    SolveReport,
    fix_gauge,
    priors_from_spectrum,
    recursion_step,
    select_branch,
    solve_1d,
    solve_1d_refined,
    trim_support,
    update_residual_incremental,
)
from .engine2d import (
    AnchorFailure,
    Autocorr2D,
    BranchDecision2D,
    ProblemInstance2D,
    SolveReport2D,
    autocorr2d,
    convolve_direct_2d,
    forward_dft_2d,
    solve_2d,
)
from .oracle import (
    BruteForceResult,
    ErrorMetrics,
    GeneratorSpec,
    TooLarge,
    ZeroOverlap,
    brute_force_solve,
    compare_up_to_gauge,
    gauge_align,
    generate,
    generate_2d,
    paper_test_function,
)
from .spectral import (
    AutocorrSpectrum,
    CenteredSpectrum,
    SampledField,
    SupportViolation,
    autocorr_from_magnitude,
    convolve_direct,
    forward_dft,
    inverse_dft,
    logical_min,
    logical_max,
    logical_to_offset,
)
from .triangle import (
    DegenerateTriangle,
    TriangleProblem,
    TriangleSolution,
    solve_conjugate_pair,
    solve_triangle,
)

__version__ = "0.1.0"

__all__ = [
    "AnchorFailure",
    "Autocorr2D",
    "AutocorrSpectrum",
    "BranchDecision",
    "BranchDecision2D",
    "BruteForceResult",
    "CenteredSpectrum",
    "DegenerateTriangle",
    "EmptySupport",
    "ErrorMetrics",
    "GeneratorSpec",
    "ProblemInstance1D",
    "ProblemInstance2D",
    "RecursionState",
    "SampledField",
    "SolveReport",
    "SolveReport2D",
    "SupportViolation",
    "TooLarge",
    "TriangleProblem",
    "TriangleSolution",
    "ZeroOverlap",
    "autocorr2d",
    "autocorr_from_magnitude",
    "brute_force_solve",
    "compare_up_to_gauge",
    "convolve_direct",
    "convolve_direct_2d",
    "fix_gauge",
    "forward_dft",
    "forward_dft_2d",
    "gauge_align",
    "generate",
    "generate_2d",
    "inverse_dft",
    "logical_min",
    "logical_max",
    "logical_to_offset",
    "paper_test_function",
    "priors_from_spectrum",
    "recursion_step",
    "solve_1d_refined",
    "select_branch",
    "solve_1d",
    "solve_2d",
    "solve_conjugate_pair",
    "solve_triangle",
    "trim_support",
    "update_residual_incremental",
    "__version__",
]
