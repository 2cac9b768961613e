"""Singular-value statistics of randomly weighted directed random graphs."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BracketError,
    ConvergenceError,
    DegenerateError,
    DomainError,
    EnsembleError,
    InputError,
    NotFoundError,
    NumericalError,
    ParameterError,
    SVSGraphError,
)
from .models import (  # noqa: E402
    GraphModelParams,
    Model,
    VertexCloud,
    WeightedDigraph,
    generate_derg,
    generate_drrg,
    generate_reference,
    measure_degree,
)
from .spectra import ComplexSpectrum, SingularSpectrum, complex_eigenvalues, singular_values  # noqa: E402
from .stats import (  # noqa: E402
    Histogram,
    MinSingularStats,
    RatioSample,
    ReferenceConstants,
    complex_spacing_ratios,
    histogram,
    min_singular_stats,
    normalize_ratio,
    pdf_goe_ratio,
    pdf_pe_min_singular,
    pdf_pe_ratio,
    real_spacing_ratios,
)
from .ensemble import (  # noqa: E402
    EnsembleStats,
    SweepSpec,
    calibrate_references,
    locate_parameter,
    run_point,
    run_sweep,
    transition_onset,
)
