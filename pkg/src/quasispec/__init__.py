"""Lyapunov exponents and zero-measure Cantor spectra of substitution and
Sturmian Schrodinger operators."""

__version__ = "0.1.0"

from .words import Alphabet, PotentialMap, Word, concat, count_occurrences, distinct_subwords, weighted_frequency
from .subshifts import (
    CapExceeded,
    SturmianSpec,
    Substitution,
    SubshiftSystem,
    apply,
    builtin,
    catalog,
    is_primitive,
    iterate,
    legal_words,
    pw_report,
    repetitivity_report,
    sturmian_window,
)
from .cocycle import (
    Mat2,
    NoDichotomy,
    NumericFailure,
    ScaledMatrix,
    cocycle_product,
    f_energy,
    lyapunov_estimate,
    lyapunov_profile,
    solution_sequence,
    stable_direction,
    transfer_matrix,
    uniformity_spread,
)
from .spectrum import (
    EnergyGrid,
    SpectrumEstimate,
    cantor_diagnostic,
    compare_spectra,
    finite_section_spectrum,
    lyapunov_zero_set,
    trace_spectrum,
)
