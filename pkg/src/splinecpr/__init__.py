"""Recovery of complex spline signals from phaseless Hermite samples.

A signal ``f(x) = sum_k c_k phi(x / period - k)`` is reconstructed, up to a
unimodular constant and complex conjugation, from ``|f|^2`` and ``|f'|^2``
sampled on every interval (or from ``|f|^2`` alone when the generator's
outer products span the symmetric matrices).

Typical use::

    from splinecpr import *
    g = bspline(4)
    c = CoeffSeq(0, [1 + 1j, 2, -1j, 0.5])
    cfg = RecoveryConfig(g)
    rec, diag = recover_signal(take_samples(c, g, cfg.nodes), cfg)
    dist_up_to_equiv(c, rec).dist   # about 1e-13
"""

from .engine import (RecoveryConfig, Tolerances, draw_signal, figure1_coefficients, figure1_config,
                     recover_signal, refine_sequence, refine_window, run_trial, verify_recovery,
                     window_misfit)
from .errors import (CPRError, DegenerateRecoveryError, GeneratorError, GramRankError,
                     InconsistentMagnitudesError, NodeError, RecoveryError, SpanningError,
                     StitchError)
from .frame_analysis import (FalsifierResult, RealFrame, certify_by_recovery, cpr_sufficient,
                             falsify_cpr, spanning_dimension, vandermonde_frame)
from .generator import (Generator, bspline, eval_generator, eval_generator_deriv,
                        figure1_generator, local_basis_matrix, phi1)
from .gram_recovery import (SymBasisSystem, build_basis_system, factor_gram, gram_from_samples,
                            gram_of)
from .local_recovery import AmSeq, LocalBlock, am_from_samples, am_of, recover_block
from .sampling import NodeSet, SampleSet, chebyshev_nodes, default_nodes, take_samples
from .signal import (CoeffSeq, ambiguity_partner, canonical_form, decompose, dist_up_to_equiv,
                     eval_signal, eval_signal_deriv, is_cpr)
from .stitching import AlignmentState, StitchTolerances, block_to_window, stitch

__version__ = "0.1.0"

__all__ = [
    "AlignmentState", "AmSeq", "CPRError", "CoeffSeq", "DegenerateRecoveryError",
    "FalsifierResult", "Generator", "GeneratorError", "GramRankError",
    "InconsistentMagnitudesError", "LocalBlock", "NodeError", "NodeSet", "RealFrame",
    "RecoveryConfig", "RecoveryError", "SampleSet", "SpanningError", "StitchError",
    "StitchTolerances", "SymBasisSystem", "Tolerances", "am_from_samples", "am_of",
    "ambiguity_partner", "block_to_window", "bspline", "build_basis_system", "canonical_form",
    "certify_by_recovery", "chebyshev_nodes", "cpr_sufficient", "decompose", "default_nodes",
    "dist_up_to_equiv", "draw_signal", "eval_generator", "eval_generator_deriv", "eval_signal",
    "eval_signal_deriv", "factor_gram", "falsify_cpr", "figure1_coefficients", "figure1_config",
    "figure1_generator", "gram_from_samples", "gram_of", "is_cpr", "local_basis_matrix", "phi1",
    "recover_block", "recover_signal", "refine_sequence", "refine_window", "run_trial", "spanning_dimension", "stitch",
    "take_samples", "vandermonde_frame", "verify_recovery", "window_misfit",
]
