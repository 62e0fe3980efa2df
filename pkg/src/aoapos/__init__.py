"""2D-DFT angle-of-arrival estimation error analysis and WLS positioning."""

from .array_model import AnglePair, ArrayGeometry, LosPath, los_gain, steering_matrix, true_angles
from .dft_estimator import PeakBins, SearchGrid, dft_spectrum, estimate, peak_bins, quantize_model
from .error_pdf import (Case, EstimateState, PiecewisePdf, Segment, build_estimate_state,
                        half_widths, pdf_eval, pdf_integrate, phi_error_pdf, select_case,
                        theta_error_pdf, u_pdf)
from .error_variance import (VarianceTerms, conditional_variances, hyp2f1_term,
                             variance_numeric, variance_phi, variance_theta)
from .montecarlo import (ExperimentResult, Scenario, run_positioning_experiment,
                         sample_conditional_errors, sweep)
from .wls_positioner import (PositionEstimate, PositioningProblem, geometry_baseline,
                             locate, pseudolinear_system, wls_solve)

__all__ = [name for name in dir() if not name.startswith("_")]
__version__ = "0.1.0"
