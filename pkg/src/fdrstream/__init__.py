"""Streaming anomaly detection with false discovery rate control."""
from ._accel import USE_NUMBA, backend_name
from .detector import DetectionRecord, DetectionResult, DetectorConfig, Windowing, decide_point, run_stream
from .errors import (ConfigurationError, DegenerateDataError, DomainError, FdrStreamError, StateError,
                     UsageError)
from .generator import (GaussianStd, LabeledSeries, MixtureConfig, OraclePValueConfig, StudentDF,
                        generate_mixture, generate_oracle_pvalues, student_matched_shift)
from .metrics import (ConfusionCounts, RejectionDistribution, expected_rejections, fdp, fnp, heuristic_gap,
                      mfdr_estimate, permutation_test_max_gap, q_fractional, theoretical_fdr_empirical_bh)
from .multiple_testing import (BH, LORD3, MBH, BHResult, LordState, MBHConfig, bh, bh_bruteforce,
                               calibration_cardinality, lord3_init, lord3_next, mbh, mbh_alpha_prime)
from .pvalues import (CalibrationSet, CalibrationSpec, LatticeP, PValueKind, Strategy, conformal_pvalue,
                      empirical_pvalue, update_calibration)
from .scoring import KDE, KNN, Identity, ScoreFunction, ZScore, fit_zscore, score

__version__ = "0.1.0"
