"""Whittle estimation for self-similar Gaussian noise observed at high frequency."""

from .estimators import (EstimationResult, estimate, estimate_all_unknown, estimate_H_known,
                         estimate_sigma_known, sigma2_profile)
from .exceptions import (DegenerateLimitError, DomainError, EmbeddingError, FactorizationError,
                         HFWError, NonConvergenceError, QuadratureError, SingularMatrixError,
                         StudyError)
from .info import (InfoPack, Regime, info_pack, predict_asymptotics, rate_matrix_limits,
                   scale_b, weak_fisher)
from .models import (FGN, FLANGEVIN, ModelParams, SpectralModel, eval_autocov, eval_dlogf, eval_f,
                     get_model, register_model)
from .montecarlo import StudyConfig, StudyReport, run_study, scaled_errors
from .optimize import minimize_box
from .periodogram import Periodogram, periodogram
from .quadrature import quad_singular
from .sampling import SampledSeries, sample_path

__version__ = "0.1.0"
