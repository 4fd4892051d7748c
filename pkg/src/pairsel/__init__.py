"""Adaptive kernel bandwidth selection from pairwise estimate comparisons."""
from ._backend import BACKEND
from .bandwidths import DyadicGrid, build_grid, window
from .errors import (ConfigError, EmptyGridError, IllPosedModelError, IncompatibleGridError,
                     IncompleteFamilyError, InconsistencyRegionError, InvalidParameterError, InvalidStepError,
                     PairselError, ReplicationError, UnsupportedOperationError)
from .estimators import (EstimateRecord, clear_deconv_cache, deconv_estimate, deconv_kernel, derivative_estimate,
                         kde, kde_pair)
from .experiments import PipelineSpec, run_replication
from .kernels import BandwidthVec, ProductKernel, pair_kernel
from .models import (DatasetPair, GaussianMixture, GriddedDensity, NoiseSpec, ProductLaplace, VarianceGamma,
                     check_well_posedness, sample_contaminated)
from .numerics import GriddedFunction, Sample, UniformGrid, lp_norm
from .selector import Problem, SelectorResult, plugin_pipeline, r_hat, select
from .upper import UpperFunction, UpperFunctionConfig, psi_bounds

__version__ = "0.1.0"
