"""powlab: a proof-of-work difficulty-control laboratory.

Simulates block production under pluggable difficulty controllers, calibrates
bounded update functions to zero drift, trains a variance-pattern indicator
network, and reproduces hash-rate and difficulty-quality analyses.  A FastAPI
service (powlab.service) wraps the library; the `powlab` CLI is a thin client
over that service.
"""

__version__ = "0.1.0"

from .chain import (ChainRecord, HashRateScenario, SimulationConfig, Trace,
                    run_simulation, sample_block_time)
from .controllers import (BitcoinRule, ConstantDifficulty, ConstantOne,
                          EthereumRule, EveryN, GeneralController,
                          NeuralIndicator, bitcoin_controller, bitcoin_update,
                          ethereum_controller, ethereum_update)
from .errors import (ConfigurationError, DataValidationError, NumericalError,
                     PowlabError)
from .features import FeatureConfig, FeatureState
from .mlp import MlpModel
from .training import TrainingConfig, solved_ethereum_target, train_indicator
from .updatefn import (ArctanUpdate, BlockTimeSumDistribution, amplitude_ratio,
                       condition1_residual, equilibrium_mean,
                       erlang_distribution, exponential_distribution,
                       solve_center, solve_shift)

__all__ = [name for name in dir() if not name.startswith("_")]
