"""Real interpolation with a functional parameter, computed on sequence couples."""

from .discretize import (BlockPartition, DiscretizingSequence, block_partition, build,
                         build_covering, from_points, verify)
from .errors import (CapacityError, ConstructionError, ContractError, DomainError,
                     InterpError, InvalidParameterError, WindowError)
from .kfunc import (BlockCouple, ExactOracle, L1Linf, MinFormula, k_block_couple,
                    k_exact_oracle, k_l1_linf, k_min_formula)
from .qcfn import (QuasiConcaveFn, VerificationReport, compose_parameter, dilation_function,
                   eval_fn, from_spec, is_quasi_power, power_log, probe_grid, tabulated,
                   verify_nondegenerate, verify_quasi_concave)
from .sequences import SeqVector, StepFunction, WeightedSeqCouple
from .spaces import (BlockSpace, NormReport, block_norm, gilbert_rhs, gilbert_space,
                     janson_norm, weighted_lp_norm)
from .stability import (CardinalityProfile, DivergenceTable, EquivalenceReport, Triple,
                        condition_v_profile, counterexample_search, equivalence_experiment,
                        gilbert_experiment, log_triple, power_triple, sum_sup_ratio)

__all__ = [name for name in dir() if not name.startswith("_")]
