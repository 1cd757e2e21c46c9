"""Noise-tolerant entanglement certification via threshold nonlocal games."""

from .certifier import (CertInput, CertReport, certify_eof, certify_game,
                        constants_mixed, constants_pure, error_params,
                        prop32_ledger, require_gates)
from .errors import (BudgetExceededError, EntcertError, GateFailedError,
                     NullEventError, SamplingError, ValidationError)
from .games import (Game, ThresholdGameSpec, chsh_game, classical_value,
                    required_wins, threshold_predicate, validate_game)
from .quantum import (BipartitePureState, CqState, entanglement_entropy,
                      eof_two_qubit, epr_state, fidelity, mutual_information,
                      partial_trace, relative_entropy, relative_min_entropy,
                      tensor, trace_distance, von_neumann_entropy)
from .repetition import (JointTable, WinEventSpec, augment_dependency_breaking,
                         claim27_max_deviation, condition_on_event,
                         correlated_sample, correlated_sampling_joint,
                         enumerate_joint, extraction_protocol,
                         hoeffding_completeness_bound, iid_lift_table,
                         iid_threshold_win_prob, lemma_audit,
                         monte_carlo_threshold, prop32_search, sweep_threshold)
from .strategies import (Behavior, NoiseChannel, QuantumStrategy, apply_noise,
                         behavior_of, canonical_chsh_strategy,
                         chsh_outcome_broadcast_strategy,
                         classical_deterministic_strategy, seesaw_optimize,
                         win_probability)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
