"""crnbatch: exact stochastic CRN simulation with sublinear-time batching."""

from .backend import get_backend, set_backend
from .batch import (BatchOutcome, TransitionTensor, execute_batch,
                    sample_collision_reactants, sample_transition_tensor)
from .collision import (CollisionRunParams, coll_expectation_bounds,
                        coll_log_ccdf, multifactorial_log, sample_coll)
from .continuous import ContinuousParams, choose_p, run_continuous
from .crn import (Configuration, Crn, Reaction, Species, apply_reaction,
                  order_and_generativity, propensity, total_propensity)
from .discrete import BatchStats, Decision, RunResult, hybrid_policy, run_discrete
from .hypoexp import (ArsEnvelope, HypoexpSpec, TimeSampler,
                      hypoexp_coefficients, hypoexp_coefficients_fast,
                      hypoexp_logpdf, hypoexp_mean_closed,
                      hypoexp_variance_closed, sample_end_of_run,
                      sample_hypoexp_direct, sample_hypoexp_exact,
                      sample_hypoexp_gamma_approx)
from .parser import parse_config, parse_crn, serialize_crn
from .reference import (SimState, gillespie_run, gillespie_step, new_state,
                        scheduler_run, scheduler_step)
from .trajectory import TrajectoryRecord
from .uniformize import (SlowdownReport, UniformizedCrn, adjusted_rate_constant,
                         make_uniform, make_uniformly_reactive, slowdown_factor,
                         total_rate_constant, uniformize)

__all__ = [name for name in dir() if not name.startswith("_")]
