"""Exact finite-depth betting strategies with restricted wagers."""

from .coder import (CodeBook, ReferenceMachine, compress_high_capital, decode_preimage, encode_preimage,
                    high_capital_set, kc_allocate, ref_complexity)
from .counter import CounterRun, limit_counter_path, run_counter, validate_run, verify_path_invariant
from .dyadic import ONE, ZERO, Dyadic, floor_multiple
from .errors import (IncompleteTable, IndexOverflow, InvalidInput, InvalidMachine, NegativeCapital,
                     NoDescription, ScheduleExhausted)
from .functional import (ToyFunctional, check_census, counting_martingale, preimage_count,
                         restricted_enumeration, validate_functional)
from .harness import (DensityCertificate, DensityExhausted, RunTrace, emit_trace, load_trace,
                      scenario_density, scenario_divergence_gap, validate_trace)
from .schedule import WagerSchedule
from .tables import (CapitalTable, Report, StagedSupermartingale, check_granularity, check_sandwich,
                     check_supermartingale, granularize, staged_validate)

__version__ = "0.1.0"
