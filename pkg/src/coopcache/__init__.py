"""Centralized coded caching with user cooperation.

Deterministic subfile placement, parallel server/user XOR delivery
scheduling with bit-exact decode verification, and exact rational
analysis of delay, gains, bounds, and the memory-sharing envelope.
"""

from .analysis import (
    DelayReport,
    baseline_D2D,
    baseline_MN,
    delay_report,
    envelope,
    gains,
    lower_bound,
    memory_grid,
    rate_RC,
    rates_R1_R2,
    verify_gap,
)
from .delivery import (
    Schedule,
    SchedulingError,
    Slot,
    TransmissionSymbol,
    build_schedule,
    export_schedule,
    import_schedule,
    validate_schedule,
)
from .params import (
    DerivedParams,
    ParameterError,
    SystemParams,
    allocate_loads,
    choose_alpha,
    derive,
    integral_t,
    multicast_size,
    optimal_alpha,
)
from .placement import (
    CacheState,
    FileLibrary,
    SplitError,
    SubfileId,
    fill_caches,
    subfile_ids,
)
from .simulator import (
    DecodeError,
    decode_user,
    execute_schedule,
    normalized_delay,
    worst_case_demands,
)

__version__ = "0.1.0"
