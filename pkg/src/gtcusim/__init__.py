"""Desk-scale digital twin of a gas-turbine compressor unit (GTCU).

Three cooperating levels, mirrored from the usual plant/PLC/SCADA split:

- ``plant``     the physical model (turbine shafts, exhaust, oil, fans)
                built from ``dynamics`` transfer-function blocks
- ``control``   an emulated PLC scan: start/stop sequencer, protections,
                PID speed governor, auxiliary-equipment logic
- ``tagbus``    the tag exchange between levels (request/poke/advise over
                a line protocol) plus the historian archive

On top of those sit ``sysid`` (model identification and residual
diagnostics), ``scheduler`` (fuel-optimal load dispatch), and the
``cli``/``runner`` scenario engine that wires everything together for
deterministic batch runs, real-time training sessions, and replay.
"""

from gtcusim.dynamics import (
    DiscreteBlock,
    ModelError,
    Order,
    PropagationError,
    SamplingError,
    Signal,
    TransferFunction,
    discretize,
    simulate_series,
    step_response,
)

__version__ = "0.1.0"

__all__ = [
    "DiscreteBlock",
    "ModelError",
    "Order",
    "PropagationError",
    "SamplingError",
    "Signal",
    "TransferFunction",
    "discretize",
    "simulate_series",
    "step_response",
    "__version__",
]
