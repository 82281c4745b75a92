from app.integrator.verlet import (
    TRACER,
    ObservationBuffer,
    ObservationSink,
    StepObservation,
    integrate,
    observe,
    verlet_step,
)

__all__ = [
    "TRACER", "ObservationBuffer", "ObservationSink", "StepObservation",
    "integrate", "observe", "verlet_step",
]
