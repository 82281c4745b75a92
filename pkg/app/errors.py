from __future__ import annotations


class SimulationError(Exception):
    """Базовое исключение пакета."""


class ConfigurationError(SimulationError, ValueError):
    pass


class DomainError(SimulationError, ValueError):
    """Вне области определения потенциала: r = 0, совпадающие частицы."""


class NumericalError(SimulationError, ArithmeticError):
    pass


class IntegrationError(NumericalError):
    def __init__(self, message: str, *, step: int):
        super().__init__(f"{message} (шаг {step})")
        self.step = step


class EnergyBlowUpError(IntegrationError):
    def __init__(self, *, step: int, drift: float):
        super().__init__(f"энергия разошлась, |H(t) - H(0)| = {drift:.6g}", step=step)
        self.drift = drift


class SamplingError(NumericalError):
    def __init__(self, message: str, *, step: int, stream: int | None = None):
        super().__init__(f"{message} (шаг {step}, поток {stream})")
        self.step = step
        self.stream = stream


class StatisticsError(SimulationError, ValueError):
    pass


class AlignmentError(StatisticsError):
    """Временные сетки рядов не совпадают."""
