from __future__ import annotations

import numpy as np

from app.errors import DomainError
from app.model.kernels import force_coefficient, pair_energy

# Минимум 4(r^-12 - r^-6)
R_MIN = 2.0 ** (1.0 / 6.0)


def lj_potential(r: float, r_cutoff: float, *, shift: float = 0.0) -> float:
    """Усечённый Леннард-Джонс: 4(r^-12 - r^-6) при r <= r_cutoff, иначе ровно 0."""
    if r <= 0.0:
        raise DomainError(f"расстояние между частицами должно быть > 0, получено r={r}")
    return float(pair_energy(r * r, r_cutoff * r_cutoff, shift))


def lj_pair_force(disp, r_cutoff: float) -> np.ndarray:
    """Сила на частицу i от частицы j при disp = q_i - q_j (минимальный образ)."""
    d = np.asarray(disp, dtype=np.float64)
    r2 = float(d[0] * d[0] + d[1] * d[1])
    if r2 == 0.0:
        raise DomainError("нулевое смещение между частицами")
    coef = force_coefficient(r2, r_cutoff * r_cutoff)
    return np.array([coef * d[0], coef * d[1]])


def cutoff_jump(r_cutoff: float) -> float:
    # значение 4(r^-12 - r^-6) на обрезке = скачок энергии при жёстком усечении
    return 4.0 * (r_cutoff ** -12 - r_cutoff ** -6)
