from __future__ import annotations

import numpy as np

from app.model.kernels import min_image


def min_image_disp(a, b, box_edge: float) -> np.ndarray:
    """
    Вектор a - b по минимальному образу на торе со стороной box_edge.
    Компоненты в [-L/2, L/2); ровно L/2 отображается в -L/2.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    return np.array([min_image(float(a[k] - b[k]), box_edge) for k in range(2)])


def torus_distance(a, b, box_edge: float) -> float:
    return float(np.linalg.norm(min_image_disp(a, b, box_edge)))
