"""
Горячие циклы на numba.

Порядок суммирования фиксирован: сила на частицу i копится по соседям j
в порядке возрастания индекса, потенциал - по парам (i, j), i < j, в
лексикографическом порядке. Поэтому обход по ячейкам даёт побитово тот же
результат, что и полный перебор пар.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit

# Коды возврата продвигающих ядер
OK = 0
COINCIDENT = 1
NON_FINITE = 2


@njit(cache=True)
def min_image(d, box_edge):
    # результат в [-L/2, L/2), ничья +L/2 уходит в -L/2
    r = d - box_edge * math.floor(d / box_edge + 0.5)
    # округление d / L + 0.5 может вынести результат за границу на ulp
    half = 0.5 * box_edge
    if r >= half:
        r -= box_edge
    elif r < -half:
        r += box_edge
    return r


@njit(cache=True)
def wrap(x, box_edge):
    y = x % box_edge
    if y >= box_edge:
        y = 0.0
    return y


@njit(cache=True)
def pair_energy(r2, rc2, shift):
    if r2 > rc2:
        return 0.0
    inv6 = 1.0 / (r2 * r2 * r2)
    return 4.0 * (inv6 * inv6 - inv6) - shift


@njit(cache=True)
def force_coefficient(r2, rc2):
    # F_i = c * (q_i - q_j), c = 24 (2 r^-14 - r^-8)
    if r2 > rc2:
        return 0.0
    inv2 = 1.0 / r2
    inv6 = inv2 * inv2 * inv2
    inv8 = inv6 * inv2
    return 24.0 * (2.0 * inv6 * inv8 - inv8)


@njit(cache=True)
def bin_particles(positions, box_edge, m):
    n = positions.shape[0]
    edge = box_edge / m
    cell_of = np.empty(n, np.int64)
    counts = np.zeros(m * m, np.int64)
    for i in range(n):
        cx = int(positions[i, 0] / edge)
        cy = int(positions[i, 1] / edge)
        if cx >= m:
            cx = m - 1
        if cy >= m:
            cy = m - 1
        c = cx + cy * m
        cell_of[i] = c
        counts[c] += 1
    start = np.zeros(m * m + 1, np.int64)
    for c in range(m * m):
        start[c + 1] = start[c] + counts[c]
    fill = start[:-1].copy()
    members = np.empty(n, np.int64)
    # частицы внутри ячейки идут по возрастанию индекса
    for i in range(n):
        c = cell_of[i]
        members[fill[c]] = i
        fill[c] += 1
    return cell_of, start, members


@njit(cache=True)
def accumulate_cells(positions, box_edge, r_cutoff, shift, m, cell_of, start, members, forces):
    n = positions.shape[0]
    rc2 = r_cutoff * r_cutoff
    potential = 0.0
    neighbours = np.empty(9, np.int64)
    buf = np.empty(n, np.int64)
    for i in range(n):
        c = cell_of[i]
        cx = c % m
        cy = c // m
        # при m < 3 соседние ячейки совпадают после заворота
        nc = 0
        for oy in range(-1, 2):
            for ox in range(-1, 2):
                cc = ((cx + ox) % m) + ((cy + oy) % m) * m
                seen = False
                for k in range(nc):
                    if neighbours[k] == cc:
                        seen = True
                if not seen:
                    neighbours[nc] = cc
                    nc += 1
        cnt = 0
        for k in range(nc):
            cc = neighbours[k]
            for s in range(start[cc], start[cc + 1]):
                buf[cnt] = members[s]
                cnt += 1
        candidates = np.sort(buf[:cnt])

        xi = positions[i, 0]
        yi = positions[i, 1]
        fx = 0.0
        fy = 0.0
        for k in range(cnt):
            j = candidates[k]
            if j == i:
                continue
            dx = min_image(xi - positions[j, 0], box_edge)
            dy = min_image(yi - positions[j, 1], box_edge)
            r2 = dx * dx + dy * dy
            if r2 == 0.0:
                return potential, i
            coef = force_coefficient(r2, rc2)
            fx += coef * dx
            fy += coef * dy
            if j > i:
                potential += pair_energy(r2, rc2, shift)
        forces[i, 0] = fx
        forces[i, 1] = fy
    return potential, -1


@njit(cache=True)
def accumulate_all_pairs(positions, box_edge, r_cutoff, shift, forces):
    n = positions.shape[0]
    rc2 = r_cutoff * r_cutoff
    potential = 0.0
    for i in range(n):
        xi = positions[i, 0]
        yi = positions[i, 1]
        fx = 0.0
        fy = 0.0
        for j in range(n):
            if j == i:
                continue
            dx = min_image(xi - positions[j, 0], box_edge)
            dy = min_image(yi - positions[j, 1], box_edge)
            r2 = dx * dx + dy * dy
            if r2 == 0.0:
                return potential, i
            coef = force_coefficient(r2, rc2)
            fx += coef * dx
            fy += coef * dy
            if j > i:
                potential += pair_energy(r2, rc2, shift)
        forces[i, 0] = fx
        forces[i, 1] = fy
    return potential, -1


@njit(cache=True)
def cell_forces(positions, box_edge, r_cutoff, shift, m, forces):
    cell_of, start, members = bin_particles(positions, box_edge, m)
    return accumulate_cells(positions, box_edge, r_cutoff, shift, m, cell_of, start, members, forces)


@njit(cache=True)
def _all_finite(a):
    for i in range(a.shape[0]):
        for k in range(a.shape[1]):
            if not math.isfinite(a[i, k]):
                return False
    return True


@njit(cache=True)
def _drift(positions, velocities, displacement, h, box_edge):
    n = positions.shape[0]
    for i in range(n):
        for k in range(2):
            inc = velocities[i, k] * h
            displacement[i, k] += inc
            positions[i, k] = wrap(positions[i, k] + inc, box_edge)


@njit(cache=True)
def _kick(velocities, forces, h):
    n = velocities.shape[0]
    for i in range(n):
        for k in range(2):
            velocities[i, k] += h * forces[i, k]


@njit(cache=True)
def advance_verlet(positions, velocities, displacement, time, box_edge, r_cutoff, m, dt, n_steps, as_printed, forces):
    """
    n_steps шагов Штёрмера-Верле на месте.
    Возвращает (выполнено шагов, время, код); при коде != OK первое число -
    номер упавшего шага внутри вызова.
    """
    half = 0.5 * dt
    pos0 = np.empty_like(positions)
    disp0 = np.empty_like(displacement)
    for step in range(n_steps):
        if as_printed:
            pos0[:, :] = positions
            disp0[:, :] = displacement
        _drift(positions, velocities, displacement, half, box_edge)
        _, bad = cell_forces(positions, box_edge, r_cutoff, 0.0, m, forces)
        if bad >= 0:
            return step, time, COINCIDENT
        if not _all_finite(forces):
            return step, time, NON_FINITE
        _kick(velocities, forces, dt)
        if as_printed:
            # третья строка в напечатанном виде: дрейф от q_n, а не от q_{n+1/2}
            positions[:, :] = pos0
            displacement[:, :] = disp0
        _drift(positions, velocities, displacement, half, box_edge)
        time += dt
    return n_steps, time, OK


@njit(cache=True)
def advance_langevin(positions, velocities, displacement, time, box_edge, r_cutoff, m, h,
                     decay, noise_scale, noise, fused, n_steps, forces):
    """
    Полудрейф, полуудар, точный шаг Орнштейна-Уленбека, полуудар, полудрейф.
    При fused (трение 0) два полуудара сливаются в один полный удар, и шаг
    побитово совпадает с advance_verlet.
    """
    half = 0.5 * h
    n = positions.shape[0]
    for step in range(n_steps):
        _drift(positions, velocities, displacement, half, box_edge)
        _, bad = cell_forces(positions, box_edge, r_cutoff, 0.0, m, forces)
        if bad >= 0:
            return step, time, COINCIDENT
        if not _all_finite(forces):
            return step, time, NON_FINITE
        if fused:
            _kick(velocities, forces, h)
        else:
            _kick(velocities, forces, half)
            for i in range(n):
                for k in range(2):
                    velocities[i, k] = decay * velocities[i, k] + noise_scale * noise[step, i, k]
            _kick(velocities, forces, half)
        _drift(positions, velocities, displacement, half, box_edge)
        time += h
    return n_steps, time, OK
