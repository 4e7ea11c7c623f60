"""Thrust/moment to rotor-speed allocation for the X quadrotor."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .params import UavParams


@lru_cache(maxsize=32)
def mixer_matrix(P: UavParams) -> np.ndarray:
    """``B`` with ``[f, Mx, My, Mz] = B @ [f_1..f_4]``."""
    rows = [
        [1.0] * P.n_r,
        [p[1] for p in P.rotor_positions],
        [-p[0] for p in P.rotor_positions],
        [s * P.c_tau for s in P.spin_dirs],
    ]
    return np.array(rows)


@lru_cache(maxsize=32)
def _mixer_inverse(P: UavParams):
    return tuple(tuple(r) for r in np.linalg.inv(mixer_matrix(P)).tolist())


def allocate_thrusts(f: float, M, P: UavParams):
    """Per-rotor thrusts clamped to ``[0, f_max]`` and a saturation flag."""
    Binv = _mixer_inverse(P)
    w = (f, M[0], M[1], M[2])
    fmax = P.f_max
    out = []
    sat = False
    for row in Binv:
        fi = row[0] * w[0] + row[1] * w[1] + row[2] * w[2] + row[3] * w[3]
        if fi < 0.0:
            fi, sat = 0.0, True
        elif fi > fmax:
            fi, sat = fmax, True
        out.append(fi)
    return out, sat


def control_allocation(f: float, M, P: UavParams):
    """Signed rotor spin rates ``-s_i sqrt(f_i / k_T)`` and the saturation flag."""
    thrusts, sat = allocate_thrusts(f, M, P)
    spins = [-s * math.sqrt(fi / P.k_T) for s, fi in zip(P.spin_dirs, thrusts)]
    return spins, sat
