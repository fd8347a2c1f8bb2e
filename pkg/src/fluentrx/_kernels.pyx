# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled day-span kernel; see ``_fallback.simulate_span`` for the contract."""

import numpy as np
cimport numpy as cnp
from libc.math cimport pow

cnp.import_array()

cdef double NEGLIGIBLE = 1e-6


def simulate_span(severities, long day0, double[:, :, ::1] transitions,
                  double[::1] dose_start, double[::1] dose_amount,
                  double[::1] dose_onset, double[::1] dose_half_life,
                  double[:, ::1] effect_mean, double[:, ::1] effect_std,
                  double[:, :, ::1] z, double[:, ::1] u):
    cdef Py_ssize_t n_days = u.shape[0]
    cdef Py_ssize_t n_states = transitions.shape[1]
    cdef Py_ssize_t k = dose_start.shape[0]
    cdef Py_ssize_t t, j, jj, c_idx, i, target, nxt
    cdef double day, elapsed, c, p, a, acc, prob, uu
    cdef long[3] state
    cdef double[::1] conc = np.zeros(k, dtype=np.float64)
    out_arr = np.empty((n_days, 3), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] out = out_arr
    for c_idx in range(3):
        state[c_idx] = <long>severities[c_idx] - 1
    for t in range(n_days):
        day = <double>(day0 + t)
        for j in range(k):
            conc[j] = 0.0
            elapsed = day - dose_start[j]
            if elapsed >= dose_onset[j]:
                c = dose_amount[j] * pow(0.5, elapsed / dose_half_life[j])
                if c >= NEGLIGIBLE:
                    conc[j] = c
        for c_idx in range(3):
            p = 0.0
            for j in range(k):
                if conc[j] != 0.0:
                    p += conc[j] * (effect_mean[j, c_idx] + effect_std[j, c_idx] * z[t, j, c_idx])
            if p > 1.0:
                p = 1.0
            elif p < -1.0:
                p = -1.0
            i = state[c_idx]
            a = -p if p < 0.0 else p
            if p > 0.0:
                target = i - 1 if i > 0 else i
            elif p < 0.0:
                target = i + 1 if i < n_states - 1 else i
            else:
                target = i
            uu = u[t, c_idx]
            acc = 0.0
            nxt = 0
            for jj in range(n_states):
                prob = (1.0 - a) * transitions[c_idx, i, jj]
                if jj == target:
                    prob += a
                if prob > 0.0:
                    nxt = jj
                    acc += prob
                    if uu < acc:
                        break
            state[c_idx] = nxt
            out[t, c_idx] = nxt + 1
    return out_arr
