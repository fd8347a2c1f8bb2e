"""Pure-Python day-span kernel; reference twin of ``_kernels.pyx``.

Both implementations must perform the same floating-point operations in the
same order so that results agree bit for bit.
"""

import numpy as np

NEGLIGIBLE = 1e-6


def simulate_span(severities, day0, transitions, dose_start, dose_amount,
                  dose_onset, dose_half_life, effect_mean, effect_std, z, u):
    """Advance three severity chains ``len(u)`` days under medication pressure.

    Parameters
    ----------
    severities : int array (3,)
        1-based states at ``day0``.
    transitions : float array (3, n, n)
        Base transition matrix per condition.
    dose_* : float arrays (k,)
        Start day, dosage, days to onset and half-life per dose.
    effect_mean, effect_std : float arrays (k, 3)
    z : float array (n_days, k, 3)
        Standard normals for the per-dose effect draws.
    u : float array (n_days, 3)
        Uniforms for the state transitions.

    Returns
    -------
    int64 array (n_days, 3) of 1-based states after each day.
    """
    n_days = u.shape[0]
    n_states = transitions.shape[1]
    k = dose_start.shape[0]
    state = [int(s) - 1 for s in severities]
    T = transitions.tolist()
    starts = dose_start.tolist()
    amounts = dose_amount.tolist()
    onsets = dose_onset.tolist()
    halves = dose_half_life.tolist()
    means = effect_mean.tolist()
    stds = effect_std.tolist()
    zl = z.tolist()
    ul = u.tolist()
    out = np.empty((n_days, 3), dtype=np.int64)
    for t in range(n_days):
        day = day0 + t
        conc = [0.0] * k
        for j in range(k):
            elapsed = day - starts[j]
            if elapsed >= onsets[j]:
                c = amounts[j] * 0.5 ** (elapsed / halves[j])
                if c >= NEGLIGIBLE:
                    conc[j] = c
        for c_idx in range(3):
            p = 0.0
            for j in range(k):
                if conc[j] != 0.0:
                    p += conc[j] * (means[j][c_idx] + stds[j][c_idx] * zl[t][j][c_idx])
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
            row = T[c_idx][i]
            uu = ul[t][c_idx]
            acc = 0.0
            nxt = 0
            for jj in range(n_states):
                prob = (1.0 - a) * row[jj]
                if jj == target:
                    prob += a
                if prob > 0.0:
                    nxt = jj
                    acc += prob
                    if uu < acc:
                        break
            state[c_idx] = nxt
            out[t, c_idx] = nxt + 1
    return out
