"""Hot numeric kernels: polynomial evaluation and RK4 smooth-segment runs.

Two implementations are provided: numba @njit kernels (default) and a pure
numpy fallback.  Set SWSOS_NO_NUMBA=1 to force the fallback; this is what
`benchmarks/bench_kernels.py` compares.
"""
from __future__ import annotations

import os

import numpy as np

USE_NUMBA = os.environ.get("SWSOS_NO_NUMBA", "0") not in ("1", "true", "yes")

if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover - numba is a declared dependency
        USE_NUMBA = False


# -- pure numpy / python implementations ----------------------------------

def _eval_poly_np(coeffs, exps, x):
    # prod over variables of x_k^e_k per term, then dot with coefficients
    return float(np.dot(coeffs, np.prod(x[None, :] ** exps, axis=1)))


def _eval_poly_batch_np(coeffs, exps, X):
    # (npts, nterms) power table; memory fine at oracle scale
    pows = X[:, None, :] ** exps[None, :, :]
    return np.prod(pows, axis=2) @ coeffs


def _rk4_smooth_run_np(fc, fe, foff, cc, ce, coff, x0, h, max_steps,
                       ball_stop, box_lo, box_hi, band):
    n = x0.shape[0]
    nb = len(coff) - 1
    states = np.empty((max_steps + 1, n))
    states[0] = x0
    chi_prev = np.empty(nb)
    for b in range(nb):
        chi_prev[b] = _eval_poly_np(cc[coff[b]:coff[b + 1]], ce[coff[b]:coff[b + 1]], x0)

    def field(x):
        out = np.empty(n)
        for k in range(n):
            out[k] = _eval_poly_np(fc[foff[k]:foff[k + 1]], fe[foff[k]:foff[k + 1]], x)
        return out

    for step in range(max_steps):
        x = states[step]
        if np.sqrt(np.dot(x, x)) <= ball_stop:
            return states[: step + 1], STOP_CONVERGED, -1
        k1 = field(x)
        k2 = field(x + 0.5 * h * k1)
        k3 = field(x + 0.5 * h * k2)
        k4 = field(x + h * k3)
        xn = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(xn)) or np.any(xn < box_lo) or np.any(xn > box_hi):
            states[step + 1] = xn
            return states[: step + 2], STOP_ESCAPED, -1
        states[step + 1] = xn
        for b in range(nb):
            chi = _eval_poly_np(cc[coff[b]:coff[b + 1]], ce[coff[b]:coff[b + 1]], xn)
            if chi * chi_prev[b] < 0.0 or abs(chi) <= band:
                return states[: step + 2], STOP_BOUNDARY, b
            chi_prev[b] = chi
    return states, STOP_MAXSTEPS, -1


# termination codes shared by both implementations
STOP_MAXSTEPS = 0
STOP_CONVERGED = 1
STOP_ESCAPED = 2
STOP_BOUNDARY = 3


if USE_NUMBA:

    @njit(cache=True)
    def _eval_poly_nb(coeffs, exps, x):
        total = 0.0
        nterms = coeffs.shape[0]
        nvars = x.shape[0]
        for t in range(nterms):
            term = coeffs[t]
            for k in range(nvars):
                e = exps[t, k]
                if e == 1:
                    term *= x[k]
                elif e > 1:
                    term *= x[k] ** e
            total += term
        return total

    @njit(cache=True)
    def _eval_poly_batch_nb(coeffs, exps, X):
        npts = X.shape[0]
        out = np.empty(npts)
        for i in range(npts):
            out[i] = _eval_poly_nb(coeffs, exps, X[i])
        return out

    @njit(cache=True)
    def _field_nb(fc, fe, foff, x, out):
        for k in range(out.shape[0]):
            out[k] = _eval_poly_nb(fc[foff[k]:foff[k + 1]], fe[foff[k]:foff[k + 1]], x)

    @njit(cache=True)
    def _rk4_smooth_run_nb(fc, fe, foff, cc, ce, coff, x0, h, max_steps,
                           ball_stop, box_lo, box_hi, band):
        n = x0.shape[0]
        nb = coff.shape[0] - 1
        states = np.empty((max_steps + 1, n))
        states[0] = x0
        chi_prev = np.empty(nb)
        for b in range(nb):
            chi_prev[b] = _eval_poly_nb(cc[coff[b]:coff[b + 1]], ce[coff[b]:coff[b + 1]], x0)
        k1 = np.empty(n)
        k2 = np.empty(n)
        k3 = np.empty(n)
        k4 = np.empty(n)
        for step in range(max_steps):
            x = states[step]
            nrm = 0.0
            for k in range(n):
                nrm += x[k] * x[k]
            if np.sqrt(nrm) <= ball_stop:
                return states[: step + 1], STOP_CONVERGED, -1
            _field_nb(fc, fe, foff, x, k1)
            _field_nb(fc, fe, foff, x + 0.5 * h * k1, k2)
            _field_nb(fc, fe, foff, x + 0.5 * h * k2, k3)
            _field_nb(fc, fe, foff, x + h * k3, k4)
            xn = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            ok = True
            for k in range(n):
                if not np.isfinite(xn[k]) or xn[k] < box_lo[k] or xn[k] > box_hi[k]:
                    ok = False
            states[step + 1] = xn
            if not ok:
                return states[: step + 2], STOP_ESCAPED, -1
            for b in range(nb):
                chi = _eval_poly_nb(cc[coff[b]:coff[b + 1]], ce[coff[b]:coff[b + 1]], xn)
                if chi * chi_prev[b] < 0.0 or abs(chi) <= band:
                    return states[: step + 2], STOP_BOUNDARY, b
                chi_prev[b] = chi
        return states, STOP_MAXSTEPS, -1

    eval_poly = _eval_poly_nb
    eval_poly_batch = _eval_poly_batch_nb
    rk4_smooth_run = _rk4_smooth_run_nb
else:
    eval_poly = _eval_poly_np
    eval_poly_batch = _eval_poly_batch_np
    rk4_smooth_run = _rk4_smooth_run_np
