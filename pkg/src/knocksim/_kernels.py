"""Hot numeric kernels, in numba and pure-numpy variants.

Every public name here is bound to one of two implementations according to
:mod:`knocksim._backend`:

* ``*_numba`` -- scalar loops compiled with ``@njit(nogil=True, cache=True)``
* ``*_numpy`` -- vectorized fallbacks with the same per-element operation
  order (component sums accumulate left to right in both variants)

The kernels cover the paths that dominate runtime: counter-based random
block generation, mixture density evaluation over sample batches, ancestral
mixture draws, and the accept-reject trial loop.

Position accounting: random values are addressed by absolute position ``k``
in a stream, ``draw(k) = mix64(base + (k+1)*PHI)``.  Kernels that consume
randomness take ``(base, pos)`` and report how many positions they used, so
scalar and batched calls consume identical subsequences.
"""

import math

import numpy as np
from scipy.special import erfc as _erfc

from ._backend import NUMBA_AVAILABLE, USE_NUMBA

_MASK64 = (1 << 64) - 1
_PHI = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_U53 = 2.0 ** -53
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)
_INV_SQRT_2 = 1.0 / math.sqrt(2.0)
_TWO_PI = 2.0 * math.pi


def mix64_py(x: int) -> int:
    """splitmix64 finalizer on a plain python int (used for key derivation)."""
    x &= _MASK64
    x = ((x ^ (x >> 30)) * _MIX1) & _MASK64
    x = ((x ^ (x >> 27)) * _MIX2) & _MASK64
    return x ^ (x >> 31)


# ---------------------------------------------------------------------------
# numpy variants
# ---------------------------------------------------------------------------

def splitmix_block_numpy(base: int, start: int, n: int) -> np.ndarray:
    """Draws at positions start..start+n-1 as uint64, counter-based."""
    ks = np.arange(n, dtype=np.uint64) + np.uint64((start + 1) & _MASK64)
    z = np.uint64(base) + ks * np.uint64(_PHI)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def _u_closed(bits: np.ndarray) -> np.ndarray:
    # uniform in [0, 1), 53-bit resolution
    return (bits >> np.uint64(11)).astype(np.float64) * _U53


def _u_open(bits: np.ndarray) -> np.ndarray:
    # uniform in (0, 1), safe under log()
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * _U53


def pdf_batch_numpy(w, mu, sg, y):
    acc = np.zeros(y.size, dtype=np.float64)
    for i in range(w.size):
        t = (y - mu[i]) / sg[i]
        acc += w[i] * _INV_SQRT_2PI / sg[i] * np.exp(-0.5 * t * t)
    return acc


def logpdf_batch_numpy(w, mu, sg, y):
    m = w.size
    comp = np.empty((y.size, m), dtype=np.float64)
    for i in range(m):
        t = (y - mu[i]) / sg[i]
        comp[:, i] = math.log(w[i]) - math.log(sg[i]) - _HALF_LOG_2PI - 0.5 * t * t
    top = comp.max(axis=1)
    s = np.zeros(y.size, dtype=np.float64)
    for i in range(m):
        s += np.exp(comp[:, i] - top)
    return top + np.log(s)


def cdf_batch_numpy(w, mu, sg, y):
    acc = np.zeros(y.size, dtype=np.float64)
    for i in range(w.size):
        t = (y - mu[i]) / sg[i]
        acc += w[i] * 0.5 * _erfc(-t * _INV_SQRT_2)
    return acc


def normal_block_numpy(base: int, pos: int, n: int) -> np.ndarray:
    """n standard normals; draw i uses positions pos+2i, pos+2i+1 (Box-Muller)."""
    bits = splitmix_block_numpy(base, pos, 2 * n)
    u1 = _u_open(bits[0::2])
    u2 = _u_closed(bits[1::2])
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(_TWO_PI * u2)


def ancestral_block_numpy(base, pos, cumw, mu, sg, n):
    """n mixture draws; draw i uses positions pos+3i (component), +1, +2 (normal)."""
    bits = splitmix_block_numpy(base, pos, 3 * n)
    uc = _u_closed(bits[0::3])
    u1 = _u_open(bits[1::3])
    u2 = _u_closed(bits[2::3])
    idx = np.searchsorted(cumw, uc, side="right")
    idx = np.minimum(idx, cumw.size - 1)
    z = np.sqrt(-2.0 * np.log(u1)) * np.cos(_TWO_PI * u2)
    return mu[idx] + sg[idx] * z


def accept_reject_block_numpy(base, pos, w, mu, sg, lo, hi, bound, nout, cap):
    """Fill nout accepted samples; trial t uses positions pos+2t, pos+2t+1.

    Returns (samples, ntrials); ntrials == -1 signals more than ``cap``
    consecutive rejections (inconsistent envelope).
    """
    out = np.empty(nout, dtype=np.float64)
    width = hi - lo
    filled = 0
    trials_done = 0
    since_accept = 0
    chunk = 8192
    while filled < nout:
        bits = splitmix_block_numpy(base, pos + 2 * trials_done, 2 * chunk)
        u = _u_closed(bits)
        yg = lo + width * u[0::2]
        uy = u[1::2]
        acc = uy * bound <= pdf_batch_numpy(w, mu, sg, yg)
        idx = np.nonzero(acc)[0]
        if idx.size == 0:
            since_accept += chunk
            trials_done += chunk
            if since_accept > cap:
                return out, -1
            continue
        take = min(idx.size, nout - filled)
        used = idx[:take]
        if since_accept + used[0] > cap:
            return out, -1
        if take > 1 and int(np.diff(used).max()) - 1 > cap:
            return out, -1
        out[filled:filled + take] = yg[used]
        filled += take
        if filled == nout:
            trials_done += int(used[-1]) + 1
        else:
            since_accept = chunk - 1 - int(idx[-1])
            trials_done += chunk
    return out, trials_done


# ---------------------------------------------------------------------------
# numba variants
# ---------------------------------------------------------------------------

if NUMBA_AVAILABLE:
    from numba import njit

    _jit = njit(nogil=True, cache=True)

    @_jit
    def _draw(base, k):
        # draw at position k: mix64(base + (k+1)*PHI), everything mod 2**64
        z = np.uint64(base) + np.uint64(k + 1) * np.uint64(_PHI)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))

    @_jit
    def splitmix_block_numba(base, start, n):
        out = np.empty(n, dtype=np.uint64)
        for i in range(n):
            out[i] = _draw(base, start + i)
        return out

    @_jit
    def _uc(bits):
        return np.float64(bits >> np.uint64(11)) * _U53

    @_jit
    def _uo(bits):
        return (np.float64(bits >> np.uint64(11)) + 0.5) * _U53

    @_jit
    def _pdf_scalar(w, mu, sg, y):
        acc = 0.0
        for i in range(w.size):
            t = (y - mu[i]) / sg[i]
            acc += w[i] * _INV_SQRT_2PI / sg[i] * math.exp(-0.5 * t * t)
        return acc

    @_jit
    def pdf_batch_numba(w, mu, sg, y):
        out = np.empty(y.size, dtype=np.float64)
        for j in range(y.size):
            out[j] = _pdf_scalar(w, mu, sg, y[j])
        return out

    @_jit
    def logpdf_batch_numba(w, mu, sg, y):
        m = w.size
        comp = np.empty(m, dtype=np.float64)
        out = np.empty(y.size, dtype=np.float64)
        for j in range(y.size):
            for i in range(m):
                t = (y[j] - mu[i]) / sg[i]
                comp[i] = math.log(w[i]) - math.log(sg[i]) - _HALF_LOG_2PI - 0.5 * t * t
            top = comp[0]
            for i in range(1, m):
                if comp[i] > top:
                    top = comp[i]
            s = 0.0
            for i in range(m):
                s += math.exp(comp[i] - top)
            out[j] = top + math.log(s)
        return out

    @_jit
    def cdf_batch_numba(w, mu, sg, y):
        out = np.empty(y.size, dtype=np.float64)
        for j in range(y.size):
            acc = 0.0
            for i in range(w.size):
                t = (y[j] - mu[i]) / sg[i]
                acc += w[i] * 0.5 * math.erfc(-t * _INV_SQRT_2)
            out[j] = acc
        return out

    @_jit
    def normal_block_numba(base, pos, n):
        out = np.empty(n, dtype=np.float64)
        for i in range(n):
            u1 = _uo(_draw(base, pos + 2 * i))
            u2 = _uc(_draw(base, pos + 2 * i + 1))
            out[i] = math.sqrt(-2.0 * math.log(u1)) * math.cos(_TWO_PI * u2)
        return out

    @_jit
    def ancestral_block_numba(base, pos, cumw, mu, sg, n):
        m = cumw.size
        out = np.empty(n, dtype=np.float64)
        for i in range(n):
            uc = _uc(_draw(base, pos + 3 * i))
            u1 = _uo(_draw(base, pos + 3 * i + 1))
            u2 = _uc(_draw(base, pos + 3 * i + 2))
            j = 0
            while j < m - 1 and uc >= cumw[j]:
                j += 1
            z = math.sqrt(-2.0 * math.log(u1)) * math.cos(_TWO_PI * u2)
            out[i] = mu[j] + sg[j] * z
        return out

    @_jit
    def accept_reject_block_numba(base, pos, w, mu, sg, lo, hi, bound, nout, cap):
        out = np.empty(nout, dtype=np.float64)
        width = hi - lo
        filled = 0
        t = 0
        since_accept = 0
        while filled < nout:
            yg = lo + width * _uc(_draw(base, pos + 2 * t))
            uy = _uc(_draw(base, pos + 2 * t + 1))
            t += 1
            if uy * bound <= _pdf_scalar(w, mu, sg, yg):
                out[filled] = yg
                filled += 1
                since_accept = 0
            else:
                since_accept += 1
                if since_accept > cap:
                    return out, -1
        return out, t


# ---------------------------------------------------------------------------
# active bindings
# ---------------------------------------------------------------------------

if USE_NUMBA:
    splitmix_block = splitmix_block_numba
    pdf_batch = pdf_batch_numba
    logpdf_batch = logpdf_batch_numba
    cdf_batch = cdf_batch_numba
    normal_block = normal_block_numba
    ancestral_block = ancestral_block_numba
    accept_reject_block = accept_reject_block_numba
else:
    splitmix_block = splitmix_block_numpy
    pdf_batch = pdf_batch_numpy
    logpdf_batch = logpdf_batch_numpy
    cdf_batch = cdf_batch_numpy
    normal_block = normal_block_numpy
    ancestral_block = ancestral_block_numpy
    accept_reject_block = accept_reject_block_numpy
