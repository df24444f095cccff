"""Special functions and survival functions.

Every function accepts a scalar or an array and returns the same shape
(a Python float for scalar input). Arguments outside the domain raise
:class:`~scorescreen.exceptions.DomainError`. Survival functions clamp
underflow to 0 instead of raising.
"""

from __future__ import annotations

import math

import numpy as np

from .exceptions import DomainError

__all__ = [
    "log_gamma",
    "digamma",
    "trigamma",
    "gammaincc",
    "betainc",
    "chi2_sf_1df",
    "normal_sf",
    "student_t_sf",
]

EULER_GAMMA = 0.57721566490153286061
_HALF_LOG_2PI = 0.91893853320467274178

# B_2k for k = 1..9
_BERNOULLI = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
)

_STIRLING_MIN = 12.0
_PSI_MIN = 6.0
_SERIES_TERMS = 40


def _zeta_minus_one(k, cutoff=12):
    """zeta(k) - 1 by Euler-Maclaurin summation from n = 2."""
    head = sum(n ** -float(k) for n in range(2, cutoff))
    N = float(cutoff)
    tail = N ** (1.0 - k) / (k - 1.0) + 0.5 * N ** (-float(k))
    rising = float(k)
    fact = 2.0
    power = N ** (-float(k) - 1.0)
    for j, b2j in enumerate(_BERNOULLI[:7], start=1):
        tail += b2j / fact * rising * power
        rising *= (k + 2 * j - 1.0) * (k + 2 * j)
        fact *= (2 * j + 1.0) * (2 * j + 2.0)
        power /= N * N
    return head + tail


# (-1)^k (zeta(k) - 1) / k, k = 2.._SERIES_TERMS+1
_LGAMMA_SERIES = np.array(
    [(-1.0) ** k * _zeta_minus_one(k) / k for k in range(2, _SERIES_TERMS + 2)]
)


def _wrap(values, scalar):
    return float(values) if scalar else values


def _prepare(x, name, strict=True):
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 0
    arr = np.atleast_1d(arr)
    if np.any(np.isnan(arr)):
        raise DomainError(f"{name}: NaN argument")
    bad = arr <= 0 if strict else arr < 0
    if np.any(bad):
        raise DomainError(
            f"{name}: argument must be {'> 0' if strict else '>= 0'}, "
            f"got {arr[bad][0]!r}"
        )
    return arr, scalar


def _lgamma1p_series(z):
    """ln Gamma(1 + z) + log1p(z) - z (1 - gamma), valid for |z| <= 0.5."""
    acc = np.zeros_like(z)
    for coef in _LGAMMA_SERIES[::-1]:
        acc = acc * z + coef
    return acc * z * z


def _stirling(x):
    inv = 1.0 / x
    inv2 = inv * inv
    corr = np.zeros_like(x)
    for k in range(len(_BERNOULLI) - 1, -1, -1):
        b = _BERNOULLI[k]
        corr = corr * inv2 + b / ((2 * k + 2) * (2 * k + 1))
    return (x - 0.5) * np.log(x) - x + _HALF_LOG_2PI + corr * inv


def log_gamma(x):
    """Natural log of the Gamma function for ``x > 0``.

    Near the roots at 1 and 2 a power series in ``x - 1`` (or ``x - 2``)
    keeps the relative error small; elsewhere the Stirling series is used
    after shifting the argument above 12.
    """
    x, scalar = _prepare(x, "log_gamma")
    out = np.empty_like(x)

    low = x < 0.5
    if np.any(low):
        z = x[low]
        out[low] = _lgamma1p_series(z) - np.log1p(z) + z * (1.0 - EULER_GAMMA) - np.log(z)

    near1 = (x >= 0.5) & (x <= 1.5)
    if np.any(near1):
        z = x[near1] - 1.0
        out[near1] = _lgamma1p_series(z) - np.log1p(z) + z * (1.0 - EULER_GAMMA)

    near2 = (x > 1.5) & (x <= 2.5)
    if np.any(near2):
        z = x[near2] - 2.0
        out[near2] = _lgamma1p_series(z) + z * (1.0 - EULER_GAMMA)

    mid = (x > 2.5) & (x < _STIRLING_MIN)
    if np.any(mid):
        xm = x[mid]
        shift = np.ceil(_STIRLING_MIN - xm)
        prod = np.ones_like(xm)
        for j in range(int(shift.max())):
            prod = np.where(j < shift, prod * (xm + j), prod)
        out[mid] = _stirling(xm + shift) - np.log(prod)

    high = x >= _STIRLING_MIN
    if np.any(high):
        out[high] = _stirling(x[high])

    return _wrap(out[0] if scalar else out, scalar)


def _shift_up(x, threshold):
    """Return (x + k, k) with the smallest integer k >= 0 reaching threshold."""
    shift = np.maximum(np.ceil(threshold - x), 0.0)
    return x + shift, shift


def digamma(x):
    """psi(x) = d/dx ln Gamma(x) for ``x > 0``.

    Upward recurrence psi(x) = psi(x + 1) - 1/x into x >= 6, then the
    asymptotic series.
    """
    x, scalar = _prepare(x, "digamma")
    xs, shift = _shift_up(x, _PSI_MIN)
    acc = np.zeros_like(x)
    for j in range(int(shift.max()) if shift.size else 0):
        acc = np.where(j < shift, acc + 1.0 / (x + j), acc)
    inv2 = 1.0 / (xs * xs)
    series = np.zeros_like(xs)
    for k in range(len(_BERNOULLI) - 1, -1, -1):
        series = series * inv2 + _BERNOULLI[k] / (2 * k + 2)
    out = np.log(xs) - 0.5 / xs - series * inv2 - acc
    return _wrap(out[0] if scalar else out, scalar)


def trigamma(x):
    """psi'(x) for ``x > 0`` (recurrence into x >= 6, then asymptotic series)."""
    x, scalar = _prepare(x, "trigamma")
    xs, shift = _shift_up(x, _PSI_MIN)
    acc = np.zeros_like(x)
    for j in range(int(shift.max()) if shift.size else 0):
        acc = np.where(j < shift, acc + 1.0 / ((x + j) * (x + j)), acc)
    inv = 1.0 / xs
    inv2 = inv * inv
    series = np.zeros_like(xs)
    for k in range(len(_BERNOULLI) - 1, -1, -1):
        series = series * inv2 + _BERNOULLI[k]
    out = inv + 0.5 * inv2 + series * inv2 * inv + acc
    return _wrap(out[0] if scalar else out, scalar)


_TINY = 1e-300
_EPS = 1e-16


def gammaincc(a, x):
    """Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a).

    ``a > 0`` is a scalar, ``x >= 0`` scalar or array. Series for
    ``x < a + 1``, Lentz continued fraction otherwise.
    """
    if not a > 0:
        raise DomainError(f"gammaincc: shape must be > 0, got {a!r}")
    x, scalar = _prepare(x, "gammaincc", strict=False)
    out = np.ones_like(x)
    lga = log_gamma(a)

    series = (x > 0) & (x < a + 1.0)
    if np.any(series):
        xs = x[series]
        term = np.full_like(xs, 1.0 / a)
        total = term.copy()
        ap = a
        for _ in range(1000):
            ap += 1.0
            term = term * xs / ap
            total += term
            if np.all(np.abs(term) < np.abs(total) * _EPS):
                break
        lower = total * np.exp(-xs + a * np.log(xs) - lga)
        out[series] = np.clip(1.0 - lower, 0.0, 1.0)

    out[np.isposinf(x)] = 0.0
    frac = (x >= a + 1.0) & np.isfinite(x)
    if np.any(frac):
        xf = x[frac]
        b = xf + 1.0 - a
        c = np.full_like(xf, 1.0 / _TINY)
        d = 1.0 / b
        h = d.copy()
        done = np.zeros(xf.shape, dtype=bool)
        for i in range(1, 1000):
            an = -i * (i - a)
            b = b + 2.0
            d = an * d + b
            d = np.where(np.abs(d) < _TINY, _TINY, d)
            c = b + an / c
            c = np.where(np.abs(c) < _TINY, _TINY, c)
            d = 1.0 / d
            delta = d * c
            h = np.where(done, h, h * delta)
            done |= np.abs(delta - 1.0) < _EPS
            if done.all():
                break
        with np.errstate(under="ignore"):
            out[frac] = np.exp(-xf + a * np.log(xf) - lga) * h

    return _wrap(out[0] if scalar else out, scalar)


def _betacf(a, b, x, max_iter):
    """Continued fraction for the incomplete beta (modified Lentz), vectorized."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < _TINY, _TINY, d)
    d = 1.0 / d
    h = d.copy()
    done = np.zeros(x.shape, dtype=bool)
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        h = np.where(done, h, h * d * c)
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        delta = d * c
        h = np.where(done, h, h * delta)
        done |= np.abs(delta - 1.0) < 4 * _EPS
        if done.all():
            break
    return h


def _log_beta(a, b):
    """ln B(a, b) for arrays; avoids cancelling two huge log-gammas when
    one argument is large and the other small."""
    big = np.maximum(a, b)
    small = np.minimum(a, b)
    out = np.empty_like(big)
    asym = (big > 1e5) & (small < 10)
    if np.any(asym):
        n = big[asym]
        s = small[asym]
        # ln Gamma(n) - ln Gamma(n + s), asymptotic in 1/n
        diff = -s * np.log(n) - s * (s - 1.0) / (2.0 * n)
        diff += s * (s - 1.0) * (2.0 * s - 1.0) / (12.0 * n * n)
        out[asym] = log_gamma(s) + diff
    rest = ~asym
    if np.any(rest):
        out[rest] = log_gamma(a[rest]) + log_gamma(b[rest]) - log_gamma(a[rest] + b[rest])
    return out


def betainc(a, b, x, xc=None):
    """Regularized incomplete beta I_x(a, b), broadcasting over all arguments.

    ``xc`` optionally carries ``1 - x`` computed without cancellation.
    """
    a_arr = np.asarray(a, dtype=float)
    b_arr = np.asarray(b, dtype=float)
    if np.any(~(a_arr > 0)) or np.any(~(b_arr > 0)):
        raise DomainError(f"betainc: shape parameters must be > 0, got {a!r}, {b!r}")
    x_arr, _ = _prepare(x, "betainc", strict=False)
    scalar = np.ndim(x) == 0 and a_arr.ndim == 0 and b_arr.ndim == 0
    if np.any(x_arr > 1):
        raise DomainError("betainc: x must lie in [0, 1]")
    xc_arr = 1.0 - x_arr if xc is None else np.asarray(xc, dtype=float)
    a_b, b_b, x_b, xc_b = (
        np.array(v, dtype=float).ravel()
        for v in np.broadcast_arrays(
            np.atleast_1d(a_arr), np.atleast_1d(b_arr), x_arr, np.atleast_1d(xc_arr)
        )
    )
    shape = np.broadcast_shapes(np.atleast_1d(a_arr).shape, np.atleast_1d(b_arr).shape, x_arr.shape)
    out = np.where(x_b >= 1.0, 1.0, 0.0)
    inner = (x_b > 0) & (x_b < 1)
    if np.any(inner):
        ai, bi, xi, xci = a_b[inner], b_b[inner], x_b[inner], xc_b[inner]
        with np.errstate(under="ignore"):
            front = np.exp(ai * np.log(xi) + bi * np.log(xci) - _log_beta(ai, bi))
        max_iter = int(300 + 10 * math.sqrt(max(ai.max(), bi.max())))
        direct = xi < (ai + 1.0) / (ai + bi + 2.0)
        res = np.empty_like(xi)
        if np.any(direct):
            sel = direct
            res[sel] = front[sel] * _betacf(ai[sel], bi[sel], xi[sel], max_iter) / ai[sel]
        flip = ~direct
        if np.any(flip):
            sel = flip
            res[sel] = 1.0 - front[sel] * _betacf(bi[sel], ai[sel], xci[sel], max_iter) / bi[sel]
        out[inner] = np.clip(res, 0.0, 1.0)
    out = out.reshape(shape)
    return float(out.ravel()[0]) if scalar else out


def chi2_sf_1df(s):
    """P(chi-square with 1 df > s) = Q(1/2, s/2)."""
    s, scalar = _prepare(s, "chi2_sf_1df", strict=False)
    out = np.asarray(gammaincc(0.5, 0.5 * s), dtype=float).reshape(s.shape)
    return _wrap(out[0] if scalar else out, scalar)


_erfc = np.frompyfunc(math.erfc, 1, 1)


def normal_sf(z):
    """Upper tail of the standard normal."""
    arr = np.asarray(z, dtype=float)
    if arr.ndim == 0:
        return 0.5 * math.erfc(float(arr) / math.sqrt(2.0))
    return 0.5 * _erfc(arr / math.sqrt(2.0)).astype(float)


def student_t_sf(t, nu):
    """P(T_nu > t) for Student's t with ``nu > 0`` degrees of freedom.

    ``nu`` may be a scalar or an array broadcastable against ``t``.
    """
    t_arr = np.asarray(t, dtype=float)
    nu_arr = np.asarray(nu, dtype=float)
    if np.any(~(nu_arr > 0)):
        raise DomainError(f"student_t_sf: degrees of freedom must be > 0, got {nu!r}")
    if np.any(np.isnan(t_arr)):
        raise DomainError("student_t_sf: NaN statistic")
    scalar = t_arr.ndim == 0 and nu_arr.ndim == 0
    t_b, nu_b = np.broadcast_arrays(np.atleast_1d(t_arr), np.atleast_1d(nu_arr))
    t2 = t_b * t_b
    denom = nu_b + t2
    with np.errstate(invalid="ignore"):
        x = np.where(np.isinf(denom), 0.0, nu_b / denom)
        xc = np.where(np.isinf(denom), 1.0, t2 / denom)
    tail = 0.5 * betainc(0.5 * nu_b, 0.5, x, xc=xc)
    out = np.where(t_b >= 0, tail, 1.0 - tail)
    return float(out[0]) if scalar else out
