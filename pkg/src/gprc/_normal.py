"""Standard normal distribution function and its inverse.

The inverse uses Wichura's AS 241 (PPND16) rational approximations, which
are accurate to about 1e-16 relative error over the open unit interval.
"""

import numpy as np
from scipy.special import ndtr

__all__ = ["norm_cdf", "norm_ppf", "norm_logpdf"]

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)

# central region, |p - 0.5| <= 0.425
_A = (3.387132872796366608, 133.14166789178437745, 1971.5909503065514427,
      13731.693765509461125, 45921.953931549871457, 67265.770927008700853,
      33430.575583588128105, 2509.0809287301226727)
_B = (1.0, 42.313330701600911252, 687.1870074920579083,
      5394.1960214247511077, 21213.794301586595867, 39307.89580009271061,
      28729.085735721942674, 5226.495278852545925)
# intermediate tail, r <= 5
_C = (1.42343711074968357734, 4.6303378461565452959, 5.7694972214606914055,
      3.64784832476320460504, 1.27045825245236838258, 0.24178072517745061177,
      0.0227238449892691845833, 7.7454501427834140764e-4)
_D = (1.0, 2.05319162663775882187, 1.6763848301838038494,
      0.68976733498510000455, 0.14810397642748007459, 0.0151986665636164571966,
      5.475938084995344946e-4, 1.05075007164441684324e-9)
# far tail
_E = (6.6579046435011037772, 5.4637849111641143699, 1.7848265399172913358,
      0.29656057182850489123, 0.026532189526576123093, 0.0012426609473880784386,
      2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 0.59983220655588793769, 0.13692988092273580531,
      0.0148753612908506148525, 7.868691311456132591e-4,
      1.8463183175100546818e-5, 1.4215117583164458887e-7,
      2.04426310338993978564e-15)


def _poly(coef, x):
    out = np.zeros_like(x)
    for c in reversed(coef):
        out = out * x + c
    return out


def norm_ppf(p):
    """Inverse of the standard normal distribution function.

    Returns ``-inf``/``inf`` at 0/1 and ``nan`` outside ``[0, 1]``.
    """
    p = np.asarray(p, dtype=float)
    scalar = p.ndim == 0
    p = np.atleast_1d(p)
    out = np.full(p.shape, np.nan)
    q = p - 0.5

    central = np.abs(q) <= 0.425
    if np.any(central):
        qc = q[central]
        r = 0.180625 - qc * qc
        out[central] = qc * _poly(_A, r) / _poly(_B, r)

    tail = ~central & (p > 0.0) & (p < 1.0)
    if np.any(tail):
        pt = p[tail]
        r = np.where(q[tail] < 0.0, pt, 1.0 - pt)
        r = np.sqrt(-np.log(r))
        near = r <= 5.0
        val = np.empty_like(r)
        rn = r[near] - 1.6
        val[near] = _poly(_C, rn) / _poly(_D, rn)
        rf = r[~near] - 5.0
        val[~near] = _poly(_E, rf) / _poly(_F, rf)
        out[tail] = np.where(q[tail] < 0.0, -val, val)

    out[p == 0.0] = -np.inf
    out[p == 1.0] = np.inf
    return float(out[0]) if scalar else out


def norm_cdf(x):
    return ndtr(x)


def norm_logpdf(x, loc=0.0, scale=1.0):
    z = (np.asarray(x, dtype=float) - loc) / scale
    return -0.5 * z * z - _LOG_SQRT_2PI - np.log(scale)
