"""Matrix exponential wrapper and the Bessel-ratio power series used by the kernels."""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg


class ConvergenceError(ArithmeticError):
    """A series or matrix function failed to converge for the given input."""


def expm(M) -> np.ndarray:
    """Matrix exponential (scipy's Pade scaling and squaring) with input checks.

    Raises
    ------
    ConvergenceError
        For non-finite input or an overflowing result.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expm needs a square matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ConvergenceError("matrix exponential of a non-finite matrix")
    with np.errstate(over="ignore", invalid="ignore"):
        result = scipy.linalg.expm(M)
    if not np.all(np.isfinite(result)):
        raise ConvergenceError(
            f"matrix exponential overflowed (1-norm {np.linalg.norm(M, 1):.3g})"
        )
    return result


SERIES_RTOL = 1e-15
SERIES_MAX_TERMS = 40


def bessel_ratio_series(s, derivative: bool = False) -> np.ndarray:
    """Evaluate G(s) = sum_m (s/4)**m / (m! (m+1)!) or its derivative G'(s).

    With z = sqrt(s) this is G(s) = 2 I1(z)/z, and G(-s) = 2 J1(z)/z, so both
    the modified and the ordinary first-order Bessel ratios are evaluated
    from one real power series without forming a square root. Summation
    stops once every next term is below ``SERIES_RTOL`` relative to its
    partial sum, or after ``SERIES_MAX_TERMS`` terms.

    ``G'(s) = sum_m (s/4)**m / (4 m! (m+2)!)``.
    """
    s = np.asarray(s, dtype=float)
    quarter = s / 4.0
    # term_m = quarter**m / (m! (m + 1 + d)!) with the overall 1/4 for d = 1
    d = 1 if derivative else 0
    term = np.full_like(quarter, 1.0 / math.factorial(1 + d))
    total = term.copy()
    for m in range(1, SERIES_MAX_TERMS):
        term = term * quarter / (m * (m + 1 + d))
        total = total + term
        if np.all(np.abs(term) <= SERIES_RTOL * np.abs(total)):
            break
    else:
        if np.any(np.abs(term) > 1e-12 * np.maximum(np.abs(total), 1.0)):
            raise ConvergenceError(
                f"Bessel series did not converge for |s| up to {np.max(np.abs(s)):.3g}"
            )
    if derivative:
        total = total / 4.0
    return total
