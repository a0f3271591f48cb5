"""Derivative-free bounded 1-D maximization."""

import math

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
INV_PHI2 = (3.0 - math.sqrt(5.0)) / 2.0


def golden_section_max(f, a, b, tol=1e-8, max_iter=200):
    """Maximize a unimodal ``f`` on ``[a, b]``.

    Returns ``(x, f(x))`` for the best point evaluated; the bracket is shrunk
    until its width is below ``tol``.
    """
    if b < a:
        raise ValueError("empty bracket")
    c = a + INV_PHI2 * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = a + INV_PHI2 * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)
