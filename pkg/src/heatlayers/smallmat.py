"""Real 2x2 building blocks for transfer-matrix chains.

Interface matching across piecewise-constant media reduces to products
of three matrix families: rotations, hyperbolic rotations, and axis
stretches. Complex arithmetic stays out of this module on purpose; the
callers that need complex frequencies build their own factors.
"""

import numpy as np

_EYE = np.eye(2)


def rotation(phi):
    """[[cos phi, -sin phi], [sin phi, cos phi]]."""
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, -s], [s, c]])


def hyper(phi):
    """[[cosh phi, sinh phi], [sinh phi, cosh phi]].

    Raises OverflowError for |phi| > 700 where cosh leaves double range.
    """
    if abs(phi) > 700.0:
        raise OverflowError("hyperbolic angle %r exceeds double range" % phi)
    c, s = np.cosh(phi), np.sinh(phi)
    return np.array([[c, s], [s, c]])


def stretch(alpha, beta=None):
    """diag(alpha, beta); the one-argument form is shorthand for diag(1, alpha)."""
    if beta is None:
        alpha, beta = 1.0, alpha
    return np.array([[float(alpha), 0.0], [0.0, float(beta)]])


def ordered_product(factors):
    """Compose factors so the first one listed acts first.

    A column vector v is mapped to A_last @ ... @ A_first @ v, i.e. the
    first factor sits rightmost. An empty sequence gives the identity.
    """
    out = _EYE.copy()
    for a in factors:
        out = a @ out
    return out
