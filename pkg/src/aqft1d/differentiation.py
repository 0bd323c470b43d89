"""Central differences with Richardson extrapolation, vectorized over points."""
import numpy as np

DEFAULT_STEP = 2e-3
DEFAULT_LEVELS = 3


def _tableau(estimates):
    # central differences have even-power error expansions
    D = list(estimates)
    for j in range(1, len(D)):
        f = 4.0 ** j
        D = [(f * D[i + 1] - D[i]) / (f - 1.0) for i in range(len(D) - 1)]
    return D[0]


def derivatives(f, t, h, levels=DEFAULT_LEVELS, order=(1, 2)):
    """First and/or second derivatives of ``f`` at the points ``t``.

    ``f`` maps a 1-D array of points to an array whose first axis runs over
    the points.  ``h`` is a scalar or per-point array of base steps; level
    ``k`` uses ``h / 2**k``.  All evaluations happen in a single call to
    ``f``.  Returns a dict keyed by derivative order.
    """
    t = np.atleast_1d(np.asarray(t, float))
    h = np.broadcast_to(np.asarray(h, float), t.shape)
    steps = [h / 2.0 ** k for k in range(levels)]
    pts = [t] + [t + s for s in steps] + [t - s for s in steps]
    vals = np.asarray(f(np.concatenate(pts)))
    n = t.size
    f0 = vals[:n]
    plus = [vals[(1 + k) * n:(2 + k) * n] for k in range(levels)]
    minus = [vals[(1 + levels + k) * n:(2 + levels + k) * n] for k in range(levels)]
    extra = (1,) * (vals.ndim - 1)
    out = {}
    if 1 in order:
        out[1] = _tableau([(p - m) / (2.0 * s.reshape(s.shape + extra))
                           for p, m, s in zip(plus, minus, steps)])
    if 2 in order:
        out[2] = _tableau([(p - 2.0 * f0 + m) / (s.reshape(s.shape + extra) ** 2)
                           for p, m, s in zip(plus, minus, steps)])
    out[0] = f0
    return out
