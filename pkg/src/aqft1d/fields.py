"""Smooth compactly supported test functions."""
import numpy as np

from .geometry import VC, FieldConfiguration, Section

# integral of exp(1 - 1/(1 - u^2)) over (-1, 1)
BUMP_MASS = 1.2069003224378762


def bump_profile(u):
    """``exp(1 - 1/(1 - u^2))`` on ``|u| < 1``, zero elsewhere; peak value 1."""
    u = np.asarray(u, float)
    out = np.zeros(u.shape)
    inside = np.abs(u) < 1.0
    v = u[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - v * v))
    return out


def _section(c):
    return c if isinstance(c, Section) else (Section(c) if callable(c) else Section.constant(c))


def bump_field(family, center=0.0, width=1.0, amplitude=1.0, components=1, slot=0,
               scalar_kind=None):
    """Bump of half-width ``width`` around ``center`` with unit ``t``-integral.

    ``center`` may be a number, a function of the base point or a Section;
    the support is VC between ``center - width`` and ``center + width``.
    With several components the bump sits in component ``slot``, unless
    ``amplitude`` is a sequence giving one coefficient per component.
    """
    if not width > 0:
        raise ValueError("width must be positive")
    c = _section(center)
    scale = 1.0 / (BUMP_MASS * width)
    kind = scalar_kind or ("complex" if np.iscomplexobj(amplitude) or components > 1 else "real")
    dtype = complex if kind == "complex" else float
    if np.ndim(amplitude):
        weights = np.asarray(amplitude, dtype)
        if weights.shape != (components,):
            raise ValueError(f"need {components} amplitudes")
    else:
        weights = np.zeros(components, dtype)
        weights[slot] = amplitude

    def ev(t, x):
        t = np.asarray(t, float)
        vals = scale * bump_profile((t - c(x)) / width)
        if components == 1:
            return (weights[0] * vals).astype(dtype)
        return vals[:, None] * weights[None, :]

    support = VC(Section(lambda x: c(x) - width), Section(lambda x: c(x) + width))
    return FieldConfiguration(family, ev, components, kind, support)
