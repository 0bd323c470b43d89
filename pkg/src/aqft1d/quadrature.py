"""Quadrature engines.

Two engines live here:

* :func:`integrate` -- adaptive composite Simpson on a scalar integrand,
  backed by the compiled kernel when available.
* :class:`CumulativeIntegrator` -- running integrals ``t -> int_a^t g ds``
  along a fiber, on a mesh of Gauss-Legendre panels that is fixed once per
  base point and anchor.  Because the mesh does not depend on ``t``, the
  result is a smooth function of ``t`` and can be finite-differenced.
"""
import threading
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import NumericError

EPS = np.finfo(float).eps


def integrate(f, a, b, tol=1e-10, max_depth=40):
    """Adaptive Simpson integral of real ``f`` on ``[a, b]``.

    Raises NumericError (with the achieved estimate) if bisection runs past
    ``max_depth`` anywhere.
    """
    value, err, ok = kernels.adaptive_simpson(f, float(a), float(b), tol, max_depth)
    if not ok:
        raise NumericError(
            f"adaptive Simpson did not reach tol={tol:g} on [{a}, {b}] "
            f"within depth {max_depth}", estimate=err)
    return value


@lru_cache(maxsize=None)
def gauss_legendre(n):
    """Nodes, weights and spectral integration matrix on ``[-1, 1]``.

    ``S[i, j] = int_{-1}^{x_i} l_j(s) ds`` for the Lagrange basis ``l_j`` on
    the nodes, so ``S @ f(x)`` integrates ``f`` from -1 up to every node.
    """
    x, w = np.polynomial.legendre.leggauss(n)
    # Legendre-basis integration avoids an ill-conditioned Vandermonde.
    V = np.polynomial.legendre.legvander(x, n - 1)
    Vinv = np.linalg.inv(V)
    S = np.empty((n, n))
    for j in range(n):
        coef = Vinv[:, j]
        antider = np.polynomial.legendre.legint(coef, lbnd=-1.0)
        S[:, j] = np.polynomial.legendre.legval(x, antider)
    for arr in (x, w, S):
        arr.setflags(write=False)
    return x, w, S


class CumulativeIntegrator:
    """Running integral of a vector integrand away from an anchor.

    Computes, for ``t`` on one side of ``anchor``,

        F(t) = int_anchor^t g(s, T(s)) ds,     T(s) = int_anchor^s rho(r) dr,

    where ``rho > 0`` is the fiber density and ``g`` may depend on the
    proper time ``T`` measured from the anchor.  ``direction=+1`` integrates
    toward the future (``t >= anchor``), ``-1`` toward the past.

    The mesh is built from base panels of length ``panel`` starting at the
    anchor; each base panel is bisected adaptively until a Gauss-Legendre
    rule agrees with its two halves.  Panels are appended lazily as larger
    ``|t - anchor|`` are requested and never change once built.
    """

    def __init__(self, integrand, density, anchor, direction=1, panel=1.0,
                 order=16, rtol=1e-13, atol=1e-15, max_depth=30, components=0,
                 max_leaves=4096):
        if direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")
        if not panel > 0:
            raise ValueError("panel length must be positive")
        self.integrand = integrand
        self.density = density
        self.anchor = float(anchor)
        self.direction = direction
        self.panel = float(panel)
        self.order = order
        self.rtol = rtol
        self.atol = atol
        self.max_depth = max_depth
        self.max_leaves = max_leaves
        self.q = components
        self._lefts = [0.0]       # leaf left edges in u = d*(s - anchor)
        self._rights = []
        self._cum = [np.zeros(self.q, complex)]
        self._T = [0.0]
        self._est = [0.0]
        self._n_panels = 0
        self._lock = threading.Lock()

    def _rule(self, l, r, Tl):
        x, w, S = gauss_legendre(self.order)
        half = 0.5 * (r - l)
        u = l + half * (x + 1.0)
        s = self.anchor + self.direction * u
        rho = np.asarray(self.density(s), float)
        if rho.shape == ():
            rho = np.full_like(u, float(rho))
        T = Tl + self.direction * half * (S @ rho)
        R = half * float(w @ rho)
        if self.q:
            g = np.asarray(self.integrand(s, T)).reshape(len(u), self.q)
            I = self.direction * half * (w @ g)
            # first moment about l: a symmetric integrand cannot cancel both
            M = self.direction * half * ((w * (u - l)) @ g)
            L1 = half * float(w @ np.abs(g).max(axis=1))
        else:
            I = M = np.zeros(0, complex)
            L1 = 0.0
        return I, R, L1, M

    def _build_leaf(self, l, r, Tl, depth, out, scale):
        I, R, L1, M = self._rule(l, r, Tl)
        m = 0.5 * (l + r)
        IL, RL, _, ML = self._rule(l, m, Tl)
        IR, RR, _, MR = self._rule(m, r, Tl + self.direction * RL)
        err = 0.0
        if self.q:
            err = float(max(np.max(np.abs(I - IL - IR)),
                            np.max(np.abs(M - ML - MR - (m - l) * IR)) / (r - l)))
        errR = abs(R - RL - RR)
        # tolerance is relative to the whole base panel, so noisy integrands
        # still converge once leaves are short enough
        ok = (err <= max(self.atol, self.rtol * scale[0], 8 * EPS * L1)
              and errR <= max(self.atol, self.rtol * scale[1]))
        if ok:
            out.append((l, r, I, self.direction * R, max(err, 8 * EPS * L1)))
            return Tl + self.direction * R
        if depth >= self.max_depth or len(out) >= self.max_leaves:
            raise NumericError(
                f"panel quadrature did not converge near s={self.anchor + self.direction * l:g}",
                estimate=max(err, errR))
        Tm = self._build_leaf(l, m, Tl, depth + 1, out, scale)
        return self._build_leaf(m, r, Tm, depth + 1, out, scale)

    def _panel_scale(self, l, r, Tl):
        # coarse L1 mass of the integrand and density over the base panel
        sub = np.linspace(l, r, 9)
        L1 = R = 0.0
        T = Tl
        for a, b in zip(sub[:-1], sub[1:]):
            _, Rk, Lk, _ = self._rule(a, b, T)
            T += self.direction * Rk
            L1 += Lk
            R += Rk
        return L1, R

    def _extend(self, u_max):
        with self._lock:
            while self._n_panels == 0 or self._rights[-1] < u_max:
                k = self._n_panels
                l, r = k * self.panel, (k + 1) * self.panel
                leaves = []
                scale = self._panel_scale(l, r, self._T[-1])
                self._build_leaf(l, r, self._T[-1], 0, leaves, scale)
                for (ll, rr, I, dT, est) in leaves:
                    self._rights.append(rr)
                    self._lefts.append(rr)
                    self._cum.append(self._cum[-1] + I)
                    self._T.append(self._T[-1] + dT)
                    self._est.append(self._est[-1] + est)
                self._n_panels += 1

    def __call__(self, t):
        """Return ``(F, T, est)`` at the points ``t`` (1-D array).

        ``F`` has shape ``(len(t), q)``, ``T`` the proper time from the
        anchor, ``est`` the accumulated error estimate.  Points on the wrong
        side of the anchor give zeros.
        """
        t = np.atleast_1d(np.asarray(t, float))
        u = self.direction * (t - self.anchor)
        u = np.where(u > 0, u, 0.0)
        if u.size and u.max() > 0:
            self._extend(float(u.max()))
        rights = np.asarray(self._rights)
        cum = np.asarray(self._cum)
        Tcum = np.asarray(self._T)
        est = np.asarray(self._est)
        lefts = np.asarray(self._lefts[:-1]) if rights.size else np.zeros(0)

        F = np.zeros((t.size, self.q), complex)
        T = np.zeros(t.size)
        E = np.zeros(t.size)
        live = u > 0
        if not live.any():
            return F, T, E
        ul = u[live]
        idx = np.searchsorted(rights, ul, side="left")
        idx = np.minimum(idx, rights.size - 1)
        l = lefts[idx]
        x, w, S = gauss_legendre(self.order)
        half = 0.5 * (ul - l)
        un = l[:, None] + half[:, None] * (x[None, :] + 1.0)
        s = self.anchor + self.direction * un
        rho = np.asarray(self.density(s.ravel()), float)
        if rho.shape == ():
            rho = np.full(s.size, float(rho))
        rho = rho.reshape(s.shape)
        Tn = Tcum[idx][:, None] + self.direction * half[:, None] * (rho @ S.T)
        T[live] = Tcum[idx] + self.direction * half * (rho @ w)
        if self.q:
            g = np.asarray(self.integrand(s.ravel(), Tn.ravel())).reshape(s.shape + (self.q,))
            part = self.direction * half[:, None] * np.einsum("j,mjq->mq", w, g)
            F[live] = cum[idx] + part
        E[live] = est[idx + 1]
        return F, T, E
