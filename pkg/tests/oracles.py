"""Finite matrix models used as independent oracles for the algebra code."""
import numpy as np

from aqft1d.quantize import CARAlgebra, CCRAlgebra, IPSpace, PoissonSpace

LEVELS = 12
LOW = 6


def _ladder(n):
    return np.diag(np.sqrt(np.arange(1, n)), 1)


def oscillator_ops(modes=2, n=LEVELS):
    """Position and momentum matrices (Q1, P1, Q2, P2, ...) on ``n`` levels per mode."""
    a = _ladder(n)
    q = (a + a.T) / np.sqrt(2)
    p = (a - a.T) / (1j * np.sqrt(2))
    eye = np.eye(n)
    ops = []
    for k in range(modes):
        for single in (q, p):
            mats = [eye] * modes
            mats[k] = single
            out = mats[0]
            for m in mats[1:]:
                out = np.kron(out, m)
            ops.append(out.astype(complex))
    return ops


def low_block(modes=2, n=LEVELS, low=LOW):
    """Indices of basis states with every occupation below ``low``."""
    idx = np.indices((n,) * modes).reshape(modes, -1).T
    return np.flatnonzero(np.all(idx < low, axis=1))


def ccr_from_coefficients(A):
    """CCR algebra with ``w_i = sum_a A[i, a] X_a`` and its generator matrices."""
    A = np.asarray(A, float)
    modes = A.shape[1] // 2
    J = np.kron(np.eye(modes), np.array([[0.0, 1.0], [-1.0, 0.0]]))
    tau = A @ J @ A.T
    ops = oscillator_ops(modes)
    gens = [sum(A[i, a] * ops[a] for a in range(A.shape[1])) for i in range(A.shape[0])]
    return CCRAlgebra(PoissonSpace.from_matrix(tau)), gens


_X = np.array([[0, 1], [1, 0]], complex)
_Y = np.array([[0, -1j], [1j, 0]])
_Z = np.diag([1.0 + 0j, -1.0])
_I = np.eye(2, dtype=complex)


def clifford(modes=2):
    """Hermitian Jordan-Wigner generators with ``{g_a, g_b} = 2 delta_ab``."""
    out = []
    for k in range(modes):
        for s in (_X, _Y):
            mats = [_Z] * k + [s] + [_I] * (modes - k - 1)
            m = mats[0]
            for x in mats[1:]:
                m = np.kron(m, x)
            out.append(m)
    return out


def car_from_coefficients(C, perm):
    """CAR algebra with ``v_i = sum_a C[i, a] g_a``; needs ``C[perm[i]] = conj(C[i])``."""
    C = np.asarray(C, complex)
    gam = clifford(C.shape[1] // 2)
    B = 2 * C @ C.T
    gens = [sum(C[i, a] * gam[a] for a in range(C.shape[1])) for i in range(C.shape[0])]
    return CARAlgebra(IPSpace.from_matrix(B, perm)), gens


def represent(element, gens):
    dim = gens[0].shape[0]
    out = np.zeros((dim, dim), complex)
    for word, c in element.terms.items():
        m = np.eye(dim, dtype=complex)
        for i in word:
            m = m @ gens[i]
        out += c * m
    return out
