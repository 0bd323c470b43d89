# cython: language_level=3
"""Compiled kernels: adaptive Simpson recursion and word normal ordering.

Mirrors ``_kernels_py`` exactly; the integrand is still a Python callable,
the recursion and bookkeeping run in C.
"""

from libc.math cimport fabs


cdef struct _Acc:
    double err
    bint ok


cdef double _asr(object f, double a, double fa, double b, double fb,
                 double m, double fm, double whole, double tol,
                 int depth, int min_depth, _Acc* acc) except? -1.0:
    cdef double lm = 0.5 * (a + m)
    cdef double rm = 0.5 * (m + b)
    cdef double flm = f(lm)
    cdef double frm = f(rm)
    cdef double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
    cdef double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
    cdef double delta = left + right - whole
    if depth <= 0:
        acc.err += fabs(delta) / 15.0
        acc.ok = False
        return left + right + delta / 15.0
    if min_depth <= 0 and fabs(delta) <= 15.0 * tol:
        acc.err += fabs(delta) / 15.0
        return left + right + delta / 15.0
    return (_asr(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1, min_depth - 1, acc)
            + _asr(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1, min_depth - 1, acc))


def adaptive_simpson(f, double a, double b, double tol=1e-10, int max_depth=40, int min_depth=3):
    cdef _Acc acc
    cdef double fa, fb, fm, m, whole, value
    if a == b:
        return 0.0, 0.0, True
    acc.err = 0.0
    acc.ok = True
    fa = f(a)
    fb = f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    value = _asr(f, a, fa, b, fb, m, fm, whole, tol, max_depth, min_depth, &acc)
    return value, acc.err, bool(acc.ok)


def normal_order(word, coeff, table, bint anti, bint leftmost=True):
    cdef dict result = {}
    cdef list stack = [(tuple(word), complex(coeff))]
    cdef tuple w, rest
    cdef Py_ssize_t n, i, pos
    cdef long j, l
    cdef double complex c, k
    while stack:
        w, c = stack.pop()
        n = len(w)
        pos = -1
        if leftmost:
            for i in range(n - 1):
                j = w[i]
                l = w[i + 1]
                if j > l or (anti and j == l):
                    pos = i
                    break
        else:
            for i in range(n - 2, -1, -1):
                j = w[i]
                l = w[i + 1]
                if j > l or (anti and j == l):
                    pos = i
                    break
        if pos < 0:
            result[w] = result.get(w, 0j) + c
            continue
        j = w[pos]
        l = w[pos + 1]
        rest = w[:pos] + w[pos + 2:]
        if j == l:
            k = table[j][j] * 0.5
            if k != 0:
                stack.append((rest, c * k))
            continue
        stack.append((w[:pos] + (l, j) + w[pos + 2:], -c if anti else c))
        k = table[j][l]
        if k != 0:
            stack.append((rest, c * k))
    return {key: val for key, val in result.items() if val != 0}
