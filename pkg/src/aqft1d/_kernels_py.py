"""Pure-Python reference kernels.

Same API as the compiled ``_ckernels`` module; :mod:`aqft1d.kernels` picks
one of the two at import.
"""


def _simpson(f, a, fa, b, fb):
    m = 0.5 * (a + b)
    fm = f(m)
    return m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def _asr(f, a, fa, b, fb, m, fm, whole, tol, depth, min_depth, out):
    lm, flm, left = _simpson(f, a, fa, m, fm)
    rm, frm, right = _simpson(f, m, fm, b, fb)
    delta = left + right - whole
    if depth <= 0:
        out[1] += abs(delta) / 15.0
        out[2] = False
        return left + right + delta / 15.0
    if min_depth <= 0 and abs(delta) <= 15.0 * tol:
        out[1] += abs(delta) / 15.0
        return left + right + delta / 15.0
    return (_asr(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1, min_depth - 1, out)
            + _asr(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1, min_depth - 1, out))


def adaptive_simpson(f, a, b, tol=1e-10, max_depth=40, min_depth=3):
    """Integrate real-valued ``f`` over ``[a, b]`` by adaptive Simpson bisection.

    Returns ``(value, error_estimate, converged)``.  ``converged`` is False
    when some subinterval hit ``max_depth`` before meeting its share of
    ``tol``.
    """
    a = float(a)
    b = float(b)
    if a == b:
        return 0.0, 0.0, True
    fa = float(f(a))
    fb = float(f(b))
    m, fm, whole = _simpson(f, a, fa, b, fb)
    out = [0.0, 0.0, True]
    value = _asr(f, a, fa, b, fb, m, fm, whole, tol, max_depth, min_depth, out)
    return value, out[1], out[2]


def normal_order(word, coeff, table, anti, leftmost=True):
    """Rewrite ``coeff * word`` into ordered words.

    ``table[j][l]`` is the scalar produced when the adjacent pair ``(j, l)``
    with ``j > l`` is reordered: ``i*tau[j][l]`` for commuting generators,
    ``B[j][l]`` for anticommuting ones.  With ``anti`` set, swapped words
    pick up a sign and a repeated letter ``j j`` contracts to ``table[j][j]/2``.

    Returns a dict from nondecreasing (CCR) or strictly increasing (CAR)
    index tuples to complex coefficients; zero coefficients are dropped.
    """
    result = {}
    stack = [(tuple(word), complex(coeff))]
    while stack:
        w, c = stack.pop()
        n = len(w)
        pos = -1
        if leftmost:
            for i in range(n - 1):
                if w[i] > w[i + 1] or (anti and w[i] == w[i + 1]):
                    pos = i
                    break
        else:
            for i in range(n - 2, -1, -1):
                if w[i] > w[i + 1] or (anti and w[i] == w[i + 1]):
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
    return {w: c for w, c in result.items() if c != 0}
