"""Finite-rank CCR and CAR algebras by normal-ordering rewriting.

A Poisson space is a rank ``k`` with an antisymmetric real matrix ``tau``;
its CCR algebra is generated by self-adjoint ``w1..wk`` with
``[wi, wj] = i tau_ij``.  A pairing space carries a symmetric complex
matrix ``B`` and an index involution ``p``; its CAR algebra is generated by
``v1..vk`` with ``vi vj + vj vi = B_ij`` and ``vi* = v_p(i)``.

Elements are stored as sums of ordered words (nondecreasing indices for
CCR, strictly increasing for CAR).  Indices are 0-based internally and
1-based in rendered text.
"""
from __future__ import annotations

import random
import re
import threading

import numpy as np

from . import kernels
from .errors import AQFTError, PreconditionError


class PoissonSpace:
    """Rank ``k`` with an antisymmetric ``tau`` stored as its strict upper triangle."""

    __slots__ = ("rank", "_upper")

    def __init__(self, rank, upper=None):
        rank = int(rank)
        if rank < 1:
            raise ValueError("rank must be positive")
        up = np.zeros((rank, rank))
        if upper is not None:
            up = np.triu(np.asarray(upper, float), 1)
            if up.shape != (rank, rank):
                raise ValueError(f"tau must be {rank}x{rank}")
        up.setflags(write=False)
        self.rank = rank
        self._upper = up

    @classmethod
    def from_matrix(cls, tau, tol=1e-8):
        """Build from a full matrix after checking ``|tau + tau^T| <= tol``."""
        tau = np.asarray(tau, float)
        dev = float(np.max(np.abs(tau + tau.T))) if tau.size else 0.0
        if dev > tol:
            raise PreconditionError(f"tau is not antisymmetric: deviation {dev:.3e} > {tol:g}",
                                    deviation=dev)
        return cls(tau.shape[0], 0.5 * (tau - tau.T))

    @property
    def tau(self):
        u = self._upper
        return u - u.T

    def __eq__(self, other):
        return (isinstance(other, PoissonSpace) and self.rank == other.rank
                and np.array_equal(self._upper, other._upper))

    def __hash__(self):
        return hash((self.rank, self._upper.tobytes()))

    def __repr__(self):
        return f"PoissonSpace(rank={self.rank}, tau={self.tau.tolist()})"


class IPSpace:
    """Rank ``k`` with a symmetric pairing ``B`` and generator involution ``p``.

    Symmetry and the compatibility ``conj(B_ij) = B_p(i)p(j)`` hold exactly:
    the constructor projects onto them.
    """

    __slots__ = ("rank", "perm", "_B")

    def __init__(self, pairing, perm=None):
        B = np.array(pairing, dtype=complex)
        if B.ndim != 2 or B.shape[0] != B.shape[1] or B.shape[0] < 1:
            raise ValueError("pairing must be a nonempty square matrix")
        k = B.shape[0]
        perm = tuple(range(k)) if perm is None else tuple(int(i) for i in perm)
        if sorted(perm) != list(range(k)) or any(perm[perm[i]] != i for i in range(k)):
            raise ValueError(f"perm must be an involution of 0..{k - 1}")
        B = 0.5 * (B + B.T)
        idx = np.array(perm)
        B = 0.5 * (B + np.conj(B[np.ix_(idx, idx)]))
        B.setflags(write=False)
        self.rank = k
        self.perm = perm
        self._B = B

    @classmethod
    def from_matrix(cls, pairing, perm=None, tol=1e-8):
        """Build after checking symmetry and compatibility within ``tol``."""
        B = np.asarray(pairing, complex)
        k = B.shape[0]
        idx = np.array(tuple(range(k)) if perm is None else perm)
        dev_sym = float(np.max(np.abs(B - B.T)))
        dev_cmp = float(np.max(np.abs(np.conj(B) - B[np.ix_(idx, idx)])))
        dev = max(dev_sym, dev_cmp)
        if dev > tol:
            raise PreconditionError(
                f"pairing violates symmetry ({dev_sym:.3e}) or compatibility ({dev_cmp:.3e})",
                deviation=dev)
        return cls(B, perm)

    @property
    def pairing(self):
        return self._B

    def __eq__(self, other):
        return (isinstance(other, IPSpace) and self.perm == other.perm
                and np.array_equal(self._B, other._B))

    def __hash__(self):
        return hash((self.perm, self._B.tobytes()))

    def __repr__(self):
        return f"IPSpace(rank={self.rank}, perm={self.perm})"


class _Algebra:
    letter = "?"
    anti = False

    def __init__(self, space):
        self.space = space
        self.rank = space.rank
        self._table = self._make_table()
        self._cache = {}
        self._lock = threading.Lock()

    def __eq__(self, other):
        return type(self) is type(other) and self.space == other.space

    def __hash__(self):
        return hash((type(self).__name__, self.space))

    def __repr__(self):
        return f"{type(self).__name__}({self.space!r})"

    def _check_word(self, word):
        for i in word:
            if not (isinstance(i, (int, np.integer)) and 0 <= i < self.rank):
                raise TypeError(f"generator index {i!r} outside 0..{self.rank - 1}")

    def normal_form(self, word, coeff=1.0, strategy="leftmost"):
        """``coeff * word`` rewritten to normal order.

        ``strategy`` picks which out-of-order pair is rewritten first; the
        result does not depend on it.
        """
        word = tuple(int(i) for i in word)
        self._check_word(word)
        if strategy not in ("leftmost", "rightmost"):
            raise ValueError("strategy must be 'leftmost' or 'rightmost'")
        if strategy == "rightmost":
            terms = kernels.normal_order(word, complex(coeff), self._table, self.anti, False)
            return AlgebraElement(self, terms)
        base = self._ordered(word)
        c = complex(coeff)
        return AlgebraElement(self, {w: c * v for w, v in base.items()})

    def _ordered(self, word):
        got = self._cache.get(word)
        if got is None:
            got = kernels.normal_order(word, 1.0, self._table, self.anti, True)
            with self._lock:
                self._cache[word] = got
        return got

    # constructors
    def zero(self):
        return AlgebraElement(self, {})

    def one(self, coeff=1.0):
        return AlgebraElement(self, {(): complex(coeff)})

    def gen(self, i):
        self._check_word((i,))
        return AlgebraElement(self, {(int(i),): 1.0 + 0j})

    def gens(self):
        return [self.gen(i) for i in range(self.rank)]

    def element(self, terms):
        """Element from a mapping of (possibly unordered) words to coefficients."""
        out = self.zero()
        for w, c in terms.items():
            out = out + self.normal_form(w, c)
        return out

    def star_generator(self, i):
        return i


class CCRAlgebra(_Algebra):
    letter = "w"
    anti = False

    def _make_table(self):
        tau = self.space.tau
        return [[1j * float(tau[j][l]) for l in range(self.rank)] for j in range(self.rank)]


class CARAlgebra(_Algebra):
    letter = "v"
    anti = True

    def _make_table(self):
        B = self.space.pairing
        return [[complex(B[j][l]) for l in range(self.rank)] for j in range(self.rank)]

    def star_generator(self, i):
        return self.space.perm[i]


def _clean(terms):
    return {tuple(w): complex(c) for w, c in terms.items() if c != 0}


class AlgebraElement:
    """Immutable normal-ordered element of a CCR or CAR algebra."""

    __slots__ = ("parent", "_terms", "_hash")

    def __init__(self, parent, terms):
        self.parent = parent
        self._terms = _clean(terms)
        self._hash = None

    @property
    def terms(self):
        return dict(self._terms)

    def items(self):
        return sorted(self._terms.items(), key=lambda kv: (len(kv[0]), kv[0]))

    def coefficient(self, word=()):
        return self._terms.get(tuple(word), 0j)

    def is_scalar(self):
        return all(len(w) == 0 for w in self._terms)

    def _same(self, other):
        if not isinstance(other, AlgebraElement) or other.parent != self.parent:
            raise TypeError("elements belong to different algebras")

    def _lift(self, other):
        if isinstance(other, AlgebraElement):
            self._same(other)
            return other
        if isinstance(other, (int, float, complex, np.number)):
            return self.parent.one(other)
        return NotImplemented

    def __add__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        out = dict(self._terms)
        for w, c in other._terms.items():
            out[w] = out.get(w, 0j) + c
        return AlgebraElement(self.parent, out)

    __radd__ = __add__

    def __neg__(self):
        return AlgebraElement(self.parent, {w: -c for w, c in self._terms.items()})

    def __sub__(self, other):
        other = self._lift(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            c = complex(other)
            return AlgebraElement(self.parent, {w: c * v for w, v in self._terms.items()})
        if not isinstance(other, AlgebraElement):
            return NotImplemented
        return multiply(self, other)

    def __rmul__(self, other):
        if isinstance(other, (int, float, complex, np.number)):
            return self * other
        return NotImplemented

    def __eq__(self, other):
        if isinstance(other, (int, float, complex)):
            other = self.parent.one(other)
        if not isinstance(other, AlgebraElement):
            return NotImplemented
        return self.parent == other.parent and self._terms == other._terms

    def __hash__(self):
        if self._hash is None:
            self._hash = hash((self.parent, frozenset(self._terms.items())))
        return self._hash

    def star(self):
        return star(self)

    def distance(self, other):
        """Max coefficient difference to ``other``."""
        self._same(other)
        keys = set(self._terms) | set(other._terms)
        return max((abs(self.coefficient(w) - other.coefficient(w)) for w in keys), default=0.0)

    def render(self):
        return render(self)

    def __str__(self):
        return render(self)

    def __repr__(self):
        return f"<{type(self.parent).__name__} element {render(self)}>"


def multiply(a, b):
    """Product ``a * b`` in normal form."""
    a._same(b)
    alg = a.parent
    out = {}
    for wa, ca in a._terms.items():
        for wb, cb in b._terms.items():
            c = ca * cb
            for w, v in alg._ordered(wa + wb).items():
                out[w] = out.get(w, 0j) + c * v
    return AlgebraElement(alg, out)


def star(a):
    """Adjoint: reverse words, apply the generator involution, conjugate."""
    alg = a.parent
    out = alg.zero()
    for w, c in a._terms.items():
        rev = tuple(alg.star_generator(i) for i in reversed(w))
        out = out + alg.normal_form(rev, np.conj(c))
    return out


def commutator(a, b):
    return multiply(a, b) - multiply(b, a)


def anticommutator(a, b):
    return multiply(a, b) + multiply(b, a)


# --- rendering and parsing ----------------------------------------------------

def _num(x):
    x = float(x)
    return repr(0.0 if x == 0 else x)


def render_coefficient(c):
    c = complex(c)
    if c.imag == 0:
        return _num(c.real)
    if c.real == 0:
        return f"i*{_num(c.imag)}"
    return f"({_num(c.real)}+i*{_num(c.imag)})"


def render_word(word, letter):
    if not word:
        return "1"
    parts = []
    i = 0
    while i < len(word):
        j = i
        while j < len(word) and word[j] == word[i]:
            j += 1
        g = f"{letter}{word[i] + 1}"
        parts.append(g if j - i == 1 else f"{g}^{j - i}")
        i = j
    return " ".join(parts)


def render(a):
    """Deterministic text: ``coeff * word`` terms sorted by (length, word)."""
    if not a._terms:
        return "0"
    letter = a.parent.letter
    return " + ".join(f"{render_coefficient(c)} * {render_word(w, letter)}" for w, c in a.items())


class ExpressionError(AQFTError, SyntaxError):
    """Malformed algebra expression; ``position`` is the 0-based offset."""

    def __init__(self, message, text, position):
        super().__init__(f"{message} at position {position}: {text!r}")
        self.text = text
        self.position = position


_TOKEN = re.compile(r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][-+]?\d+)?|\.\d+(?:[eE][-+]?\d+)?)"
                    r"|(?P<gen>[A-Za-z])(?P<idx>\d+)(?:\^(?P<pow>\d+))?"
                    r"|(?P<i>i)(?![A-Za-z0-9])|(?P<op>[-+*()]))")


def _tokens(text):
    pos = 0
    out = []
    text_len = len(text)
    while pos < text_len:
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            start = pos + len(text[pos:]) - len(text[pos:].lstrip())
            raise ExpressionError("unexpected character", text, start)
        start = m.start(m.lastgroup) if m.lastgroup else m.start()
        kind = next(k for k in ("num", "gen", "i", "op") if m.group(k) is not None)
        out.append((kind, m, start))
        pos = m.end()
    return out


def parse_expression(text, algebra):
    """Parse sums of ``[coeff *] gen gen^k ...`` terms, e.g. ``"2*w1 w2^2 - i*w3"``.

    Coefficients are real numbers, ``i`` or products like ``0.5*i``.
    """
    toks = _tokens(text)
    if not toks:
        raise ExpressionError("empty expression", text, 0)
    k = 0
    result = algebra.zero()
    expect_term = True
    while k < len(toks):
        sign = 1.0
        while k < len(toks) and toks[k][0] == "op" and toks[k][1].group("op") in "+-":
            sign *= 1.0 if toks[k][1].group("op") == "+" else -1.0
            expect_term = True
            k += 1
        if k >= len(toks):
            break
        kind, m, pos = toks[k]
        if not expect_term:
            raise ExpressionError("expected '+' or '-'", text, pos)
        coeff = complex(sign)
        word = []
        saw_factor = False
        while k < len(toks):
            kind, m, pos = toks[k]
            if kind == "num":
                coeff *= float(m.group("num"))
            elif kind == "i":
                coeff *= 1j
            elif kind == "gen":
                if m.group("gen") != algebra.letter:
                    raise ExpressionError(
                        f"unknown generator letter {m.group('gen')!r} (expected {algebra.letter!r})",
                        text, pos)
                idx = int(m.group("idx")) - 1
                if not 0 <= idx < algebra.rank:
                    raise ExpressionError(f"generator index out of range 1..{algebra.rank}", text, pos)
                word += [idx] * int(m.group("pow") or 1)
            elif kind == "op" and m.group("op") == "(":
                close = next((j for j in range(k + 1, len(toks))
                              if toks[j][0] == "op" and toks[j][1].group("op") == ")"), None)
                if close is None:
                    raise ExpressionError("unclosed '('", text, pos)
                inner = parse_expression(text[pos + 1:toks[close][2]], algebra)
                if not inner.is_scalar():
                    raise ExpressionError("only scalars may appear in parentheses", text, pos)
                coeff *= inner.coefficient()
                k = close
            elif kind == "op" and m.group("op") == "*":
                if not saw_factor:
                    raise ExpressionError("'*' without a left factor", text, pos)
                k += 1
                # a sign may prefix the right factor, as in rendered "i*-2.0"
                while (k < len(toks) and toks[k][0] == "op" and toks[k][1].group("op") in "+-"
                       and k + 1 < len(toks) and toks[k + 1][0] in ("num", "i")):
                    coeff *= -1.0 if toks[k][1].group("op") == "-" else 1.0
                    k += 1
                if k >= len(toks) or (toks[k][0] == "op" and toks[k][1].group("op") != "("):
                    raise ExpressionError("'*' without a right factor", text,
                                          toks[k][2] if k < len(toks) else len(text))
                continue
            else:
                break
            saw_factor = True
            k += 1
        if not saw_factor:
            raise ExpressionError("expected a term", text, pos if k < len(toks) else len(text))
        result = result + algebra.normal_form(tuple(word), coeff)
        expect_term = False
    if expect_term:
        raise ExpressionError("dangling operator", text, len(text))
    return result


# --- morphisms ------------------------------------------------------------------

class AlgebraMorphism:
    """Unital *-morphism fixed by the images of the generators."""

    def __init__(self, source, target, images, deviation=0.0):
        self.source = source
        self.target = target
        self.images = tuple(images)
        self.deviation = deviation

    def __call__(self, a):
        if a.parent != self.source:
            raise TypeError("element is not in the source algebra")
        out = self.target.zero()
        for w, c in a._terms.items():
            term = self.target.one(c)
            for i in w:
                term = multiply(term, self.images[i])
            out = out + term
        return out

    def on_word(self, word):
        term = self.target.one()
        for i in word:
            term = multiply(term, self.images[i])
        return term

    def compose(self, after):
        """``after o self``."""
        if after.source != self.target:
            raise TypeError("morphisms do not compose")
        return AlgebraMorphism(self.source, after.target, [after(im) for im in self.images],
                               max(self.deviation, after.deviation))


def _as_image(target, img):
    if isinstance(img, AlgebraElement):
        if img.parent != target:
            raise TypeError("generator image lives in another algebra")
        return img
    out = target.zero()
    for j, c in dict(img).items():
        out = out + target.gen(j) * c
    return out


def structure_deviation(source, target, images):
    """Worst violation of the defining relations and the involution by ``images``."""
    worst = 0.0
    k = source.rank
    if isinstance(source, CCRAlgebra):
        tau = source.space.tau
        for i in range(k):
            worst = max(worst, images[i].distance(star(images[i])))
            for j in range(i + 1, k):
                c = commutator(images[i], images[j])
                worst = max(worst, c.distance(target.one(1j * tau[i][j])))
    else:
        B = source.space.pairing
        for i in range(k):
            worst = max(worst, star(images[i]).distance(images[source.space.perm[i]]))
            for j in range(i, k):
                c = anticommutator(images[i], images[j])
                worst = max(worst, c.distance(target.one(B[i][j])))
    return float(worst)


def algebra_morphism(source, target, generator_map, tol=1e-10, sample_words=20, max_len=4,
                     seed=0):
    """Extend a generator map to a *-morphism after checking it preserves structure.

    ``generator_map[i]`` is an element of ``target`` or a mapping from target
    generator indices to coefficients.  Raises PreconditionError with the
    worst deviation when relations or the involution are broken beyond ``tol``.
    The extension is then checked to commute with normal ordering on
    ``sample_words`` random words.
    """
    if type(source) is not type(target):
        raise TypeError("morphisms must map CCR to CCR or CAR to CAR")
    if len(generator_map) != source.rank:
        raise TypeError(f"need {source.rank} generator images, got {len(generator_map)}")
    images = [_as_image(target, g) for g in generator_map]
    for img in images:
        if any(len(w) > 1 for w in img._terms):
            raise TypeError("generator images must be linear in the target generators")
    dev = structure_deviation(source, target, images)
    if dev > tol:
        raise PreconditionError(f"generator map breaks the relations: deviation {dev:.3e} > {tol:g}",
                                deviation=dev)
    phi = AlgebraMorphism(source, target, images, dev)
    rng = random.Random(seed)
    scale = 1.0 + max((abs(c) for img in images for c in img._terms.values()), default=0.0)
    for _ in range(sample_words):
        n = rng.randint(0, max_len)
        word = tuple(rng.randrange(source.rank) for _ in range(n))
        lhs = phi(source.normal_form(word))
        rhs = phi.on_word(word)
        d = lhs.distance(rhs)
        if d > tol * scale ** max(n, 1):
            raise PreconditionError(f"extension does not respect normal ordering on {word}: {d:.3e}",
                                    deviation=d)
    return phi


def identity_morphism(algebra):
    return AlgebraMorphism(algebra, algebra, algebra.gens())
