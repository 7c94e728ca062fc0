"""Uniformity preserving functions and the mu-variant kernels.

Only interval exchanges are built: the unit interval is cut into pieces
``(a_i, b_i]`` and each piece is translated to ``(c_i, c_i + b_i - a_i]``.
Such maps are measure preserving bijections of (0, 1) with explicit
inverses, which covers the input permutations of discrete pairs and the
three-piece shift used to break the sign symmetry of square-law channels.
"""

import bisect
from fractions import Fraction

import numpy as np
from gmpy2 import mpfr

from ..core.precision import DEFAULT_PRECISION, UnitValue, current_precision, to_mp, working_precision
from .kernels import kernel_for


def _frac(v):
    return v if isinstance(v, Fraction) else Fraction(repr(v)) if isinstance(v, float) else Fraction(v)


class Upf:
    """Interval exchange on (0, 1).

    Parameters
    ----------
    pieces : sequence of (a, b, c)
        Source pieces ``(a, b]`` (contiguous, covering (0, 1]) and the left
        end `c` of each image.  Exact rationals or decimal strings.
    label : str
    """

    def __init__(self, pieces, label="upf"):
        pieces = [tuple(_frac(v) for v in p) for p in pieces]
        pieces.sort(key=lambda p: p[0])
        if pieces[0][0] != 0 or pieces[-1][1] != 1:
            raise ValueError("pieces must cover (0, 1]")
        for (a0, b0, _), (a1, _, _) in zip(pieces[:-1], pieces[1:]):
            if b0 != a1:
                raise ValueError("pieces must be contiguous")
        images = sorted((c, c + b - a) for a, b, c in pieces)
        if images[0][0] != 0 or images[-1][1] != 1 or any(
                images[i][1] != images[i + 1][0] for i in range(len(images) - 1)):
            raise ValueError("images must tile (0, 1]")
        self.pieces = tuple(pieces)
        self.label = label
        self._mp = {}
        self.is_identity = all(a == c for a, _, c in pieces)

    @classmethod
    def identity(cls):
        return cls([(0, 1, 0)], label="identity")

    @classmethod
    def three_piece_shift(cls):
        """Swap (0, 1/3] and (1/3, 2/3]; identity on (2/3, 1)."""
        t = Fraction(1, 3)
        return cls([(0, t, t), (t, 2 * t, 0), (2 * t, 1, 2 * t)], label="three_piece_shift")

    @classmethod
    def from_permutation(cls, pmf, perm):
        """Map permuted-order input cells to the original cells.

        Cell ``j`` of the permuted order has width ``pmf[perm[j]]`` and is
        sent onto the original cell of input ``perm[j]``.
        """
        pmf = [_frac(p) for p in pmf]
        total = sum(pmf)
        pmf = [p / total for p in pmf]
        starts = [sum(pmf[:i]) for i in range(len(pmf))]
        pieces, a = [], Fraction(0)
        for j in perm:
            pieces.append((a, a + pmf[j], starts[j]))
            a += pmf[j]
        return cls(pieces, label=f"perm{list(perm)}")

    def _tables(self):
        prec = current_precision()
        t = self._mp.get(prec)
        if t is None:
            src = [(to_mp(a), to_mp(b), to_mp(c)) for a, b, c in self.pieces]
            img = sorted(((to_mp(c), to_mp(c + b - a), to_mp(a)) for a, b, c in self.pieces),
                         key=lambda v: v[0])
            t = (src, [s[1] for s in src], img, [i[1] for i in img])
            self._mp[prec] = t
        return t

    def apply_mp(self, theta):
        src, ends, _, _ = self._tables()
        # piece with a < theta <= b
        i = min(bisect.bisect_left(ends, theta), len(src) - 1)
        a, _, c = src[i]
        return theta - a + c

    def inverse_mp(self, theta):
        _, _, img, ends = self._tables()
        i = min(bisect.bisect_left(ends, theta), len(img) - 1)
        c, _, a = img[i]
        return theta - c + a

    def __call__(self, theta):
        return self._unit_op(theta, self.apply_mp)

    def inverse(self, theta):
        return self._unit_op(theta, self.inverse_mp)

    def _unit_op(self, theta, fn):
        if isinstance(theta, UnitValue):
            with working_precision(theta.precision):
                return UnitValue._raw(fn(mpfr(theta.value)), theta.precision)
        if isinstance(theta, np.ndarray):
            return self.apply_array(theta) if fn == self.apply_mp else self.inverse_array(theta)
        with working_precision(DEFAULT_PRECISION):
            return float(fn(to_mp(theta)))

    def apply_array(self, theta):
        theta = np.asarray(theta, dtype=float)
        a = np.array([float(p[0]) for p in self.pieces])
        b = np.array([float(p[1]) for p in self.pieces])
        c = np.array([float(p[2]) for p in self.pieces])
        i = np.clip(np.searchsorted(b, theta, side="left"), 0, len(b) - 1)
        return theta - a[i] + c[i]

    def inverse_array(self, theta):
        theta = np.asarray(theta, dtype=float)
        img = sorted(((float(c), float(c + b - a), float(a)) for a, b, c in self.pieces))
        ends = np.array([v[1] for v in img])
        cs = np.array([v[0] for v in img])
        as_ = np.array([v[2] for v in img])
        i = np.clip(np.searchsorted(ends, theta, side="left"), 0, len(ends) - 1)
        return theta - cs[i] + as_[i]

    def __repr__(self):
        return f"<Upf {self.label}>"


def _mu_inner(kernel, mu, v, fwd):
    """``P(mu^{-1}(Theta) <= v | phi)`` as a sum of kernel increments."""
    if mu.is_identity and len(mu.pieces) == 1:
        return fwd(v)
    src, _, _, _ = mu._tables()
    total = mpfr(0)
    for a, b, c in src:
        if a >= v:
            break
        top = c + (min(b, v) - a)
        total += fwd(top) - fwd(c)
    return total


def mu_variant_step(kernel, mu, theta, y):
    """Raw mu-variant recursion step at the current precision, by output value."""
    v = mu.inverse_mp(theta)
    g = _mu_inner(kernel, mu, v, lambda t: kernel.fwd_y(t, y))
    return mu.apply_mp(g)


def mu_variant_kernel(pair, mu, theta, phi):
    """mu-variant kernel ``mu o F_{mu^{-1}(Theta)|Phi}(.|phi) o mu^{-1}`` at `theta`.

    With the identity map the result is bit-identical to the baseline
    normalized kernel.
    """
    kernel = kernel_for(pair)
    theta = theta if isinstance(theta, UnitValue) else UnitValue(theta)
    phi = phi if isinstance(phi, UnitValue) else UnitValue(phi)
    prec = max(theta.precision, phi.precision)
    with working_precision(prec):
        th, ph = mpfr(theta.value), mpfr(phi.value)
        if mu.is_identity and len(mu.pieces) == 1:
            return kernel.forward_norm(theta, phi)
        v = mu.inverse_mp(th)
        g = _mu_inner(kernel, mu, v, lambda t: kernel.fwd(t, ph))
        out = mu.apply_mp(g)
    return UnitValue._raw(mpfr(out, prec), prec)


def mu_variant_array(pair, mu, theta, phi):
    """Float64 mu-variant kernel on an array of theta."""
    kernel = kernel_for(pair)
    theta = np.asarray(theta, dtype=float)
    v = mu.inverse_array(theta)
    g = np.zeros_like(v)
    for a, b, c in mu.pieces:
        a, b, c = float(a), float(b), float(c)
        on = v > a
        top = c + (np.minimum(b, v) - a)
        g += np.where(on, kernel.forward_array(top, phi) - kernel.forward_array(np.array([c]), phi)[0], 0.0)
    return mu.apply_array(np.clip(g, 0.0, 1.0))
