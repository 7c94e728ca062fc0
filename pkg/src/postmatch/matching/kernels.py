"""Posterior matching kernels.

A kernel maps the current input and the observed output to the next input.
Two coordinate systems are supported:

* the original ``(x, y)`` domain, ``x' = F_X^{-1}(F_{X|Y}(x|y))``;
* the normalized ``(theta, phi)`` domain on the unit square,
  ``theta' = F_{Theta|Phi}(theta|phi)``, whose inverse in the first
  argument is written ``omega_phi``.

Closed forms exist for the zoo pairs.  Kernels of discrete pairs (and the
affine x-domain kernels of the Gaussian and uniform pairs) also expose their
affine pieces so that compositions can be tracked exactly.
"""

import bisect
import math

import gmpy2
import numpy as np
from gmpy2 import mpfr
from scipy import special
from scipy.interpolate import CubicHermiteSpline

from ..channels import DmcPair
from ..core import distributions as dists
from ..core.errors import OutOfSupport, UnsupportedOutput
from ..core.precision import (DEFAULT_PRECISION, UnitValue, current_precision,
                              raw_value, to_mp, working_precision)

_MPFR = type(mpfr(0))
_LOG2E = 1.0 / math.log(2.0)


def _is_float_input(*vals):
    return all(isinstance(v, (float, int, np.floating, np.integer)) for v in vals)


class MatchingKernel:
    """Common interface of all kernels.

    Raw methods (``fwd``, ``inv``, ``fwd_x``, ``inv_x``) take and return
    ``mpfr`` at the current context precision and perform no validation.
    The public methods ``forward_norm``, ``inverse_norm`` and
    ``forward_xy`` validate their arguments and results.

    Attributes
    ----------
    pair : InputChannelPair
    form : {"closed_form", "numeric"}
    domain : {"x", "theta"}
        Coordinates in which sessions run the recursion.
    """

    form = "closed_form"
    domain = "theta"
    piecewise_affine = False

    def __init__(self, pair):
        self.pair = pair

    # -- coordinate maps -------------------------------------------------
    def input_of(self, theta):
        """``F_X^{-1}(theta)``."""
        return self.pair.input.ppf_mp(theta)

    def theta_of(self, x):
        """``F_X(x)`` (continuous inputs)."""
        return self.pair.input.cdf_mp(x)

    def output_of(self, phi):
        """``F_Y^{-1}(phi)``."""
        return self.pair.output.ppf_mp(phi)

    def phi_of(self, y, lam=None):
        out = self.pair.output
        v = out.cdf_mp(y)
        if lam is not None and out.atoms:
            v -= out.mass_mp(y) * lam
        return v

    # -- raw normalized kernel ---------------------------------------------
    def fwd(self, theta, phi):
        raise NotImplementedError

    def inv(self, s, phi):
        raise NotImplementedError

    def fwd_y(self, theta, y):
        """Normalized kernel indexed by the output value instead of phi."""
        raise NotImplementedError

    def inv_y(self, s, y):
        raise NotImplementedError

    def forward_array(self, theta, phi):
        """Float64 normalized kernel on an array of theta for one phi."""
        theta = np.asarray(theta, dtype=float)
        with working_precision(64):
            ph = mpfr(float(phi))
            return np.array([float(self.fwd(mpfr(float(t)), ph)) for t in theta])

    def inverse_array(self, s, phi):
        """Float64 inverse kernel ``omega_phi`` on an array of s for one phi."""
        s = np.asarray(s, dtype=float)
        with working_precision(64):
            ph = mpfr(float(phi))
            return np.array([float(self.inv(mpfr(float(v)), ph)) for v in s])

    # -- densities ---------------------------------------------------------
    def density_xy(self, x, y):
        """``f_{Y|X}(y|x) / f_Y(y)`` (or the pmf ratio), float."""
        pair = self.pair
        num = float(pair.channel.density(float(y), float(x)))
        out = pair.output
        den = float(out.pmf(float(y))) if out.kind == dists.DISCRETE else float(out.pdf(float(y)))
        if den <= 0:
            raise UnsupportedOutput(f"output {y!r} has zero probability")
        return num / den

    def log2_density_xy(self, x, y):
        d = self.density_xy(x, y)
        return math.log2(d) if d > 0 else -math.inf

    def norm_density(self, theta, phi):
        """``f_{Phi|Theta}(phi|theta)``."""
        with working_precision(max(DEFAULT_PRECISION, getattr(theta, "precision", 53))):
            x = self.input_of(raw_value(theta))
            y = self.output_of(raw_value(phi))
        return self.density_xy(x, y)

    # -- validated public API ------------------------------------------------
    def check_support(self, theta, phi):
        """Raise OutOfSupport when theta is outside the posterior support."""

    def forward_norm(self, theta, phi):
        """``F_{Theta|Phi}(theta|phi)`` as a UnitValue."""
        theta, phi = _unit(theta), _unit(phi)
        prec = max(theta.precision, phi.precision)
        with working_precision(prec):
            th, ph = mpfr(theta.value), mpfr(phi.value)
            self.check_support(th, ph)
            v = self.fwd(th, ph)
        return _to_unit(v, prec)

    def inverse_norm(self, s, phi):
        """``omega_phi(s)``, the inverse of the kernel in its first argument."""
        s, phi = _unit(s), _unit(phi)
        prec = max(s.precision, phi.precision)
        with working_precision(prec):
            v = self.inv(mpfr(s.value), mpfr(phi.value))
        return _to_unit(v, prec)

    def forward_xy(self, x, y):
        """``F_X^{-1}(F_{X|Y}(x|y))``."""
        raise NotImplementedError

    def __repr__(self):
        return f"<{type(self).__name__} {self.pair.label}>"


def _unit(v):
    return v if isinstance(v, UnitValue) else UnitValue(v, DEFAULT_PRECISION)


def _to_unit(v, prec):
    if gmpy2.is_nan(v) or v < 0 or v > 1:
        raise OutOfSupport(f"kernel value {v} outside [0, 1]")
    return UnitValue._raw(mpfr(v, prec), prec)


# ---------------------------------------------------------------------------
# discrete kernels


class DmcKernel(MatchingKernel):
    """Normalized kernel of an input/DMC pair.

    On the cell ``[F_X(x-1), F_X(x))`` the kernel for output ``y`` is affine
    with slope ``P_{X|Y}(x|y) / P_X(x)``, interpolating the points
    ``(F_X(x), F_{X|Y}(x|y))``.
    """

    piecewise_affine = True

    def __init__(self, pair):
        if not isinstance(pair, DmcPair):
            raise TypeError("DmcKernel needs a DmcPair")
        super().__init__(pair)
        self.nx, self.ny = pair.channel.nx, pair.channel.ny
        self._tables = {}
        px = pair.px
        post = pair.posterior_matrix()
        # float tables for scans
        self._fcx = np.concatenate([[0.0], np.cumsum(px)])
        self._fcx[-1] = 1.0
        self._fslope = post / px[None, :]
        self._fcpost = np.concatenate([np.zeros((self.ny, 1)), np.cumsum(post, axis=1)], axis=1)
        self._fcy = np.concatenate([[0.0], np.cumsum(pair.py)])
        self._fcy[-1] = 1.0

    def _table(self):
        prec = current_precision()
        tab = self._tables.get(prec)
        if tab is not None:
            return tab
        pair = self.pair
        px = [to_mp(p) for p in pair.px_exact]
        cx = [mpfr(0)]
        for p in px[:-1]:
            cx.append(cx[-1] + p)
        cx.append(mpfr(1))
        cy = [mpfr(0)]
        for p in pair.py_exact[:-1]:
            cy.append(cy[-1] + to_mp(p))
        cy.append(mpfr(1))
        fwd_pieces, inv_pieces, cposts = [], [], []
        for y in range(self.ny):
            post = [to_mp(v) for v in pair.post_exact[y]]
            cp = [mpfr(0)]
            for v in post[:-1]:
                cp.append(cp[-1] + v)
            cp.append(mpfr(1))
            fp, ip = [], []
            for x in range(self.nx):
                slope = post[x] / px[x]
                fp.append((cx[x], cx[x + 1], slope, cp[x] - slope * cx[x]))
                if post[x] > 0:
                    islope = px[x] / post[x]
                    ip.append((cp[x], cp[x + 1], islope, cx[x] - islope * cp[x]))
            fwd_pieces.append(fp)
            inv_pieces.append(ip)
            cposts.append(cp)
        tab = {"cx": cx, "cy": cy, "fwd": fwd_pieces, "inv": inv_pieces,
               "inv_lo": [[p[0] for p in ip] for ip in inv_pieces], "cpost": cposts}
        self._tables[prec] = tab
        return tab

    # output index of phi: smallest y with F_Y(y) > phi
    def output_of(self, phi):
        cy = self._table()["cy"]
        return min(bisect.bisect_right(cy, phi) - 1, self.ny - 1)

    def input_of(self, theta):
        cx = self._table()["cx"]
        return min(bisect.bisect_right(cx, theta) - 1, self.nx - 1)

    def phi_of(self, y, lam=None):
        cy = self._table()["cy"]
        hi = cy[int(y) + 1]
        if lam is None:
            return hi
        return hi - (hi - cy[int(y)]) * lam

    def pieces(self, y):
        """Affine pieces ``(lo, hi, slope, intercept)`` of the kernel for output `y`."""
        return self._table()["fwd"][int(y)]

    def inverse_pieces(self, y):
        return self._table()["inv"][int(y)]

    def fwd_y(self, theta, y):
        tab = self._table()
        x = min(bisect.bisect_right(tab["cx"], theta) - 1, self.nx - 1)
        _, _, a, b = tab["fwd"][int(y)][max(x, 0)]
        return a * theta + b

    def inv_y(self, s, y):
        tab = self._table()
        y = int(y)
        i = bisect.bisect_right(tab["inv_lo"][y], s) - 1
        _, _, a, b = tab["inv"][y][min(max(i, 0), len(tab["inv"][y]) - 1)]
        return a * s + b

    def fwd(self, theta, phi):
        return self.fwd_y(theta, self.output_of(phi))

    def inv(self, s, phi):
        return self.inv_y(s, self.output_of(phi))

    def forward_array(self, theta, phi):
        y = min(int(np.searchsorted(self._fcy, phi, side="right")) - 1, self.ny - 1)
        return self.forward_array_y(theta, y)

    def forward_array_y(self, theta, y):
        theta = np.asarray(theta, dtype=float)
        x = np.clip(np.searchsorted(self._fcx, theta, side="right") - 1, 0, self.nx - 1)
        return self._fcpost[y, x] + self._fslope[y, x] * (theta - self._fcx[x])

    def inverse_array(self, s, phi):
        y = min(int(np.searchsorted(self._fcy, phi, side="right")) - 1, self.ny - 1)
        return self.inverse_array_y(s, y)

    def inverse_array_y(self, s, y):
        """Float inverse kernel for output `y` and its slope at each s."""
        return self.inverse_slope_y(s, y)[0]

    def inverse_slope_y(self, s, y):
        s = np.asarray(s, dtype=float)
        cp = self._fcpost[y]
        live = np.nonzero(self._fslope[y] > 0)[0]
        # cell whose posterior range holds s
        j = np.clip(np.searchsorted(cp[live], s, side="right") - 1, 0, len(live) - 1)
        x = live[j]
        slope = 1.0 / self._fslope[y, x]
        return self._fcx[x] + slope * (s - cp[x]), slope

    def slopes(self, y):
        """Float slopes ``P_{X|Y}(x|y)/P_X(x)`` of each input cell."""
        return self._fslope[int(y)].copy()

    def density_xy(self, x, y):
        return float(self.pair.matrix[int(x), int(y)] / self.pair.py[int(y)])

    def norm_density(self, theta, phi):
        return self.density_xy(self.input_of(raw_value(theta)), self.output_of(raw_value(phi)))

    def forward_xy(self, x, y):
        x, y = int(x), int(y)
        if not (0 <= x < self.nx and 0 <= y < self.ny):
            raise OutOfSupport(f"({x}, {y}) outside the alphabets")
        if self.pair.py_exact[y] == 0:
            raise OutOfSupport(f"output {y} has zero probability")
        # F_X^{-1}(F_{X|Y}(x|y)) with exact rationals
        cpost = sum(self.pair.post_exact[y][: x + 1])
        acc = 0
        for j, p in enumerate(self.pair.px_exact):
            acc += p
            if acc > cpost:
                return j
        return self.nx - 1


class BscKernel(DmcKernel):
    """Horstein kernel: the four-branch map of the BSC with uniform input.

    For output 0 the slopes are ``2(1-p)`` below one half and ``2p``
    above; for output 1 they are swapped, with intercepts keeping the map
    continuous and onto.
    """

    def __init__(self, pair):
        super().__init__(pair)
        if pair.px_exact != (pair.px_exact[0], pair.px_exact[0]):
            raise ValueError("BscKernel needs a uniform binary input")
        self.p_exact = pair.channel.exact[0][1]
        self._bsc = {}

    def _consts(self):
        prec = current_precision()
        c = self._bsc.get(prec)
        if c is None:
            p = to_mp(self.p_exact)
            half = mpfr("0.5")
            hi_s, lo_s = 2 * (1 - p), 2 * p
            gap = 1 - 2 * p
            fwd = [[(mpfr(0), half, hi_s, mpfr(0)), (half, mpfr(1), lo_s, gap)],
                   [(mpfr(0), half, lo_s, mpfr(0)), (half, mpfr(1), hi_s, -gap)]]
            inv = [[(mpfr(0), 1 - p, 1 / hi_s, mpfr(0)), (1 - p, mpfr(1), 1 / lo_s, -gap / lo_s)],
                   [(mpfr(0), p, 1 / lo_s, mpfr(0)), (p, mpfr(1), 1 / hi_s, gap / hi_s)]]
            c = {"p": p, "fwd": fwd, "inv": inv, "half": half}
            self._bsc[prec] = c
        return c

    def pieces(self, y):
        return self._consts()["fwd"][int(y)]

    def inverse_pieces(self, y):
        return self._consts()["inv"][int(y)]

    def fwd_y(self, theta, y):
        c = self._consts()
        p = c["p"]
        if int(y) == 0:
            return 2 * (1 - p) * theta if theta < c["half"] else 2 * p * theta + (1 - 2 * p)
        return 2 * p * theta if theta < c["half"] else 2 * (1 - p) * theta - (1 - 2 * p)

    def inv_y(self, s, y):
        c = self._consts()
        p = c["p"]
        if int(y) == 0:
            return s / (2 * (1 - p)) if s < 1 - p else (s - (1 - 2 * p)) / (2 * p)
        return s / (2 * p) if s < p else (s + (1 - 2 * p)) / (2 * (1 - p))


# ---------------------------------------------------------------------------
# continuous closed forms (x-domain recursions)


class _ProperKernel(MatchingKernel):
    """Kernels of proper pairs, run in the input domain.

    Subclasses supply ``fwd_x``/``inv_x`` and float versions; the normalized
    kernel is the conjugate ``F_X o fwd_x(F_X^{-1}(theta), F_Y^{-1}(phi))``.
    """

    domain = "x"

    # the chain F_X o fwd_x o F_X^{-1} loses a few bits; guard bits keep the
    # conjugated map accurate to the working precision
    _GUARD = 16

    def _conj(self, t, arg, step, y_given=False):
        if t <= 0 or t >= 1:
            return mpfr(t)
        prec = current_precision()
        with working_precision(prec + self._GUARD):
            y = arg if y_given else self.output_of(arg)
            v = self.theta_of(step(self.input_of(t), y))
        return mpfr(v, prec)

    def fwd(self, theta, phi):
        return self._conj(theta, phi, self.fwd_x)

    def inv(self, s, phi):
        return self._conj(s, phi, self.inv_x)

    def fwd_y(self, theta, y):
        return self._conj(theta, y, self.fwd_x, y_given=True)

    def inv_y(self, s, y):
        return self._conj(s, y, self.inv_x, y_given=True)

    def check_support(self, theta, phi):
        if 0 < theta < 1 and 0 < phi < 1:
            self.check_xy(self.input_of(theta), self.output_of(phi))

    def check_xy(self, x, y):
        pass

    def forward_xy(self, x, y):
        floats = _is_float_input(x, y)
        if floats:
            with working_precision(DEFAULT_PRECISION):
                xv, yv = to_mp(x), to_mp(y)
                self.check_xy(xv, yv)
                return float(self.fwd_x(xv, yv))
        self.check_xy(x, y)
        return self.fwd_x(x, y)

    def forward_array(self, theta, phi):
        theta = np.asarray(theta, dtype=float)
        y = float(self.pair.output.ppf(float(phi)))
        x = self.pair.input.ppf(theta)
        with np.errstate(all="ignore"):
            out = self.pair.input.cdf(self.fwd_x_array(x, y))
        out = np.where(theta <= 0, 0.0, np.where(theta >= 1, 1.0, out))
        return np.clip(np.nan_to_num(out, nan=1.0), 0.0, 1.0)

    def inverse_array(self, s, phi):
        s = np.asarray(s, dtype=float)
        y = float(self.pair.output.ppf(float(phi)))
        px = self.pair.input
        with np.errstate(all="ignore"):
            out = px.cdf(self.inv_x_array(px.ppf(s), y))
        out = np.where(s <= 0, 0.0, np.where(s >= 1, 1.0, out))
        return np.clip(out, 0.0, 1.0)

    def affine_x(self, y):
        """``(slope, intercept)`` of the x-domain kernel if it is affine, else None."""
        return None

    def inverse_affine_x(self, y):
        return None


class AwgnKernel(_ProperKernel):
    """Schalkwijk-Kailath kernel ``sqrt(1+snr) (x - snr/(1+snr) y)``."""

    piecewise_affine = True

    def __init__(self, pair):
        super().__init__(pair)
        self.snr = pair.snr
        self._c = {}

    def _consts(self):
        prec = current_precision()
        c = self._c.get(prec)
        if c is None:
            snr = to_mp(self.snr)
            c = (gmpy2.sqrt(1 + snr), snr / (1 + snr))
            self._c[prec] = c
        return c

    def fwd_x(self, x, y):
        root, g = self._consts()
        return root * (x - g * y)

    def inv_x(self, s, y):
        root, g = self._consts()
        return s / root + g * y

    def fwd_x_array(self, x, y):
        return math.sqrt(1 + self.snr) * (x - self.snr / (1 + self.snr) * y)

    def inv_x_array(self, s, y):
        return np.asarray(s, dtype=float) / math.sqrt(1 + self.snr) + self.snr / (1 + self.snr) * y

    def affine_x(self, y):
        root, g = self._consts()
        return root, -root * g * y

    def inverse_affine_x(self, y):
        root, g = self._consts()
        return 1 / root, g * y

    def density_xy(self, x, y):
        n = self.pair.noise_var
        p = self.pair.power
        x, y = float(x), float(y)
        # ratio of N(x, n) and N(0, p + n) densities at y
        log_r = (-0.5 * (y - x) ** 2 / n + 0.5 * y * y / (p + n)
                 + 0.5 * math.log((p + n) / n))
        return math.exp(log_r)

    def log2_density_xy(self, x, y):
        n = self.pair.noise_var
        p = self.pair.power
        x, y = float(x), float(y)
        return (-0.5 * (y - x) ** 2 / n + 0.5 * y * y / (p + n)
                + 0.5 * math.log((p + n) / n)) * _LOG2E


class UniformKernel(_ProperKernel):
    """Kernel of uniform input over uniform noise: zoom into the posterior support."""

    piecewise_affine = True

    def input_of(self, theta):
        return mpfr(theta)

    def theta_of(self, x):
        return mpfr(x)

    def check_xy(self, x, y):
        if not (0 < y < 2 and 0 <= x <= 1 and y - 1 <= x <= y):
            raise OutOfSupport(f"(x={float(x):.6g}, y={float(y):.6g}) outside the joint support")

    def fwd_x(self, x, y):
        if y <= 1:
            return x / y
        return (x - y + 1) / (2 - y)

    def inv_x(self, s, y):
        if y <= 1:
            return s * y
        return s * (2 - y) + (y - 1)

    def fwd_x_array(self, x, y):
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        with np.errstate(all="ignore"):
            return np.where(y <= 1, x / y, (x - y + 1) / (2 - y))

    def inv_x_array(self, s, y):
        s, y = np.asarray(s, dtype=float), np.asarray(y, dtype=float)
        return np.where(y <= 1, s * y, s * (2 - y) + (y - 1))

    def affine_x(self, y):
        if y <= 1:
            return 1 / y, mpfr(0)
        return 1 / (2 - y), -(y - 1) / (2 - y)

    def inverse_affine_x(self, y):
        if y <= 1:
            return mpfr(y), mpfr(0)
        return 2 - y, y - 1

    def density_xy(self, x, y):
        x, y = float(x), float(y)
        if not (0 < y < 2 and y - 1 < x < y):
            return 0.0
        return 1.0 / (y if y <= 1 else 2 - y)


class ExponentialKernel(_ProperKernel):
    """Kernel ``ln(y / (y - x))`` of exponential input over exponential noise."""

    def check_xy(self, x, y):
        if not (y > 0 and 0 <= x < y):
            raise OutOfSupport(f"(x={float(x):.6g}, y={float(y):.6g}) outside the joint support")

    def fwd_x(self, x, y):
        # inputs at or above the output lie past the posterior support
        if x >= y:
            return mpfr("inf")
        return -gmpy2.log1p(-x / y)

    def inv_x(self, s, y):
        return -y * gmpy2.expm1(-s)

    def fwd_x_array(self, x, y):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(x >= y, np.inf, -np.log1p(-x / y))

    def inv_x_array(self, s, y):
        return -y * np.expm1(-np.asarray(s, dtype=float))

    def density_xy(self, x, y):
        x, y = float(x), float(y)
        if not (y > 0 and 0 <= x < y):
            return 0.0
        # exp(-(y-x)) / (y exp(-y))
        return math.exp(x) / y


# ---------------------------------------------------------------------------
# mixed input: exponential noise with a mean constraint


class ExpMeanKernel(MatchingKernel):
    """Normalized kernel for exponential noise under an input mean constraint.

    With ``w = 1 - phi`` and ``r = a/b`` the kernel is
    ``(a+b)/b * theta * w^r`` below ``b/(a+b)`` and
    ``w^r (a / ((a+b)(1-theta)))^r`` above, reaching one at
    ``theta = 1 - a w/(a+b)``, the edge of the posterior support.
    """

    def __init__(self, pair):
        super().__init__(pair)
        self.a, self.b = pair.a_exact, pair.b_exact
        self._c = {}

    def _consts(self):
        prec = current_precision()
        c = self._c.get(prec)
        if c is None:
            a, b = to_mp(self.a), to_mp(self.b)
            c = {"a": a, "b": b, "ab": a + b, "r": a / b, "rinv": b / a,
                 "atom": b / (a + b), "cfrac": a / (a + b), "unit_r": self.a == self.b}
            self._c[prec] = c
        return c

    def w_of(self, y):
        """``1 - F_Y(y) = exp(-y/(a+b))`` without cancellation."""
        return gmpy2.exp(-y / self._consts()["ab"])

    def phi_of(self, y, lam=None):
        return -gmpy2.expm1(-y / self._consts()["ab"])

    def output_of(self, phi):
        return -self._consts()["ab"] * gmpy2.log1p(-phi)

    def input_of(self, theta):
        c = self._consts()
        if theta < c["atom"]:
            return mpfr(0)
        return c["ab"] * gmpy2.log(c["cfrac"] / (1 - theta))

    def _pow_r(self, v):
        c = self._consts()
        return v if c["unit_r"] else v ** c["r"]

    def fwd_w(self, theta, w):
        c = self._consts()
        wr = self._pow_r(w)
        if theta < c["atom"]:
            return c["ab"] / c["b"] * theta * wr
        if theta >= 1 - c["cfrac"] * w:
            return mpfr(1)
        return wr * self._pow_r(c["cfrac"] / (1 - theta))

    def inv_w(self, s, w):
        c = self._consts()
        wr = self._pow_r(w)
        if s < wr:
            return s * c["b"] / (c["ab"] * wr)
        root = s if c["unit_r"] else s ** c["rinv"]
        return 1 - c["cfrac"] * w / root

    def fwd(self, theta, phi):
        return self.fwd_w(theta, 1 - phi)

    def inv(self, s, phi):
        return self.inv_w(s, 1 - phi)

    def fwd_y(self, theta, y):
        return self.fwd_w(theta, self.w_of(y))

    def inv_y(self, s, y):
        return self.inv_w(s, self.w_of(y))

    def check_support(self, theta, phi):
        c = self._consts()
        if theta >= 1 - c["cfrac"] * (1 - phi):
            raise OutOfSupport(
                f"theta={float(theta):.6g} outside the posterior support for phi={float(phi):.6g}")

    def forward_array(self, theta, phi):
        theta = np.asarray(theta, dtype=float)
        a, b = float(self.a), float(self.b)
        r = a / b
        w = 1.0 - float(phi)
        atom = b / (a + b)
        with np.errstate(all="ignore"):
            hi = w ** r * (a / ((a + b) * (1 - theta))) ** r
        out = np.where(theta < atom, (a + b) / b * theta * w ** r, hi)
        return np.where(theta >= 1 - a * w / (a + b), 1.0, out)

    def inverse_array(self, s, phi):
        s = np.asarray(s, dtype=float)
        a, b = float(self.a), float(self.b)
        r = a / b
        w = 1.0 - float(phi)
        wr = w ** r
        with np.errstate(all="ignore"):
            hi = 1 - a * w / ((a + b) * s ** (1 / r))
        return np.where(s < wr, s * b / ((a + b) * wr), hi)

    def density_xy(self, x, y):
        a, b = float(self.a), float(self.b)
        x, y = float(x), float(y)
        if not (y > x >= 0):
            return 0.0
        # noise density at y - x over the Exponential(a+b) output density
        return (a + b) / b * math.exp(-(y - x) / b + y / (a + b))

    def forward_xy(self, x, y):
        floats = _is_float_input(x, y)
        with working_precision(DEFAULT_PRECISION if floats else current_precision()):
            xv, yv = to_mp(x), to_mp(y)
            if not (yv > xv >= 0):
                raise OutOfSupport(f"(x={float(x):.6g}, y={float(y):.6g}) outside the joint support")
            theta = self.pair.input.cdf_mp(xv)
            out = self.input_of(self.fwd_y(theta, yv))
        return float(out) if floats else out


# ---------------------------------------------------------------------------
# generic kernels


class InverseChannelKernel(MatchingKernel):
    """Generic kernel built from the inverse channel by Bayes' rule.

    Handles atoms in the input: at ``x = F_X^{-1}(theta)`` with mass
    ``P_X(x) > 0`` the normalized kernel interpolates linearly across the
    atom's jump.  Float precision; used as an oracle and for pairs without
    closed forms.
    """

    form = "numeric"

    def _posterior(self, y):
        return self.pair.inverse_channel(y)

    def fwd_float(self, theta, y):
        px = self.pair.input
        x = float(px.ppf(theta))
        post = self._posterior(y)
        mass = float(px.pmf(x)) if px.atoms else 0.0
        if mass > 0:
            below = float(px.cdf(x)) - mass
            pmass = float(post.pmf(x)) if post.atoms else 0.0
            return float(post.cdf(x)) - pmass + pmass * (theta - below) / mass
        return float(post.cdf(x))

    def fwd(self, theta, phi):
        y = float(self.pair.output.ppf(float(phi)))
        return mpfr(self.fwd_float(float(theta), y))

    def forward_array(self, theta, phi):
        y = float(self.pair.output.ppf(float(phi)))
        return np.array([self.fwd_float(float(t), y) for t in np.asarray(theta, dtype=float)])


class TableKernel(MatchingKernel):
    """Numeric kernel of a continuous pair from tabulated posteriors.

    For each output value the posterior c.d.f. ``F_{X|Y}(.|y)`` is computed
    on a fixed input grid by Gauss-Legendre panels and interpolated by a
    cubic Hermite spline through the posterior density.  Tables are cached
    per output value.  Float precision.
    """

    form = "numeric"
    domain = "x"

    def __init__(self, pair, grid=2048, order=8, cache=4096):
        super().__init__(pair)
        px = pair.input
        lo, hi = px.interval()
        q = px.ppf(np.array([1e-13, 1 - 1e-13]))
        lo = lo if math.isfinite(lo) else float(q[0])
        hi = hi if math.isfinite(hi) else float(q[1])
        if px.kind != dists.CONTINUOUS:
            raise ValueError("TableKernel needs a continuous input")
        self.edges = np.linspace(lo, hi, grid + 1)
        gx, gw = np.polynomial.legendre.leggauss(order)
        h = np.diff(self.edges)
        mid = 0.5 * (self.edges[1:] + self.edges[:-1])
        self._nodes = (mid[:, None] + 0.5 * h[:, None] * gx[None, :])
        self._weights = 0.5 * h[:, None] * gw[None, :]
        self._fx_nodes = px.pdf(self._nodes)
        self._fx_edges = px.pdf(self.edges)
        self._cache = {}
        self._cache_size = cache

    def _table(self, y):
        key = float(y)
        tab = self._cache.get(key)
        if tab is None:
            ch = self.pair.channel
            f_nodes = self._fx_nodes * ch.density(key, self._nodes)
            cum = np.concatenate([[0.0], np.cumsum((f_nodes * self._weights).sum(axis=1))])
            total = cum[-1]
            if not total > 0:
                raise UnsupportedOutput(f"output {key!r} has zero density")
            dens = self._fx_edges * ch.density(key, self.edges) / total
            tab = CubicHermiteSpline(self.edges, cum / total, dens, extrapolate=False)
            if len(self._cache) >= self._cache_size:
                self._cache.clear()
            self._cache[key] = tab
        return tab

    def posterior_cdf(self, x, y):
        x = np.asarray(x, dtype=float)
        out = self._table(y)(np.clip(x, self.edges[0], self.edges[-1]))
        out = np.where(x <= self.edges[0], 0.0, np.where(x >= self.edges[-1], 1.0, out))
        return np.clip(out, 0.0, 1.0)

    def forward_xy(self, x, y):
        t = self.posterior_cdf(x, y)
        out = self.pair.input.ppf(t)
        return float(out) if np.ndim(out) == 0 else out

    def fwd_x(self, x, y):
        return mpfr(float(self.forward_xy(float(x), float(y))))

    def fwd(self, theta, phi):
        if theta <= 0 or theta >= 1:
            return mpfr(theta)
        x = float(self.pair.input.ppf(float(theta)))
        y = float(self.pair.output.ppf(float(phi)))
        return mpfr(float(self.posterior_cdf(x, y)))

    def fwd_y(self, theta, y):
        x = float(self.pair.input.ppf(float(theta)))
        return mpfr(float(self.posterior_cdf(x, float(y))))

    def forward_array(self, theta, phi):
        theta = np.asarray(theta, dtype=float)
        y = float(self.pair.output.ppf(float(phi)))
        return self.posterior_cdf(self.pair.input.ppf(theta), y)


# ---------------------------------------------------------------------------
# dispatch and module-level operations


def kernel_for(pair):
    """The kernel of a pair (cached on the pair)."""
    k = getattr(pair, "_kernel", None)
    if k is not None:
        return k
    fam = pair.family
    if fam == "bsc" and pair.px_exact[0] == pair.px_exact[1]:
        k = BscKernel(pair)
    elif isinstance(pair, DmcPair):
        k = DmcKernel(pair)
    elif fam == "awgn":
        k = AwgnKernel(pair)
    elif fam == "uniform":
        k = UniformKernel(pair)
    elif fam == "exponential":
        k = ExponentialKernel(pair)
    elif fam == "exp_mean":
        k = ExpMeanKernel(pair)
    else:
        k = TableKernel(pair)
    pair._kernel = k
    return k


def kernel_eval(pair, x, y):
    """Posterior matching kernel ``F_X^{-1}(F_{X|Y}(x|y))`` in original coordinates.

    Float arguments give a float result (computed at 128 bits); ``mpfr``
    arguments are evaluated at the current precision.

    Raises
    ------
    OutOfSupport
        When ``(x, y)`` lies outside the joint support.
    """
    return kernel_for(pair).forward_xy(x, y)


def normalized_kernel_eval(pair, theta, phi):
    """Normalized kernel ``F_{Theta|Phi}(theta|phi)`` as a UnitValue."""
    return kernel_for(pair).forward_norm(theta, phi)


def normalize_output(pair, y, lam):
    """Randomized output c.d.f. ``F_Y(y) - P_Y({y}) * lam``.

    Raises
    ------
    OutOfSupport
        When `y` is not in the support of the output law.
    """
    out = pair.output
    if not out.in_support(y):
        raise OutOfSupport(f"output {y!r} outside the support")
    return dists.uniformize(out, y, lam)
