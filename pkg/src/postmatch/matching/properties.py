"""Checkable structural properties of kernels and input/DMC pairs."""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from ..channels import DmcPair
from ..core.errors import IdenticalDistributions, NotDiscrete
from .kernels import DmcKernel, kernel_for


@dataclass(frozen=True)
class FixedPointReport:
    """Grid evidence of a.s. fixed points of a normalized kernel."""

    fixed_points: tuple
    probe_grid_size: int
    tolerance: float
    phi_grid_size: int = 0

    @property
    def fixed_point_free(self):
        return len(self.fixed_points) == 0


def fixed_point_scan(pair, grid_size=10000, tol=1e-9, phi_grid=1000, mu=None):
    """Grid points theta with ``|F(theta|phi) - theta| <= tol`` for every phi.

    Discrete outputs are probed on every output letter with positive
    probability; continuous outputs on the midpoints of a `phi_grid` cell
    partition.  The theta grid is ``i / grid_size`` for
    ``i = 1, ..., grid_size - 1``.

    Parameters
    ----------
    mu : Upf, optional
        Scan the corresponding mu-variant kernel instead.
    """
    if grid_size < 100:
        raise ValueError("grid_size must be at least 100")
    theta = np.arange(1, grid_size) / grid_size
    kernel = kernel_for(pair)
    alive = np.ones(theta.shape, dtype=bool)
    if mu is not None:
        from .upf import mu_variant_array

        def evaluate(ph):
            return mu_variant_array(pair, mu, theta, ph)
    else:
        def evaluate(ph):
            return kernel.forward_array(theta, ph)

    if isinstance(kernel, DmcKernel):
        cy = kernel._fcy
        phis = [0.5 * (cy[y] + cy[y + 1]) for y in range(kernel.ny) if pair.py[y] > 0]
        n_phi = len(phis)
    else:
        phis = (np.arange(phi_grid) + 0.5) / phi_grid
        n_phi = phi_grid
    for ph in phis:
        vals = evaluate(float(ph))
        alive &= np.abs(vals - theta) <= tol
        if not alive.any():
            break
    return FixedPointReport(tuple(float(t) for t in theta[alive]), grid_size, tol, n_phi)


def _exact_pmf(p):
    return [v if isinstance(v, Fraction) else Fraction(repr(float(v))) for v in p]


def dominance_permutation(p, q):
    """Permutation sorting ``p - q`` in descending order (stable).

    Returns `perm` with ``sigma(v)[j] = v[perm[j]]``; then every partial sum
    of ``sigma(p - q)`` before the last index is positive, i.e. the c.d.f.
    of ``sigma(q)`` lies strictly below that of ``sigma(p)``.

    Raises
    ------
    IdenticalDistributions
        If ``p == q``.
    """
    pe, qe = _exact_pmf(p), _exact_pmf(q)
    if len(pe) != len(qe):
        raise ValueError("pmfs must share an alphabet")
    delta = [a - b for a, b in zip(pe, qe)]
    if all(d == 0 for d in delta):
        raise IdenticalDistributions("p and q are identical")
    return sorted(range(len(delta)), key=lambda i: -delta[i])


def dominated(p, q):
    """True when the law `p` is strictly dominated by `q`.

    That is ``F_p(k) < F_q(k)`` at every index where ``F_q(k)`` lies in
    (0, 1); the final index (total mass) is excluded.  Exact rational
    arithmetic on the given masses.
    """
    pe, qe = _exact_pmf(p), _exact_pmf(q)
    tq = sum(qe)
    fp = fq = Fraction(0)
    for k in range(len(pe) - 1):
        fp += pe[k]
        fq += qe[k]
        if 0 < fq < tq and not fp < fq:
            return False
    return True


def _looks_irrational(r, max_den=10000, tol=1e-12):
    """Heuristic: no convergent with denominator <= max_den within tol."""
    if not math.isfinite(r):
        return False
    approx = Fraction(r).limit_denominator(max_den)
    return abs(float(approx) - r) > tol * max(1.0, abs(r))


@dataclass
class DmcPropertyReport:
    B1: bool
    B2: bool
    B3_heuristic: bool
    A3: bool
    suggested_permutation: Optional[tuple] = None
    fixed_points: tuple = ()
    notes: list = field(default_factory=list)


def dmc_property_check(pair, grid_size=10000, tol=1e-9):
    """Evaluate the discrete-pair properties.

    B1: every transition probability is positive (exact).
    B2: some posterior dominates or is dominated by the input law, or two
    posteriors are ordered by dominance (exhaustive, exact).
    B3: for each input some pair of log posterior ratios has a negative,
    apparently irrational quotient.  Continued-fraction heuristic, not
    authoritative.
    A3: fixed-point free on the scan grid.

    When B2 fails and ``I(X;Y) > 0`` an input permutation making B2 hold
    is suggested.
    """
    if not isinstance(pair, DmcPair):
        raise NotDiscrete("dmc_property_check needs an input/DMC pair")
    ex = pair.channel.exact
    b1 = all(v > 0 for row in ex for v in row)
    px = list(pair.px_exact)
    ys = [y for y in range(pair.channel.ny) if pair.py_exact[y] > 0]
    posts = {y: list(pair.post_exact[y]) for y in ys}
    b2 = any(dominated(px, posts[y]) or dominated(posts[y], px) for y in ys)
    if not b2:
        b2 = any(dominated(posts[y0], posts[y1]) for y0 in ys for y1 in ys if y0 != y1)

    b3 = True
    for x in range(pair.channel.nx):
        betas = []
        for y in ys:
            v = posts[y][x]
            betas.append(math.log(float(v / px[x])) if v > 0 else -math.inf)
        ok = False
        for i, b0 in enumerate(betas):
            for b1_ in betas[i + 1:]:
                if math.isfinite(b0) and math.isfinite(b1_) and b1_ != 0 and b0 / b1_ < 0:
                    if _looks_irrational(b0 / b1_):
                        ok = True
                        break
            if ok:
                break
        if not ok:
            b3 = False
            break

    scan = fixed_point_scan(pair, grid_size, tol)
    report = DmcPropertyReport(b1, b2, b3, scan.fixed_point_free, fixed_points=scan.fixed_points)
    report.notes.append("B3 is a continued-fraction heuristic and never authoritative")
    if not b2 and pair.mutual_information > 0:
        for y in ys:
            if posts[y] != px:
                report.suggested_permutation = tuple(dominance_permutation(posts[y], px))
                break
    return report
