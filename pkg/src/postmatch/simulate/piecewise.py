"""Exact composition of piecewise-affine maps restricted to an interval.

When every step map is piecewise affine (discrete pairs in the normalized
domain), a composition restricted to ``[lo, hi]`` is again piecewise
affine.  :func:`compose` tracks it segment by segment: a segment whose image
stays inside one piece of the next map is updated by composing two affine
maps, and a segment straddling a break is split at the preimage of the
break.  The cost is proportional to the number of steps times the number of
segments, which stays small when the restricted image contracts.
"""

import bisect

from gmpy2 import mpfr


class Segments:
    """Piecewise-affine map ``t -> a*t + b`` on consecutive segments.

    Attributes
    ----------
    cuts : list of mpfr
        Segment boundaries ``t_0 < t_1 < ... < t_m``.
    maps : list of (a, b)
        Affine map on ``[t_i, t_{i+1})``.
    """

    __slots__ = ("cuts", "maps")

    def __init__(self, cuts, maps):
        self.cuts, self.maps = cuts, maps

    def __len__(self):
        return len(self.maps)

    def index(self, t, side="right"):
        """Segment holding `t`; ``side='left'`` picks the segment ending at a cut."""
        if side == "right":
            i = bisect.bisect_right(self.cuts, t) - 1
        else:
            i = bisect.bisect_left(self.cuts, t) - 1
        return min(max(i, 0), len(self.maps) - 1)

    def __call__(self, t, side="right"):
        a, b = self.maps[self.index(t, side)]
        return a * t + b

    def boundaries(self):
        return self.cuts


def compose(lo, hi, steps):
    """Compose piecewise-affine maps on ``[lo, hi]``.

    Parameters
    ----------
    lo, hi : mpfr
    steps : iterable of piece lists
        Applied in iteration order; each element is a sorted list of
        ``(plo, phi, slope, intercept)`` with nondecreasing maps whose
        domains tile the range of the previous composition.

    Returns
    -------
    Segments
    """
    cuts = [mpfr(lo), mpfr(hi)]
    maps = [(mpfr(1), mpfr(0))]
    for pieces in steps:
        starts = [p[0] for p in pieces]
        last = len(pieces) - 1
        new_cuts = [cuts[0]]
        new_maps = []
        for i, (a, b) in enumerate(maps):
            t0, t1 = cuts[i], cuts[i + 1]
            v0 = a * t0 + b
            v1 = a * t1 + b
            j0 = min(max(bisect.bisect_right(starts, v0) - 1, 0), last)
            j1 = min(max(bisect.bisect_left(starts, v1) - 1, 0), last)
            if j1 < j0:
                j1 = j0
            if j0 == j1 or a == 0:
                _, _, s, c = pieces[j0]
                new_maps.append((s * a, s * b + c))
                new_cuts.append(t1)
                continue
            for j in range(j0, j1 + 1):
                _, phi, s, c = pieces[j]
                new_maps.append((s * a, s * b + c))
                if j < j1:
                    # preimage of the break between piece j and j+1
                    cut = (phi - b) / a
                    new_cuts.append(min(max(cut, t0), t1))
                else:
                    new_cuts.append(t1)
        cuts, maps = _merge(new_cuts, new_maps)
    return Segments(cuts, maps)


def _merge(cuts, maps):
    """Drop empty segments produced by clamped cuts."""
    out_cuts, out_maps = [cuts[0]], []
    for i, m in enumerate(maps):
        if cuts[i + 1] > out_cuts[-1] or (i == len(maps) - 1 and not out_maps):
            out_maps.append(m)
            out_cuts.append(cuts[i + 1])
    if not out_maps:
        out_maps, out_cuts = [maps[-1]], [cuts[0], cuts[-1]]
    return out_cuts, out_maps
