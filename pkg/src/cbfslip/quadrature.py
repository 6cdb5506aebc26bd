"""Symmetric quadrature rules on the reference triangle and on a segment.

Triangle rules are stored by symmetry orbit in barycentric coordinates,
with weights normalised to a unit-area triangle; `triangle_quadrature`
rescales them to the reference triangle (0,0)-(1,0)-(0,1) of area 1/2.
All rules below have positive weights and interior points.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = ["QuadratureRule", "triangle_quadrature", "edge_quadrature"]


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature points in barycentric coordinates and their weights.

    For triangle rules ``points`` has shape ``(nq, 3)`` and the weights sum
    to the reference area 1/2. For edge rules ``points`` has shape ``(nq, 2)``
    (coordinates ``(1 - t, t)`` on [0, 1]) and the weights sum to 1.
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def size(self) -> int:
        return len(self.weights)

    def reference_coords(self) -> np.ndarray:
        """Cartesian coordinates on the reference element."""
        return self.points[:, 1:].copy()


# (orbit type, weight on unit-area triangle, orbit parameters)
# S3: centroid; S21: (a, a, 1 - 2a); S111: all permutations of (a, b, 1 - a - b).
_ORBITS = {
    1: [("S3", 1.0, ())],
    2: [("S21", 0.33333333333333333333, (0.16666666666666666667,))],
    4: [
        ("S21", 0.22338158967801146570, (0.44594849091596488632,)),
        ("S21", 0.10995174365532186764, (0.09157621350977074346,)),
    ],
    5: [
        ("S3", 0.225, ()),
        ("S21", 0.13239415278850618074, (0.47014206410511508977,)),
        ("S21", 0.12593918054482715260, (0.10128650732345633880,)),
    ],
    6: [
        ("S21", 0.11678627572637936603, (0.24928674517091042129,)),
        ("S21", 0.050844906370206816921, (0.063089014491502228340,)),
        ("S111", 0.082851075618373575194, (0.053145049844816947353, 0.31035245103378440542)),
    ],
    8: [
        ("S3", 0.14431560767778716825, ()),
        ("S21", 0.095091634267284624794, (0.45929258829272315603,)),
        ("S21", 0.10321737053471825028, (0.17056930775176020662,)),
        ("S21", 0.032458497623198080311, (0.050547228317030975458,)),
        ("S111", 0.027230314174434994265, (0.0083947774099576053372, 0.26311282963463811342)),
    ],
    9: [
        ("S3", 0.097135796282798833819, ()),
        ("S21", 0.031334700227139070537, (0.48968251919873762778,)),
        ("S21", 0.077827541004774279317, (0.43708959149293663727,)),
        ("S21", 0.079647738927210253033, (0.18820353561903273024,)),
        ("S21", 0.025577675658698031262, (0.044729513394452709865,)),
        ("S111", 0.043283539377289377289, (0.036838412054736283635, 0.22196298916076569568)),
    ],
    10: [
        ("S3", 0.090817990382753580095, ()),
        ("S21", 0.036725957756466704717, (0.48557763338365737737,)),
        ("S21", 0.045321059435527934783, (0.10948157548503705480,)),
        ("S111", 0.072757916845420108604, (0.14170721941487995476, 0.30793983876412095017)),
        ("S111", 0.028327242531057484837, (0.025003534762686386074, 0.24667256063990269392)),
        ("S111", 0.0094216669637328234599, (0.0095408154002994575802, 0.066803251012200265774)),
    ],
}

# degree 3 and 7 map to the next positive-weight rule
_DEGREE_TO_RULE = {1: 1, 2: 2, 3: 4, 4: 4, 5: 5, 6: 6, 7: 8, 8: 8, 9: 9, 10: 10}


def _expand(orbits):
    pts, wts = [], []
    for kind, w, par in orbits:
        if kind == "S3":
            perms = [(1 / 3, 1 / 3, 1 / 3)]
        elif kind == "S21":
            a = par[0]
            c = 1.0 - 2.0 * a
            perms = [(a, a, c), (a, c, a), (c, a, a)]
        else:
            a, b = par
            c = 1.0 - a - b
            perms = [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]
        pts.extend(perms)
        wts.extend([w] * len(perms))
    return np.array(pts), np.array(wts)


@lru_cache(maxsize=None)
def triangle_quadrature(min_degree: int = 6) -> QuadratureRule:
    """Symmetric positive-weight rule exact for polynomials of `min_degree`.

    Supported degrees are 1 through 10.
    """
    if min_degree not in _DEGREE_TO_RULE:
        raise ValueError(f"unsupported triangle quadrature degree {min_degree!r} (1..10)")
    deg = _DEGREE_TO_RULE[min_degree]
    pts, wts = _expand(_ORBITS[deg])
    pts.setflags(write=False)
    wts = 0.5 * wts
    wts.setflags(write=False)
    return QuadratureRule(pts, wts, deg)


@lru_cache(maxsize=None)
def edge_quadrature(min_degree: int = 5) -> QuadratureRule:
    """Gauss-Legendre rule on [0, 1] exact to `min_degree`."""
    if min_degree < 0:
        raise ValueError("min_degree must be nonnegative")
    npts = max(1, (min_degree + 2) // 2)
    x, w = np.polynomial.legendre.leggauss(npts)
    t = 0.5 * (x + 1.0)
    pts = np.column_stack([1.0 - t, t])
    pts.setflags(write=False)
    w = 0.5 * w
    w.setflags(write=False)
    return QuadratureRule(pts, w, 2 * npts - 1)
