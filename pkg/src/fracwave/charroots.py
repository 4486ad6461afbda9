"""Characteristic function P(z) = tau z^2 + z^alpha - h'(phi_minus) and its roots.

All fractional powers use the principal branch with the cut along the
negative real axis.  P has exactly one positive real zero; for tau > 0 the
remaining zeros form a complex-conjugate pair with negative real part.  The
pair is located by Newton iteration from a fan of guesses and the advertised
root count is certified numerically by the argument principle.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field

import numpy as np

from .fracops import FracParams


class BranchCutError(ValueError):
    """Evaluation requested on the branch cut (open negative real axis)."""


class RootSearchError(RuntimeError):
    """Newton search failed from every initial guess."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ContourRefinementError(RuntimeError):
    """Argument-principle sampling could not be refined enough."""


@dataclass(frozen=True)
class WaveParams:
    """Far-field states and derived wave constants.

    The Lax condition phi_minus > phi_plus selects admissible waves; the
    speed c = phi_plus + phi_minus and h'(phi_minus) = phi_minus - phi_plus
    are derived, never stored independently.
    """

    phi_minus: float
    phi_plus: float
    tau: float
    frac: FracParams

    def __post_init__(self):
        if not self.phi_minus > self.phi_plus:
            raise ValueError(
                f"Lax condition violated: phi_minus={self.phi_minus} "
                f"must exceed phi_plus={self.phi_plus}"
            )
        if self.tau < 0:
            raise ValueError("tau must be nonnegative")

    @property
    def c(self) -> float:
        return self.phi_plus + self.phi_minus

    @property
    def hprime(self) -> float:
        return self.phi_minus - self.phi_plus

    @classmethod
    def from_hprime(cls, hprime: float, tau: float, frac: FracParams) -> "WaveParams":
        """Convenience constructor with phi_minus = h', phi_plus = 0."""
        return cls(hprime, 0.0, tau, frac)


@dataclass(frozen=True)
class CharRoots:
    """The positive real root and, for tau > 0, the conjugate pair."""

    lam: float
    complex_root: complex | None  # upper-half-plane member; conjugate implied
    residuals: tuple = field(default=())

    @property
    def complex_pair(self):
        if self.complex_root is None:
            return None
        return (self.complex_root, self.complex_root.conjugate())


# --------------------------------------------------------------------------- #
# evaluation
# --------------------------------------------------------------------------- #

def eval_char(z: complex, w: WaveParams) -> complex:
    """P(z) = tau z^2 + z^alpha - h'(phi_minus), principal branch."""
    z = complex(z)
    if z.imag == 0.0 and z.real < 0.0:
        raise BranchCutError(f"z={z} lies on the branch cut")
    if z == 0:
        za = 0.0
    else:
        za = cmath.exp(w.frac.alpha * cmath.log(z))
    return w.tau * z * z + za - w.hprime


def _eval_char_deriv(z: complex, w: WaveParams) -> complex:
    a = w.frac.alpha
    return 2.0 * w.tau * z + a * cmath.exp((a - 1.0) * cmath.log(z))


# --------------------------------------------------------------------------- #
# the positive real root
# --------------------------------------------------------------------------- #

def find_lambda(w: WaveParams) -> float:
    """Unique positive real zero of P by bracketed bisection plus one polish.

    P(0) = -h' < 0 and both terms are strictly increasing on (0, inf), so a
    geometric bracket growth always succeeds and bisection cannot fail.
    Newton from small z is unsafe (P' blows up at 0+ for tau = 0), hence the
    bracketing.
    """
    hp, tau, a = w.hprime, w.tau, w.frac.alpha
    if not hp > 0:
        raise ValueError("find_lambda requires h'(phi_minus) > 0")

    def P(z):
        return tau * z * z + z**a - hp

    zmax = 1.0
    while P(zmax) <= 0.0:
        zmax *= 2.0
    lo, hi = 0.0, zmax
    while hi - lo > 1e-14 and (lo == 0.0 or (hi - lo) > 4e-16 * hi):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if P(mid) > 0.0:
            hi = mid
        else:
            lo = mid
    lam = 0.5 * (lo + hi)
    dP = 2.0 * tau * lam + a * lam ** (a - 1.0)
    if dP != 0.0 and np.isfinite(dP):
        polished = lam - P(lam) / dP
        if lo <= polished <= hi or abs(P(polished)) < abs(P(lam)):
            lam = polished
    return float(lam)


# --------------------------------------------------------------------------- #
# the complex conjugate pair (tau > 0)
# --------------------------------------------------------------------------- #

def find_complex_pair(
    w: WaveParams,
    residual_tol: float = 1e-10,
    fan_radii=(1.0, 0.5, 2.0),
    fan_angles=(0.625 * np.pi, 0.75 * np.pi, 0.875 * np.pi),
):
    """Conjugate pair of zeros with Re < 0, by Newton from a guess fan.

    Guesses are the roots of tau z^2 = h' rotated into the upper-left
    quadrant (radii times angles).  Iterates are folded into the closed
    upper half-plane (P has real coefficients, so conjugating an iterate is
    harmless) and results are deduplicated.
    """
    if not w.tau > 0:
        raise ValueError("the complex pair exists only for tau > 0")
    r0 = np.sqrt(w.hprime / w.tau)
    diagnostics = []
    roots = []
    for scale in fan_radii:
        for angle in fan_angles:
            z = scale * r0 * cmath.exp(1j * angle)
            converged = False
            for _ in range(80):
                if z.imag < 0:
                    z = z.conjugate()
                if z.imag == 0.0 and z.real <= 0.0:
                    break
                try:
                    f = eval_char(z, w)
                except BranchCutError:
                    break
                if abs(f) < 1e-14:
                    converged = True
                    break
                step = f / _eval_char_deriv(z, w)
                if not np.isfinite(step.real) or not np.isfinite(step.imag):
                    break
                z = z - step
                if abs(step) < 1e-15 * max(1.0, abs(z)):
                    converged = True
                    break
            if converged and z.imag > 1e-13 and z.real < 0:
                res = abs(eval_char(z, w))
                if res <= residual_tol:
                    roots.append((z, res))
                    continue
            diagnostics.append({"guess": scale * r0 * cmath.exp(1j * angle), "last": z})
    if not roots:
        raise RootSearchError(
            "Newton failed to locate the complex pair from every guess",
            {"attempts": diagnostics},
        )
    # cluster: all converged iterates should agree on one root
    clusters: list[tuple[complex, float]] = []
    for z, res in roots:
        for i, (zc, rc) in enumerate(clusters):
            if abs(z - zc) <= 1e-7 * max(1.0, abs(zc)):
                if res < rc:
                    clusters[i] = (z, res)
                break
        else:
            clusters.append((z, res))
    if len(clusters) > 1:
        raise RootSearchError(
            "multiple distinct upper-half-plane roots found; expected one",
            {"clusters": clusters},
        )
    z = clusters[0][0]
    return (z, z.conjugate())


def char_roots(w: WaveParams) -> CharRoots:
    """All roots on the principal branch, with residuals."""
    lam = find_lambda(w)
    res = [abs(eval_char(lam, w))]
    zc = None
    if w.tau > 0:
        zc = find_complex_pair(w)[0]
        res.append(abs(eval_char(zc, w)))
    return CharRoots(lam, zc, tuple(res))


# --------------------------------------------------------------------------- #
# argument-principle root counting
# --------------------------------------------------------------------------- #

def _winding_number(w: WaveParams, vertices, samples_per_edge: int,
                    max_samples: int = 1 << 18) -> int:
    """Winding of P along the closed polyline, with adaptive refinement.

    Per-step argument increments are accumulated from ratios of consecutive
    values; sampling is doubled until every increment is below pi/2.
    """
    m = samples_per_edge
    while True:
        pts = []
        for a, b in zip(vertices, vertices[1:] + vertices[:1]):
            t = np.linspace(0.0, 1.0, m, endpoint=False)
            pts.append(a + (b - a) * t)
        z = np.concatenate(pts)
        z = np.append(z, z[0])
        vals = np.array([eval_char(zz, w) for zz in z])
        if np.any(np.abs(vals) == 0.0):
            raise ContourRefinementError("contour passes through a root of P")
        darg = np.angle(vals[1:] / vals[:-1])
        if np.max(np.abs(darg)) < np.pi / 2.0:
            total = darg.sum() / (2.0 * np.pi)
            count = int(np.rint(total))
            if abs(total - count) > 1e-6:
                raise ContourRefinementError(
                    f"winding number {total} is not close to an integer"
                )
            return count
        m *= 2
        if m * len(vertices) > max_samples:
            raise ContourRefinementError(
                "argument change per step stayed above pi/2 at maximum refinement"
            )


def count_roots_argument_principle(
    w: WaveParams,
    re_range: tuple[float, float],
    im_range: tuple[float, float],
    samples_per_edge: int = 256,
    cut_margin: float = 1e-3,
) -> int:
    """Number of zeros of P inside an axis-aligned rectangle.

    Rectangles that cross the branch cut (negative real axis) are handled by
    splitting into upper and lower subrectangles indented to Im = +/-margin,
    which is valid because P is holomorphic off the cut and the pair members
    sit strictly off the real axis.  Rectangles that straddle the cut and
    the right half-plane at once are rejected: the indentation would exclude
    a strip around the positive real axis where the real root lives.
    """
    re0, re1 = re_range
    im0, im1 = im_range
    if not (re0 < re1 and im0 < im1):
        raise ValueError("degenerate rectangle")
    crosses_cut = re0 < 0.0 and im0 < 0.0 < im1
    if not crosses_cut:
        verts = [
            complex(re0, im0),
            complex(re1, im0),
            complex(re1, im1),
            complex(re0, im1),
        ]
        return _winding_number(w, verts, samples_per_edge)
    if re1 > 0.0:
        raise ValueError(
            "rectangle straddles both the branch cut and the right half-plane; "
            "split it at Re z = 0 and count the parts separately"
        )
    eps = min(cut_margin, 0.45 * im1, 0.45 * (-im0))
    upper = [
        complex(re0, eps),
        complex(re1, eps),
        complex(re1, im1),
        complex(re0, im1),
    ]
    lower = [
        complex(re0, im0),
        complex(re1, im0),
        complex(re1, -eps),
        complex(re0, -eps),
    ]
    return _winding_number(w, upper, samples_per_edge) + _winding_number(
        w, lower, samples_per_edge
    )
