"""Two-unknown-phase equations solved by the law of cosines.

The core equation is

    x * exp(i a1) + y * exp(i a2) = z

for known complex x, y, z.  Geometrically the three side lengths
A = |x|, B = |y|, C = |z| form a triangle, so there are two mirror-image
solutions; when the triangle inequality fails the phases are chosen to
bring the left side as close as possible to z (the two reported branches
then coincide).  A self-conjugate variant P*exp(i a) + Q*exp(-i a) = z
covers the coefficient that pairs with itself in the 2-D recursion.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * math.pi


class DegenerateTriangle(ValueError):
    """Both unknown-phase prefactors vanish while the target does not."""


def _wrap(angle: float) -> float:
    """Reduce an angle to [0, 2*pi)."""
    reduced = angle % TWO_PI
    return 0.0 if reduced == TWO_PI else reduced


@dataclass(frozen=True)
class TriangleProblem:
    x: complex
    y: complex
    z: complex

    def __post_init__(self) -> None:
        for name in ("x", "y", "z"):
            v = complex(getattr(self, name))
            if not (math.isfinite(v.real) and math.isfinite(v.imag)):
                raise ValueError(f"{name} must be finite, got {v}")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class TriangleSolution:
    """Two candidate phase pairs, each with its achieved residual.

    ``feasible`` is True iff the triangle inequality held without
    clamping; infeasible and degenerate problems report two identical
    branches so callers always see a uniform two-branch interface.
    """

    branches: tuple[tuple[float, float], tuple[float, float]]
    feasible: bool
    residuals: tuple[float, float]


def _residual(p: TriangleProblem, a1: float, a2: float) -> float:
    return abs(p.x * cmath.exp(1j * a1) + p.y * cmath.exp(1j * a2) - p.z)


def _solution(p: TriangleProblem, b1, b2, feasible) -> TriangleSolution:
    b1 = (_wrap(b1[0]), _wrap(b1[1]))
    b2 = (_wrap(b2[0]), _wrap(b2[1]))
    return TriangleSolution(
        branches=(b1, b2),
        feasible=feasible,
        residuals=(_residual(p, *b1), _residual(p, *b2)),
    )


def solve_triangle(
    p: TriangleProblem,
    default_phase1: float = 0.0,
    default_phase2: float = 0.0,
) -> TriangleSolution:
    """Solve x*exp(i a1) + y*exp(i a2) = z for the two phase branches.

    Branch 1 places the x-vector at angle arg(z) + theta, branch 2 at
    arg(z) - theta, with cos(theta) clamped to [-1, 1]; clamping marks the
    problem infeasible and collapses both branches onto the closest-point
    choice.  When |x| or |y| is negligible the corresponding phase falls
    back to the supplied default and the other is solved directly.
    """
    a_mod, b_mod, c_mod = abs(p.x), abs(p.y), abs(p.z)
    tau = 1e-12 * max(a_mod, b_mod, c_mod, 1.0)
    scale = a_mod + b_mod + c_mod
    exact_tol = 1e-10 * scale

    if a_mod <= tau and b_mod <= tau:
        if c_mod > tau:
            raise DegenerateTriangle(
                f"|x|={a_mod:.3e} and |y|={b_mod:.3e} cannot reach |z|={c_mod:.3e}"
            )
        branch = (default_phase1, default_phase2)
        return _solution(p, branch, branch, feasible=True)

    if a_mod <= tau:
        remainder = p.z - p.x * cmath.exp(1j * default_phase1)
        a2 = cmath.phase(remainder) - cmath.phase(p.y)
        branch = (default_phase1, a2)
        feasible = _residual(p, _wrap(branch[0]), _wrap(branch[1])) <= exact_tol
        return _solution(p, branch, branch, feasible=feasible)

    if b_mod <= tau:
        remainder = p.z - p.y * cmath.exp(1j * default_phase2)
        a1 = cmath.phase(remainder) - cmath.phase(p.x)
        branch = (a1, default_phase2)
        feasible = _residual(p, _wrap(branch[0]), _wrap(branch[1])) <= exact_tol
        return _solution(p, branch, branch, feasible=feasible)

    if c_mod <= tau and abs(a_mod - b_mod) <= tau:
        # One-parameter family a2 = a1 + pi + arg(x) - arg(y); report the
        # canonical representatives with a1 = 0 and a1 = default.
        offset = math.pi + cmath.phase(p.x) - cmath.phase(p.y)
        b1 = (0.0, offset)
        b2 = (default_phase1, default_phase1 + offset)
        return _solution(p, b1, b2, feasible=True)

    if c_mod <= tau:
        # z at the origin with unequal arms: align the longer arm with the
        # real axis and the shorter against it (arg 0 matches angle(0)).
        cos_raw = math.inf if a_mod > b_mod else -math.inf
    else:
        cos_raw = (a_mod * a_mod + c_mod * c_mod - b_mod * b_mod) / (2.0 * a_mod * c_mod)

    clamped = not -1.0 <= cos_raw <= 1.0
    theta = math.acos(min(1.0, max(-1.0, cos_raw)))
    base = cmath.phase(p.z)

    def branch_for(sign: float) -> tuple[float, float]:
        a1 = base + sign * theta - cmath.phase(p.x)
        remainder = p.z - p.x * cmath.exp(1j * _wrap(a1))
        a2 = cmath.phase(remainder / p.y)
        return (a1, a2)

    b1 = branch_for(+1.0)
    if clamped:
        return _solution(p, b1, b1, feasible=False)
    return _solution(p, b1, branch_for(-1.0), feasible=True)


def solve_conjugate_pair(
    p_coef: complex,
    q_coef: complex,
    z: complex,
    default_phase: float = 0.0,
) -> TriangleSolution:
    """Solve P*exp(i a) + Q*exp(-i a) = z for ``a`` in the least-squares sense.

    Exact when a solution exists: for |P| != |Q| the equation reduces to a
    real 2x2 linear system in (cos a, sin a); for |P| = |Q| to a clamped
    cosine.  Off the solvable set the returned phases minimise the residual
    (critical points of the residual are the unit-circle roots of a
    quartic).  Branches are reported as (a, -a) pairs so the interface
    matches :func:`solve_triangle`.
    """
    # Reuse TriangleProblem purely for its finiteness validation.
    prob = TriangleProblem(p_coef, q_coef, z)
    p_coef, q_coef, z = prob.x, prob.y, prob.z
    p_mod, q_mod, z_mod = abs(p_coef), abs(q_coef), abs(z)
    tau = 1e-12 * max(p_mod, q_mod, z_mod, 1.0)
    exact_tol = 1e-10 * (p_mod + q_mod + z_mod)

    def pack(a1: float, a2: float | None = None, feasible: bool | None = None) -> TriangleSolution:
        alt = a1 if a2 is None else a2
        b1, b2 = (a1, -a1), (alt, -alt)
        res1 = abs(p_coef * cmath.exp(1j * a1) + q_coef * cmath.exp(-1j * a1) - z)
        res2 = abs(p_coef * cmath.exp(1j * alt) + q_coef * cmath.exp(-1j * alt) - z)
        ok = feasible if feasible is not None else max(res1, res2) <= exact_tol
        return TriangleSolution(
            branches=(
                (_wrap(b1[0]), _wrap(b1[1])),
                (_wrap(b2[0]), _wrap(b2[1])),
            ),
            feasible=ok,
            residuals=(res1, res2),
        )

    if p_mod <= tau and q_mod <= tau:
        if z_mod > tau:
            raise DegenerateTriangle(
                f"|P|={p_mod:.3e} and |Q|={q_mod:.3e} cannot reach |z|={z_mod:.3e}"
            )
        return pack(default_phase, feasible=True)

    if abs(p_mod - q_mod) <= tau:
        # P e^{ia} + Q e^{-ia} = 2 P' cos(a + shift) with P' on the bisector.
        shift = 0.5 * (cmath.phase(p_coef) - cmath.phase(q_coef))
        axis = cmath.exp(0.5j * (cmath.phase(p_coef) + cmath.phase(q_coef))) * p_mod
        t = (z * axis.conjugate()).real / (2.0 * p_mod * p_mod)
        clamped = not -1.0 <= t <= 1.0
        beta = math.acos(min(1.0, max(-1.0, t)))
        a1, a2 = beta - shift, -beta - shift
        if clamped:
            return pack(a1, feasible=False)
        return pack(a1, a2)

    # Nondegenerate ellipse: (P+Q) cos a + i (P-Q) sin a = z.
    u, v = p_coef + q_coef, 1j * (p_coef - q_coef)
    det = u.real * v.imag - v.real * u.imag  # equals |P|^2 - |Q|^2
    cos_a = (z.real * v.imag - v.real * z.imag) / det
    sin_a = (u.real * z.imag - z.real * u.imag) / det
    if abs(cos_a * cos_a + sin_a * sin_a - 1.0) <= 1e-9:
        return pack(math.atan2(sin_a, cos_a))

    # No exact solution: minimise |P e^{ia} + Q e^{-ia} - z| over a.  The
    # stationarity condition is a quartic in e^{ia} with unit-circle roots.
    w2 = p_coef * q_coef.conjugate()
    w1 = z.conjugate() * p_coef + z * q_coef.conjugate()
    poly = np.array([-4.0 * w2, 2.0 * w1, 0.0, -2.0 * w1.conjugate(), 4.0 * w2.conjugate()])
    nonzero = np.flatnonzero(np.abs(poly) > 0)
    if nonzero.size == 0:
        return pack(default_phase, feasible=False)
    roots = np.roots(poly[nonzero[0]:])
    angles = sorted({_wrap(float(np.angle(r))) for r in roots if abs(r) > 1e-12})
    if not angles:
        return pack(default_phase, feasible=False)

    def res_of(a: float) -> float:
        return abs(p_coef * cmath.exp(1j * a) + q_coef * cmath.exp(-1j * a) - z)

    ranked = sorted(angles, key=lambda a: (res_of(a), a))
    best = ranked[0]
    return pack(best, feasible=False)
