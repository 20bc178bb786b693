"""2-D phase recovery: peel coefficient pairs along anti-diagonal layers.

Coefficients a_{n1 n2} live on the square [-N, N]^2 and the measured grid
is M x M with M >= 4N+1 so the full 2-D autocorrelation fits alias-free.
The corner pair (N, N) / (-N, -N) anchors the gauge through the top
autocorrelation row; afterwards pairs (a_{u,v}, a_{-u,-v}) are resolved
in strictly decreasing layer sum u+v (ties by decreasing u) through row
b_{u+N, v+N}.  That ordering provably leaves exactly the two corner
products of each row unresolved, which is asserted at runtime.  The
center coefficient pairs with itself and is solved last as a conjugate
pair.  Branch selection and the incremental residual bookkeeping mirror
the 1-D engine.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, replace
from typing import Mapping

import numpy as np

from .engine1d import (
    SELECTORS,
    TAU_ANCHOR_REL,
    TAU_B_REL,
    TAU_RESIDUAL_REL,
    TAU_TIE_REL,
)
from .spectral import logical_min, logical_to_offset
from .triangle import (
    DegenerateTriangle,
    TriangleProblem,
    solve_conjugate_pair,
    solve_triangle,
)

Index2D = tuple[int, int]


class AnchorFailure(ValueError):
    """A corner anchor coefficient has (near) zero modulus."""


@dataclass(frozen=True)
class ProblemInstance2D:
    """2-D instance: |f| samples on an M x M grid plus coefficient moduli."""

    order: int
    grid_len: int
    field_magnitude: np.ndarray
    coeff_magnitudes: np.ndarray
    priors: Mapping[Index2D, complex] | None = None
    gauge_phase: complex = 1.0 + 0.0j

    def __post_init__(self) -> None:
        if self.order < 0:
            raise ValueError("order must be >= 0")
        n = 2 * self.order + 1
        if self.grid_len < 4 * self.order + 1:
            raise ValueError(
                f"grid length {self.grid_len} below 2-D oversampling bound {4 * self.order + 1}"
            )
        fm = np.array(self.field_magnitude, dtype=np.float64)
        cm = np.array(self.coeff_magnitudes, dtype=np.float64)
        if fm.shape != (self.grid_len, self.grid_len):
            raise ValueError("field_magnitude must be grid_len x grid_len")
        if cm.shape != (n, n):
            raise ValueError(f"coeff_magnitudes must be {n} x {n}")
        if not (np.all(np.isfinite(fm)) and np.all(np.isfinite(cm))):
            raise ValueError("magnitudes must be finite")
        if np.any(fm < 0) or np.any(cm < 0):
            raise ValueError("magnitudes must be nonnegative")
        g = complex(self.gauge_phase)
        if abs(g) == 0:
            raise ValueError("gauge_phase must be a nonzero (unit) complex number")
        g /= abs(g)
        priors = None
        if self.priors is not None:
            priors = {}
            for key, val in self.priors.items():
                val = complex(val)
                if abs(val) == 0:
                    raise ValueError(f"prior for {key} must be nonzero")
                priors[(int(key[0]), int(key[1]))] = val / abs(val)
        fm.setflags(write=False)
        cm.setflags(write=False)
        object.__setattr__(self, "field_magnitude", fm)
        object.__setattr__(self, "coeff_magnitudes", cm)
        object.__setattr__(self, "gauge_phase", g)
        object.__setattr__(self, "priors", priors)


@dataclass(frozen=True)
class Autocorr2D:
    """Autocorrelation coefficients b_{l1 l2} for lags in [-2N, 2N]^2."""

    order: int
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        span = 4 * self.order + 1
        coeffs = np.array(self.coeffs, dtype=np.complex128)
        if coeffs.shape != (span, span):
            raise ValueError(f"expected {span} x {span} coefficients")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    def at(self, l1: int, l2: int) -> complex:
        off = 2 * self.order
        if not (-off <= l1 <= off and -off <= l2 <= off):
            raise IndexError(f"lag ({l1}, {l2}) outside [-{off}, {off}]^2")
        return complex(self.coeffs[l1 + off, l2 + off])


@dataclass(frozen=True)
class BranchDecision2D:
    step: int
    pair: tuple[Index2D, Index2D]
    chosen: int
    gap: float
    tie: bool = False


@dataclass(frozen=True)
class SolveReport2D:
    recovered: np.ndarray
    order: int
    grid_len: int
    branch_log: tuple[BranchDecision2D, ...]
    final_residual: float
    consistency_flags: tuple[str, ...]
    selector: str = "incremental"

    def __post_init__(self) -> None:
        rec = np.array(self.recovered, dtype=np.complex128)
        rec.setflags(write=False)
        object.__setattr__(self, "recovered", rec)


def _to_standard_2d(arr: np.ndarray, grid_len: int) -> np.ndarray:
    shift = logical_min(grid_len)
    return np.roll(np.roll(arr, shift, axis=0), shift, axis=1)


def _to_logical_2d(arr: np.ndarray, grid_len: int) -> np.ndarray:
    shift = -logical_min(grid_len)
    return np.roll(np.roll(arr, shift, axis=0), shift, axis=1)


def forward_dft_2d(coeffs: np.ndarray, grid_len: int) -> np.ndarray:
    """Synthesise f(k1,k2) = sum a_{n1 n2} exp(2 pi i (n1 k1 + n2 k2)/M).

    ``coeffs`` is the (2N+1) x (2N+1) window; output is the M x M grid in
    logical order (both axes centered).
    """
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    n = coeffs.shape[0]
    if coeffs.shape != (n, n) or n % 2 == 0:
        raise ValueError("coeffs must be a square array with odd side length")
    order = (n - 1) // 2
    if grid_len < n:
        raise ValueError("grid too small for the coefficient window")
    dense = np.zeros((grid_len, grid_len), dtype=np.complex128)
    lo = logical_to_offset(-order, grid_len)
    dense[lo:lo + n, lo:lo + n] = coeffs
    std = _to_standard_2d(dense, grid_len)
    return _to_logical_2d(grid_len * grid_len * np.fft.ifft2(std), grid_len)


def _autocorr_full_grid(mag_sq: np.ndarray) -> np.ndarray:
    m = mag_sq.shape[0]
    std = _to_standard_2d(mag_sq.astype(np.complex128), m)
    return _to_logical_2d(np.fft.fft2(std), m) / (m * m)


def autocorr2d(mag_sq: np.ndarray, order: int) -> Autocorr2D:
    """Extract the lag window [-2N, 2N]^2 of the transform of |f|^2."""
    mag_sq = np.asarray(mag_sq, dtype=np.float64)
    m = mag_sq.shape[0]
    if mag_sq.shape != (m, m):
        raise ValueError("mag_sq must be square")
    if np.any(mag_sq < 0):
        raise ValueError("squared magnitudes must be nonnegative")
    if m < 4 * order + 1:
        raise ValueError(f"grid {m} cannot hold lags out to {2 * order} alias-free")
    full = _autocorr_full_grid(mag_sq)
    lo = logical_to_offset(-2 * order, m)
    span = 4 * order + 1
    return Autocorr2D(order, full[lo:lo + span, lo:lo + span])


def convolve_direct_2d(coeffs: np.ndarray) -> Autocorr2D:
    """Autocorrelation by the explicit double sum over both axes.

    Independent oracle for :func:`autocorr2d`; evaluated lag by lag with
    shifted-window products.
    """
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    n = coeffs.shape[0]
    if coeffs.shape != (n, n) or n % 2 == 0:
        raise ValueError("coeffs must be a square array with odd side length")
    order = (n - 1) // 2
    span = 2 * n - 1
    out = np.zeros((span, span), dtype=np.complex128)
    for l1 in range(-(n - 1), n):
        a_lo1, a_hi1 = max(0, l1), min(n, n + l1)
        for l2 in range(-(n - 1), n):
            a_lo2, a_hi2 = max(0, l2), min(n, n + l2)
            block = coeffs[a_lo1:a_hi1, a_lo2:a_hi2]
            shifted = coeffs[a_lo1 - l1:a_hi1 - l1, a_lo2 - l2:a_hi2 - l2]
            out[l1 + n - 1, l2 + n - 1] = np.sum(block * np.conj(shifted))
    return Autocorr2D(order, out)


def layer_schedule(order: int) -> list[Index2D]:
    """Pair leads (u, v) in processing order: decreasing u+v, then decreasing u.

    Layer sum 2N is the anchor pair (handled by the gauge), layer sums
    2N-1 .. 1 come first, then the zero-sum pairs (u, -u) with u > 0, and
    the self-paired center last.
    """
    n = order
    pairs: list[Index2D] = []
    for sigma in range(2 * n - 1, 0, -1):
        for u in range(min(n, sigma + n), max(-n, sigma - n) - 1, -1):
            pairs.append((u, sigma - u))
    for u in range(n, 0, -1):
        pairs.append((u, -u))
    pairs.append((0, 0))
    return pairs


class _LayerState:
    """Candidate coefficients, autocorrelation rows and running distance."""

    def __init__(self, inst: ProblemInstance2D, full_autocorr: np.ndarray, selector: str) -> None:
        if selector not in SELECTORS:
            raise ValueError(f"selector must be one of {SELECTORS}")
        self.selector = selector
        self.order = inst.order
        self.n = 2 * inst.order + 1
        self.span = 2 * self.n - 1  # lag window side length
        self.moduli = inst.coeff_magnitudes.tolist()
        gauge = complex(inst.gauge_phase)
        priors = inst.priors or {}
        self.gauge = gauge
        self.placeholders = [
            [
                gauge * priors.get((i - inst.order, j - inst.order), 1.0 + 0.0j)
                for j in range(self.n)
            ]
            for i in range(self.n)
        ]
        self.cand = [
            [self.moduli[i][j] * self.placeholders[i][j] for j in range(self.n)]
            for i in range(self.n)
        ]
        self.resolved = [[False] * self.n for _ in range(self.n)]

        m = inst.grid_len
        lo = logical_to_offset(-2 * inst.order, m)
        window = full_autocorr[lo:lo + self.span, lo:lo + self.span]
        self.b_rows = window.tolist()
        total_sq = float(np.sum(np.abs(full_autocorr) ** 2))
        self.tail = max(total_sq - float(np.sum(np.abs(window) ** 2)), 0.0)
        self.row_energy = total_sq
        self.tie_tol = TAU_TIE_REL * total_sq

        self.c_rows = self._full_rows(self.cand)
        self.distance = self._full_distance(self.c_rows)
        self.flags: list[str] = []
        self.branch_log: list[BranchDecision2D] = []

    # window coords: (i, j) = (n1 + N, n2 + N); lag offsets: lag + (n - 1)

    def _full_rows(self, cand: list[list[complex]]) -> list[list[complex]]:
        n = self.n
        rows = [[0.0 + 0.0j] * self.span for _ in range(self.span)]
        for l1 in range(-(n - 1), n):
            for l2 in range(-(n - 1), n):
                acc = 0.0 + 0.0j
                for i in range(max(0, l1), min(n, n + l1)):
                    row_i = cand[i]
                    row_p = cand[i - l1]
                    for j in range(max(0, l2), min(n, n + l2)):
                        acc += row_i[j] * row_p[j - l2].conjugate()
                rows[l1 + n - 1][l2 + n - 1] = acc
        return rows

    def _full_distance(self, rows: list[list[complex]]) -> float:
        d = self.tail
        for r_c, r_b in zip(rows, self.b_rows):
            for c, b in zip(r_c, r_b):
                diff = c - b
                d += diff.real * diff.real + diff.imag * diff.imag
        return d

    def _row_deltas(self, changes: dict[Index2D, complex]) -> dict[Index2D, complex]:
        cand = self.cand
        n = self.n
        deltas: dict[Index2D, complex] = {}
        changed = set(changes)
        for (xi, xj), new_val in changes.items():
            old_val = cand[xi][xj]
            for qi in range(n):
                for qj in range(n):
                    q_new = changes.get((qi, qj), cand[qi][qj])
                    delta = new_val * q_new.conjugate() - old_val * cand[qi][qj].conjugate()
                    key = (xi - qi, xj - qj)
                    deltas[key] = deltas.get(key, 0.0 + 0.0j) + delta
            d_conj = (new_val - old_val).conjugate()
            for pi in range(n):
                for pj in range(n):
                    if (pi, pj) in changed:
                        continue
                    key = (pi - xi, pj - xj)
                    deltas[key] = deltas.get(key, 0.0 + 0.0j) + cand[pi][pj] * d_conj
        return deltas

    def _apply_deltas(self, deltas: dict[Index2D, complex], commit: bool) -> float:
        off = self.n - 1
        d = self.distance
        for (l1, l2), delta in deltas.items():
            old = self.c_rows[l1 + off][l2 + off] - self.b_rows[l1 + off][l2 + off]
            new = old + delta
            d += (new.real * new.real + new.imag * new.imag) - (
                old.real * old.real + old.imag * old.imag
            )
            if commit:
                self.c_rows[l1 + off][l2 + off] += delta
        return d

    def distance_if(self, changes: dict[Index2D, complex]) -> float:
        if self.selector == "full":
            trial = [row[:] for row in self.cand]
            for (i, j), val in changes.items():
                trial[i][j] = val
            return self._full_distance(self._full_rows(trial))
        return self._apply_deltas(self._row_deltas(changes), commit=False)

    def apply(self, changes: dict[Index2D, complex]) -> None:
        if self.selector == "full":
            for (i, j), val in changes.items():
                self.cand[i][j] = val
            self.c_rows = self._full_rows(self.cand)
            self.distance = self._full_distance(self.c_rows)
        else:
            self.distance = self._apply_deltas(self._row_deltas(changes), commit=True)
            for (i, j), val in changes.items():
                self.cand[i][j] = val
        for (i, j) in changes:
            self.resolved[i][j] = True

    def window_index(self, u: int, v: int) -> Index2D:
        return (u + self.order, v + self.order)

    def placeholder_phase(self, u: int, v: int) -> float:
        i, j = self.window_index(u, v)
        return cmath.phase(self.placeholders[i][j])


def _row_terms(order: int, u: int, v: int):
    """Logical first factors (j1, j2) of row b_{u+N, v+N}; partner is (j1-u-N, j2-v-N)."""
    n = order
    for j1 in range(u, n + 1):
        for j2 in range(v, n + 1):
            yield (j1, j2), (j1 - u - n, j2 - v - n)


def solve_2d(inst: ProblemInstance2D, selector: str = "incremental") -> SolveReport2D:
    """Recover all coefficient phases from |f| samples and coefficient moduli.

    Raises :class:`AnchorFailure` when a corner anchor modulus is
    negligible (no silent re-anchoring); every other anomaly is flagged in
    the report and the solve completes.
    """
    n = inst.order
    cm = inst.coeff_magnitudes
    anchor_tol = TAU_ANCHOR_REL * float(cm.max(initial=0.0))
    if cm[2 * n, 2 * n] <= anchor_tol or cm[0, 0] <= anchor_tol:
        raise AnchorFailure(
            f"corner anchors |a_({n},{n})|={cm[2 * n, 2 * n]:.3e}, "
            f"|a_(-{n},-{n})|={cm[0, 0]:.3e} below threshold {anchor_tol:.3e}"
        )

    full = _autocorr_full_grid(inst.field_magnitude**2)
    state = _LayerState(inst, full, selector)
    flags: list[str] = []

    if n == 0:
        state.apply({(0, 0): state.moduli[0][0] * state.gauge})
        final_residual = max(state.distance, 0.0)
        if final_residual > TAU_RESIDUAL_REL * state.row_energy:
            flags.append("large_final_residual")
        return SolveReport2D(
            recovered=np.array(state.cand, dtype=np.complex128),
            order=n,
            grid_len=inst.grid_len,
            branch_log=(),
            final_residual=final_residual,
            consistency_flags=tuple(flags),
            selector=selector,
        )

    # Gauge on the corner pair through the top row b_{2N, 2N}.
    off = state.n - 1
    b_top = state.b_rows[2 * off][2 * off]
    top_i = state.window_index(n, n)
    bot_i = state.window_index(-n, -n)
    m_top = state.moduli[top_i[0]][top_i[1]]
    m_bot = state.moduli[bot_i[0]][bot_i[1]]
    product = m_top * m_bot
    if abs(abs(b_top) - product) > TAU_B_REL * max(abs(b_top), product):
        flags.append("inconsistent_top")
    phase_top = cmath.phase(state.gauge)
    phase_bot = phase_top - cmath.phase(b_top)
    state.apply(
        {
            top_i: m_top * cmath.exp(1j * phase_top),
            bot_i: m_bot * cmath.exp(1j * phase_bot),
        }
    )

    for step, (u, v) in enumerate(layer_schedule(n), start=1):
        lead = state.window_index(u, v)
        mate = state.window_index(-u, -v)
        center = lead == mate

        # Ordering soundness: the only unresolved products on this row are
        # the two corner terms (one coefficient for the center row).
        unresolved = []
        acc = 0.0 + 0.0j
        for (j1, j2), (p1, p2) in _row_terms(n, u, v):
            ji = state.window_index(j1, j2)
            pi = state.window_index(p1, p2)
            if state.resolved[ji[0]][ji[1]] and state.resolved[pi[0]][pi[1]]:
                acc += state.cand[ji[0]][ji[1]] * state.cand[pi[0]][pi[1]].conjugate()
            else:
                unresolved.append(((j1, j2), (p1, p2)))
        expected = (
            [((0, 0), (-n, -n)), ((n, n), (0, 0))]
            if center
            else [((u, v), (-n, -n)), ((n, n), (-u, -v))]
        )
        assert unresolved == expected, (
            f"ordering violation at pair ({u}, {v}): unresolved terms {unresolved}"
        )

        z = state.b_rows[u + n + off][v + n + off] - acc
        anchor_bot = state.cand[bot_i[0]][bot_i[1]].conjugate()
        anchor_top = state.cand[top_i[0]][top_i[1]]
        m_lead = state.moduli[lead[0]][lead[1]]
        m_mate = state.moduli[mate[0]][mate[1]]

        if center:
            default = state.placeholder_phase(0, 0)
            try:
                sol = solve_conjugate_pair(anchor_bot * m_lead, anchor_top * m_lead, z, default)
                cands = [
                    ({lead: m_lead * cmath.exp(1j * a1)}, not sol.feasible, False)
                    for a1, _ in sol.branches
                ]
            except DegenerateTriangle:
                val = m_lead * state.placeholders[lead[0]][lead[1]]
                cands = [({lead: val}, False, True)] * 2
        else:
            default1 = state.placeholder_phase(u, v)
            default2 = -state.placeholder_phase(-u, -v)
            try:
                sol = solve_triangle(
                    TriangleProblem(anchor_bot * m_lead, anchor_top * m_mate, z),
                    default_phase1=default1,
                    default_phase2=default2,
                )
                cands = [
                    (
                        {
                            lead: m_lead * cmath.exp(1j * a1),
                            mate: m_mate * cmath.exp(-1j * a2),
                        },
                        not sol.feasible,
                        False,
                    )
                    for a1, a2 in sol.branches
                ]
            except DegenerateTriangle:
                fallback = {
                    lead: m_lead * state.placeholders[lead[0]][lead[1]],
                    mate: m_mate * state.placeholders[mate[0]][mate[1]],
                }
                cands = [(fallback, False, True)] * 2

        d1 = state.distance_if(cands[0][0])
        d2 = state.distance_if(cands[1][0])
        tie = abs(d1 - d2) <= state.tie_tol
        chosen = 1 if (tie or d1 <= d2) else 2
        changes, clamped, degenerate = cands[chosen - 1]
        state.apply(changes)
        state.branch_log.append(
            BranchDecision2D(
                step=step,
                pair=((u, v), (-u, -v)),
                chosen=chosen,
                gap=abs(d2 - d1),
                tie=tie,
            )
        )
        # Same convention as the 1-D engine: coinciding branches only count
        # as a tie anomaly when clamping forced them together.
        if tie and (clamped or cands[0][0] != cands[1][0]):
            flags.append(f"tie:pair=({u},{v})")
        if clamped:
            flags.append(f"clamped_triangle:pair=({u},{v})")
        if degenerate:
            flags.append(f"degenerate_step:pair=({u},{v})")

    flags.extend(state.flags)
    final_residual = max(state.distance, 0.0)  # incremental cancellation guard
    if final_residual > TAU_RESIDUAL_REL * state.row_energy:
        flags.append("large_final_residual")
    return SolveReport2D(
        recovered=np.array(state.cand, dtype=np.complex128),
        order=n,
        grid_len=inst.grid_len,
        branch_log=tuple(state.branch_log),
        final_residual=final_residual,
        consistency_flags=tuple(flags),
        selector=selector,
    )


def priors_from_coeffs_2d(coeffs: np.ndarray) -> dict[Index2D, complex]:
    """Unit phase hints from a previously recovered coefficient array."""
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    order = (coeffs.shape[0] - 1) // 2
    priors: dict[Index2D, complex] = {}
    for i in range(coeffs.shape[0]):
        for j in range(coeffs.shape[1]):
            v = coeffs[i, j]
            mag = abs(v)
            priors[(i - order, j - order)] = (v / mag) if mag > 0 else (1.0 + 0.0j)
    return priors


def solve_2d_refined(
    inst: ProblemInstance2D,
    passes: int = 1,
    selector: str = "incremental",
) -> SolveReport2D:
    """Layer recursion with prior feedback between passes (1-D counterpart
    is ``solve_1d_refined``)."""
    if passes < 1:
        raise ValueError("passes must be >= 1")
    report = solve_2d(inst, selector=selector)
    for _ in range(passes - 1):
        seeded = replace(inst, priors=priors_from_coeffs_2d(report.recovered))
        report = solve_2d(seeded, selector=selector)
    return report
