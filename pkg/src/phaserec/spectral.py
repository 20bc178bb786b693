"""Centered finite Fourier transforms and autocorrelation coefficients.

Every sequence lives on a length-M grid addressed by a signed logical
index.  The index runs over the contiguous range

    logical_min(M) ... logical_min(M) + M - 1,      logical_min(M) = -(M // 2)

which is symmetric for odd M and covers -M/2 ... M/2-1 for even M.  The
single mapping rule between a logical index ``l`` and the storage offset
is ``offset = l - logical_min(M)``; everything in this package goes
through :func:`logical_to_offset` so the convention cannot drift.

The forward transform synthesises grid samples from coefficients,

    F(k) = sum_l a_l exp(+2 pi i l k / M),

and the inverse recovers coefficients with the 1/M normalisation.  The
coefficients of ``|F|**2`` (the autocorrelation spectrum) are obtained
either through the inverse transform of the squared magnitudes or by the
explicit double sum ``b_l = sum_j a_j conj(a_{j-l})``; the two routes
agree exactly whenever the coefficient support S satisfies 2S-1 <= M.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Relative threshold separating genuine out-of-support energy from round-off.
TAU_SUPPORT_REL = 1e-8


class SupportViolation(ValueError):
    """Significant coefficient energy outside the declared support window."""


def logical_min(grid_len: int) -> int:
    """Smallest logical index on a length-``grid_len`` grid."""
    if grid_len < 1:
        raise ValueError(f"grid_len must be >= 1, got {grid_len}")
    return -(grid_len // 2)


def logical_max(grid_len: int) -> int:
    """Largest logical index on a length-``grid_len`` grid."""
    return logical_min(grid_len) + grid_len - 1


def logical_to_offset(index: int, grid_len: int) -> int:
    """Map a signed logical index to its dense storage offset."""
    lo = logical_min(grid_len)
    if not lo <= index <= logical_max(grid_len):
        raise IndexError(f"logical index {index} outside grid of length {grid_len}")
    return index - lo


def _check_support(support: tuple[int, int], grid_len: int) -> None:
    s0, s1 = support
    if s0 > s1:
        raise ValueError(f"support window {support} is empty")
    if s0 < logical_min(grid_len) or s1 > logical_max(grid_len):
        raise ValueError(f"support {support} exceeds grid of length {grid_len}")


@dataclass(frozen=True)
class CenteredSpectrum:
    """Complex coefficients on a centered grid with an explicit support window.

    Coefficients with logical index outside ``support`` are exactly zero;
    the constructor rejects anything else.
    """

    grid_len: int
    coeffs: np.ndarray
    support: tuple[int, int]

    def __post_init__(self) -> None:
        coeffs = np.array(self.coeffs, dtype=np.complex128)
        if coeffs.shape != (self.grid_len,):
            raise ValueError(f"expected {self.grid_len} coefficients, got shape {coeffs.shape}")
        support = (int(self.support[0]), int(self.support[1]))
        _check_support(support, self.grid_len)
        lo = logical_to_offset(support[0], self.grid_len)
        hi = logical_to_offset(support[1], self.grid_len)
        outside = np.concatenate([coeffs[:lo], coeffs[hi + 1:]])
        if outside.size and np.any(outside != 0):
            raise ValueError("nonzero coefficient outside the declared support")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)
        object.__setattr__(self, "support", support)

    @classmethod
    def from_window(
        cls,
        window_coeffs: np.ndarray,
        grid_len: int,
        support: tuple[int, int],
    ) -> "CenteredSpectrum":
        """Place support-window coefficients into a dense zero-padded grid."""
        _check_support(tuple(support), grid_len)
        window = np.asarray(window_coeffs, dtype=np.complex128)
        s0, s1 = int(support[0]), int(support[1])
        if window.shape != (s1 - s0 + 1,):
            raise ValueError(f"window of shape {window.shape} does not fit support {support}")
        dense = np.zeros(grid_len, dtype=np.complex128)
        lo = logical_to_offset(s0, grid_len)
        dense[lo:lo + window.size] = window
        return cls(grid_len, dense, (s0, s1))

    @property
    def support_len(self) -> int:
        return self.support[1] - self.support[0] + 1

    def window(self) -> np.ndarray:
        """Coefficients restricted to the support window (read-only view)."""
        lo = logical_to_offset(self.support[0], self.grid_len)
        return self.coeffs[lo:lo + self.support_len]

    def at(self, index: int) -> complex:
        return complex(self.coeffs[logical_to_offset(index, self.grid_len)])


@dataclass(frozen=True)
class SampledField:
    """Complex samples F(k) on the centered grid."""

    grid_len: int
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.complex128)
        if values.shape != (self.grid_len,):
            raise ValueError(f"expected {self.grid_len} samples, got shape {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def at(self, index: int) -> complex:
        return complex(self.values[logical_to_offset(index, self.grid_len)])


@dataclass(frozen=True)
class AutocorrSpectrum:
    """Coefficients b_j of the squared magnitude on the centered grid."""

    grid_len: int
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        coeffs = np.array(self.coeffs, dtype=np.complex128)
        if coeffs.shape != (self.grid_len,):
            raise ValueError(f"expected {self.grid_len} coefficients, got shape {coeffs.shape}")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    def at(self, lag: int) -> complex:
        return complex(self.coeffs[logical_to_offset(lag, self.grid_len)])


def _to_standard(arr_logical: np.ndarray, grid_len: int) -> np.ndarray:
    # standard[m] = logical[(m - lmin) mod M], i.e. standard DFT ordering
    return np.roll(arr_logical, logical_min(grid_len))


def _to_logical(arr_standard: np.ndarray, grid_len: int) -> np.ndarray:
    return np.roll(arr_standard, -logical_min(grid_len))


def forward_dft(spec: CenteredSpectrum) -> SampledField:
    """Synthesise F(k) = sum_l a_l exp(2 pi i l k / M) over the grid.

    Implemented through the FFT after re-indexing to standard order; the
    result matches the direct O(M^2) summation to better than 1e-10
    (property-tested against an independent direct-sum oracle).
    """
    m = spec.grid_len
    std = _to_standard(spec.coeffs, m)
    return SampledField(m, _to_logical(m * np.fft.ifft(std), m))


def inverse_dft(field: SampledField, support: tuple[int, int]) -> CenteredSpectrum:
    """Recover a_l = (1/M) sum_k F(k) exp(-2 pi i l k / M) on a support window.

    Raises :class:`SupportViolation` if any coefficient outside ``support``
    exceeds ``TAU_SUPPORT_REL`` times the largest coefficient magnitude;
    sub-threshold leakage is treated as round-off and zeroed.
    """
    m = field.grid_len
    _check_support(tuple(support), m)
    std = _to_standard(field.values, m)
    dense = _to_logical(np.fft.fft(std), m) / m
    s0, s1 = int(support[0]), int(support[1])
    lo = logical_to_offset(s0, m)
    hi = logical_to_offset(s1, m)
    mags = np.abs(dense)
    tol = TAU_SUPPORT_REL * (mags.max() if mags.size else 0.0)
    outside_mask = np.ones(m, dtype=bool)
    outside_mask[lo:hi + 1] = False
    if np.any(mags[outside_mask] > tol):
        worst = np.argmax(np.where(outside_mask, mags, -1.0))
        raise SupportViolation(
            f"coefficient at logical index {worst + logical_min(m)} has magnitude "
            f"{mags[worst]:.3e}, above tolerance {tol:.3e} for support {support}"
        )
    dense[outside_mask] = 0.0
    return CenteredSpectrum(m, dense, (s0, s1))


def window_coefficients(field: SampledField, support: tuple[int, int]) -> np.ndarray:
    """Inverse-transform and keep the support window without any support check.

    Used when the data are known to be inconsistent (noisy measurements)
    and the leakage outside the window is part of the problem, not an error.
    """
    m = field.grid_len
    _check_support(tuple(support), m)
    std = _to_standard(field.values, m)
    dense = _to_logical(np.fft.fft(std), m) / m
    lo = logical_to_offset(int(support[0]), m)
    hi = logical_to_offset(int(support[1]), m)
    return dense[lo:hi + 1]


def autocorr_from_magnitude(mag_sq: np.ndarray) -> AutocorrSpectrum:
    """Extract b_j = (1/M) sum_k |F(k)|^2 exp(-2 pi i j k / M) from squared magnitudes.

    With the oversampling condition 2S-1 <= M these coefficients equal the
    exact convolution coefficients of the spectrum with no aliasing.
    """
    mag_sq = np.asarray(mag_sq, dtype=np.float64)
    if mag_sq.ndim != 1 or mag_sq.size < 1:
        raise ValueError("mag_sq must be a nonempty 1-D sequence")
    if np.any(mag_sq < 0):
        raise ValueError("squared magnitudes must be nonnegative")
    m = mag_sq.size
    std = _to_standard(mag_sq.astype(np.complex128), m)
    dense = _to_logical(np.fft.fft(std), m) / m
    return AutocorrSpectrum(m, dense)


def convolve_direct(spec: CenteredSpectrum) -> AutocorrSpectrum:
    """Autocorrelation coefficients by the explicit double sum.

    b_l = sum_j a_j conj(a_{j-l}), evaluated lag by lag over the support
    window.  Serves as the independent oracle for
    :func:`autocorr_from_magnitude` and for residual evaluation.  The
    output grid is enlarged to 2S-1 when the input grid is too short to
    hold the full autocorrelation alias-free.
    """
    w = spec.window()
    s = w.size
    out_len = max(spec.grid_len, 2 * s - 1)
    dense = np.zeros(out_len, dtype=np.complex128)
    center = logical_to_offset(0, out_len)
    for lag in range(s):
        val = np.dot(w[lag:], np.conj(w[:s - lag]))
        dense[center + lag] = val
        dense[center - lag] = np.conj(val)
    return AutocorrSpectrum(out_len, dense)
