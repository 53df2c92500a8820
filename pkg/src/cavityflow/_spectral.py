"""FFT helpers on uniform periodic parameter grids.

All boundary curves are sampled at t_j = 2*pi*j/n with n even, so derivatives
and the periodic log-kernel quadrature are spectrally accurate for analytic
curves.
"""

from functools import lru_cache

import numpy as np


def param_grid(n: int) -> np.ndarray:
    """Uniform parameter nodes t_j = 2*pi*j/n, j = 0..n-1."""
    return 2.0 * np.pi * np.arange(n) / n


def fourier_diff(values: np.ndarray, axis: int = 0) -> np.ndarray:
    """Differentiate periodic samples with respect to the curve parameter.

    Works on real arrays; extra axes are treated as independent columns.
    The Nyquist mode is dropped from the derivative (standard for even n).
    """
    values = np.asarray(values, dtype=float)
    n = values.shape[axis]
    freqs = np.fft.rfftfreq(n, d=1.0 / n)
    mult = 1j * freqs
    if n % 2 == 0:
        mult[-1] = 0.0
    shape = [1] * values.ndim
    shape[axis] = len(freqs)
    spec = np.fft.rfft(values, axis=axis) * mult.reshape(shape)
    return np.fft.irfft(spec, n=n, axis=axis)


@lru_cache(maxsize=32)
def log_kernel_circulant(n: int) -> np.ndarray:
    """Quadrature matrix L with (L @ f)_i ~= int_0^{2pi} log(4 sin^2((t_i-s)/2)) f(s) ds.

    Exact for trigonometric polynomials up to the grid bandwidth: the kernel
    acts diagonally in Fourier space with symbol -2*pi/|m| (zero mean mode).
    """
    m = np.fft.fftfreq(n, d=1.0 / n)
    lam = np.zeros(n)
    nonzero = m != 0
    lam[nonzero] = -2.0 * np.pi / np.abs(m[nonzero])
    col = np.real(np.fft.ifft(lam))
    idx = np.arange(n)
    return col[(idx[:, None] - idx[None, :]) % n]
