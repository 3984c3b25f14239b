"""Fourier helpers for periodic grids (1-D and 2-D)."""

import numpy as np


def wavenumbers(n, length):
    """Angular wavenumbers for an ``n``-point periodic grid of period ``length``."""
    return 2.0 * np.pi * np.fft.fftfreq(n, d=length / n)


def _drop_nyquist(k):
    k = k.copy()
    if k.shape[0] % 2 == 0:
        k[k.shape[0] // 2] = 0.0
    return k


def derivative(f, length, order=1):
    """Spectral derivative of a real periodic sample vector.

    The Nyquist mode is zeroed for odd orders so the discrete operator stays
    real and skew-symmetric.
    """
    f = np.asarray(f, dtype=float)
    n = f.shape[-1]
    k = wavenumbers(n, length)
    if order % 2 == 1:
        k = _drop_nyquist(k)
    return np.fft.irfft((1j * k[: n // 2 + 1]) ** order * np.fft.rfft(f), n=n)


def dealias_mask(n):
    """Boolean mask (rfft layout) keeping modes |m| < n/3."""
    m = np.arange(n // 2 + 1)
    return m < n / 3.0


def dealias(f):
    """Apply the 2/3-rule truncation to a real 1-D periodic sample vector."""
    n = f.shape[-1]
    fh = np.fft.rfft(f)
    fh[~dealias_mask(n)] = 0.0
    return np.fft.irfft(fh, n=n)


def antiderivative(f, length):
    """Periodic part of the antiderivative plus the mean-slope term.

    Returns ``F`` with ``F(x_0) = 0`` on the grid ``x_j = j * length / n``.
    """
    f = np.asarray(f, dtype=float)
    n = f.size
    k = wavenumbers(n, length)
    fh = np.fft.fft(f)
    mean = fh[0].real / n
    fh[0] = 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        gh = np.where(k != 0, fh / (1j * k), 0.0)
    if n % 2 == 0:
        gh[n // 2] = 0.0
    g = np.fft.ifft(gh).real
    x = np.arange(n) * length / n
    return mean * x + g - g[0]


class Grid2D:
    """Square periodic grid on [0, length)^2 with cached wavenumbers."""

    def __init__(self, n, length=2.0 * np.pi):
        self.n = n
        self.length = length
        k = wavenumbers(n, length)
        self.kx, self.ky = np.meshgrid(k, k, indexing="ij")
        kd = _drop_nyquist(k)
        self.kxd, self.kyd = np.meshgrid(kd, kd, indexing="ij")
        self.k2 = self.kx**2 + self.ky**2
        m = np.abs(np.fft.fftfreq(n, d=1.0 / n))
        keep = m < n / 3.0
        self.mask = np.outer(keep, keep)
        x = np.arange(n) * length / n
        self.x, self.y = np.meshgrid(x, x, indexing="ij")
        self.cell = (length / n) ** 2

    def ddx(self, f):
        return np.fft.ifft2(1j * self.kxd * np.fft.fft2(f)).real

    def ddy(self, f):
        return np.fft.ifft2(1j * self.kyd * np.fft.fft2(f)).real

    def dealias(self, f):
        return np.fft.ifft2(np.where(self.mask, np.fft.fft2(f), 0.0)).real

    def integrate(self, f):
        return float(np.sum(f) * self.cell)
