"""Feature similarity index (FSIM) on luminance.

Follows the published FSIM algorithm (Zhang, Zhang, Mou & Zhang, IEEE TIP
2011) and the phase-congruency transform it bundles (Kovesi's log-Gabor
construction): 4 scales, 4 orientations, minimum wavelength 6, scale factor
2, sigma_onf 0.55, angular-interval-to-sigma ratio 1.2, noise threshold at
k = 2 standard deviations with the 1.7 empirical rescale. Gradient
magnitude uses the 3x3 Scharr kernel / 16. Both maps are computed on luma
scaled to [0, 255]; the final score pools the similarity map by the
pointwise maximum phase congruency:

    FSIM = sum(S_pc * S_g * PCm) / sum(PCm),   PCm = max(PC_x, PC_y).

No pre-downsampling is applied: the pipeline's working resolution (256) is
already the reference scale at which the downsampling factor is 1.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy.signal import convolve2d

from .errors import ImageTooSmallError, ShapeMismatchError
from .imaging import ImageTensor, luminance

__all__ = ["fsim", "phase_congruency"]

MIN_SIZE = 32

# Phase congruency constants (log-Gabor bank + noise model)
N_SCALES = 4
N_ORIENTS = 4
MIN_WAVELENGTH = 6.0
SCALE_FACTOR = 2.0
SIGMA_ONF = 0.55
D_THETA_ON_SIGMA = 1.2
NOISE_K = 2.0
NOISE_RESCALE = 1.7
EPSILON = 1e-4

# Similarity constants (for luma in [0, 255])
T1 = 0.85
T2 = 160.0

_SCHARR_DX = np.array([[3.0, 0.0, -3.0], [10.0, 0.0, -10.0], [3.0, 0.0, -3.0]]) / 16.0


def _centered_range(n: int) -> np.ndarray:
    if n % 2:
        return np.arange(-(n - 1) / 2, (n - 1) / 2 + 1) / (n - 1)
    return np.arange(-n / 2, n / 2) / n


@lru_cache(maxsize=4)
def _pc_bank(rows: int, cols: int):
    """Image-independent part of the transform for one image shape.

    Returns (filters[s][o], em_n[o], sum_an2[o], sum_aiaj[o]): the frequency-
    domain filter bank, the squared-norm of each orientation's smallest-scale
    filter, and the spatial-domain filter cross-energy totals used by the
    noise model.
    """
    x, y = np.meshgrid(_centered_range(cols), _centered_range(rows))
    radius = np.fft.ifftshift(np.sqrt(x**2 + y**2))
    theta = np.fft.ifftshift(np.arctan2(-y, x))
    radius[0, 0] = 1.0
    sin_t, cos_t = np.sin(theta), np.cos(theta)

    lowpass = 1.0 / (1.0 + (radius / 0.45) ** 30)

    log_gabor = []
    for s in range(N_SCALES):
        f0 = 1.0 / (MIN_WAVELENGTH * SCALE_FACTOR**s)
        lg = np.exp(-(np.log(radius / f0) ** 2) / (2.0 * math.log(SIGMA_ONF) ** 2))
        lg *= lowpass
        lg[0, 0] = 0.0
        log_gabor.append(lg)

    theta_sigma = math.pi / N_ORIENTS / D_THETA_ON_SIGMA
    spreads = []
    for o in range(N_ORIENTS):
        angle = o * math.pi / N_ORIENTS
        ds = sin_t * math.cos(angle) - cos_t * math.sin(angle)
        dc = cos_t * math.cos(angle) + sin_t * math.sin(angle)
        dtheta = np.abs(np.arctan2(ds, dc))
        spreads.append(np.exp(-(dtheta**2) / (2.0 * theta_sigma**2)))

    filters = []
    em_n = []
    sum_an2 = []
    sum_aiaj = []
    scale = math.sqrt(rows * cols)
    for o in range(N_ORIENTS):
        per_scale = [log_gabor[s] * spreads[o] for s in range(N_SCALES)]
        filters.append(per_scale)
        em_n.append(float(np.sum(per_scale[0] ** 2)))
        ifft_filts = [np.real(np.fft.ifft2(f)) * scale for f in per_scale]
        sum_an2.append(float(sum(np.sum(f**2) for f in ifft_filts)))
        cross = 0.0
        for i in range(N_SCALES - 1):
            for j in range(i + 1, N_SCALES):
                cross += float(np.sum(ifft_filts[i] * ifft_filts[j]))
        sum_aiaj.append(cross)
    return filters, em_n, sum_an2, sum_aiaj


def phase_congruency(img: np.ndarray) -> np.ndarray:
    """Phase congruency map of a 2-D luma array, values in [0, 1]."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ShapeMismatchError(f"phase_congruency expects a 2-D array, got {img.shape}")
    rows, cols = img.shape
    filters, em_n, sum_an2, sum_aiaj = _pc_bank(rows, cols)
    image_fft = np.fft.fft2(img)

    energy_all = np.zeros((rows, cols))
    an_all = np.zeros((rows, cols))
    for o in range(N_ORIENTS):
        eo = [np.fft.ifft2(image_fft * filters[o][s]) for s in range(N_SCALES)]
        an = [np.abs(e) for e in eo]
        sum_an = sum(an)
        sum_e = sum(e.real for e in eo)
        sum_o = sum(e.imag for e in eo)

        x_energy = np.sqrt(sum_e**2 + sum_o**2) + EPSILON
        mean_e = sum_e / x_energy
        mean_o = sum_o / x_energy
        energy = np.zeros((rows, cols))
        for e in eo:
            energy += e.real * mean_e + e.imag * mean_o
            energy -= np.abs(e.real * mean_o - e.imag * mean_e)

        # Noise threshold: median energy^2 at the smallest scale gives the
        # noise power; propagate through the filter cross-energies to the
        # expected Rayleigh-distributed noise energy.
        median_e2n = float(np.median(an[0] ** 2))
        mean_e2n = median_e2n / math.log(2.0)
        noise_power = mean_e2n / em_n[o]
        est_noise_energy2 = 2.0 * noise_power * sum_an2[o] + 4.0 * noise_power * sum_aiaj[o]
        tau = math.sqrt(est_noise_energy2 / 2.0)
        est_noise_energy = tau * math.sqrt(math.pi / 2.0)
        est_noise_sigma = math.sqrt((2.0 - math.pi / 2.0) * tau**2)
        threshold = (est_noise_energy + NOISE_K * est_noise_sigma) / NOISE_RESCALE

        energy_all += np.maximum(energy - threshold, 0.0)
        an_all += sum_an
    return energy_all / np.maximum(an_all, 1e-12)


def _gradient_magnitude(img: np.ndarray) -> np.ndarray:
    gx = convolve2d(img, _SCHARR_DX, mode="same", boundary="fill")
    gy = convolve2d(img, _SCHARR_DX.T, mode="same", boundary="fill")
    return np.sqrt(gx**2 + gy**2)


def _luma_255(t: ImageTensor) -> np.ndarray:
    if t.channels == 3:
        t = luminance(t)
    return t.data[:, :, 0].astype(np.float64) * 255.0


def fsim(x: ImageTensor, y: ImageTensor) -> float:
    """Feature similarity between two unit-range images, in [0, 1]."""
    if x.data.shape != y.data.shape:
        raise ShapeMismatchError(f"shape mismatch {x.data.shape} vs {y.data.shape}")
    if x.height < MIN_SIZE or x.width < MIN_SIZE:
        raise ImageTooSmallError(
            f"fsim needs at least {MIN_SIZE}x{MIN_SIZE} pixels, got {x.height}x{x.width}"
        )
    lx, ly = _luma_255(x), _luma_255(y)
    pc_x, pc_y = phase_congruency(lx), phase_congruency(ly)
    g_x, g_y = _gradient_magnitude(lx), _gradient_magnitude(ly)

    s_pc = (2.0 * pc_x * pc_y + T1) / (pc_x**2 + pc_y**2 + T1)
    s_g = (2.0 * g_x * g_y + T2) / (g_x**2 + g_y**2 + T2)
    s_l = s_pc * s_g
    pc_m = np.maximum(pc_x, pc_y)
    denom = float(pc_m.sum())
    if denom <= 0.0:
        # featureless pair (e.g. two constants): fall back to the unweighted map mean
        return float(s_l.mean())
    return float((s_l * pc_m).sum() / denom)
