"""
Image quality metrics: PSNR and single-channel (luma) SSIM.
"""

import numpy as np
from scipy.signal import convolve2d

from ..errors import DataError

PSNR_CAP_DB = 99.0
MSE_FLOOR = 1e-10
LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])


def _check_pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DataError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB, capped at 99 for (near) identical images.

    Raises:
        DataError: If the shapes differ.
    """
    a, b = _check_pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse < MSE_FLOOR:
        return PSNR_CAP_DB
    return float(min(PSNR_CAP_DB, 10.0 * np.log10(peak**2 / mse)))


def to_luma(image: np.ndarray) -> np.ndarray:
    """Rec. 601 luma of an RGB image; 2-D input is returned unchanged."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        return image
    if image.ndim == 3 and image.shape[2] == 3:
        return image @ LUMA_WEIGHTS
    raise DataError(f"expected an (H, W) or (H, W, 3) image, got shape {image.shape}")


def gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    """Normalized 2-D Gaussian window."""
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(
    a,
    b,
    window: int = 11,
    sigma: float = 1.5,
    K1: float = 0.01,
    K2: float = 0.03,
    data_range: float = 1.0,
) -> float:
    """Mean structural similarity over all valid windows of the luma images.

    Raises:
        DataError: If the shapes differ or the images are smaller than the
            window.
    """
    a, b = _check_pair(a, b)
    x, y = to_luma(a), to_luma(b)
    if min(x.shape) < window:
        raise DataError(f"image {x.shape} is smaller than the {window}x{window} window")
    w = gaussian_window(window, sigma)

    def filt(img: np.ndarray) -> np.ndarray:
        return convolve2d(img, w, mode="valid")

    C1 = (K1 * data_range) ** 2
    C2 = (K2 * data_range) ** 2
    mu_x, mu_y = filt(x), filt(y)
    var_x = filt(x * x) - mu_x**2
    var_y = filt(y * y) - mu_y**2
    cov = filt(x * y) - mu_x * mu_y
    numerator = (2.0 * mu_x * mu_y + C1) * (2.0 * cov + C2)
    denominator = (mu_x**2 + mu_y**2 + C1) * (var_x + var_y + C2)
    return float(np.mean(numerator / denominator))
