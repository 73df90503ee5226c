"""Low-pass filtering of a feature map in the DCT domain.

Run: python3 demos/01_spectral_filtering.py
"""
import numpy as np

from freqsub.spectral import build_mask, dct2, idct2, lowpass

rng = np.random.default_rng(0)

# a smooth ramp plus pixel noise, one 10x10 channel
yy, xx = np.mgrid[0:10, 0:10]
smooth = np.cos(np.pi * yy / 10) + 0.5 * np.sin(np.pi * xx / 10)
x = (smooth + 0.4 * rng.normal(size=smooth.shape))[None]

mask = build_mask(10, 10, 0.3)
print(f"mask keeps {mask.kept} of {mask.bits.size} coefficients")
print(mask.bits.astype(int))

f = dct2(x)
print(f"energy in pixels {np.sum(x ** 2):.4f}, in coefficients {np.sum(f ** 2):.4f}")
print(f"round-trip error {np.max(np.abs(idct2(f) - x)):.2e}")

y = lowpass(x, 0.3)
err_before = np.sqrt(np.mean((x[0] - smooth) ** 2))
err_after = np.sqrt(np.mean((y[0] - smooth) ** 2))
print(f"rms distance to the clean ramp: {err_before:.3f} noisy, {err_after:.3f} filtered")
