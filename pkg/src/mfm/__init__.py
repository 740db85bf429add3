"""Masked frequency modeling on toy images, built on a from-scratch 2D FFT."""

from mfm.loss import LossConfig, TargetArea, masked_freq_loss, masked_freq_loss_grad, spatial_loss
from mfm.masking import (FrequencyMask, MaskConfig, MaskKind, MaskShape, build_mask, corrupt_image,
                         decompose, sample_filter)
from mfm.spectral import dft2, fftshift, idft2, ifftshift, log_power_map, reference_dft2

__version__ = "0.1.0"
