"""Blind deconvolution with diffusion EM: python bindings over the C++ core."""

from ._core import (
    DenoiserNet,
    DiffemError,
    DiffusionSchedule,
    Prior,
    circular_convolve,
    degrade,
    diffusion_em,
    fast_diffusion_em,
    fourier_data_solve,
    gaussian_prior,
    hqs_mstep,
    init_kernel,
    kernel_mse,
    make_schedule,
    prior_sample,
    project_simplex,
    psnr,
    reblur_loss,
    sample_motion_kernel,
    sample_nonblind,
    texture_prior,
    train_denoiser,
)

__all__ = [
    "DenoiserNet",
    "DiffemError",
    "DiffusionSchedule",
    "Prior",
    "circular_convolve",
    "degrade",
    "diffusion_em",
    "fast_diffusion_em",
    "fourier_data_solve",
    "gaussian_prior",
    "hqs_mstep",
    "init_kernel",
    "kernel_mse",
    "make_schedule",
    "prior_sample",
    "project_simplex",
    "psnr",
    "reblur_loss",
    "sample_motion_kernel",
    "sample_nonblind",
    "texture_prior",
    "train_denoiser",
]
