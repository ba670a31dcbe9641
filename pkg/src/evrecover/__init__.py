"""Event-enhanced image recovery: event simulation, the double-integral
degeneration model, convolutional ISTA sparse coding with pixel-shuffle
super-resolution, EDI baseline, video generation and PSNR/SSIM."""

__version__ = "0.1.0"

from .events import (Event, EventError, EventFrameStack, EventStream, bin_events,  # noqa: F401
                     normalize_stream, reverse_before, split_at)
from .degeneration import (CameraModel, DownsampleOp, IntegralField, ModelError,  # noqa: F401
                           apply_forward, double_integral, double_integral_by_reversal,
                           downsample, inner_sum)
from .sim import (BlurredFrame, FrameSequence, degrade, inject_noise_events,  # noqa: F401
                  simulate_events, synthesize_blur)
from .sparse import (KernelBank, SolverConfig, dct_bank, dict_adjoint, dict_apply,  # noqa: F401
                     estimate_lipschitz, identity_bank, ista_solve, lasso_objective,
                     pixel_shuffle, pixel_unshuffle, recover_hr, replicate_hr_bank,
                     soft_threshold)
from .recon import edi_reconstruct, esl_reconstruct, generate_video  # noqa: F401
from .metrics import psnr, ssim  # noqa: F401
