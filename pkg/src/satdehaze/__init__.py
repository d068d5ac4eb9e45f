"""Satellite image dehazing toolkit.

An inception-residual conditional GAN for single-image dehazing, plus the
machinery around it: atmospheric-scattering haze synthesis, adversarial +
L1 training with archived resumable state, PSNR/SSIM/FSIM evaluation, and
Grad-CAM heatmaps over generator layers.
"""

from .archive import (
    load_archive,
    load_discriminator_checkpoint,
    load_generator_checkpoint,
    save_archive,
    save_discriminator_checkpoint,
    save_generator_checkpoint,
)
from .data import (
    PairedDataset,
    generate_texture,
    load_haze1k,
    load_paired_dir,
    load_rice,
    write_synthetic_dataset,
)
from .discriminator import (
    DiscriminatorSpec,
    PatchDiscriminator,
    build_discriminator,
    discriminator_forward,
)
from .generator import (
    DehazeGenerator,
    GeneratorSpec,
    InceptionResidualBlock,
    build_generator,
    generator_forward,
)
from .gradcam import CamResult, colormap, grad_cam
from .haze import (
    HazeParams,
    Severity,
    compose_haze,
    invert_haze,
    sample_haze_params,
    transmission,
)
from .imaging import (
    ImageTensor,
    ValueRange,
    load_image,
    luminance,
    resize,
    save_image,
    to_signed,
    to_unit,
)
from .losses import (
    LossReport,
    bce_with_logits,
    discriminator_loss,
    gan_loss_for_generator,
    generator_loss,
    l1_loss,
)
from .metrics import MetricReport, evaluate_set, fsim, psnr, ssim
from .optim import AdamState, adam_update, init_adam
from .trainer import TrainConfig, TrainState, init_train_state, train, train_step

__version__ = "0.1.0"
