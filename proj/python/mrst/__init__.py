"""Two-stage GAN pipeline for multi-defect fluorescence image restoration.

Images are 2-D float64 numpy arrays in the canonical [-1, 1] range. Heavy
lifting happens in the C++ extension; this package only re-exports it.
"""

from ._mrst import (
    apply_defect,
    augment,
    checkpoint_info,
    default_config,
    evaluate,
    gradient_suite,
    make_phantom,
    psnr,
    read_pgm,
    restore,
    restore_array,
    run_ablation,
    ssim,
    synth_corpus,
    synthesize_defect_array,
    train_cin,
    train_restore,
    write_pgm,
)

__all__ = [
    "apply_defect",
    "augment",
    "checkpoint_info",
    "default_config",
    "evaluate",
    "gradient_suite",
    "make_phantom",
    "psnr",
    "read_pgm",
    "restore",
    "restore_array",
    "run_ablation",
    "ssim",
    "synth_corpus",
    "synthesize_defect_array",
    "train_cin",
    "train_restore",
    "write_pgm",
]

__version__ = "0.1.0"
