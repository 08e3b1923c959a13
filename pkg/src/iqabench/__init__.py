"""Full-reference image-quality workbench for denoising evaluation."""

from .blockmatch import BlockSpec, MatchGroup, block_msd, dissimilarity_map, group_match
from .dataset import DatasetManifest, ReferenceEntry, build_dataset, load_manifest, validate_manifest
from .denoise import DenoiseParams, GroupSpectrum, bm3d_ht, denoise_sweep, hard_threshold
from .images import ImageFormatError, NoiseSpec, add_awgn, load_image, save_image
from .kernels import backend_name
from .metrics import (
    DsiParams,
    MetricValue,
    calibrate_dsi_factor,
    dsi,
    msddm,
    psnr,
    ssim,
    wpsnr,
)
from .stats import ConstantInputError, EvaluationTable, evaluate, scatter_export, srocc
from .subjective import (
    MosTable,
    ScoreTable,
    VoteLog,
    VoteRecord,
    observer_scores,
    schedule_pairs,
    screen_and_mos,
)

__version__ = "0.1.0"
