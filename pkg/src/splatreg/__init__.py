"""splatreg: registration and fusion of 3D Gaussian splatting models.

Aligns independently built splat models into one frame: a coarse similarity
transform is composed from foundation-model outputs (relative pose plus a
confidence-weighted depth-ratio scale estimate), then refined by gradient
descent on a masked photometric loss through a differentiable rasterizer.
"""

from .camera import CameraView, interpolate_views, load_views, look_at, save_views, view_through
from .cloud import Gaussian, GaussianCloud, concatenate, transform_cloud
from .coarse import (
    CoarseEstimate,
    InsufficientDepthError,
    coarse_register,
    compose_initial_transform,
    estimate_scale,
)
from .interchange import (
    EmbeddingSet,
    FoundationBundle,
    SchemaError,
    read_bundle,
    read_embeddings,
    write_bundle,
    write_embeddings,
)
from .matching import best_pair, render_candidate_views, subsample_views
from .merge import FusionEdge, FusionPlan, fuse_many, merge
from .metrics import icp_umeyama, psnr, ssim, umeyama_fit
from .ply import PlyFormatError, load_ply, save_ply
from .refine import (
    RefineConfig,
    RefinementError,
    RefineResult,
    refine,
    refinement_views_for,
    select_refinement_views,
)
from .registration import CoarseRegistration, PhotometricRefinement, SplatRegistrationPipeline
from .renderer import NoOverlapError, RenderOutput, SplatGradients, render, render_pair_loss_grad
from .sh import sh_evaluate, sh_rotation_matrices
from .sim3 import Sim3, rotation_angle_between
from .synth import (
    SplitTruth,
    make_ring_views,
    make_scene,
    make_synthetic_bundle,
    perturb_sim3,
    random_sim3,
    split_scene,
)

__version__ = "0.1.0"

__all__ = [
    "CameraView", "CoarseEstimate", "CoarseRegistration", "EmbeddingSet",
    "FoundationBundle", "FusionEdge", "FusionPlan", "Gaussian", "GaussianCloud",
    "InsufficientDepthError", "NoOverlapError", "PhotometricRefinement",
    "PlyFormatError", "RefineConfig", "RefineResult", "RefinementError",
    "RenderOutput", "SchemaError", "Sim3", "SplatGradients",
    "SplatRegistrationPipeline", "SplitTruth", "best_pair", "coarse_register",
    "compose_initial_transform", "concatenate", "estimate_scale", "fuse_many",
    "icp_umeyama", "interpolate_views", "load_ply", "load_views", "look_at",
    "make_ring_views", "make_scene", "make_synthetic_bundle", "merge",
    "perturb_sim3", "psnr", "random_sim3", "read_bundle", "read_embeddings",
    "refine", "refinement_views_for", "render", "render_candidate_views",
    "render_pair_loss_grad", "rotation_angle_between", "save_ply", "save_views",
    "select_refinement_views", "sh_evaluate", "sh_rotation_matrices",
    "split_scene", "ssim", "subsample_views", "transform_cloud", "umeyama_fit",
    "view_through", "write_bundle", "write_embeddings",
]
