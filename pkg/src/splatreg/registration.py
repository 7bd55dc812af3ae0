"""Estimator-style wrappers over the registration stages.

These follow the scikit-learn convention (constructor parameters mirrored as
attributes, fit returning self, fitted state in trailing-underscore
attributes, get_params/set_params via BaseEstimator) so the pipeline composes
with that ecosystem's tooling.
"""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .cloud import GaussianCloud, transform_cloud
from .coarse import DEPTH_FLOOR, coarse_register
from .matching import best_pair
from .merge import merge
from .refine import RefineConfig, refine, refinement_views_for
from .renderer import MASK_ALPHA
from .validation import (
    check_bundle,
    check_cloud,
    check_embeddings,
    check_sim3,
    check_view,
    check_views,
)


class CoarseRegistration(BaseEstimator):
    """Estimates the initial similarity transform from a foundation bundle."""

    def __init__(self, depth_floor: float = DEPTH_FLOOR, alpha_gate: float = MASK_ALPHA):
        self.depth_floor = depth_floor
        self.alpha_gate = alpha_gate

    def fit(self, g1, g2, view1, view2, bundle):
        est = coarse_register(
            check_cloud(g1, "g1"), check_cloud(g2, "g2"),
            check_view(view1, "view1"), check_view(view2, "view2"),
            check_bundle(bundle),
            depth_floor=self.depth_floor, alpha_gate=self.alpha_gate,
        )
        self.estimate_ = est
        self.transform_ = est.transform
        self.scale_ratio_ = est.scale_ratio
        self.diagnostics_ = est.diagnostics
        return self

    def transform(self, cloud: GaussianCloud) -> GaussianCloud:
        check_is_fitted(self, "transform_")
        return transform_cloud(check_cloud(cloud), self.transform_)


class PhotometricRefinement(BaseEstimator):
    """Refines a similarity transform by photometric gradient descent."""

    def __init__(self, max_iters: int = 200, lr_rot: float = 1e-3,
                 lr_trans: float | None = None, lr_logscale: float = 1e-3,
                 views_per_iter: int = 4, convergence_tol: float = 1e-7,
                 seed: int = 0, freeze_sh: bool = True):
        self.max_iters = max_iters
        self.lr_rot = lr_rot
        self.lr_trans = lr_trans
        self.lr_logscale = lr_logscale
        self.views_per_iter = views_per_iter
        self.convergence_tol = convergence_tol
        self.seed = seed
        self.freeze_sh = freeze_sh

    def _config(self) -> RefineConfig:
        return RefineConfig(
            max_iters=self.max_iters, lr_rot=self.lr_rot, lr_trans=self.lr_trans,
            lr_logscale=self.lr_logscale, views_per_iter=self.views_per_iter,
            convergence_tol=self.convergence_tol, seed=self.seed,
            freeze_sh=self.freeze_sh,
        )

    def fit(self, g1, g2, init_transform, views):
        result = refine(
            check_cloud(g1, "g1"), check_cloud(g2, "g2"),
            check_sim3(init_transform, "init_transform"),
            check_views(views), self._config(),
        )
        self.result_ = result
        self.transform_ = result.transform
        self.loss_history_ = result.loss_history
        self.converged_ = result.converged
        return self

    def transform(self, cloud: GaussianCloud) -> GaussianCloud:
        check_is_fitted(self, "transform_")
        return transform_cloud(check_cloud(cloud), self.transform_)


class SplatRegistrationPipeline(BaseEstimator):
    """Match -> coarse -> refine, producing one transform aligning g2 to g1."""

    def __init__(self, pool_views: int = 8, max_iters: int = 200,
                 lr_rot: float = 1e-3, lr_trans: float | None = None,
                 lr_logscale: float = 1e-3, views_per_iter: int = 4,
                 convergence_tol: float = 1e-7, seed: int = 0,
                 freeze_sh: bool = True, depth_floor: float = DEPTH_FLOOR,
                 alpha_gate: float = MASK_ALPHA):
        self.pool_views = pool_views
        self.max_iters = max_iters
        self.lr_rot = lr_rot
        self.lr_trans = lr_trans
        self.lr_logscale = lr_logscale
        self.views_per_iter = views_per_iter
        self.convergence_tol = convergence_tol
        self.seed = seed
        self.freeze_sh = freeze_sh
        self.depth_floor = depth_floor
        self.alpha_gate = alpha_gate

    def fit(self, g1, g2, bundle, embeddings1, embeddings2, views1, views2):
        g1 = check_cloud(g1, "g1")
        g2 = check_cloud(g2, "g2")
        e1 = check_embeddings(embeddings1, "embeddings1")
        e2 = check_embeddings(embeddings2, "embeddings2")
        views1 = {v.view_id: v for v in check_views(views1, "views1")}
        views2 = {v.view_id: v for v in check_views(views2, "views2")}

        id1, id2, score = best_pair(e1, e2)
        if id1 not in views1 or id2 not in views2:
            raise ValueError(f"matched pair ({id1!r}, {id2!r}) missing from the view lists")
        self.pair_ = (id1, id2)
        self.pair_score_ = score
        c1, c2 = views1[id1], views2[id2]

        coarse = CoarseRegistration(self.depth_floor, self.alpha_gate)
        coarse.fit(g1, g2, c1, c2, bundle)
        self.coarse_ = coarse.estimate_

        pool = refinement_views_for(c1, c2, coarse.transform_, self.pool_views,
                                    seed=self.seed)
        refiner = PhotometricRefinement(
            max_iters=self.max_iters, lr_rot=self.lr_rot, lr_trans=self.lr_trans,
            lr_logscale=self.lr_logscale, views_per_iter=self.views_per_iter,
            convergence_tol=self.convergence_tol, seed=self.seed,
            freeze_sh=self.freeze_sh,
        )
        refiner.fit(g1, g2, coarse.transform_, pool)
        self.refine_result_ = refiner.result_
        self.transform_ = refiner.transform_
        self.loss_history_ = refiner.loss_history_
        return self

    def transform(self, cloud: GaussianCloud) -> GaussianCloud:
        check_is_fitted(self, "transform_")
        return transform_cloud(check_cloud(cloud), self.transform_)

    def fuse(self, g1: GaussianCloud, g2: GaussianCloud) -> GaussianCloud:
        check_is_fitted(self, "transform_")
        return merge(check_cloud(g1, "g1"), check_cloud(g2, "g2"), self.transform_)
