import numpy as np
import pytest

from splatreg import GaussianCloud
from splatreg.sh import SH_C0


def random_cloud(n, seed, extent=1.0, sh_degree=3, dc_range=(0.1, 0.9),
                 band_sigma=0.06, opacity_range=(0.4, 0.95)) -> GaussianCloud:
    """Seeded cloud for tests; colors stay inside [0, 1] by construction."""
    rng = np.random.default_rng(seed)
    mu = rng.uniform(-extent, extent, (n, 3))
    q = rng.normal(size=(n, 4))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    log_scale = np.log(rng.uniform(0.05, 0.18, (n, 3)) * extent)
    op = rng.uniform(*opacity_range, n)
    k = (sh_degree + 1) ** 2
    sh = np.zeros((n, 3, k))
    sh[:, :, 0] = (rng.uniform(*dc_range, (n, 3)) - 0.5) / SH_C0
    if k > 1:
        sh[:, :, 1:] = rng.normal(0.0, band_sigma, (n, 3, k - 1))
    return GaussianCloud(mu=mu, rot=q, log_scale=log_scale,
                         opacity_logit=np.log(op / (1 - op)), sh=sh,
                         sh_degree=sh_degree)


def random_rotation(rng) -> np.ndarray:
    from splatreg.sim3 import quat_normalize, quat_to_matrix

    return quat_to_matrix(quat_normalize(rng.normal(size=4)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
