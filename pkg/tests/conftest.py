import numpy as np
from hypothesis import HealthCheck, settings

# numeric property tests have uneven per-example cost; wall-clock deadlines
# only add flakiness there
settings.register_profile(
    "numeric", deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("numeric")


def random_pd_matrix(rng: np.random.Generator, dim: int) -> np.ndarray:
    """Well-conditioned random positive definite matrix."""
    a = rng.standard_normal((dim, dim))
    return a @ a.T + dim * np.eye(dim)
