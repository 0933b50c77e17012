"""FIR estimation under the circular input convention.

The input is treated as one period of an N-periodic sequence (u_{-i} = u_{N-i}),
which makes the regression matrix circulant in its first column and the Gram
matrix Phi^T Phi a symmetric Toeplitz matrix of circular correlations.  On top
of that convention this module provides least squares, regularized least
squares with its posterior covariance, the Bayesian mean squared error matrix,
and an empirical-Bayes hyperparameter search for the kernel families.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.optimize

from . import linalg
from .kernels import InvalidHyperparameter, KernelSpec, SymMatrix, build_kernel


class OrderTooLarge(ValueError):
    """FIR order exceeds what the data record supports."""


class SingularRegressor(Exception):
    """The normal equations are singular (input not persistently exciting)."""


class SearchFailure(Exception):
    """No point of the hyperparameter search produced a usable objective."""


@dataclass(frozen=True)
class InputSequence:
    """One period of an input signal together with its declared energy budget."""

    values: np.ndarray
    energy: float

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise ValueError("input values must be a nonempty 1-D array")
        if not np.all(np.isfinite(v)):
            raise ValueError("input values must be finite")
        if not self.energy > 0:
            raise ValueError("energy must be positive")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "energy", float(self.energy))

    @property
    def n_samples(self) -> int:
        return self.values.size

    def power_mismatch(self) -> float:
        """|u^T u - energy| relative to the declared energy."""
        return abs(float(self.values @ self.values) - self.energy) / self.energy

    @classmethod
    def scaled_to_power(cls, values, energy: float) -> "InputSequence":
        """Rescale values so the realized energy equals the budget exactly."""
        v = np.asarray(values, dtype=float)
        ss = float(v @ v)
        if ss <= 0:
            raise ValueError("cannot scale an all-zero sequence to positive energy")
        return cls(v * np.sqrt(energy / ss), energy)


@dataclass(frozen=True)
class DataRecord:
    """An input period plus the measured outputs and the noise variance used."""

    u: InputSequence
    y: np.ndarray
    sigma2: float | None = None

    def __post_init__(self):
        y = np.array(self.y, dtype=float)
        if y.shape != (self.u.n_samples,):
            raise ValueError("y must have one sample per input sample")
        y.setflags(write=False)
        object.__setattr__(self, "y", y)
        if self.sigma2 is not None:
            if not self.sigma2 > 0:
                raise ValueError("sigma2 must be positive when given")
            object.__setattr__(self, "sigma2", float(self.sigma2))

    def to_json(self) -> dict:
        return {
            "u": self.u.values.tolist(),
            "y": self.y.tolist(),
            "energy": self.u.energy,
            "sigma2": self.sigma2,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "DataRecord":
        u = InputSequence(np.asarray(obj["u"], dtype=float), float(obj["energy"]))
        sigma2 = obj.get("sigma2")
        return cls(u, np.asarray(obj["y"], dtype=float), None if sigma2 is None else float(sigma2))


@dataclass(frozen=True)
class FirEstimate:
    theta: np.ndarray
    posterior_cov: SymMatrix | None
    method: str


def _values(u) -> np.ndarray:
    return u.values if isinstance(u, InputSequence) else np.asarray(u, dtype=float)


def build_circulant_regressor(u, n: int) -> np.ndarray:
    """N x n regression matrix with row t equal to (u_t, u_{t-1}, ..., u_{t-n+1}).

    Indices wrap modulo N, so column i is the input delayed circularly by i.
    """
    v = _values(u)
    N = v.size
    if n < 1:
        raise ValueError("FIR order n must be >= 1")
    if n > N:
        raise OrderTooLarge(f"FIR order {n} exceeds record length {N}")
    idx = (np.arange(N)[:, None] - np.arange(n)[None, :]) % N
    return v[idx]


def ls_estimate(record: DataRecord, n: int) -> FirEstimate:
    """Least squares FIR fit of order n (no prior)."""
    phi = build_circulant_regressor(record.u, n)
    gram = phi.T @ phi
    # rounding can carry a rank-deficient gram through the factorization
    if np.linalg.cond(gram) > 1.0 / np.finfo(float).eps:
        raise SingularRegressor("Phi^T Phi is singular")
    try:
        theta = linalg.solve(gram, phi.T @ record.y)
    except linalg.NotPositiveDefinite:
        raise SingularRegressor("Phi^T Phi is singular") from None
    return FirEstimate(theta, None, "LS")


def rls_estimate(record: DataRecord, P: SymMatrix, sigma2: float) -> FirEstimate:
    """Regularized least squares fit under prior covariance P and noise sigma2.

    theta = P Phi^T (Phi P Phi^T + sigma2 I)^{-1} y, with posterior covariance
    P - P Phi^T (Phi P Phi^T + sigma2 I)^{-1} Phi P.
    """
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    Pm = linalg.as_sym(P).a
    n = Pm.shape[0]
    phi = build_circulant_regressor(record.u, n)
    N = phi.shape[0]
    f = phi @ Pm @ phi.T + sigma2 * np.eye(N)
    sol = linalg.solve(f, np.column_stack([record.y, phi @ Pm]))
    theta = Pm @ phi.T @ sol[:, 0]
    post = Pm - Pm @ phi.T @ sol[:, 1:]
    return FirEstimate(theta, SymMatrix(post), "RLS")


def bayesian_mse(u, P: SymMatrix, sigma2: float, n: int | None = None) -> SymMatrix:
    """Bayesian MSE matrix sigma2 * (Phi^T Phi + sigma2 P^{-1})^{-1}.

    Coincides with the posterior covariance of rls_estimate; computed in the
    P-form so no explicit inverse of P is needed.  For u = 0 it reduces to the
    prior covariance P.
    """
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    Pm = linalg.as_sym(P).a
    if n is None:
        n = Pm.shape[0]
    if Pm.shape[0] != n:
        raise ValueError("P must be n x n")
    phi = build_circulant_regressor(u, n)
    N = phi.shape[0]
    f = phi @ Pm @ phi.T + sigma2 * np.eye(N)
    return SymMatrix(Pm - Pm @ phi.T @ linalg.solve(f, phi @ Pm))


def eb_objective(spec: KernelSpec, y, u, sigma2: float) -> float:
    """Marginal-likelihood objective y^T F^{-1} y + log det F, F = Phi P Phi^T + sigma2 I."""
    y = np.asarray(y, dtype=float)
    phi = build_circulant_regressor(u, spec.n)
    if y.shape != (phi.shape[0],):
        raise ValueError("y must have one sample per input sample")
    Pm = build_kernel(spec).a
    f = phi @ Pm @ phi.T + sigma2 * np.eye(phi.shape[0])
    L = linalg.cholesky(f, jitter=True)
    half = scipy.linalg.solve_triangular(L, y, lower=True)
    return float(half @ half + 2.0 * np.sum(np.log(np.diag(L))))


_DEFAULT_GRID = {
    "c": np.logspace(-4, 4, 17),
    "lam": np.linspace(0.5, 0.99, 8),
    "rho": np.linspace(-0.95, 0.95, 9),
}

_SEARCH_KEYS = {"Ridge": ("c",), "DI": ("c", "lam"), "TC": ("c", "lam"), "DC": ("c", "lam", "rho")}


def _clip_params(family: str, x: np.ndarray) -> dict:
    # search coordinates: log10(c), lam, rho -- clipped into the open box
    p = {"c": float(10.0 ** np.clip(x[0], -12, 12))}
    if family in ("DI", "TC", "DC"):
        p["lam"] = float(np.clip(x[1], 1e-8, 1.0))
    if family == "DC":
        p["rho"] = float(np.clip(x[2], -0.999, 0.999))
    return p


def fit_hyperparameters(
    y,
    u,
    n: int,
    sigma2: float,
    family: str = "TC",
    grid: dict | None = None,
    refine: bool = True,
) -> KernelSpec:
    """Empirical-Bayes kernel fit: coarse grid scan, then Nelder-Mead refinement.

    The grid is log-spaced in c and linear in lam (and rho for DC); the best
    grid point seeds a Nelder-Mead polish whose trial points are clipped back
    into the admissible box.  Probes where the objective cannot be evaluated
    are skipped; if every probe fails, SearchFailure is raised.
    """
    if family not in _SEARCH_KEYS:
        raise InvalidHyperparameter(f"family {family!r} is not searchable")
    keys = _SEARCH_KEYS[family]
    g = dict(_DEFAULT_GRID)
    if grid:
        g.update({k: np.atleast_1d(np.asarray(v, dtype=float)) for k, v in grid.items()})
    axes = [np.log10(g["c"])] + [g[k] for k in keys[1:]]
    mesh = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)

    def objective(x):
        try:
            spec = KernelSpec(family, n, _clip_params(family, x))
            return eb_objective(spec, y, u, sigma2)
        except (linalg.NotPositiveDefinite, InvalidHyperparameter):
            return np.inf

    values = np.array([objective(x) for x in mesh])
    if not np.any(np.isfinite(values)):
        raise SearchFailure("no hyperparameter probe produced a finite objective")
    x_best = mesh[int(np.argmin(values))]
    if refine:
        res = scipy.optimize.minimize(
            objective,
            x_best,
            method="Nelder-Mead",
            options={"maxiter": 200 * len(keys), "xatol": 1e-4, "fatol": 1e-9},
        )
        if np.isfinite(res.fun) and res.fun <= float(np.min(values)):
            x_best = res.x
    return KernelSpec(family, n, _clip_params(family, x_best))


def estimate_noise_variance(y, u, m: int | None = None) -> float:
    """Noise variance from the residual of an order-m least squares fit.

    sigma2_hat = ||y - Phi_m theta_m||^2 / (N - m).  The default order is
    floor(N/2); callers with a known model order should cap m at it.  At least
    two degrees of freedom are required, so m <= N - 2.
    """
    y = np.asarray(y, dtype=float)
    v = _values(u)
    N = v.size
    if m is None:
        m = N // 2
    if not 1 <= m <= N - 2:
        raise OrderTooLarge(f"residual fit order m={m} needs 1 <= m <= N-2 (N={N})")
    record = DataRecord(InputSequence(v, max(float(v @ v), np.finfo(float).tiny)), y)
    est = ls_estimate(record, m)
    resid = y - build_circulant_regressor(v, m) @ est.theta
    return float(resid @ resid) / (N - m)
