"""Parameter containers and deterministic algebra for the
dimension-reduced spatial multivariate probit model.

The latent field for species j at site i is

    Z_ij = (B x_i)_j + (Lambda w_i)_j + eps_ij,   eps_ij ~ N(0, sigma2_eps)

with presence recorded when Z_ij >= 0. The loading matrix ``Lambda``
(S x r, r << S) induces the low-rank species covariance
``Sigma* = Lambda Lambda' + sigma2_eps I`` whose correlation matrix H
carries all between-species dependence; the factor vectors w_i are
either i.i.d. standard normal across sites (nonspatial) or realizations
of r independent Gaussian processes with a shared exponential
correlation ``exp(-phi * distance)`` (spatial).

Identifiability: the probit likelihood only determines Sigma* up to a
per-species scale, so ``sigma2_eps`` is pinned to 1 during sampling and
all odds-ratio inputs are reported on the correlation-standardized
scale (means divided by sqrt(Sigma*_jj)). The top r x r block of Lambda
is lower-triangular with a positive diagonal, which removes rotational
slack in Lambda Lambda' without changing Sigma*.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, StructuralError
from .prob_core import BvnParams

__all__ = [
    "PresenceData",
    "ModelParams",
    "SpeciesCovariance",
    "linear_predictor",
    "assemble_sigma_star",
    "pair_latent_params",
    "exp_covariance",
    "exp_covariance_matrix",
    "pairwise_distances",
    "default_phi",
]


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class PresenceData:
    """Sites-by-species binary observations with coordinates and covariates.

    ``Y`` is n x S with entries in {0, 1}; ``X`` is the n x p design
    matrix whose first column is the intercept; ``coords`` are planar
    (already projected) site locations, required distinct.
    """

    Y: np.ndarray
    X: np.ndarray
    coords: np.ndarray
    species_names: tuple[str, ...] = ()
    site_ids: tuple[str, ...] = ()

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=float)
        X = _readonly(self.X)
        coords = _readonly(self.coords)
        if Y.ndim != 2:
            raise StructuralError(f"Y must be 2-d, got shape {Y.shape}")
        if not np.isin(Y, (0.0, 1.0)).all():
            raise DomainError("Y entries must all be 0 or 1")
        n, S = Y.shape
        if X.ndim != 2 or X.shape[0] != n:
            raise StructuralError(f"X must be {n} x p, got {X.shape}")
        if not np.all(np.isfinite(X)):
            raise DomainError("covariates must be finite")
        if coords.shape != (n, 2):
            raise StructuralError(f"coords must be {n} x 2, got {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise DomainError("coordinates must be finite")
        uniq = np.unique(coords, axis=0)
        if uniq.shape[0] != n:
            raise DomainError("duplicated site coordinates are not allowed")
        Yro = _readonly(Y)
        object.__setattr__(self, "Y", Yro)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "coords", coords)
        if not self.species_names:
            object.__setattr__(
                self, "species_names", tuple(f"sp{j + 1}" for j in range(S))
            )
        elif len(self.species_names) != S:
            raise StructuralError("species_names length must equal species count")
        if not self.site_ids:
            object.__setattr__(self, "site_ids", tuple(f"site{i + 1}" for i in range(n)))
        elif len(self.site_ids) != n:
            raise StructuralError("site_ids length must equal site count")

    @property
    def n(self) -> int:
        return self.Y.shape[0]

    @property
    def S(self) -> int:
        return self.Y.shape[1]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def species_index(self, name: str) -> int:
        try:
            return self.species_names.index(name)
        except ValueError:
            raise StructuralError(f"unknown species {name!r}") from None


def _check_lambda_constraint(Lambda: np.ndarray) -> None:
    S, r = Lambda.shape
    top = min(S, r)
    for j in range(top):
        if np.any(Lambda[j, j + 1:] != 0.0):
            raise StructuralError(
                "Lambda must be lower-triangular in its top r x r block"
            )
        if Lambda[j, j] <= 0.0:
            raise StructuralError("Lambda diagonal entries must be positive")


@dataclass(frozen=True)
class ModelParams:
    """One parameter state of the latent-factor probit model.

    ``W`` holds realized factor values at the data sites and may be
    ``None`` when the factors have not been realized yet (e.g. as input
    to the forward simulator).
    """

    B: np.ndarray
    Lambda: np.ndarray
    W: np.ndarray | None = None
    sigma2_eps: float = 1.0
    phi: float = 1.0

    def __post_init__(self):
        B = _readonly(self.B)
        Lambda = _readonly(self.Lambda)
        if B.ndim != 2 or Lambda.ndim != 2:
            raise StructuralError("B and Lambda must be matrices")
        if Lambda.shape[0] != B.shape[0]:
            raise StructuralError(
                f"B has {B.shape[0]} species but Lambda has {Lambda.shape[0]}"
            )
        _check_lambda_constraint(Lambda)
        if not (self.sigma2_eps > 0 and np.isfinite(self.sigma2_eps)):
            raise DomainError(f"sigma2_eps must be positive, got {self.sigma2_eps}")
        if not (self.phi > 0 and np.isfinite(self.phi)):
            raise DomainError(f"phi must be positive, got {self.phi}")
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "Lambda", Lambda)
        if self.W is not None:
            W = _readonly(self.W)
            if W.ndim != 2 or W.shape[1] != Lambda.shape[1]:
                raise StructuralError(f"W must be n x r, got {W.shape}")
            object.__setattr__(self, "W", W)

    @property
    def S(self) -> int:
        return self.B.shape[0]

    @property
    def p(self) -> int:
        return self.B.shape[1]

    @property
    def r(self) -> int:
        return self.Lambda.shape[1]

    @property
    def covariance_param_count(self) -> int:
        """Free parameters of the low-rank species covariance: S*r + 1."""
        return self.S * self.r + 1


@dataclass(frozen=True)
class SpeciesCovariance:
    """Low-rank species covariance and its correlation matrix."""

    Sigma_star: np.ndarray
    H: np.ndarray = field(repr=False)

    def __post_init__(self):
        Sig = _readonly(self.Sigma_star)
        H = _readonly(self.H)
        if Sig.shape != H.shape or Sig.ndim != 2 or Sig.shape[0] != Sig.shape[1]:
            raise StructuralError("Sigma_star and H must be square and congruent")
        if not np.allclose(np.diag(H), 1.0, atol=1e-12):
            raise StructuralError("H must have unit diagonal")
        object.__setattr__(self, "Sigma_star", Sig)
        object.__setattr__(self, "H", H)

    @property
    def sd(self) -> np.ndarray:
        return np.sqrt(np.diag(self.Sigma_star))


def linear_predictor(params: ModelParams, X: np.ndarray) -> np.ndarray:
    """Latent mean matrix: fixed effects X B' plus factor effects W Lambda'."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != params.p:
        raise StructuralError(
            f"X must have {params.p} columns to match B, got shape {X.shape}"
        )
    fixed = X @ params.B.T
    if params.r == 0:
        return fixed
    if params.W is None:
        raise StructuralError("params.W is required when r > 0")
    if params.W.shape[0] != X.shape[0]:
        raise StructuralError(
            f"W has {params.W.shape[0]} rows but X has {X.shape[0]}"
        )
    return fixed + params.W @ params.Lambda.T


def assemble_sigma_star(Lambda: np.ndarray, sigma2_eps: float) -> SpeciesCovariance:
    """Sigma* = Lambda Lambda' + sigma2_eps I and its correlation H."""
    Lambda = np.asarray(Lambda, dtype=float)
    if Lambda.ndim != 2:
        raise StructuralError("Lambda must be a matrix")
    if not (sigma2_eps > 0 and np.isfinite(sigma2_eps)):
        raise DomainError(f"sigma2_eps must be positive, got {sigma2_eps}")
    S = Lambda.shape[0]
    Sig = Lambda @ Lambda.T + sigma2_eps * np.eye(S)
    inv_sd = 1.0 / np.sqrt(np.diag(Sig))
    H = Sig * inv_sd[:, None] * inv_sd[None, :]
    np.fill_diagonal(H, 1.0)
    return SpeciesCovariance(Sigma_star=Sig, H=H)


def pair_latent_params(
    params: ModelParams,
    x: np.ndarray,
    w: np.ndarray | None,
    j: int,
    jp: int,
    mode: str = "marginal",
) -> BvnParams:
    """Latent bivariate-normal inputs for a species pair at one location.

    mode="marginal"
        Factors and noise are both integrated out: the latent pair is
        centered at (B x)_j / sd_j with sd_j = sqrt(Sigma*_jj), and its
        correlation is H_jjp. This is the grid/prediction route, where
        no factor realization exists.
    mode="conditional"
        Conditions on a realized factor vector ``w``: the remaining
        noise is independent across species, so the means are
        ((B x)_j + (Lambda w)_j) / sqrt(sigma2_eps) and the residual
        correlation is exactly 0 - joint cells factor into products of
        univariate normal CDFs.
    """
    S = params.S
    if not (0 <= j < S and 0 <= jp < S):
        raise StructuralError(f"species indices ({j}, {jp}) out of range for S={S}")
    if j == jp:
        raise StructuralError("species pair must be distinct")
    x = np.asarray(x, dtype=float)
    if x.shape != (params.p,):
        raise StructuralError(f"x must have shape ({params.p},), got {x.shape}")
    fixed = params.B @ x
    if mode == "marginal":
        cov = assemble_sigma_star(params.Lambda, params.sigma2_eps)
        sd = cov.sd
        return BvnParams(
            mu1=fixed[j] / sd[j], mu2=fixed[jp] / sd[jp], rho=float(cov.H[j, jp])
        )
    if mode == "conditional":
        if w is None:
            raise StructuralError("conditional mode requires a factor vector w")
        w = np.asarray(w, dtype=float)
        if w.shape != (params.r,):
            raise StructuralError(f"w must have shape ({params.r},), got {w.shape}")
        sd_eps = float(np.sqrt(params.sigma2_eps))
        mu = fixed + params.Lambda @ w
        return BvnParams(mu1=mu[j] / sd_eps, mu2=mu[jp] / sd_eps, rho=0.0)
    raise StructuralError(f"unknown mode {mode!r}; expected 'marginal' or 'conditional'")


def exp_covariance(dist, phi: float):
    """Exponential spatial correlation exp(-phi * dist)."""
    if not (phi > 0 and np.isfinite(phi)):
        raise DomainError(f"phi must be positive, got {phi}")
    d = np.asarray(dist, dtype=float)
    if np.any(d < 0) or np.any(np.isnan(d)):
        raise DomainError("distances must be nonnegative")
    out = np.exp(-phi * d)
    return float(out) if out.ndim == 0 else out


def pairwise_distances(a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
    """Euclidean distance matrix between planar coordinate sets."""
    a = np.asarray(a, dtype=float)
    b = a if b is None else np.asarray(b, dtype=float)
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=-1))


def exp_covariance_matrix(
    coords: np.ndarray, phi: float, other: np.ndarray | None = None
) -> np.ndarray:
    """Exponential correlation matrix over a coordinate set (or cross-set)."""
    return exp_covariance(pairwise_distances(coords, other), phi)


def default_phi(coords: np.ndarray, target_corr: float = 0.05) -> float:
    """Decay giving effective range (corr = target) at half the max distance."""
    d = pairwise_distances(coords)
    dmax = float(d.max())
    if dmax <= 0:
        raise DomainError("coordinates are all coincident")
    return -float(np.log(target_corr)) / (0.5 * dmax)
