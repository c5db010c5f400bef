"""Gibbs sampler for the dimension-reduced latent-factor probit model.

One sweep updates, in fixed order: the latent matrix Z by truncated
normal draws consistent with the observed presences, the coefficient
rows of B from their Gaussian full conditionals, the free entries of
Lambda column by column (diagonal entries positive-truncated), and the
factor field W - either site-by-site (nonspatial) or jointly per factor
across sites under the exponential-correlation Gaussian-process prior
(spatial). The idiosyncratic variance is fixed at 1 for identifiability;
an optional discrete grid move updates the spatial decay phi.

Priors: B entries N(0, prior_var_B); free Lambda entries
N(0, prior_var_Lambda), diagonal entries truncated to (0, inf). The
update order never affects the invariant distribution but is pinned for
reproducibility: a seed determines every draw.
"""

from __future__ import annotations

import hashlib
import json
import os
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from scipy.special import ndtri

from .errors import DomainError, NumericalError, StructuralError
from .model import (
    ModelParams,
    PresenceData,
    assemble_sigma_star,
    default_phi,
    exp_covariance,
    pairwise_distances,
)
from .prob_core import sample_truncated_normal

__all__ = [
    "ChainConfig",
    "ChainState",
    "PosteriorDraws",
    "init_chain",
    "update_Z",
    "update_B",
    "update_Lambda",
    "update_W",
    "run",
    "save_checkpoint",
    "load_checkpoint",
    "export_draws",
    "load_draws",
    "config_hash",
]

_DRAWS_FORMAT = "jsdm-odds-draws-v1"
_CHECKPOINT_FORMAT = "jsdm-odds-checkpoint-v1"


@dataclass(frozen=True)
class ChainConfig:
    """Run-length, model-size and prior settings for one chain."""

    iterations: int = 10_000
    burn_in: int = 5_000
    thin: int = 1
    r: int = 3
    spatial: bool = True
    phi: float | None = None
    phi_grid: tuple[float, ...] | None = None
    prior_var_B: float = 100.0
    prior_var_Lambda: float = 1.0
    seed: int = 0
    checkpoint_path: str | None = None

    def __post_init__(self):
        if self.iterations <= 0 or self.burn_in < 0 or self.burn_in >= self.iterations:
            raise DomainError(
                f"need 0 <= burn_in < iterations, got {self.burn_in}, {self.iterations}"
            )
        if self.thin < 1:
            raise DomainError(f"thin must be >= 1, got {self.thin}")
        if self.r < 1:
            raise DomainError(f"factor count r must be >= 1, got {self.r}")
        if self.prior_var_B <= 0 or self.prior_var_Lambda <= 0:
            raise DomainError("prior variances must be positive")
        if self.phi is not None and self.phi <= 0:
            raise DomainError(f"phi must be positive, got {self.phi}")
        if self.phi_grid is not None:
            grid = tuple(float(p) for p in self.phi_grid)
            if len(grid) == 0 or len(grid) > 10 or any(p <= 0 for p in grid):
                raise DomainError("phi_grid must hold 1-10 positive candidates")
            object.__setattr__(self, "phi_grid", grid)

    def n_stored(self) -> int:
        return (self.iterations - self.burn_in + self.thin - 1) // self.thin


@dataclass
class ChainState:
    """Mutable sampler state; arrays are owned and updated in place."""

    Z: np.ndarray
    B: np.ndarray
    Lambda: np.ndarray
    W: np.ndarray
    phi: float
    rng: np.random.Generator
    iteration: int = 0
    sigma2_eps: float = 1.0


def config_hash(cfg: ChainConfig | dict) -> str:
    d = asdict(cfg) if isinstance(cfg, ChainConfig) else dict(cfg)
    blob = json.dumps(d, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def cholesky_with_jitter(M: np.ndarray, what: str = "matrix") -> np.ndarray:
    """Lower Cholesky factor, retrying with escalating diagonal jitter."""
    scale = float(np.mean(np.diag(M))) or 1.0
    for jitter in (0.0, 1e-10, 1e-8, 1e-6):
        try:
            return np.linalg.cholesky(M + jitter * scale * np.eye(M.shape[0]))
        except np.linalg.LinAlgError:
            continue
    raise NumericalError(f"Cholesky of {what} failed even with jitter")


class _SpatialCtx:
    """Precomputed GP quantities shared across sweeps (per candidate phi)."""

    def __init__(self, coords: np.ndarray, phis: tuple[float, ...]):
        self.D = pairwise_distances(coords)
        self.R_inv: dict[float, np.ndarray] = {}
        self.logdet: dict[float, float] = {}
        n = self.D.shape[0]
        for phi in phis:
            R = exp_covariance(self.D, phi)
            L = cholesky_with_jitter(R, f"GP correlation (phi={phi})")
            self.R_inv[phi] = cho_solve((L, True), np.eye(n))
            self.logdet[phi] = 2.0 * float(np.sum(np.log(np.diag(L))))


def _check_design(X: np.ndarray) -> None:
    xtx = X.T @ X
    cond = float(np.linalg.cond(xtx))
    if not np.isfinite(cond) or cond > 1e12:
        raise NumericalError(
            f"design matrix is (near-)singular: cond(X'X) = {cond:.3e}; "
            "drop collinear covariates"
        )


def init_chain(data: PresenceData, config: ChainConfig) -> ChainState:
    """Deterministic-in-seed initialization.

    Intercepts start at the probit transform of empirical prevalence
    (clamped away from 0/1 for degenerate species, with a warning),
    other coefficients at zero, Lambda at small random values respecting
    the triangular constraint, W at zero, and Z drawn from the correct
    truncation regions.
    """
    _check_design(data.X)
    n, S, p, r = data.n, data.S, data.p, config.r
    rng = np.random.default_rng(config.seed)

    prev = data.Y.mean(axis=0)
    lo = 1.0 / (2.0 * n)
    degenerate = (prev <= 0.0) | (prev >= 1.0)
    if np.any(degenerate):
        names = [data.species_names[j] for j in np.nonzero(degenerate)[0]]
        warnings.warn(
            f"species with empty or full prevalence {names}: intercepts "
            f"initialized from prevalence clamped to [{lo:.3g}, {1 - lo:.3g}]",
            stacklevel=2,
        )
    prev = np.clip(prev, lo, 1.0 - lo)

    B = np.zeros((S, p))
    B[:, 0] = ndtri(prev)
    Lambda = 0.1 * rng.standard_normal((S, r))
    top = min(S, r)
    for j in range(top):
        Lambda[j, j + 1:] = 0.0
        Lambda[j, j] = abs(Lambda[j, j]) + 0.01
    W = np.zeros((n, r))

    phi = config.phi
    if config.spatial and phi is None and config.phi_grid is None:
        phi = default_phi(data.coords)
    if phi is None:
        phi = config.phi_grid[0] if config.phi_grid else 1.0

    state = ChainState(
        Z=np.zeros((n, S)), B=B, Lambda=Lambda, W=W, phi=float(phi), rng=rng
    )
    update_Z(state, data)
    return state


def update_Z(state: ChainState, data: PresenceData) -> ChainState:
    """Redraw every latent entry from its truncated normal full conditional.

    Presence truncates to [0, inf), absence to (-inf, 0), so the sign
    pattern of Z matches Y exactly after the update.
    """
    mean = data.X @ state.B.T + state.W @ state.Lambda.T
    present = data.Y == 1.0
    lower = np.where(present, 0.0, -np.inf)
    upper = np.where(present, np.inf, 0.0)
    sd = float(np.sqrt(state.sigma2_eps))
    state.Z = sample_truncated_normal(mean, sd, lower, upper, state.rng)
    return state


def b_full_conditional(
    state: ChainState, data: PresenceData, prior_var_B: float
) -> tuple[np.ndarray, np.ndarray]:
    """Mean (S x p) and shared covariance (p x p) of the B full conditional."""
    resid = state.Z - state.W @ state.Lambda.T
    s2 = state.sigma2_eps
    Q = data.X.T @ data.X / s2 + np.eye(data.p) / prior_var_B
    cov = np.linalg.inv(Q)
    mean = (cov @ (data.X.T @ resid) / s2).T
    return mean, cov


def update_B(state: ChainState, data: PresenceData, prior_var_B: float = 100.0) -> ChainState:
    """Conjugate Gaussian update of all coefficient rows."""
    resid = state.Z - state.W @ state.Lambda.T
    s2 = state.sigma2_eps
    Q = data.X.T @ data.X / s2 + np.eye(data.p) / prior_var_B
    L = cholesky_with_jitter(Q, "B full-conditional precision")
    mean = cho_solve((L, True), data.X.T @ resid / s2)  # (p, S)
    noise = solve_triangular(L.T, state.rng.standard_normal((data.p, data.S)), lower=False)
    state.B = (mean + noise).T
    return state


def lambda_coord_moments(
    state: ChainState, data: PresenceData, j: int, h: int, prior_var_Lambda: float
) -> tuple[float, float]:
    """Mean and variance of the scalar full conditional of Lambda[j, h]."""
    lam = state.Lambda.copy()
    lam[j, h] = 0.0
    resid_j = state.Z[:, j] - data.X @ state.B[j] - state.W @ lam[j]
    wh = state.W[:, h]
    prec = wh @ wh / state.sigma2_eps + 1.0 / prior_var_Lambda
    mean = (wh @ resid_j / state.sigma2_eps) / prec
    return float(mean), float(1.0 / prec)


def update_Lambda(
    state: ChainState, data: PresenceData, prior_var_Lambda: float = 1.0
) -> ChainState:
    """Column-wise conjugate update of the free loading entries.

    Entries above the diagonal of the top r x r block stay exactly 0;
    diagonal entries are redrawn from their positive-truncated full
    conditionals, everything else from plain Gaussians.
    """
    n, S, r = data.n, data.S, state.Lambda.shape[1]
    s2 = state.sigma2_eps
    fixed = data.X @ state.B.T
    for h in range(r):
        lam_h = state.Lambda[:, h].copy()
        resid = state.Z - fixed - state.W @ state.Lambda.T + np.outer(state.W[:, h], lam_h)
        wh = state.W[:, h]
        prec = wh @ wh / s2 + 1.0 / prior_var_Lambda
        sd = 1.0 / np.sqrt(prec)
        mean = (resid.T @ wh / s2) / prec  # (S,)
        free = np.arange(S) > h
        lam_h[free] = mean[free] + sd * state.rng.standard_normal(int(free.sum()))
        if h < S:
            lam_h[h] = sample_truncated_normal(mean[h], sd, 0.0, np.inf, state.rng)
        lam_h[np.arange(S) < h] = 0.0
        state.Lambda[:, h] = lam_h
    return state


def w_nonspatial_moments(
    state: ChainState, data: PresenceData
) -> tuple[np.ndarray, np.ndarray]:
    """Per-site means (n x r) and shared covariance (r x r), nonspatial case."""
    s2 = state.sigma2_eps
    r = state.Lambda.shape[1]
    Q = state.Lambda.T @ state.Lambda / s2 + np.eye(r)
    cov = np.linalg.inv(Q)
    resid = state.Z - data.X @ state.B.T
    mean = resid @ state.Lambda / s2 @ cov
    return mean, cov


def w_spatial_moments(
    state: ChainState, data: PresenceData, h: int, R_inv: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Mean (n,) and covariance (n x n) of factor column h, spatial case."""
    s2 = state.sigma2_eps
    lam_h = state.Lambda[:, h]
    resid = (
        state.Z - data.X @ state.B.T - state.W @ state.Lambda.T
        + np.outer(state.W[:, h], lam_h)
    )
    c = float(lam_h @ lam_h) / s2
    t = resid @ lam_h / s2
    Q = R_inv + c * np.eye(R_inv.shape[0])
    cov = np.linalg.inv(Q)
    return cov @ t, cov


def update_W(
    state: ChainState,
    data: PresenceData,
    spatial: bool = True,
    ctx: _SpatialCtx | None = None,
) -> ChainState:
    """Redraw the factor field.

    Nonspatial: every site's w_i from its r-dimensional Gaussian full
    conditional independently (standard-normal prior). Spatial: each
    factor column jointly across sites under the exponential GP prior,
    one n x n solve per factor.
    """
    n, r = state.W.shape
    s2 = state.sigma2_eps
    if not spatial:
        Q = state.Lambda.T @ state.Lambda / s2 + np.eye(r)
        L = cholesky_with_jitter(Q, "W full-conditional precision")
        resid = state.Z - data.X @ state.B.T
        mean = cho_solve((L, True), (resid @ state.Lambda / s2).T).T
        noise = solve_triangular(L.T, state.rng.standard_normal((r, n)), lower=False).T
        state.W = mean + noise
        return state

    if ctx is None:
        ctx = _SpatialCtx(data.coords, (state.phi,))
    R_inv = ctx.R_inv[state.phi]
    fixed = data.X @ state.B.T
    for h in range(r):
        lam_h = state.Lambda[:, h]
        resid = state.Z - fixed - state.W @ state.Lambda.T + np.outer(state.W[:, h], lam_h)
        c = float(lam_h @ lam_h) / s2
        t = resid @ lam_h / s2
        Q = R_inv + c * np.eye(n)
        L = cholesky_with_jitter(Q, "spatial W full-conditional precision")
        mean = cho_solve((L, True), t)
        noise = solve_triangular(L.T, state.rng.standard_normal(n), lower=False)
        state.W[:, h] = mean + noise
    return state


def _update_phi_grid(state: ChainState, ctx: _SpatialCtx, grid: tuple[float, ...]) -> None:
    """Discrete full-conditional move for the GP decay over <= 10 candidates."""
    r = state.W.shape[1]
    ll = np.empty(len(grid))
    for g, phi in enumerate(grid):
        R_inv = ctx.R_inv[phi]
        quad = float(np.sum(state.W * (R_inv @ state.W)))
        ll[g] = -0.5 * quad - 0.5 * r * ctx.logdet[phi]
    probs = np.exp(ll - ll.max())
    probs /= probs.sum()
    state.phi = float(grid[int(np.searchsorted(np.cumsum(probs), state.rng.uniform()))])


def _log_posterior(
    state: ChainState,
    data: PresenceData,
    config: ChainConfig,
    ctx: _SpatialCtx | None,
) -> float:
    resid = state.Z - data.X @ state.B.T - state.W @ state.Lambda.T
    lp = -0.5 * float(np.sum(resid * resid)) / state.sigma2_eps
    lp -= 0.5 * float(np.sum(state.B * state.B)) / config.prior_var_B
    lp -= 0.5 * float(np.sum(state.Lambda * state.Lambda)) / config.prior_var_Lambda
    if config.spatial and ctx is not None:
        R_inv = ctx.R_inv[state.phi]
        lp -= 0.5 * float(np.sum(state.W * (R_inv @ state.W)))
        lp -= 0.5 * state.W.shape[1] * ctx.logdet[state.phi]
    else:
        lp -= 0.5 * float(np.sum(state.W * state.W))
    return lp


@dataclass(frozen=True)
class PosteriorDraws:
    """Thinned post-burn-in snapshots plus provenance.

    Arrays are indexed by draw: B is (T, S, p), Lambda (T, S, r),
    W (T, n, r), H (T, S, S) with unit diagonals, phi (T,). The
    log-posterior trace covers every sweep including burn-in.
    """

    B: np.ndarray
    Lambda: np.ndarray
    W: np.ndarray
    H: np.ndarray
    phi: np.ndarray
    log_post: np.ndarray
    sigma2_eps: float
    config: ChainConfig
    coords: np.ndarray
    X: np.ndarray
    species_names: tuple[str, ...]
    site_ids: tuple[str, ...] = ()

    def __post_init__(self):
        T = self.B.shape[0]
        if not (self.Lambda.shape[0] == self.W.shape[0] == self.H.shape[0] == T):
            raise StructuralError("draw counts disagree across parameter arrays")
        diags = np.diagonal(self.H, axis1=1, axis2=2)
        if not np.allclose(diags, 1.0, atol=1e-10):
            raise StructuralError("every stored H must have unit diagonal")

    @property
    def n_draws(self) -> int:
        return self.B.shape[0]

    @property
    def S(self) -> int:
        return self.B.shape[1]

    @property
    def n(self) -> int:
        return self.W.shape[1]

    def species_index(self, name_or_idx) -> int:
        if isinstance(name_or_idx, (int, np.integer)):
            idx = int(name_or_idx)
            if not 0 <= idx < self.S:
                raise StructuralError(f"species index {idx} out of range")
            return idx
        try:
            return self.species_names.index(str(name_or_idx))
        except ValueError:
            raise StructuralError(f"unknown species {name_or_idx!r}") from None

    def params_at(self, t: int) -> ModelParams:
        return ModelParams(
            B=self.B[t], Lambda=self.Lambda[t], W=self.W[t],
            sigma2_eps=self.sigma2_eps, phi=float(self.phi[t]),
        )


def run(data: PresenceData, config: ChainConfig) -> PosteriorDraws:
    """Run one chain: init, sweep, store thinned post-burn-in snapshots.

    Fully deterministic given the seed. If a sweep raises and
    ``config.checkpoint_path`` is set, the failing state is checkpointed
    before the exception propagates.
    """
    state = init_chain(data, config)
    n, S, p, r = data.n, data.S, data.p, config.r

    ctx = None
    if config.spatial:
        phis = config.phi_grid if config.phi_grid else (state.phi,)
        ctx = _SpatialCtx(data.coords, tuple(phis))

    T = config.n_stored()
    B_out = np.empty((T, S, p))
    Lam_out = np.empty((T, S, r))
    W_out = np.empty((T, n, r))
    H_out = np.empty((T, S, S))
    phi_out = np.empty(T)
    log_post = np.empty(config.iterations)

    t_store = 0
    try:
        for it in range(1, config.iterations + 1):
            update_Z(state, data)
            update_B(state, data, config.prior_var_B)
            update_Lambda(state, data, config.prior_var_Lambda)
            update_W(state, data, config.spatial, ctx)
            if config.spatial and config.phi_grid:
                _update_phi_grid(state, ctx, config.phi_grid)
            state.iteration = it
            log_post[it - 1] = _log_posterior(state, data, config, ctx)
            if it > config.burn_in and (it - config.burn_in - 1) % config.thin == 0:
                B_out[t_store] = state.B
                Lam_out[t_store] = state.Lambda
                W_out[t_store] = state.W
                H_out[t_store] = assemble_sigma_star(state.Lambda, state.sigma2_eps).H
                phi_out[t_store] = state.phi
                t_store += 1
    except Exception:
        if config.checkpoint_path:
            save_checkpoint(state, config, config.checkpoint_path)
        raise

    assert t_store == T
    return PosteriorDraws(
        B=B_out, Lambda=Lam_out, W=W_out, H=H_out, phi=phi_out,
        log_post=log_post, sigma2_eps=state.sigma2_eps, config=config,
        coords=data.coords, X=data.X,
        species_names=data.species_names, site_ids=data.site_ids,
    )


# ---------------------------------------------------------------------------
# persistence: checkpoint and draws directory
# ---------------------------------------------------------------------------

def save_checkpoint(state: ChainState, config: ChainConfig, path: str) -> None:
    doc = {
        "format": _CHECKPOINT_FORMAT,
        "config": asdict(config),
        "config_hash": config_hash(config),
        "iteration": state.iteration,
        "phi": state.phi,
        "sigma2_eps": state.sigma2_eps,
        "Z": state.Z.tolist(),
        "B": state.B.tolist(),
        "Lambda": state.Lambda.tolist(),
        "W": state.W.tolist(),
        "rng_state": state.rng.bit_generator.state,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh)


def load_checkpoint(path: str) -> tuple[ChainState, ChainConfig]:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != _CHECKPOINT_FORMAT:
        raise StructuralError(f"not a chain checkpoint: {path}")
    cfg_dict = doc["config"]
    if cfg_dict.get("phi_grid") is not None:
        cfg_dict["phi_grid"] = tuple(cfg_dict["phi_grid"])
    config = ChainConfig(**cfg_dict)
    rng = np.random.default_rng()
    rng.bit_generator.state = doc["rng_state"]
    state = ChainState(
        Z=np.array(doc["Z"], dtype=float),
        B=np.array(doc["B"], dtype=float),
        Lambda=np.array(doc["Lambda"], dtype=float),
        W=np.array(doc["W"], dtype=float),
        phi=float(doc["phi"]),
        rng=rng,
        iteration=int(doc["iteration"]),
        sigma2_eps=float(doc["sigma2_eps"]),
    )
    return state, config


def _write_long_csv(path, header: str, index_arrays, values: np.ndarray) -> None:
    from .io import fmt

    cols = [np.asarray(a).ravel() for a in index_arrays]
    vals = np.asarray(values).ravel()
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for idx in range(vals.size):
            fh.write(",".join(str(c[idx]) for c in cols) + "," + fmt(vals[idx]) + "\n")


def export_draws(draws: PosteriorDraws, out_dir: str) -> None:
    """Write a draws directory: one long-format CSV per parameter block
    plus a JSON manifest describing shapes, labels and the config."""
    from .io import fmt, write_json

    os.makedirs(out_dir, exist_ok=True)
    T, S, p = draws.B.shape
    n, r = draws.W.shape[1], draws.W.shape[2]

    ti, si, pi = np.meshgrid(np.arange(T), np.arange(S), np.arange(p), indexing="ij")
    _write_long_csv(os.path.join(out_dir, "B.csv"), "draw,species,coef,value",
                    (ti, si, pi), draws.B)
    ti, si, hi = np.meshgrid(np.arange(T), np.arange(S), np.arange(r), indexing="ij")
    _write_long_csv(os.path.join(out_dir, "Lambda.csv"), "draw,species,factor,value",
                    (ti, si, hi), draws.Lambda)
    ti, ii, hi = np.meshgrid(np.arange(T), np.arange(n), np.arange(r), indexing="ij")
    _write_long_csv(os.path.join(out_dir, "W.csv"), "draw,site,factor,value",
                    (ti, ii, hi), draws.W)

    iu, ju = np.triu_indices(S, k=1)
    with open(os.path.join(out_dir, "H.csv"), "w") as fh:
        fh.write("draw,species_a,species_b,value\n")
        for t in range(T):
            for a, b in zip(iu, ju):
                fh.write(f"{t},{a},{b},{fmt(draws.H[t, a, b])}\n")

    _write_long_csv(os.path.join(out_dir, "phi.csv"), "draw,value",
                    (np.arange(T),), draws.phi)
    _write_long_csv(os.path.join(out_dir, "log_post.csv"), "iteration,value",
                    (np.arange(1, draws.log_post.size + 1),), draws.log_post)

    with open(os.path.join(out_dir, "sites.csv"), "w") as fh:
        xcols = ",".join(f"x{c}" for c in range(draws.X.shape[1]))
        fh.write(f"site_id,coord_x,coord_y,{xcols}\n")
        for i in range(n):
            fields = [draws.site_ids[i] if draws.site_ids else f"site{i + 1}",
                      fmt(draws.coords[i, 0]), fmt(draws.coords[i, 1])]
            fields += [fmt(v) for v in draws.X[i]]
            fh.write(",".join(fields) + "\n")

    cfg = asdict(draws.config)
    write_json(
        {
            "format": _DRAWS_FORMAT,
            "n_draws": T, "n_sites": n, "n_species": S, "n_coefs": p, "n_factors": r,
            "sigma2_eps": draws.sigma2_eps,
            "species_names": list(draws.species_names),
            "config": cfg,
            "config_hash": config_hash(draws.config),
        },
        os.path.join(out_dir, "manifest.json"),
    )


def _read_long_csv(path, value_shape) -> np.ndarray:
    from .io import parse_float

    out = np.empty(value_shape).ravel()
    with open(path) as fh:
        next(fh)
        for idx, line in enumerate(fh):
            out[idx] = parse_float(line.rstrip("\n").rsplit(",", 1)[1])
    return out.reshape(value_shape)


def load_draws(in_dir: str) -> PosteriorDraws:
    """Reload a draws directory written by :func:`export_draws` (exact)."""
    from .io import parse_float

    man_path = os.path.join(in_dir, "manifest.json")
    if not os.path.exists(man_path):
        raise StructuralError(
            f"{in_dir} is not a draws directory (missing manifest.json); run a fit first"
        )
    with open(man_path) as fh:
        man = json.load(fh)
    if man.get("format") != _DRAWS_FORMAT:
        raise StructuralError(f"unsupported draws format in {man_path}")
    T, n, S, p, r = (man[k] for k in ("n_draws", "n_sites", "n_species", "n_coefs", "n_factors"))

    B = _read_long_csv(os.path.join(in_dir, "B.csv"), (T, S, p))
    Lam = _read_long_csv(os.path.join(in_dir, "Lambda.csv"), (T, S, r))
    W = _read_long_csv(os.path.join(in_dir, "W.csv"), (T, n, r))
    phi = _read_long_csv(os.path.join(in_dir, "phi.csv"), (T,))
    with open(os.path.join(in_dir, "log_post.csv")) as fh:
        log_post = np.array([parse_float(ln.rstrip("\n").rsplit(",", 1)[1]) for ln in list(fh)[1:]])

    H = np.empty((T, S, S))
    diag = np.eye(S, dtype=bool)
    H[:, diag] = 1.0
    with open(os.path.join(in_dir, "H.csv")) as fh:
        next(fh)
        for line in fh:
            t, a, b, v = line.rstrip("\n").split(",")
            H[int(t), int(a), int(b)] = H[int(t), int(b), int(a)] = parse_float(v)

    site_ids, coords, X = [], [], []
    with open(os.path.join(in_dir, "sites.csv")) as fh:
        next(fh)
        for line in fh:
            fields = line.rstrip("\n").split(",")
            site_ids.append(fields[0])
            coords.append((parse_float(fields[1]), parse_float(fields[2])))
            X.append([parse_float(v) for v in fields[3:]])

    cfg_dict = man["config"]
    if cfg_dict.get("phi_grid") is not None:
        cfg_dict["phi_grid"] = tuple(cfg_dict["phi_grid"])
    return PosteriorDraws(
        B=B, Lambda=Lam, W=W, H=H, phi=phi, log_post=log_post,
        sigma2_eps=float(man["sigma2_eps"]), config=ChainConfig(**cfg_dict),
        coords=np.array(coords), X=np.array(X),
        species_names=tuple(man["species_names"]), site_ids=tuple(site_ids),
    )
