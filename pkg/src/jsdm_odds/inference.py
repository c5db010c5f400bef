"""Posterior functionals of a fitted model.

Every quantity here is a deterministic function of model parameters, so
posterior draws of the parameters induce posterior draws of the
quantity: pairwise presence/absence tables and their odds ratios,
odds-ratio and joint-occurrence surfaces over a prediction grid,
factor kriging to new locations, site richness moments, and the
marginal-homogeneity odds ratio.

Three routes to a pair table are supported per posterior draw:

* ``analytic``: orthant probabilities of the latent bivariate normal at
  the correlation-standardized marginal moments (factors integrated
  out) - the default, and the route used for surfaces.
* ``mc``: empirical 2x2 frequencies of simulated latent pairs; an
  internal Monte Carlo check of the analytic route.
* ``conditional``: cells as products of univariate normal CDFs given
  realized factor values (stored at data sites, kriged elsewhere),
  optionally averaged over several factor realizations per draw. With a
  single realization the per-draw table factorizes (odds ratio exactly
  1); its value is as a posterior functional of the cells themselves.

Exceedance probabilities P(theta > 1) use a strict inequality with an
absolute tie tolerance of 1e-12 on log10(theta): draws with theta = 1
exactly (e.g. a loading matrix that is identically zero) count as
non-exceeding.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtr

from .errors import DomainError, StructuralError
from .model import exp_covariance, pairwise_distances
from .prob_core import BvnParams, bvn_cdf, log10_odds_ratio_bvn
from .sampler import PosteriorDraws, cholesky_with_jitter
from .tables import PairTable

__all__ = [
    "SurfaceGrid",
    "RichnessSummary",
    "TIE_EPS",
    "make_grid",
    "nearest_covariates",
    "pair_table_draws",
    "log10_theta_draws",
    "odds_surface",
    "krige_factors",
    "richness_stats",
    "homogeneity_odds",
    "write_surface_csv",
    "render_surface_png",
]

_LN10 = math.log(10.0)

#: |log10 theta| at or below this counts as exact independence.
TIE_EPS = 1e-12


@dataclass(frozen=True)
class SurfaceGrid:
    """Per-node posterior summaries of a species pair over a lattice.

    Arrays are flat over nodes (x varying fastest); ``mask`` is True for
    nodes with valid covariates. Masked nodes carry NaN summaries.
    """

    nodes: np.ndarray
    nx: int
    ny: int
    mean_log10_theta: np.ndarray
    q05: np.ndarray
    q95: np.ndarray
    p_exceed: np.ndarray
    p11_mean: np.ndarray
    p00_mean: np.ndarray
    mask: np.ndarray
    species: tuple[str, str] = ("", "")

    def __post_init__(self):
        m = self.nodes.shape[0]
        for name in ("mean_log10_theta", "q05", "q95", "p_exceed", "p11_mean", "p00_mean", "mask"):
            if getattr(self, name).shape != (m,):
                raise StructuralError(f"{name} must have one entry per node")
        ok = self.mask
        if np.any(ok):
            for name in ("p_exceed", "p11_mean", "p00_mean"):
                v = getattr(self, name)[ok]
                if np.any((v < -1e-12) | (v > 1 + 1e-12)):
                    raise StructuralError(f"{name} outside [0, 1]")
            if np.any(self.q05[ok] > self.q95[ok]):
                raise StructuralError("interval endpoints out of order")


@dataclass(frozen=True)
class RichnessSummary:
    """Posterior richness moments at one site.

    ``variance`` sums the average within-draw variance (which includes
    all pairwise presence covariances) and the between-draw variance of
    expected richness; ``independence_variance`` drops the covariance
    terms, which is what a stacked single-species analysis would report.
    """

    mean: float
    variance: float
    independence_variance: float
    between_draw_variance: float

    def __post_init__(self):
        if self.variance < 0 or self.independence_variance < 0:
            raise StructuralError("richness variances must be nonnegative")


def make_grid(coords: np.ndarray, nx: int, ny: int, pad: float = 0.0) -> np.ndarray:
    """Regular lattice covering the bounding box of ``coords``.

    Returns (nx*ny, 2) node coordinates with x varying fastest.
    """
    if nx < 2 or ny < 2:
        raise DomainError(f"grid resolution must be >= 2 per axis, got {nx} x {ny}")
    coords = np.asarray(coords, dtype=float)
    lo = coords.min(axis=0) - pad
    hi = coords.max(axis=0) + pad
    xs = np.linspace(lo[0], hi[0], nx)
    ys = np.linspace(lo[1], hi[1], ny)
    gx, gy = np.meshgrid(xs, ys)  # row-major: y outer, x fastest
    return np.column_stack([gx.ravel(), gy.ravel()])


def nearest_covariates(
    raster_coords: np.ndarray,
    raster_X: np.ndarray,
    nodes: np.ndarray,
    max_dist: float | None = None,
):
    """Nearest-neighbor covariate lookup; nodes beyond ``max_dist`` are masked."""
    from scipy.spatial import cKDTree

    tree = cKDTree(np.asarray(raster_coords, dtype=float))
    dist, idx = tree.query(np.asarray(nodes, dtype=float))
    X_nodes = np.asarray(raster_X, dtype=float)[idx]
    valid = np.ones(len(nodes), dtype=bool) if max_dist is None else dist <= max_dist
    return X_nodes, valid


def _marginal_sds(draws: PosteriorDraws) -> np.ndarray:
    """Latent marginal standard deviations sqrt(Sigma*_jj), shape (T, S)."""
    return np.sqrt(draws.sigma2_eps + np.sum(draws.Lambda**2, axis=2))


def _resolve_x(draws: PosteriorDraws, site, x) -> np.ndarray:
    if (site is None) == (x is None):
        raise StructuralError("pass exactly one of site= or x=")
    if site is not None:
        if not 0 <= site < draws.n:
            raise StructuralError(f"site index {site} out of range")
        return draws.X[site]
    x = np.asarray(x, dtype=float)
    if x.shape != (draws.X.shape[1],):
        raise StructuralError(f"x must have shape ({draws.X.shape[1]},), got {x.shape}")
    return x


def _pair_arrays(draws: PosteriorDraws, x: np.ndarray, j: int, jp: int):
    """Standardized marginal means and latent correlation per draw."""
    sds = _marginal_sds(draws)
    mu1 = (draws.B[:, j, :] @ x) / sds[:, j]
    mu2 = (draws.B[:, jp, :] @ x) / sds[:, jp]
    rho = draws.H[:, j, jp]
    return mu1, mu2, rho


def _cells_arrays(mu1, mu2, rho):
    """Vectorized orthant cells (p00, p01, p10, p11) for parameter arrays."""
    p00 = bvn_cdf(-mu1, -mu2, rho)
    p11 = bvn_cdf(mu1, mu2, rho)
    p10 = bvn_cdf(mu1, -mu2, -rho)
    p01 = bvn_cdf(-mu1, mu2, -rho)
    return p00, p01, p10, p11


def _log10_theta_arrays(mu1, mu2, rho):
    """Vectorized log10 odds ratio; falls back to log-space per element
    when a cell is too small for the direct path."""
    p00, p01, p10, p11 = _cells_arrays(mu1, mu2, rho)
    out = np.zeros(np.broadcast(mu1, mu2, rho).shape)
    small = np.minimum(np.minimum(p00, p01), np.minimum(p10, p11))
    direct = (small > 1e-9) & (rho != 0.0)
    with np.errstate(divide="ignore"):
        out[direct] = (
            np.log(p11[direct]) + np.log(p00[direct])
            - np.log(p10[direct]) - np.log(p01[direct])
        ) / _LN10
    needs_log = ~direct & (rho != 0.0)
    if np.any(needs_log):
        b_mu1 = np.broadcast_to(mu1, out.shape)
        b_mu2 = np.broadcast_to(mu2, out.shape)
        b_rho = np.broadcast_to(rho, out.shape)
        for idx in np.argwhere(needs_log):
            t = tuple(idx)
            out[t] = log10_odds_ratio_bvn(
                BvnParams(float(b_mu1[t]), float(b_mu2[t]), float(b_rho[t]))
            )
    return out


def log10_theta_draws(draws: PosteriorDraws, j, jp, site=None, x=None) -> np.ndarray:
    """Per-draw log10 odds ratio at a location (analytic route), shape (T,)."""
    j, jp = draws.species_index(j), draws.species_index(jp)
    xv = _resolve_x(draws, site, x)
    return _log10_theta_arrays(*_pair_arrays(draws, xv, j, jp))


def pair_table_draws(
    draws: PosteriorDraws,
    j,
    jp,
    *,
    site: int | None = None,
    x: np.ndarray | None = None,
    method: str = "analytic",
    n_mc: int = 100_000,
    rng: np.random.Generator | None = None,
    w_draws: np.ndarray | None = None,
) -> list[PairTable]:
    """One presence/absence table per posterior draw for a species pair.

    The location is a data ``site`` index or an explicit covariate
    vector ``x``. For the conditional route away from data sites,
    pass kriged factor values as ``w_draws`` with shape (T, r) or
    (T, M, r); M > 1 averages the cells over factor realizations
    within each draw.
    """
    j, jp = draws.species_index(j), draws.species_index(jp)
    if j == jp:
        raise StructuralError("species pair must be distinct")
    xv = _resolve_x(draws, site, x)
    T = draws.n_draws

    if method == "analytic":
        mu1, mu2, rho = _pair_arrays(draws, xv, j, jp)
        p00, p01, p10, p11 = _cells_arrays(mu1, mu2, rho)
        return [PairTable(p00[t], p01[t], p10[t], p11[t]) for t in range(T)]

    if method == "mc":
        if rng is None:
            raise StructuralError("method='mc' requires rng=")
        mu1, mu2, rho = _pair_arrays(draws, xv, j, jp)
        out = []
        for t in range(T):
            e1 = rng.standard_normal(n_mc)
            e2 = rho[t] * e1 + math.sqrt(1.0 - rho[t] ** 2) * rng.standard_normal(n_mc)
            y1 = (mu1[t] + e1) >= 0.0
            y2 = (mu2[t] + e2) >= 0.0
            n11 = float(np.sum(y1 & y2))
            n10 = float(np.sum(y1 & ~y2))
            n01 = float(np.sum(~y1 & y2))
            n00 = float(n_mc - n11 - n10 - n01)
            out.append(PairTable(n00 / n_mc, n01 / n_mc, n10 / n_mc, n11 / n_mc))
        return out

    if method == "conditional":
        if w_draws is None:
            if site is None:
                raise StructuralError(
                    "conditional method away from data sites needs w_draws= "
                    "(e.g. from krige_factors)"
                )
            w = draws.W[:, site, :][:, None, :]  # (T, 1, r)
        else:
            w = np.asarray(w_draws, dtype=float)
            if w.ndim == 2:
                w = w[:, None, :]
            if w.shape[0] != T or w.shape[2] != draws.Lambda.shape[2]:
                raise StructuralError(f"w_draws must be (T, M, r); got {w.shape}")
        sd_eps = math.sqrt(draws.sigma2_eps)
        fixed1 = draws.B[:, j, :] @ xv  # (T,)
        fixed2 = draws.B[:, jp, :] @ xv
        m1 = (fixed1[:, None] + np.einsum("tmr,tr->tm", w, draws.Lambda[:, j, :])) / sd_eps
        m2 = (fixed2[:, None] + np.einsum("tmr,tr->tm", w, draws.Lambda[:, jp, :])) / sd_eps
        pj, pk = ndtr(m1), ndtr(m2)
        p11 = np.mean(pj * pk, axis=1)
        p10 = np.mean(pj * (1 - pk), axis=1)
        p01 = np.mean((1 - pj) * pk, axis=1)
        p00 = np.mean((1 - pj) * (1 - pk), axis=1)
        return [PairTable(p00[t], p01[t], p10[t], p11[t]) for t in range(T)]

    raise StructuralError(f"unknown method {method!r}; expected analytic, mc or conditional")


def odds_surface(
    draws: PosteriorDraws,
    nodes: np.ndarray,
    j,
    jp,
    *,
    nx: int | None = None,
    ny: int | None = None,
    raster: tuple[np.ndarray, np.ndarray] | None = None,
    max_dist: float | None = None,
    method: str = "analytic",
    rng: np.random.Generator | None = None,
    n_mc: int = 20_000,
    return_draws: bool = False,
):
    """Posterior odds-ratio and joint-occurrence summaries over grid nodes.

    Covariates at each node come from nearest-neighbor lookup in
    ``raster`` (default: the fitted data sites). Per node the summaries
    are the posterior mean and central 90% interval of log10(theta),
    the exceedance probability P(theta > 1 | data), and posterior mean
    joint-presence and joint-absence probabilities. ``method`` selects
    the per-draw table route: "analytic" (default, exact orthant cells),
    "mc" (latent-pair simulation, needs rng), or "conditional" (cells
    given per-draw kriged factors, needs rng and spatial draws; per-draw
    tables factorize, so only the cell surfaces are informative).
    ``return_draws`` additionally returns the (T, n_nodes) per-draw
    log10(theta) matrix for diagnostics.
    """
    j, jp = draws.species_index(j), draws.species_index(jp)
    nodes = np.asarray(nodes, dtype=float)
    m = nodes.shape[0]
    if nx is None or ny is None:
        nx, ny = m, 1
    if raster is None:
        raster = (draws.coords, draws.X)
    X_nodes, valid = nearest_covariates(raster[0], raster[1], nodes, max_dist)
    Xv = X_nodes[valid]

    if method == "analytic":
        sds = _marginal_sds(draws)
        mu1 = (draws.B[:, j, :] @ Xv.T) / sds[:, j, None]  # (T, mv)
        mu2 = (draws.B[:, jp, :] @ Xv.T) / sds[:, jp, None]
        rho = draws.H[:, j, jp][:, None]
        lt = _log10_theta_arrays(mu1, mu2, np.broadcast_to(rho, mu1.shape))
        p00, _, _, p11 = _cells_arrays(mu1, mu2, rho)
    elif method in ("mc", "conditional"):
        from .tables import log10_odds_ratio

        if rng is None:
            raise StructuralError(f"method={method!r} requires rng=")
        w_nodes = None
        if method == "conditional":
            _, w_nodes = krige_factors(draws, nodes[valid], rng=rng)
            if w_nodes is None:  # pragma: no cover - rng checked above
                raise StructuralError("kriging draws unavailable")
        T, mv = draws.n_draws, int(valid.sum())
        lt = np.empty((T, mv))
        p11 = np.empty((T, mv))
        p00 = np.empty((T, mv))
        for i in range(mv):
            if method == "mc":
                tabs = pair_table_draws(
                    draws, j, jp, x=Xv[i], method="mc", n_mc=n_mc, rng=rng
                )
            else:
                tabs = pair_table_draws(
                    draws, j, jp, x=Xv[i], method="conditional",
                    w_draws=w_nodes[:, i, :],
                )
            for t, tab in enumerate(tabs):
                try:
                    lt[t, i] = log10_odds_ratio(tab)
                except DomainError:  # degenerate empirical table
                    lt[t, i] = np.nan
                p11[t, i] = tab.p11
                p00[t, i] = tab.p00
    else:
        raise StructuralError(
            f"unknown method {method!r}; expected analytic, mc or conditional"
        )

    def scatter(vals):
        out = np.full(m, np.nan)
        out[valid] = vals
        return out

    exceed_ind = np.where(np.isnan(lt), np.nan, (lt > TIE_EPS).astype(float))
    with np.errstate(invalid="ignore"):
        sg = SurfaceGrid(
            nodes=nodes,
            nx=int(nx),
            ny=int(ny),
            mean_log10_theta=scatter(np.nanmean(lt, axis=0)),
            q05=scatter(np.nanquantile(lt, 0.05, axis=0)),
            q95=scatter(np.nanquantile(lt, 0.95, axis=0)),
            p_exceed=scatter(np.nanmean(exceed_ind, axis=0)),
            p11_mean=scatter(p11.mean(axis=0)),
            p00_mean=scatter(p00.mean(axis=0)),
            mask=valid,
            species=(draws.species_names[j], draws.species_names[jp]),
        )
    if return_draws:
        full = np.full((draws.n_draws, m), np.nan)
        full[:, valid] = lt
        return sg, full
    return sg


def krige_factors(
    draws: PosteriorDraws,
    new_locations: np.ndarray,
    rng: np.random.Generator | None = None,
    jitter: float = 1e-10,
):
    """Conditional-Gaussian prediction of each factor at new locations.

    For every posterior draw, conditions the exponential-GP prior (that
    draw's decay) on the draw's stored factor values at the data sites.
    Returns ``(mean, samples)``, each (T, m, r); ``samples`` is None
    unless an ``rng`` is supplied.
    """
    if not draws.config.spatial:
        raise StructuralError("factor kriging requires spatial-mode draws")
    new_locations = np.asarray(new_locations, dtype=float)
    if new_locations.ndim != 2 or new_locations.shape[1] != 2:
        raise StructuralError("new_locations must be (m, 2)")
    T, n, r = draws.W.shape
    m = new_locations.shape[0]
    D_ns = pairwise_distances(new_locations, draws.coords)
    D_nn = pairwise_distances(new_locations)

    mean = np.empty((T, m, r))
    samples = np.empty((T, m, r)) if rng is not None else None
    for phi in np.unique(draws.phi):
        t_idx = np.nonzero(draws.phi == phi)[0]
        R = exp_covariance(pairwise_distances(draws.coords), float(phi))
        L = cholesky_with_jitter(R, f"GP correlation (phi={phi})")
        r_ns = exp_covariance(D_ns, float(phi))
        from scipy.linalg import cho_solve

        A = cho_solve((L, True), r_ns.T)  # (n, m)
        for t in t_idx:
            mean[t] = A.T @ draws.W[t]
        if rng is not None:
            C = exp_covariance(D_nn, float(phi)) - r_ns @ A
            C = C + jitter * np.eye(m)
            Lc = cholesky_with_jitter(C, "kriging conditional covariance")
            for t in t_idx:
                samples[t] = mean[t] + Lc @ rng.standard_normal((m, r))
    return mean, samples


def richness_stats(draws: PosteriorDraws, site=None, x=None) -> RichnessSummary:
    """Posterior mean and variance of site richness (species count).

    Per draw, the variance of a sum of dependent presence indicators is
    sum_j p_j(1-p_j) + 2 * sum_{j<j'} (p11_jj' - p_j p_j'), with the
    joint-presence cells evaluated analytically; the posterior variance
    adds the between-draw variance of expected richness. The
    independence variance zeroes the covariance sum.
    """
    xv = _resolve_x(draws, site, x)
    T, S = draws.B.shape[0], draws.B.shape[1]
    sds = _marginal_sds(draws)
    mus = (draws.B @ xv) / sds  # (T, S)
    p = ndtr(mus)

    iu, ju = np.triu_indices(S, k=1)
    p11 = bvn_cdf(mus[:, iu], mus[:, ju], draws.H[:, iu, ju])  # (T, n_pairs)

    mean_per_draw = p.sum(axis=1)
    cov_sum = (p11 - p[:, iu] * p[:, ju]).sum(axis=1)
    var_within = (p * (1.0 - p)).sum(axis=1) + 2.0 * cov_sum
    var_within_indep = (p * (1.0 - p)).sum(axis=1)

    between = float(np.var(mean_per_draw))  # population variance across draws
    return RichnessSummary(
        mean=float(mean_per_draw.mean()),
        variance=max(0.0, float(var_within.mean()) + between),
        independence_variance=max(0.0, float(var_within_indep.mean()) + between),
        between_draw_variance=between,
    )


def homogeneity_odds(draws: PosteriorDraws, j, jp, site=None, x=None):
    """Marginal-homogeneity odds ratio gamma per posterior draw.

    gamma compares the two species' marginal presence odds at one
    location - it measures whether the species are interchangeable, not
    whether they are independent, and involves no joint modeling.
    Returns ``(gamma, log10_gamma)`` arrays of length T; degenerate
    marginals yield the tagged infinities.
    """
    j, jp = draws.species_index(j), draws.species_index(jp)
    xv = _resolve_x(draws, site, x)
    sds = _marginal_sds(draws)
    m1 = (draws.B[:, j, :] @ xv) / sds[:, j]
    m2 = (draws.B[:, jp, :] @ xv) / sds[:, jp]
    # log odds of Phi(m) is log_ndtr(m) - log_ndtr(-m); stable in both tails
    log_gamma = (log_ndtr(m1) - log_ndtr(-m1)) - (log_ndtr(m2) - log_ndtr(-m2))
    with np.errstate(over="ignore"):
        gamma = np.exp(log_gamma)
    return gamma, log_gamma / _LN10


def write_surface_csv(sg: SurfaceGrid, path: str) -> None:
    """Long-format CSV: one row per node, NA for masked summaries."""
    from .io import fmt

    cols = ("mean_log10_theta", "q05", "q95", "p_exceed", "p11_mean", "p00_mean")
    with open(path, "w") as fh:
        fh.write("x,y," + ",".join(cols) + "\n")
        for i in range(sg.nodes.shape[0]):
            fields = [fmt(sg.nodes[i, 0]), fmt(sg.nodes[i, 1])]
            fields += [fmt(getattr(sg, c)[i]) for c in cols]
            fh.write(",".join(fields) + "\n")


def render_surface_png(sg: SurfaceGrid, path: str) -> None:
    """Two-panel heatmap: log10(theta) posterior mean on a symmetric
    diverging scale centered at 0, and mean joint-presence probability."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    lt = sg.mean_log10_theta.reshape(sg.ny, sg.nx)
    p11 = sg.p11_mean.reshape(sg.ny, sg.nx)
    xs = sg.nodes[:, 0].reshape(sg.ny, sg.nx)
    ys = sg.nodes[:, 1].reshape(sg.ny, sg.nx)
    vmax = np.nanmax(np.abs(lt)) or 1.0

    fig, axes = plt.subplots(1, 2, figsize=(11, 4.2), constrained_layout=True)
    im0 = axes[0].pcolormesh(xs, ys, lt, cmap="RdBu_r", vmin=-vmax, vmax=vmax)
    axes[0].set_title(f"mean log10 odds ratio: {sg.species[0]} vs {sg.species[1]}")
    fig.colorbar(im0, ax=axes[0])
    im1 = axes[1].pcolormesh(xs, ys, p11, cmap="viridis", vmin=0.0)
    axes[1].set_title("mean joint presence probability")
    fig.colorbar(im1, ax=axes[1])
    for ax in axes:
        ax.set_xlabel("x")
        ax.set_ylabel("y")
    fig.savefig(path, dpi=130)
    plt.close(fig)
