"""Command-line front end.

Subcommands: simulate (synthetic community with ground truth), fit
(Gibbs chain over a sites/species CSV pair), surfaces (per-pair
odds-ratio grids from stored draws), richness (per-site moments),
ordinal (K x K table odds ratios), report (per-pair posterior summary
table), project (lon/lat to planar km). Every run writes a manifest
with the resolved config, its hash, library versions and wall time;
identical config and seed reproduce output files byte for byte.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict

import numpy as np

from . import __version__
from .errors import IngestError, JsdmError
from .inference import (
    make_grid,
    odds_surface,
    render_surface_png,
    richness_stats,
    write_surface_csv,
)
from .io import (
    acquire_lock,
    fmt,
    read_presence_csvs,
    sha256_of_dict,
    standardize_columns,
    write_json,
    write_presence_csvs,
)
from .model import (
    ModelParams,
    PresenceData,
    assemble_sigma_star,
    default_phi,
    exp_covariance_matrix,
    pair_latent_params,
)
from .ordinal import (
    cumulative_odds,
    global_odds,
    local_odds,
    ordinal_table_from_gaussian,
    read_ordinal_csv,
    write_ordinal_csv,
)
from .prob_core import log10_odds_ratio_bvn
from .sampler import ChainConfig, cholesky_with_jitter, export_draws, load_draws, run
from .simulate import simulate_community

_EARTH_RADIUS_KM = 6371.0088


def worker_count() -> int:
    """Worker cap: JSDM_ODDS_THREADS env var, else the CPU count."""
    env = os.environ.get("JSDM_ODDS_THREADS", "")
    if env.strip():
        try:
            return max(1, int(env))
        except ValueError:
            raise JsdmError(f"JSDM_ODDS_THREADS must be an integer, got {env!r}") from None
    return max(1, os.cpu_count() or 1)


def ingest(sites_csv: str, species_csv: str, verbose: bool = True) -> PresenceData:
    """Load and validate the two-file schema into PresenceData.

    Covariate columns are standardized to mean 0, sd 1 and an intercept
    column is prepended.
    """
    site_ids, coords, covs, cov_names, Y, species_names = read_presence_csvs(
        sites_csv, species_csv
    )
    n = len(site_ids)
    if covs.shape[1]:
        covs = standardize_columns(covs)
    X = np.column_stack([np.ones(n), covs])
    data = PresenceData(
        Y=Y, X=X, coords=coords, species_names=species_names, site_ids=site_ids
    )
    if verbose:
        total = data.n * data.S
        ones = int(data.Y.sum())
        print(
            f"ingested {data.n} sites x {data.S} species "
            f"({len(cov_names)} covariates, standardized); "
            f"presences {ones} ({100.0 * ones / total:.2f}% of {total})"
        )
    return data


def _merge_config(args: argparse.Namespace, keys: list[str]) -> dict:
    """Start from --config JSON (if any), override with explicit flags."""
    cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = json.load(fh)
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    return cfg


def _write_manifest(out_dir: str, command: str, cfg: dict, seed, outputs, t0: float) -> None:
    doc = {
        "command": command,
        "config": cfg,
        "config_hash": sha256_of_dict(cfg),
        "seed": seed,
        "versions": {
            "jsdm_odds": __version__,
            "numpy": np.__version__,
            "python": sys.version.split()[0],
        },
        "wall_time_s": round(time.monotonic() - t0, 3),
        "outputs": sorted(outputs),
    }
    import scipy

    doc["versions"]["scipy"] = scipy.__version__
    write_json(doc, os.path.join(out_dir, "manifest.json"))


def _parse_pairs(spec: str):
    pairs = []
    for chunk in spec.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(":")
        if len(parts) != 2:
            raise JsdmError(f"--pairs entries must look like A:B, got {chunk!r}")
        pairs.append((parts[0].strip(), parts[1].strip()))
    if not pairs:
        raise JsdmError("--pairs selected no pairs")
    return pairs


def _parse_grid(spec: str):
    try:
        nx, ny = (int(v) for v in spec.split(","))
    except ValueError:
        raise JsdmError(f"--grid must be NX,NY integers, got {spec!r}") from None
    return nx, ny


def _maybe_int(s: str):
    try:
        return int(s)
    except ValueError:
        return s


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------

def _generate_truth(cfg: dict, rng: np.random.Generator):
    n = int(cfg.get("n", 200))
    S = int(cfg.get("species", 6))
    p_cov = int(cfg.get("covariates", 2))
    r = int(cfg.get("factors", 2))
    coords = rng.uniform(0.0, 1.0, (n, 2))

    # smooth covariate fields: GP draws, then standardized
    if p_cov:
        Rc = exp_covariance_matrix(coords, 3.0)
        Lc = cholesky_with_jitter(Rc, "covariate field correlation")
        covs = standardize_columns(Lc @ rng.standard_normal((n, p_cov)))
    else:
        covs = np.zeros((n, 0))
    X = np.column_stack([np.ones(n), covs])

    if "B" in cfg:
        B = np.asarray(cfg["B"], dtype=float)
    else:
        B = np.column_stack(
            [rng.normal(-0.5, 0.5, S), rng.normal(0.0, 0.5, (S, p_cov))]
        ) if p_cov else rng.normal(-0.5, 0.5, (S, 1))
    if "Lambda" in cfg:
        Lam = np.asarray(cfg["Lambda"], dtype=float)
    else:
        Lam = rng.normal(0.0, 0.7, (S, r))
        for j in range(min(S, r)):
            Lam[j, j + 1:] = 0.0
            Lam[j, j] = abs(Lam[j, j]) + 0.3
    phi = float(cfg["phi"]) if cfg.get("phi") else default_phi(coords)
    params = ModelParams(B=B, Lambda=Lam, sigma2_eps=float(cfg.get("sigma2_eps", 1.0)), phi=phi)
    return params, coords, X


def cmd_simulate(args) -> int:
    t0 = time.monotonic()
    cfg = _merge_config(args, ["n", "species", "covariates", "factors", "phi", "seed"])
    cfg.setdefault("seed", 0)
    cfg["spatial"] = args.spatial != "off"
    seed = int(cfg["seed"])
    out = args.out
    os.makedirs(out, exist_ok=True)
    with acquire_lock(out):
        rng = np.random.default_rng(seed)
        params, coords, X = _generate_truth(cfg, rng)
        data = simulate_community(params, coords, X, rng, spatial=cfg["spatial"])

        cov_names = [f"c{k + 1}" for k in range(X.shape[1] - 1)]
        sites_path = os.path.join(out, "sites.csv")
        species_path = os.path.join(out, "species.csv")
        write_presence_csvs(
            data.site_ids, coords, X[:, 1:], cov_names, data.Y, data.species_names,
            sites_path, species_path,
        )

        H = assemble_sigma_star(params.Lambda, params.sigma2_eps).H
        probe_sites = range(0, data.n, max(1, data.n // 50))
        pair_truth = []
        for j in range(params.S):
            for jp in range(j + 1, params.S):
                lts = [
                    log10_odds_ratio_bvn(
                        pair_latent_params(params, X[i], None, j, jp, "marginal")
                    )
                    for i in probe_sites
                ]
                pair_truth.append(
                    {
                        "species_a": data.species_names[j],
                        "species_b": data.species_names[jp],
                        "H": float(H[j, jp]),
                        "log10_theta_min": min(lts),
                        "log10_theta_max": max(lts),
                    }
                )
        truth_path = os.path.join(out, "truth.json")
        write_json(
            {
                "B": params.B.tolist(),
                "Lambda": params.Lambda.tolist(),
                "phi": params.phi,
                "sigma2_eps": params.sigma2_eps,
                "spatial": cfg["spatial"],
                "seed": seed,
                "species_names": list(data.species_names),
                "pair_summaries": pair_truth,
            },
            truth_path,
        )
        ones = int(data.Y.sum())
        print(
            f"simulated {data.n} sites x {data.S} species; presences {ones} "
            f"({100.0 * ones / (data.n * data.S):.2f}%)"
        )
        _write_manifest(out, "simulate", cfg, seed,
                        [sites_path, species_path, truth_path], t0)
    return 0


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------

def cmd_fit(args) -> int:
    t0 = time.monotonic()
    keys = ["iterations", "burn_in", "thin", "factors", "phi", "seed",
            "prior_var_b", "prior_var_lambda"]
    cfg = _merge_config(args, keys)
    cfg.setdefault("seed", 0)
    cfg["spatial"] = args.spatial != "off"
    if args.phi_grid:
        cfg["phi_grid"] = [float(v) for v in args.phi_grid.split(",")]
    out = args.out
    os.makedirs(out, exist_ok=True)
    with acquire_lock(out):
        data = ingest(args.sites, args.species)
        config = ChainConfig(
            iterations=int(cfg.get("iterations", 2000)),
            burn_in=int(cfg.get("burn_in", 1000)),
            thin=int(cfg.get("thin", 1)),
            r=int(cfg.get("factors", 3)),
            spatial=bool(cfg["spatial"]),
            phi=float(cfg["phi"]) if cfg.get("phi") else None,
            phi_grid=tuple(cfg["phi_grid"]) if cfg.get("phi_grid") else None,
            prior_var_B=float(cfg.get("prior_var_b", 100.0)),
            prior_var_Lambda=float(cfg.get("prior_var_lambda", 1.0)),
            seed=int(cfg["seed"]),
            checkpoint_path=os.path.join(out, "checkpoint.json"),
        )
        draws = run(data, config)
        draws_dir = os.path.join(out, "draws")
        export_draws(draws, draws_dir)
        print(
            f"stored {draws.n_draws} draws "
            f"({config.iterations} sweeps, burn-in {config.burn_in}, thin {config.thin})"
        )
        _write_manifest(out, "fit", {**cfg, "sites": args.sites, "species": args.species},
                        config.seed, [draws_dir], t0)
    return 0


# ---------------------------------------------------------------------------
# surfaces / report / richness
# ---------------------------------------------------------------------------

def _surface_one(draws, nodes, nx, ny, pair, method, seed, out, png, max_dist):
    a, b = (_maybe_int(pair[0]), _maybe_int(pair[1]))
    rng = np.random.default_rng(seed) if method != "analytic" else None
    sg = odds_surface(
        draws, nodes, a, b, nx=nx, ny=ny, method=method, rng=rng, max_dist=max_dist
    )
    tag = f"{sg.species[0]}_{sg.species[1]}"
    csv_path = os.path.join(out, f"surface_{tag}.csv")
    write_surface_csv(sg, csv_path)
    written = [csv_path]
    if png:
        png_path = os.path.join(out, f"surface_{tag}.png")
        render_surface_png(sg, png_path)
        written.append(png_path)
    return written


def cmd_surfaces(args) -> int:
    t0 = time.monotonic()
    cfg = _merge_config(args, ["pairs", "grid", "method", "seed", "max_dist"])
    cfg.setdefault("seed", 0)
    cfg.setdefault("method", "analytic")
    if "pairs" not in cfg:
        raise JsdmError("surfaces requires --pairs A:B[,C:D...]")
    nx, ny = _parse_grid(cfg.get("grid", "10,10"))
    pairs = _parse_pairs(cfg["pairs"])
    out = args.out
    os.makedirs(out, exist_ok=True)
    with acquire_lock(out):
        draws = load_draws(args.draws)
        nodes = make_grid(draws.coords, nx, ny)
        seeds = np.random.SeedSequence(int(cfg["seed"])).spawn(len(pairs))
        outputs = []
        with ThreadPoolExecutor(max_workers=min(worker_count(), len(pairs))) as pool:
            futs = [
                pool.submit(
                    _surface_one, draws, nodes, nx, ny, pair, cfg["method"],
                    seeds[i], out, args.png, cfg.get("max_dist"),
                )
                for i, pair in enumerate(pairs)
            ]
            for f in futs:
                outputs.extend(f.result())
        print(f"wrote {len(outputs)} surface files for {len(pairs)} pair(s) "
              f"on a {nx} x {ny} grid ({cfg['method']})")
        _write_manifest(out, "surfaces", {**cfg, "grid": f"{nx},{ny}", "draws": args.draws},
                        int(cfg["seed"]), outputs, t0)
    return 0


def cmd_report(args) -> int:
    t0 = time.monotonic()
    cfg = _merge_config(args, ["pairs"])
    if "pairs" not in cfg:
        raise JsdmError("report requires --pairs A:B[,C:D...]")
    pairs = _parse_pairs(cfg["pairs"])
    out = args.out
    os.makedirs(out, exist_ok=True)
    with acquire_lock(out):
        draws = load_draws(args.draws)
        path = os.path.join(out, "report.csv")
        with open(path, "w") as fh:
            fh.write(
                "species_a,species_b,posterior_mean_H,"
                "mean_log10_theta_min,mean_log10_theta_max,"
                "p_exceed_min,p_exceed_max\n"
            )
            for a_raw, b_raw in pairs:
                a = draws.species_index(_maybe_int(a_raw))
                b = draws.species_index(_maybe_int(b_raw))
                sg = odds_surface(draws, draws.coords, a, b)
                h_mean = float(draws.H[:, a, b].mean())
                fh.write(
                    ",".join(
                        [
                            draws.species_names[a],
                            draws.species_names[b],
                            fmt(h_mean),
                            fmt(np.nanmin(sg.mean_log10_theta)),
                            fmt(np.nanmax(sg.mean_log10_theta)),
                            fmt(np.nanmin(sg.p_exceed)),
                            fmt(np.nanmax(sg.p_exceed)),
                        ]
                    )
                    + "\n"
                )
        print(f"wrote per-pair posterior summary for {len(pairs)} pair(s)")
        _write_manifest(out, "report", {**cfg, "draws": args.draws}, None, [path], t0)
    return 0


def cmd_richness(args) -> int:
    t0 = time.monotonic()
    out = args.out
    os.makedirs(out, exist_ok=True)
    with acquire_lock(out):
        draws = load_draws(args.draws)
        path = os.path.join(out, "richness.csv")
        with open(path, "w") as fh:
            fh.write("site_id,mean,variance,independence_variance,between_draw_variance\n")
            for i in range(draws.n):
                rs = richness_stats(draws, site=i)
                sid = draws.site_ids[i] if draws.site_ids else f"site{i + 1}"
                fh.write(
                    f"{sid},{fmt(rs.mean)},{fmt(rs.variance)},"
                    f"{fmt(rs.independence_variance)},{fmt(rs.between_draw_variance)}\n"
                )
        print(f"wrote richness moments for {draws.n} sites")
        _write_manifest(out, "richness", {"draws": args.draws}, None, [path], t0)
    return 0


# ---------------------------------------------------------------------------
# ordinal / project
# ---------------------------------------------------------------------------

def cmd_ordinal(args) -> int:
    t0 = time.monotonic()
    out = args.out
    os.makedirs(out, exist_ok=True)
    with acquire_lock(out):
        outputs = []
        if args.table:
            table = read_ordinal_csv(args.table)
            cfg = {"table": args.table}
        elif args.gaussian:
            try:
                mu1, mu2, rho = (float(v) for v in args.gaussian.split(","))
            except ValueError:
                raise JsdmError(
                    f"--gaussian must be 'mu1,mu2,rho', got {args.gaussian!r}"
                ) from None
            if not (args.cutpoints_a and args.cutpoints_b):
                raise JsdmError("--gaussian needs --cutpoints-a and --cutpoints-b")
            ca = [float(v) for v in args.cutpoints_a.split(",")]
            cb = [float(v) for v in args.cutpoints_b.split(",")]
            table = ordinal_table_from_gaussian(mu1, mu2, rho, ca, cb)
            tpath = os.path.join(out, "derived_table.csv")
            write_ordinal_csv(table, tpath)
            outputs.append(tpath)
            cfg = {"gaussian": args.gaussian, "cutpoints_a": args.cutpoints_a,
                   "cutpoints_b": args.cutpoints_b}
        else:
            raise JsdmError("ordinal requires --table CSV or --gaussian parameters")

        path = os.path.join(out, "ordinal_odds.csv")
        with open(path, "w") as fh:
            fh.write("k,kp,local,global,cumulative\n")
            for k in range(1, table.K):
                for kp in range(1, table.K):
                    fh.write(
                        f"{k},{kp},{fmt(local_odds(table, k, kp))},"
                        f"{fmt(global_odds(table, k, kp))},"
                        f"{fmt(cumulative_odds(table, k, kp))}\n"
                    )
        outputs.append(path)
        print(f"wrote local/global/cumulative odds for a {table.K} x {table.K} table")
        _write_manifest(out, "ordinal", cfg, None, outputs, t0)
    return 0


def cmd_project(args) -> int:
    """Equirectangular lon/lat -> planar km around the dataset centroid."""
    with open(args.sites, newline="") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or not lines[0].startswith("site_id,"):
        raise IngestError(f"{args.sites}: expected a sites CSV with header site_id,x,y,...")
    header = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:] if ln]
    try:
        lon = np.array([float(r[1]) for r in rows])
        lat = np.array([float(r[2]) for r in rows])
    except (ValueError, IndexError) as exc:
        raise IngestError(f"{args.sites}: bad coordinate field ({exc})") from None
    if np.any(np.abs(lat) > 90) or np.any(np.abs(lon) > 360):
        raise IngestError("coordinates do not look like lon/lat degrees")
    lon0, lat0 = float(lon.mean()), float(lat.mean())
    x = _EARTH_RADIUS_KM * math.cos(math.radians(lat0)) * np.radians(lon - lon0)
    y = _EARTH_RADIUS_KM * np.radians(lat - lat0)
    with open(args.out_file, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for i, r in enumerate(rows):
            fh.write(",".join([r[0], fmt(x[i]), fmt(y[i]), *r[3:]]) + "\n")
    print(
        f"projected {len(rows)} sites to planar km (equirectangular about "
        f"lon {lon0:.4f}, lat {lat0:.4f}); distances are approximate away from the centroid"
    )
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jsdm-odds",
        description="Spatial joint species distribution model with odds-ratio inference",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("simulate", help="generate a synthetic community with ground truth")
    ps.add_argument("--out", required=True)
    ps.add_argument("--config")
    ps.add_argument("--seed", type=int)
    ps.add_argument("--n", type=int, help="site count")
    ps.add_argument("--species", type=int)
    ps.add_argument("--covariates", type=int)
    ps.add_argument("--factors", type=int)
    ps.add_argument("--phi", type=float)
    ps.add_argument("--spatial", choices=("on", "off"), default="on")
    ps.set_defaults(func=cmd_simulate)

    pf = sub.add_parser("fit", help="run the Gibbs sampler on a sites/species CSV pair")
    pf.add_argument("--sites", required=True)
    pf.add_argument("--species", required=True)
    pf.add_argument("--out", required=True)
    pf.add_argument("--config")
    pf.add_argument("--seed", type=int)
    pf.add_argument("--iterations", type=int)
    pf.add_argument("--burn-in", dest="burn_in", type=int)
    pf.add_argument("--thin", type=int)
    pf.add_argument("--factors", type=int)
    pf.add_argument("--phi", type=float)
    pf.add_argument("--phi-grid", dest="phi_grid", help="comma-separated decay candidates")
    pf.add_argument("--prior-var-b", dest="prior_var_b", type=float)
    pf.add_argument("--prior-var-lambda", dest="prior_var_lambda", type=float)
    pf.add_argument("--spatial", choices=("on", "off"), default="on")
    pf.set_defaults(func=cmd_fit)

    pu = sub.add_parser("surfaces", help="per-pair odds-ratio surfaces from stored draws")
    pu.add_argument("--draws", required=True, help="draws directory from fit")
    pu.add_argument("--out", required=True)
    pu.add_argument("--config")
    pu.add_argument("--pairs", help='e.g. "sp1:sp2,sp1:sp3" (names or indices)')
    pu.add_argument("--grid", help="NX,NY (default 10,10)")
    pu.add_argument("--method", choices=("analytic", "mc", "conditional"))
    pu.add_argument("--seed", type=int)
    pu.add_argument("--max-dist", dest="max_dist", type=float,
                    help="mask nodes farther than this from any data site")
    pu.add_argument("--png", action="store_true", help="also render heatmaps")
    pu.set_defaults(func=cmd_surfaces)

    pr = sub.add_parser("richness", help="per-site richness moments")
    pr.add_argument("--draws", required=True)
    pr.add_argument("--out", required=True)
    pr.set_defaults(func=cmd_richness)

    po = sub.add_parser("ordinal", help="odds ratios of a K x K ordinal table")
    po.add_argument("--out", required=True)
    po.add_argument("--table", help="ordinal table CSV (K,<K> header)")
    po.add_argument("--gaussian", help="mu1,mu2,rho for a latent-normal table")
    po.add_argument("--cutpoints-a", dest="cutpoints_a")
    po.add_argument("--cutpoints-b", dest="cutpoints_b")
    po.set_defaults(func=cmd_ordinal)

    pp = sub.add_parser("report", help="per-pair posterior summary table")
    pp.add_argument("--draws", required=True)
    pp.add_argument("--out", required=True)
    pp.add_argument("--config")
    pp.add_argument("--pairs")
    pp.set_defaults(func=cmd_report)

    pj = sub.add_parser("project", help="equirectangular lon/lat to planar km")
    pj.add_argument("--sites", required=True)
    pj.add_argument("--out-file", dest="out_file", required=True)
    pj.set_defaults(func=cmd_project)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except JsdmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
