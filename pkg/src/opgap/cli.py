"""Command-line driver: ``opgap <subcommand> --config <path> [options]``.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from typing import Any

import numpy as np

from . import __version__
from .chain import ChainSpecError
from .config import SUBCOMMANDS, ConfigError, RunConfig, load_config, parse_config_text
from .continuum import ContinuumModel, continuum_eigenvalue, mode_peak, wall_offset
from .dynamics import (autocorrelation, fit_decay_rate, half_life, half_life_scaling, sample_tilted_trajectories,
                       sample_trajectories, survival_log_distribution)
from .ruc import RucParams, com_diffusion_check, endpoint_transition_estimate
from .spectral import SpectralError, airy_scale, binding_scan, classify_mode, spectrum_for_spec

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
THREADS_ENV = "OPGAP_THREADS"
# keys that change how a run executes but never its results
_NOT_ECHOED = ("threads",)


class Table:
    """Fixed columns plus rows, and a summary mapping."""

    def __init__(self, columns: list[str], rows: list[tuple], summary: dict[str, Any]):
        self.columns = columns
        self.rows = rows
        self.summary = summary


def _f(x) -> float | None:
    """Plain float, ``None`` for NaN (JSON has no NaN)."""
    if x is None:
        return None
    x = float(x)
    return None if math.isnan(x) else x


# ------------------------------------------------------------------ commands


def cmd_spectrum(cfg: RunConfig) -> Table:
    spec = cfg.chain_spec()
    k = cfg.get("k", 5)
    res, fp = spectrum_for_spec(spec, k)
    labels = classify_mode(res, fp, spec) if spec.gamma_d > 0 else ["extended"] * res.k
    flags = res.within_rounding_window or [False] * res.k
    peaks = res.peak_sites()
    rows = [(n + 1, _f(res.eigenvalues[n]), labels[n], bool(flags[n]), _f(res.residuals[n]), int(peaks[n]))
            for n in range(res.k)]
    summary = {"L": spec.n_sites, "Lambda": _f(fp.Lambda), "a": _f(fp.a), "w": _f(fp.w), "gap": _f(res.gap),
               "airy_scale": _f(airy_scale(fp, spec.gamma_d)), "xi": _f(res.xi), "slowest_label": labels[0],
               "phi1_peak_site": int(peaks[0])}
    return Table(["n", "eigenvalue", "classification", "within_rounding_window", "residual", "phi_peak_site"],
                 rows, summary)


def cmd_modes(cfg: RunConfig) -> Table:
    spec = cfg.chain_spec()
    k = cfg.get("k", 2)
    res, fp = spectrum_for_spec(spec, k)
    n = spec.n_sites
    stride = cfg.get("x_stride", 1)
    x_max = min(cfg.get("x_max", n), n)
    xs = np.arange(1, x_max + 1, stride)
    cols = ["x"] + [f"psi_{j + 1}" for j in range(res.k)] + [f"phi_{j + 1}" for j in range(res.k)]
    rows = []
    for x in xs:
        rows.append((int(x),) + tuple(_f(res.psi_modes[x - 1, j]) for j in range(res.k))
                    + tuple(_f(res.phi_modes[x - 1, j]) for j in range(res.k)))
    summary = {"L": n, "eigenvalues": [_f(v) for v in res.eigenvalues],
               "phi_peak_sites": [int(p) for p in res.peak_sites()], "phi_normalization": "max_abs_1"}
    return Table(cols, rows, summary)


def cmd_scan_binding(cfg: RunConfig) -> Table:
    gammas = cfg.get("gamma")
    g_grid = cfg.get("g")
    if gammas is None or g_grid is None:
        raise ConfigError("scan-binding needs gamma and g grids")
    tpl = cfg.chain_spec(gamma=gammas[0])
    curve = binding_scan(tpl, g_grid, gammas, bond=cfg.get("bond", 1), threads=cfg.threads,
                         rounding_factor=cfg.get("rounding_factor", 1.0), fit_span=cfg.get("fit_span"),
                         ansatz=cfg.get("ansatz", "corrected"))
    rows = []
    for i, gm in enumerate(curve.gamma_values):
        for j, g in enumerate(curve.g_values):
            rows.append((_f(gm), _f(g), _f(curve.Gamma[i, j]), _f(curve.xi[i, j])))
    summary = {"Lambda": _f(curve.Lambda), "g_c": _f(curve.g_c_estimate), "g_c_err": _f(curve.g_c_uncertainty),
               "g_cross": [_f(v) for v in curve.g_cross],
               "energy_exponent": _f(curve.energy_exponent), "energy_exponent_err": _f(curve.energy_exponent_err),
               "xi_exponent": _f(curve.xi_exponent), "xi_exponent_err": _f(curve.xi_exponent_err),
               "fit_points": int(curve.fit_g.size)}
    return Table(["gamma", "g", "Gamma", "xi"], rows, summary)


def cmd_dynamics(cfg: RunConfig) -> Table:
    spec = cfg.chain_spec()
    ts = cfg.get("t")
    if ts is None:
        raise ConfigError("dynamics needs a time grid t")
    q = spec.q if cfg.get("normalize_q", False) else None
    ac = autocorrelation(spec, ts, q=q, rtol=cfg.get("rtol", 1e-10))
    res, _ = spectrum_for_spec(spec, 1)
    window = cfg.get("fit_window", [ts[len(ts) // 2], ts[-1]])
    fit = fit_decay_rate(ac.times, ac.values, tuple(window))
    rows = [(_f(t), _f(c)) for t, c in zip(ac.times, ac.values)]
    summary = {"fitted_rate": _f(fit.rate), "fitted_rate_err": _f(fit.err), "gap": _f(res.gap),
               "relative_deviation": _f((fit.rate - res.gap) / res.gap), "fit_window": [_f(w) for w in window],
               "modes_used": ac.modes_used, "truncation_bound": _f(ac.truncation_bound)}
    return Table(["t", "C2"], rows, summary)


def cmd_trajectories(cfg: RunConfig) -> Table:
    walkers = cfg.get("walkers", 10000)
    gammas = cfg.get("gamma", [])
    if len(gammas) > 1:
        tpl = cfg.chain_spec(gamma=gammas[0])
        sc = half_life_scaling(tpl, gammas, walkers, cfg.seed, threads=cfg.threads,
                               n_times=cfg.get("n_times", 400))
        rows = [(_f(g), _f(t), _f(x)) for g, t, x in zip(sc.gammas, sc.t_half, sc.mean_size)]
        summary = {"beta": _f(sc.beta), "beta_err": _f(sc.beta_err), "size_exponent": _f(sc.size_exponent),
                   "size_exponent_err": _f(sc.size_exponent_err), "walkers": walkers}
        return Table(["gamma", "t_half", "mean_size"], rows, summary)
    spec = cfg.chain_spec()
    horizon = cfg.get("horizon")
    if horizon is None:
        raise ConfigError("trajectories needs a horizon (or a gamma grid for scaling)")
    times = np.linspace(0.0, horizon, cfg.get("n_times", 101))
    sampler = sample_tilted_trajectories if cfg.get("tilted", False) else sample_trajectories
    ens = sampler(spec, walkers, horizon, cfg.seed, times=times, start=cfg.get("start", 1), threads=cfg.threads)
    mean_w, err_w = ens.mean_survival()
    mean_x = ens.mean_position()
    rows = []
    for j, t in enumerate(ens.times):
        st = survival_log_distribution(ens, t, bins=cfg.get("hist_bins", 50))
        rows.append((_f(t), _f(mean_w[j]), _f(err_w[j]), _f(mean_x[j]), _f(st.mean), _f(st.var),
                     _f(st.weighted_var)))
    try:
        t_half = half_life(ens)
    except ValueError:
        t_half = None
    st = survival_log_distribution(ens, cfg.get("hist_t", horizon), bins=cfg.get("hist_bins", 50))
    summary = {"t_half": _f(t_half), "walkers": walkers, "tilted": bool(cfg.get("tilted", False)),
               "hist_t": _f(st.t), "hist_edges": [_f(e) for e in st.edges],
               "hist_counts": [int(c) for c in st.counts]}
    return Table(["t", "mean_survival", "mean_survival_err", "mean_x", "mean_s", "var_s", "weighted_var_s"],
                 rows, summary)


def cmd_ruc_verify(cfg: RunConfig) -> Table:
    qs = cfg.get("ruc_q", [2, 3])
    r = cfg.get("ruc_r", 1.0)
    samples = cfg.get("samples", 100000)
    rows = []
    for q in qs:
        for geom in ("edge", "relative", "com"):
            pr = RucParams(q=q, r=r, geometry=geom)
            rows.append((q, geom, _f(pr.p), _f(pr.w_plus), _f(pr.w_minus), _f(pr.a), _f(pr.w), _f(pr.Lambda),
                         None, None))
        rep = endpoint_transition_estimate(q, samples, cfg.seed, threads=cfg.threads)
        rows.append((q, "gate-oracle", _f(rep.p_exact), None, None, None, None, None, _f(rep.p_hat),
                     _f(rep.std_err)))
    com = com_diffusion_check(r, cfg.get("com_horizon", 100.0), cfg.get("com_walkers", 10000), cfg.seed)
    summary = {"D_com_exact": _f(com.D_exact), "D_com_hat": _f(com.D_hat), "D_com_err": _f(com.D_err),
               "mean_Y": _f(com.mean_Y), "mean_Y_err": _f(com.mean_Y_err)}
    return Table(["q", "geometry", "p", "w_plus", "w_minus", "a", "w", "Lambda", "p_hat", "std_err"], rows,
                 summary)


def cmd_compare_continuum(cfg: RunConfig) -> Table:
    spec = cfg.chain_spec()
    k = cfg.get("k", 5)
    res, fp = spectrum_for_spec(spec, k)
    model = ContinuumModel.from_frame(fp, spec.gamma_d)
    peaks = res.peak_sites()
    rows = []
    for n in range(1, res.k + 1):
        lam_c = continuum_eigenvalue(model, n)
        lam_d = float(res.eigenvalues[n - 1])
        rel = (lam_d - lam_c) / (lam_c - fp.Lambda)
        x_c = mode_peak(model, n) if fp.a > 0 else None
        rows.append((n, _f(lam_d), _f(lam_c), _f(rel), int(peaks[n - 1]), _f(x_c)))
    summary = {"L": spec.n_sites, "Lambda": _f(fp.Lambda), "airy_scale": _f(model.energy_scale),
               "length_scale": _f(model.length_scale),
               "wall_offset": _f(wall_offset(fp.a)) if fp.a > 0 else None}
    return Table(["n", "discrete", "continuum", "relative_deviation", "discrete_peak", "continuum_peak"], rows,
                 summary)


COMMANDS = {
    "spectrum": cmd_spectrum,
    "modes": cmd_modes,
    "scan-binding": cmd_scan_binding,
    "dynamics": cmd_dynamics,
    "trajectories": cmd_trajectories,
    "ruc-verify": cmd_ruc_verify,
    "compare-continuum": cmd_compare_continuum,
}


# ------------------------------------------------------------------- output


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _echo(cfg: RunConfig) -> RunConfig:
    params = {k: v for k, v in cfg.params.items() if k not in _NOT_ECHOED}
    return RunConfig(subcommand=cfg.subcommand, params=params, out=cfg.out, format=cfg.format)


def render(cfg: RunConfig, table: Table) -> str:
    """Serialize a result; identical inputs give identical bytes."""
    echo = _echo(cfg)
    if cfg.format == "json":
        doc = {"version": __version__, "subcommand": cfg.subcommand, "config": echo.to_text(),
               "summary": table.summary, "columns": table.columns,
               "records": [dict(zip(table.columns, row)) for row in table.rows]}
        return json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n"
    buf = io.StringIO()
    buf.write(f"# opgap_version = {__version__}\n")
    buf.write(f"# subcommand = {cfg.subcommand}\n")
    for line in echo.to_text().splitlines():
        buf.write(f"# config: {line}\n")
    for key in sorted(table.summary):
        buf.write(f"# summary: {key} = {json.dumps(table.summary[key], allow_nan=False)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.columns)
    for row in table.rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _parse_cell(text: str):
    if text == "":
        return None
    if text in ("true", "false"):
        return text == "true"
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    return text


def read_output(text: str) -> dict[str, Any]:
    """Parse an emitted CSV or JSON result back into its parts.

    Returns ``version``, ``subcommand``, ``config`` (a re-validated
    :class:`RunConfig`), ``summary``, ``columns`` and ``records``.
    """
    if text.lstrip().startswith("{"):
        doc = json.loads(text)
        cfg = RunConfig(subcommand=doc["subcommand"], params=parse_config_text(doc["config"]), format="json")
        return {"version": doc["version"], "subcommand": doc["subcommand"], "config": cfg,
                "summary": doc["summary"], "columns": doc["columns"], "records": doc["records"]}
    meta, conf, summary, body = {}, [], {}, []
    for line in text.splitlines():
        if line.startswith("# config: "):
            conf.append(line[len("# config: "):])
        elif line.startswith("# summary: "):
            key, val = line[len("# summary: "):].split(" = ", 1)
            summary[key] = json.loads(val)
        elif line.startswith("# "):
            key, val = line[2:].split(" = ", 1)
            meta[key] = val
        else:
            body.append(line)
    rows = list(csv.reader(body))
    columns = rows[0]
    records = [dict(zip(columns, (_parse_cell(c) for c in r))) for r in rows[1:]]
    cfg = RunConfig(subcommand=meta["subcommand"], params=parse_config_text("\n".join(conf)), format="csv")
    return {"version": meta["opgap_version"], "subcommand": meta["subcommand"], "config": cfg,
            "summary": summary, "columns": columns, "records": records}


# --------------------------------------------------------------------- main


def _default_threads() -> int | None:
    env = os.environ.get(THREADS_ENV)
    if env is None:
        return None
    try:
        n = int(env)
    except ValueError as exc:
        raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}") from exc
    if n < 1:
        raise ConfigError(f"{THREADS_ENV} must be >= 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="opgap", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"opgap {__version__}")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, help="key = value config file")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--seed", type=int, help="master seed; overrides the config")
    p.add_argument("--threads", type=int, help=f"worker threads; overrides the config and ${THREADS_ENV}")
    return p


def run(cfg: RunConfig) -> str:
    """Execute a validated config and return the serialized output."""
    return render(cfg, COMMANDS[cfg.subcommand](cfg))


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        if args.threads is not None and args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        threads = args.threads
        cfg = load_config(args.config, args.subcommand, out=args.out, fmt=args.format, seed=args.seed,
                          threads=threads)
        if threads is None and "threads" not in cfg.params:
            env = _default_threads()
            if env is not None:
                cfg.params["threads"] = env
        text = run(cfg)
    except (ConfigError, ChainSpecError) as exc:
        print(f"opgap: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"opgap: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (SpectralError, ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"opgap: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    try:
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except OSError as exc:
        print(f"opgap: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
