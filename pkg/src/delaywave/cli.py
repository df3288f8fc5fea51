"""Command-line experiment runner: ``delaywave {analyze,simulate,stationary,verify}``.

Exit codes: 0 success, 1 validation or usage error, 2 failed verification
check, 3 simulation divergence.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import math
import sys
from importlib import resources
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__
from .config import BUILTIN_CONFIGS, builtin_config, load_config
from .delay import delay_semigroup_decay, green_operator, series_criterion, stability_criterion
from .exceptions import ConfigError, SimulationDiverged
from .operators import inverse_block, semigroup_norm
from .sde import order_check, simulate_paths
from .spectral import (bound_reports, decay_envelope, gamma_bounds, gpg_numeric_growth_bound,
                       resolvent_bound_imag_axis, resolvent_norm, uniform_resolvent_bound)
from .stationarity import (cauchy_diagnostic, example_thresholds, levy_additive_condition,
                           sufficient_condition_levy, sufficient_condition_wiener)
from .verification import CHECKS, run_checks

EXIT_OK, EXIT_INVALID, EXIT_VERIFY, EXIT_DIVERGED = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def load_schema():
    text = (resources.files("delaywave") / "csv_schema.yaml").read_text()
    return yaml.safe_load(text)


# -- output helpers ------------------------------------------------------------


class Writer:
    """Writes CSVs with the provenance header and remembers what was written."""

    def __init__(self, cfg, out_dir, grids):
        self.cfg = cfg
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.schema = load_schema()
        self.grids = grids
        self.written = []
        self.text = []
        self.stamp = _dt.datetime.now(_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")

    def header(self):
        c = self.cfg
        grid_txt = " ".join(f"{k}={v}" for k, v in self.grids.items())
        return [
            f"# delaywave {__version__}",
            f"# config: {c.source} sha256={c.sha256}",
            f"# seed: {c.seed}",
            f"# n_modes: {c.n_modes if c.n_modes is not None else 'n/a'}",
            f"# grids: {grid_txt}",
            f"# versions: numpy={np.__version__} scipy={scipy.__version__} pyyaml={yaml.__version__}",
            f"# generated: {self.stamp}",
        ]

    def columns(self, name, n_modes=None):
        cols = []
        for c in self.schema[name]["columns"]:
            if c == "mode_{n}":
                cols.extend(f"mode_{k}" for k in range(1, n_modes + 1))
            else:
                cols.append(c)
        return cols

    def csv(self, name, rows, n_modes=None):
        if "csv" not in self.cfg.output["formats"]:
            return
        cols = self.columns(name, n_modes)
        buf = io.StringIO()
        buf.write("\n".join(self.header()) + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for r in rows:
            if len(r) != len(cols):
                raise RuntimeError(f"{name}: row has {len(r)} fields, schema has {len(cols)}")
            w.writerow([_fmt(v) for v in r])
        (self.dir / name).write_text(buf.getvalue())
        self.written.append(name)

    def line(self, s=""):
        self.text.append(s)
        print(s)

    def finish(self, stem):
        if "text" in self.cfg.output["formats"]:
            body = "\n".join(self.header()) + "\n" + "\n".join(self.text) + "\n"
            (self.dir / f"{stem}.txt").write_text(body)
        echo = "\n".join(self.header()) + "\n" + yaml.safe_dump(_plain(self.cfg.settings), sort_keys=True)
        (self.dir / "config_echo.yaml").write_text(echo)


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, dict):
        return json.dumps(_plain(v), sort_keys=True)
    return str(v)


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def _need_model(cfg):
    if cfg.scenario is None:
        raise ConfigError("operator", "this command needs a scenario or operator section")
    return cfg.scenario


# -- subcommands -------------------------------------------------------------------


def cmd_analyze(cfg, out):
    sc = _need_model(cfg)
    op, F = sc.op, sc.F
    an = cfg.analysis
    b_cut = an["b_cutoff"] or 100.0
    w = Writer(cfg, out, dict(b_cutoff=b_cut, a_grid=_grid_txt(an["a_grid"]), h=cfg.simulation["h"]))
    reports = bound_reports(op, an["a_grid"])
    w.csv("bounds.csv", [r.row() for r in reports])
    w.line(f"spectral abscissa omega_s = {op.spectral_abscissa():.6g}")
    for r in reports:
        w.line(r.text())
    if not any(r.omega_g_upper < 0 for r in reports):
        w.line("no negative growth bound: decay is not certified")

    gpg = gpg_numeric_growth_bound(op, an["a_grid"])
    w.csv("gpg_lines.csv", list(gpg.line_sups))
    w.line(f"resolvent sweep: {gpg.status}, certificate={gpg.certificate}, cap={gpg.cap:.4g}")

    if op.alpha > 0:
        inv = inverse_block(op).norm()
        bs = np.linspace(-b_cut, b_cut, 2001)
        exact = resolvent_norm(op, 1j * bs)
        uni = uniform_resolvent_bound(op.alpha, op.gamma, 1.0 / inv)
        rows = []
        for c in an["c"]:
            rb = resolvent_bound_imag_axis(op.alpha, op.gamma, inv, c)
            bound = rb(bs)
            rows.extend([b, e, c, v, uni] for b, e, v in zip(bs, exact, bound))
            w.line(f"c={c}: max(exact - bound) = {float(np.max(exact - bound)):.4g}")
        w.csv("resolvent.csv", rows)
        w.line(f"sup |R(ib)| = {float(exact.max()):.6g}; uniform bound {uni:.6g}")

    lyap = [r for r in reports if r.method == "lyapunov"]
    if lyap:
        r = lyap[0]
        t = np.linspace(0.0, an["envelope_T"], an["envelope_points"])
        sn = semigroup_norm(op, t)
        env = r.decay_M * np.exp(-r.decay_mu * t)
        w.csv("envelope.csv", [[a, b, c] for a, b, c in zip(t, sn, env)])
        w.line(f"decay envelope M={r.decay_M:.6g} mu={r.decay_mu:.6g}; "
               f"max(norm - envelope) = {float(np.max(sn - env)):.3g}")

    if not F.is_zero and op.spectral_abscissa() < 0:
        a_vals = an["a_grid"] or [0.0, -0.1, -0.2, -0.3, -0.4, -0.5]
        rows = []
        for a in a_vals:
            if not a > op.spectral_abscissa():
                continue
            cr = stability_criterion(a, F, op)
            sr = series_criterion(a, F, op)
            rows.append([a, cr.holds, cr.lhs, cr.rhs, sr.q_a, sr.certified])
            w.line(f"delay criterion a={a:.4g}: {'holds' if cr.holds else 'fails'} "
                   f"(lhs={cr.lhs:.4g}, rhs={cr.rhs:.4g}); series q_a={sr.q_a:.4g}")
        w.csv("delay_criteria.csv", rows)
        T = 20.0 * F.horizon
        G = green_operator(op, F, T, cfg.simulation["h"])
        w.csv("green.csv", G.csv_rows())
        fit = delay_semigroup_decay(G)
        w.line(f"Green operator fit: M={fit.M:.4g} gamma={fit.gamma:.4g} {fit.reason}".rstrip())

    if sc.params.get("c1") is not None:
        p = sc.params
        th = example_thresholds(p["alpha"], p["c1"], p["c2"])
        w.csv("thresholds.csv", [[p["alpha"], p["c1"], p["c2"], th.delay_bound, th.gamma, th.beta_max,
                                  th.kappa_literal, th.kappa_direct, th.reason]])
        w.line(f"delay_bound={th.delay_bound:.6g} gamma={th.gamma} beta_max={th.beta_max} "
               f"kappa_literal={th.kappa_literal:.6g} kappa_direct={th.kappa_direct:.6g} {th.reason}".rstrip())
    w.finish("analyze")
    return EXIT_OK


def _grid_txt(a_grid):
    if a_grid is None:
        return "default"
    return f"[{min(a_grid):g},{max(a_grid):g}]x{len(a_grid)}"


def cmd_simulate(cfg, out):
    sc = _need_model(cfg)
    sim = cfg.simulation
    init, _ = cfg.inits()
    w = Writer(cfg, out, dict(T=sim["T"], h=sim["h"], record_stride=sim["record_stride"], paths=sim["paths"]))
    res = simulate_paths(sc.op, sc.F, sc.diffusion, sc.noise, init, sim["T"], sim["h"], cfg.seed,
                         sim["paths"], scheme=sim["scheme"], record_stride=sim["record_stride"])
    n = sc.A.n_modes
    w.csv("moments.csv", res.csv_rows(), n_modes=n)
    sup = res.running_sup()
    w.csv("segment_moment.csv", [[t, s, r] for t, s, r in zip(res.times, res.segment_sq[0], sup)])
    w.line(f"simulated {sim['paths']} paths to T={sim['T']} with h={sim['h']} ({sim['scheme']} scheme)")
    w.line(f"E||y(T)||^2 = {res.mean_sq[0][-1]:.6g}; running sup of segment moment = {sup[-1]:.6g}")
    if res.jump_count:
        w.line(f"jumps applied: {res.jump_count}")
    if sim["richardson"]:
        d = sc.diffusion
        if d.kind == "zero":
            L = np.zeros((sc.op.dim, sc.noise.noise_dim))
        elif d.kind == "additive":
            L = d.L
        else:
            raise ConfigError("simulation.richardson", "the order check needs zero or additive diffusion")
        if sc.noise.jump is not None:
            raise ConfigError("simulation.richardson", "the order check needs Wiener noise")
        oc = order_check(sc.op, sc.F, L, sc.noise, init, sim["T"], sim["h"], cfg.seed, sim["paths"])
        w.csv("richardson.csv", [[sim["h"], oc.coarse], [sim["h"] / 2, oc.fine], [float("nan"), oc.ratio]])
        w.line(f"Richardson: deviation h={oc.coarse:.4g}, h/2={oc.fine:.4g}, ratio={oc.ratio:.4g}")
    w.finish("simulate")
    return EXIT_OK


def stationarity_verdict(sc, h):
    """Dispatch to the applicable theorem; ``M, gamma`` from the scenario thresholds or a Green fit."""
    noise, diff, F = sc.noise, sc.diffusion, sc.F
    p = sc.params
    th = None
    if p.get("c1") is not None:
        th = example_thresholds(p["alpha"], p["c1"], p["c2"])
    if th is not None and th.gamma is not None:
        M, gamma, source = 1.0, th.gamma, "example_thresholds"
    else:
        G = green_operator(sc.op, F, 20.0 * F.horizon, h)
        fit = delay_semigroup_decay(G)
        M, gamma, source = fit.M, fit.gamma, "green_fit"
        if not (fit.decaying and math.isfinite(gamma)):
            gamma = 0.0
    if diff.kind == "lipschitz":
        a1, a2 = diff.alpha1, diff.alpha2
        r = diff.horizon
        kappa = sum(wt for _, wt in diff.kappa)
    else:
        a1 = a2 = 0.0
        r, kappa = F.horizon, 0.0
    if noise.jump is not None and not noise.has_gaussian and diff.kind == "additive" \
            and not noise.second_moment_finite:
        return levy_additive_condition(noise, M, gamma, source)
    if gamma <= 0:
        gamma = 1e-300
    if noise.jump is not None:
        return sufficient_condition_levy(M, gamma, a1, a2, r, kappa, noise.trace_q, noise.second_moment_nu, source)
    return sufficient_condition_wiener(M, gamma, a1, a2, r, kappa, source)


def cmd_stationary(cfg, out):
    sc = _need_model(cfg)
    sim, an = cfg.simulation, cfg.analysis
    init, alt = cfg.inits()
    w = Writer(cfg, out, dict(T=max(an["checkpoints"]) + an["s_offset"], h=sim["h"],
                              checkpoints=an["checkpoints"], s_offset=an["s_offset"],
                              dictionary_size=an["dictionary_size"], paths=sim["paths"]))
    v = stationarity_verdict(sc, sim["h"])
    w.csv("verdict.csv", [v.row() + [v.inputs]])
    w.line(f"theorem {v.theorem}: lhs={v.condition_lhs:.6g} rhs={v.condition_rhs:.6g} "
           f"-> {'holds' if v.holds else 'does not hold'} (constants from {v.source})")
    tab = cauchy_diagnostic(sc.op, sc.F, sc.diffusion, sc.noise, init, an["checkpoints"], an["s_offset"],
                            sim["h"], cfg.seed, sim["paths"], an["dictionary_size"], alt_init=alt, verdict=v,
                            record_stride=sim["record_stride"])
    if tab.warning:
        w.line(f"warning: {tab.warning}")
    w.csv("cauchy.csv", tab.rows)
    w.csv("uniqueness.csv", tab.uniqueness)
    w.csv("contraction.csv", list(zip(tab.contraction_times, tab.contraction)))
    w.csv("moment_proxy.csv", list(zip(tab.moment_times, tab.moment_running_sup)))
    for t, s, d in tab.rows:
        w.line(f"d_hat(t={t:g}, t+{s:g}) = {d:.4g}")
    w.line(f"strictly decreasing: {tab.strictly_decreasing()}")
    for t, d in tab.uniqueness:
        w.line(f"d_hat between initial conditions at t={t:g}: {d:.4g}")
    ok, q, hlf = tab.moment_stabilized()
    w.line(f"contraction rate {tab.contraction_rate:.4g}; moment proxy stabilized: {ok} ({q:.4g} vs {hlf:.4g})")
    w.finish("stationary")
    return EXIT_OK


def cmd_verify(cfg, out):
    vs = cfg.verify
    w = Writer(cfg, out, dict(scale=vs["scale"], fault=vs["fault"]))
    only = vs["only"]
    if only is not None:
        known = {n for n, _ in CHECKS}
        for name in only:
            if name not in known:
                raise ConfigError("verify.only", f"unknown check {name!r}")
    rows = run_checks(vs["scale"], None if vs["fault"] == "none" else vs["fault"], only)
    w.csv("verify.csv", [[r.name, r.measured, r.bound, r.passed, r.detail] for r in rows])
    for r in rows:
        w.line(r.line())
    failed = [r.name for r in rows if not r.passed]
    w.line(f"{len(rows) - len(failed)}/{len(rows)} checks passed" + (f"; failed: {', '.join(failed)}" if failed else ""))
    w.finish("verify")
    return EXIT_VERIFY if failed else EXIT_OK


COMMANDS = dict(analyze=cmd_analyze, simulate=cmd_simulate, stationary=cmd_stationary, verify=cmd_verify)


def build_parser():
    p = _Parser(prog="delaywave", description="Stability and stationarity experiments for damped delay wave models.")
    p.add_argument("--version", action="version", version=f"delaywave {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name, help=COMMANDS[name].__name__.replace("cmd_", "") + " subcommand")
        s.add_argument("--config", required=True,
                       help=f"config file, or the name of a built-in one {list(BUILTIN_CONFIGS)}")
        s.add_argument("--out", help="output directory (default: output.directory from the config)")
        s.add_argument("--seed", type=_u64, help="master seed, overrides the config")
        s.add_argument("--paths", type=_positive, help="number of Monte Carlo paths")
        s.add_argument("--modes", type=_positive, help="number of retained modes N")
    return p


def _u64(s):
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(s):
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required: " + ", ".join(COMMANDS))
        path = args.config
        if not Path(path).exists() and path in BUILTIN_CONFIGS:
            path = builtin_config(path)
        cfg = load_config(path, seed=args.seed, paths=args.paths, modes=args.modes)
        out = args.out or cfg.output["directory"]
        return COMMANDS[args.command](cfg, out)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_INVALID
    except SimulationDiverged as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except ValueError as e:
        # ConfigError and the package's precondition errors are all ValueErrors
        print(f"validation error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
