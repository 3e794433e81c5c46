"""Command-line interface.

Subcommands: ``simulate`` (write a trial panel), ``identify`` (check a
causal graph), ``estimate`` (weighted risks from a panel), ``oracle-
check`` (exact g-formula versus weighted-representation agreement), and
``reproduce`` (the full simulation study at a chosen scale).

Exit codes: 0 success, 2 configuration problems, 3 data or validation
problems, 4 numerical or positivity failures. All data outputs are
byte-deterministic given the config; manifests record their hashes.
"""

from __future__ import annotations

import argparse
import os
import sys
import time

from . import __version__
from .config import load_estimation, load_scenario
from .errors import ConfigError, DataError, NumericalError, SepadhError
from .graphs import check_identification, load_fixture, parse_dag
from .ipw import estimate_separable, weighted_marginal
from .manifest import RunManifest, sha256_file
from .oracle import DiscreteDgp, check_equivalence, markov_gformula
from .panel import emit_csv, ingest_csv
from .render import prevalence_plot, risk_plot
from .risk import empirical_cumulative_incidence
from .simulate import ScenarioConfig, simulate_counterfactual, simulate_trial


def _out_dir(args):
    out = args.out_dir or os.environ.get("SEPADH_OUT_DIR") or "."
    os.makedirs(out, exist_ok=True)
    return out


def _manifest(args, command, config_path=None, seeds=None):
    m = RunManifest(command=command, version=__version__,
                    seeds=dict(seeds or {}))
    if config_path:
        m.config_path = os.path.basename(config_path)
        m.config_sha256 = sha256_file(config_path)
    return m


def cmd_simulate(args):
    t0 = time.perf_counter()
    cfg = load_scenario(args.config, seed_override=args.seed)
    if args.counterfactual is not None:
        z_a, z_y = args.counterfactual
        panel = simulate_counterfactual(cfg, z_a, z_y)
        name = f"panel_za{z_a}_zy{z_y}.csv"
    else:
        panel = simulate_trial(cfg)
        name = "panel.csv"
    out = _out_dir(args)
    path = os.path.join(out, name)
    emit_csv(panel, path)
    manifest = _manifest(args, "simulate", args.config,
                         seeds={"simulation": cfg.seed})
    manifest.add_output(name, path)
    manifest.wall_clock_s = round(time.perf_counter() - t0, 3)
    manifest.write(os.path.join(out, "manifest.json"))
    print(f"wrote {path}: {panel.n_individuals} individuals, "
          f"{len(panel)} person-periods, horizon {panel.horizon}")
    return 0


def cmd_identify(args):
    if args.fixture:
        dag = load_fixture(args.fixture)
        source = f"fixture {args.fixture}"
    else:
        with open(args.graph, "r", encoding="utf-8") as fh:
            dag = parse_dag(fh.read())
        source = args.graph
    report = check_identification(dag)
    print(f"graph: {source}")
    print(report.render(), end="")
    return 0


def cmd_estimate(args):
    cfg = load_estimation(args.config, seed_override=args.seed)
    with open(args.panel, "r", encoding="utf-8") as fh:
        panel = ingest_csv(fh)
    specs = cfg.specs
    if not panel.has_crossover:
        specs = {k: v for k, v in specs.items() if k != "crossover"}
    t0 = time.perf_counter()
    report = estimate_separable(
        panel, cfg.z_a, cfg.z_y, variant=cfg.variant,
        simplified=cfg.simplified, crossover=cfg.crossover,
        specs=specs, bootstrap=cfg.replicates or None,
        seed=cfg.boot_seed, level=cfg.level, threads=args.threads)
    out = _out_dir(args)
    manifest = _manifest(args, "estimate", args.config,
                         seeds={"bootstrap": cfg.boot_seed})
    sep_path = os.path.join(out, "separable_risk.csv")
    report.curve.to_csv(sep_path)
    manifest.add_output("separable_risk.csv", sep_path)
    cmp_path = os.path.join(out, "comparator_risk.csv")
    report.comparator.to_csv(cmp_path)
    manifest.add_output("comparator_risk.csv", cmp_path)

    diag_path = os.path.join(out, "weight_diagnostics.csv")
    with open(diag_path, "w", encoding="utf-8") as fh:
        fh.write("k,n,min,max,mean,ess\n")
        for row in report.diagnostics:
            fh.write(f"{row['k']},{row['n']},{row['min']:.10g},"
                     f"{row['max']:.10g},{row['mean']:.10g},"
                     f"{row['ess']:.10g}\n")
    manifest.add_output("weight_diagnostics.csv", diag_path)

    models_path = os.path.join(out, "models.txt")
    with open(models_path, "w", encoding="utf-8") as fh:
        fh.write(report.models.snapshot())
    manifest.add_output("models.txt", models_path)

    report.curve.label = f"separable (z_a={cfg.z_a}, z_y={cfg.z_y})"
    report.comparator.label = f"arm {cfg.z_a} as randomized"
    svg_path = os.path.join(out, "risk.svg")
    risk_plot("separable-effect risk", [report.curve,
                                        report.comparator]).write(svg_path)
    manifest.add_output("risk.svg", svg_path)

    manifest.wall_clock_s = round(time.perf_counter() - t0, 3)
    manifest.write(os.path.join(out, "manifest.json"))
    print(report.render(), end="")
    if report.bootstrap:
        b = report.bootstrap
        print(f"bootstrap: {b.successes}/{b.replicates} replicates, "
              f"level {b.level:g}")
    print(f"outputs in {out}")
    return 0


def cmd_oracle_check(args):
    cfg = load_scenario(args.config)
    horizon = args.horizon or min(cfg.horizon, 3)
    dgp = DiscreteDgp.from_equations(cfg.equations, horizon)
    pairs = [(cfg.referent_za, cfg.referent_zy), (0, 0), (1, 1)]
    pairs = list(dict.fromkeys(pairs))
    all_ok = True
    tol = 1e-10
    for z_a, z_y in pairs:
        g, wy, wa, gap, ok = check_equivalence(dgp, z_a, z_y, horizon,
                                               tol=tol)
        all_ok &= ok
        print(f"channel pair (z_a={z_a}, z_y={z_y}): "
              f"{'pass' if ok else 'FAIL'} (max gap {gap:.3e})")
        for i in range(horizon):
            print(f"  k={i + 1}: g={g[i]:.12f} "
                  f"dy={abs(wy[i] - g[i]):.3e} "
                  f"da={abs(wa[i] - g[i]):.3e}")
    if not all_ok:
        print(f"equivalence check failed at tolerance {tol:g}",
              file=sys.stderr)
        return 4
    print("all channel pairs agree with the g-formula")
    return 0


def cmd_reproduce(args):
    out = _out_dir(args)
    scale = args.scale
    if scale <= 0:
        raise ConfigError(f"scale must be positive, got {scale}")
    base = load_scenario(args.config, seed_override=args.seed) \
        if args.config else ScenarioConfig(
            n_per_arm=500_000, horizon=24, seed=20260818)
    models = [int(m) for m in args.models.split(",")] if args.models \
        else [1, 2, 3]
    n = max(1, int(round(base.n_per_arm * scale)))
    t0 = time.perf_counter()
    manifest = _manifest(args, "reproduce", args.config,
                         seeds={"simulation": base.seed})
    summary_rows = []
    for m in models:
        cfg = ScenarioConfig(
            n_per_arm=n, horizon=base.horizon, seed=base.seed,
            adherence_model=m)
        panel = simulate_trial(cfg)
        report = estimate_separable(panel, 1, 0, variant="w_y")
        itt0 = empirical_cumulative_incidence(panel, 0)
        itt1 = empirical_cumulative_incidence(panel, 1)
        truth = markov_gformula(cfg.equations, 1, 0, cfg.horizon)

        itt0.label = "arm 0 as randomized"
        itt1.label = "arm 1 as randomized"
        report.curve.label = "adherence channel 1, outcome channel 0"
        for curve, stem in ((report.curve, "separable"),
                            (itt0, "itt_arm0"), (itt1, "itt_arm1")):
            name = f"model{m}_{stem}.csv"
            path = os.path.join(out, name)
            curve.to_csv(path)
            manifest.add_output(name, path)

        adh_sep = weighted_marginal(panel, report.weights, "a",
                                    label="weighted toward channel pair")
        adh_arm1 = _arm_prevalence(panel, 1, "a")
        adh_arm0 = _arm_prevalence(panel, 0, "a")
        name = f"model{m}_adherence.csv"
        path = os.path.join(out, name)
        rows = min(len(adh_sep.ks), len(adh_arm0.ks), len(adh_arm1.ks))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("k,arm0,arm1,weighted\n")
            for i in range(rows):
                fh.write(f"{adh_sep.ks[i]},{adh_arm0.value[i]:.10g},"
                         f"{adh_arm1.value[i]:.10g},"
                         f"{adh_sep.value[i]:.10g}\n")
        manifest.add_output(name, path)

        svg = f"model{m}_risk.svg"
        path = os.path.join(out, svg)
        risk_plot(f"adherence model {m}",
                  [report.curve, itt1, itt0]).write(path)
        manifest.add_output(svg, path)
        svg = f"model{m}_adherence.svg"
        path = os.path.join(out, svg)
        adh_arm0.label = "arm 0 as randomized"
        adh_arm1.label = "arm 1 as randomized"
        prevalence_plot(f"adherence model {m}: adherence prevalence",
                        [adh_sep, adh_arm1, adh_arm0]).write(path)
        manifest.add_output(svg, path)

        summary_rows.append(
            (m, itt0.final_risk, itt1.final_risk,
             report.curve.final_risk, float(truth[-1])))
        print(f"model {m}: arm1 risk {itt1.final_risk:.4f}, "
              f"separable (1,0) risk {report.curve.final_risk:.4f} "
              f"(exact {truth[-1]:.4f}), arm0 risk {itt0.final_risk:.4f}")

    name = "summary.csv"
    path = os.path.join(out, name)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("model,itt_arm0,itt_arm1,separable_10,exact_10\n")
        for row in summary_rows:
            fh.write(f"{row[0]},{row[1]:.10g},{row[2]:.10g},"
                     f"{row[3]:.10g},{row[4]:.10g}\n")
    manifest.add_output(name, path)
    manifest.seeds["n_per_arm"] = n
    manifest.wall_clock_s = round(time.perf_counter() - t0, 3)
    manifest.write(os.path.join(out, "manifest.json"))
    print(f"outputs in {out}")
    return 0


def _arm_prevalence(panel, arm, variable):
    """Unweighted per-interval prevalence among one arm's records."""
    import numpy as np

    from .risk import PrevalenceCurve
    rows = np.flatnonzero(panel.column("z") == arm)
    ks = panel.column("k")[rows]
    vals = panel.column(variable)[rows].astype(np.float64)
    den = np.bincount(ks, minlength=panel.horizon + 1)[1:]
    num = np.bincount(ks, weights=vals, minlength=panel.horizon + 1)[1:]
    usable = int(np.argmax(den <= 0)) if (den <= 0).any() else panel.horizon
    value = np.zeros(usable)
    nz = den[:usable] > 0
    value[nz] = num[:usable][nz] / den[:usable][nz]
    return PrevalenceCurve(variable=variable,
                           ks=np.arange(1, usable + 1, dtype=np.int64),
                           value=value, atrisk_mass=den[:usable].astype(
                               np.float64))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sepadh",
        description="separable-effects pipeline for adherence in "
                    "two-arm trials")
    parser.add_argument("--version", action="version",
                        version=f"sepadh {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a two-arm trial panel")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--counterfactual", nargs=2, type=int,
                   metavar=("Z_A", "Z_Y"), default=None,
                   help="hold the channels at these values instead of "
                        "randomizing")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("identify", help="check graphical identification")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--fixture", help="bundled example graph name")
    group.add_argument("graph", nargs="?", help="graph file path")
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("estimate", help="weighted risks from a panel CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--panel", required=True)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("oracle-check",
                       help="exact g-formula versus weighted "
                            "representation")
    p.add_argument("--config", required=True)
    p.add_argument("--horizon", type=int, default=None)
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("reproduce",
                       help="run the simulation study end to end")
    p.add_argument("--config", default=None)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--scale", type=float, default=0.1,
                   help="fraction of the full cohort size (default 0.1)")
    p.add_argument("--models", default=None,
                   help="comma-separated adherence models (default 1,2,3)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 4
    except SepadhError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
