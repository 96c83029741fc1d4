"""Command-line front end: ``hapt fit | density | dispersion | cluster | simulate | defaults``."""

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import io
from .dispersion import dispersion_grid
from .dpm import ClusterModel, DpmConfig, run_chain
from .node_posterior import DEFAULT_TOL
from .partition import bin_data, build_tree
from .quadrature import QuadratureError
from .simgen import SCENARIOS, Scenario, generate
from .sis import SisConfig, default_config
from .tree_hmm import fit

CONFIG_VERSION = 1


@dataclass
class RunConfig:
    """Every setting of a run; serialized as JSON."""

    depth: int = 10
    domain: object = "auto"
    state_count: int = 4
    beta_tau: float = 1.0
    beta_nu: float = 1.0
    boundaries_tau: list = None
    boundaries_nu: list = None
    root_dist_tau: list = None
    root_dist_nu: list = None
    tol: float = DEFAULT_TOL
    grid: int = 1024
    dpm: dict = field(default_factory=lambda: asdict(DpmConfig()))
    seed: int = 0
    threads: int = 1
    output: str = "out"
    version: int = CONFIG_VERSION

    def __post_init__(self):
        if self.version != CONFIG_VERSION:
            raise ValueError(f"unsupported config version {self.version}")
        if int(self.depth) < 1:
            raise ValueError(f"depth must be >= 1, got {self.depth}")
        if self.domain != "auto":
            a, b = (float(v) for v in self.domain)
            if not a < b:
                raise ValueError(f"domain must satisfy a < b, got {self.domain}")
            self.domain = [a, b]
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if int(self.grid) < 2:
            raise ValueError(f"grid must be >= 2, got {self.grid}")
        if int(self.threads) < 1:
            raise ValueError(f"threads must be >= 1, got {self.threads}")
        self.dpm = asdict(DpmConfig(**{**asdict(DpmConfig()), **dict(self.dpm)}))
        self.sis("tau")
        self.sis("nu")

    def sis(self, chain):
        beta = self.beta_tau if chain == "tau" else self.beta_nu
        bounds = self.boundaries_tau if chain == "tau" else self.boundaries_nu
        root = self.root_dist_tau if chain == "tau" else self.root_dist_nu
        if bounds is None:
            base = default_config(self.state_count, beta)
            return SisConfig(base.state_count, base.supports, beta, root)
        if len(bounds) != self.state_count:
            raise ValueError(f"boundaries_{chain} needs {self.state_count} cutpoints")
        return SisConfig.from_boundaries(bounds, beta, root)

    def dpm_config(self):
        return DpmConfig(**{**self.dpm, "seed": self.dpm.get("seed", self.seed)})

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**d)

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"


def _load_config(args):
    d = {}
    if args.config:
        d = json.loads(Path(args.config).read_text())
    cfg = RunConfig.from_dict(d)
    for name in ("depth", "seed", "threads", "grid", "output", "tol"):
        v = getattr(args, name, None)
        if v is not None:
            setattr(cfg, name, v)
    if getattr(args, "domain", None) is not None:
        cfg.domain = "auto" if args.domain == "auto" else [float(v) for v in args.domain.split(",")]
    dpm = dict(cfg.dpm)
    for name in ("alpha", "burnin", "draws"):
        v = getattr(args, name, None)
        if v is not None:
            dpm[name] = v
    if getattr(args, "seed", None) is not None:
        dpm["seed"] = args.seed
    cfg.dpm = dpm
    cfg.__post_init__()
    return cfg


def _data(cfg, path):
    bounds = None if cfg.domain == "auto" else tuple(cfg.domain)
    data = io.ingest(path, bounds)
    domain = io.auto_domain(data.samples) if bounds is None else bounds
    tree = build_tree(cfg.depth, domain)
    return data, tree, bin_data(tree, data.samples)


def _outdir(cfg):
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _grid(tree, n):
    return np.linspace(tree.domain[0], tree.domain[1], int(n))


def cmd_fit(args):
    cfg = _load_config(args)
    data, tree, counts = _data(cfg, args.input)
    result = fit(tree, counts, cfg.sis("tau"), cfg.sis("nu"), cfg.tol, threads=cfg.threads)
    out = _outdir(cfg)
    io.save_fit(result, out / "fit.json", data.ids)
    (out / "config.json").write_text(cfg.to_json())
    print(io.fmt(result.log_ml))


def _fit_path(args, cfg):
    return Path(args.fit) if args.fit else Path(cfg.output) / "fit.json"


def cmd_density(args):
    cfg = _load_config(args)
    result, ids = io.load_fit(_fit_path(args, cfg))
    x = _grid(result.tree, cfg.grid)
    header, cols = ["x", "mean"], [x, result.mean_density(x)]
    if args.samples:
        for i, sid in enumerate(ids):
            header.append(str(sid))
            cols.append(result.sample_density(i, x))
    io.write_table(_outdir(cfg) / "density.csv", header, cols)


def cmd_dispersion(args):
    cfg = _load_config(args)
    result, _ = io.load_fit(_fit_path(args, cfg))
    g = dispersion_grid(result, cfg.grid)
    io.write_table(_outdir(cfg) / "dispersion.csv", ["x", "mean", "variance", "cv"],
                   [g.points, g.mean, g.variance, g.cv])
    if g.clamped:
        print(f"clamped {g.clamped} leaves with rounding-level negative variance", file=sys.stderr)


def cmd_cluster(args):
    cfg = _load_config(args)
    data, tree, counts = _data(cfg, args.input)
    dcfg = cfg.dpm_config()
    model = ClusterModel(tree, counts, cfg.sis("tau"), cfg.sis("nu"), dcfg.tol, dcfg.cache_size,
                         cfg.threads)
    summary = run_chain(model, dcfg)
    out = _outdir(cfg)
    io.write_matrix(out / "coclustering.csv", data.ids, summary.coclustering)
    k = counts.k
    io.write_table(out / "n_clusters.csv", ["n_clusters", "frequency"],
                   [np.arange(1, k + 1), summary.n_clusters_hist[1:].astype(float)])
    if summary.modal is not None:
        io.write_table(out / "modal.csv", ["sample_id", "label"], [data.ids, summary.modal])
    if args.save_draws:
        io.write_table(out / "draws.csv", ["draw"] + list(data.ids),
                       [np.arange(len(summary.draws))] + list(summary.draws.T))


def cmd_simulate(args):
    cfg = _load_config(args)
    scen = Scenario(args.scenario, args.dirichlet_total, cfg.seed)
    sim = generate(scen, args.n_samples, args.n_obs)
    out = _outdir(cfg)
    ids = [f"s{i}" for i in range(args.n_samples)]
    io.write_samples(out / "samples.csv", ids, sim.samples)
    x = np.linspace(0.0, 1.0, int(cfg.grid))
    io.write_table(out / "truth.csv", ["x"] + ids, [x] + [f(x) for f in sim.densities])
    io.write_table(out / "labels.csv", ["sample_id", "label"], [ids, sim.labels])


def cmd_defaults(args):
    sys.stdout.write(RunConfig().to_json())


def build_parser():
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = argparse.ArgumentParser(prog="hapt", description=__doc__, formatter_class=fmt)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON run configuration (see `hapt defaults`)")
        sp.add_argument("--output", help="output directory (default from config: out)")
        sp.add_argument("--seed", type=int, help="random seed (default from config: 0)")
        sp.add_argument("--threads", type=int, help="worker threads (default from config: 1)")
        sp.add_argument("--grid", type=int, help="grid points for tables (default from config: 1024)")

    def model(sp):
        sp.add_argument("--depth", type=int, help="tree depth (default from config: 10)")
        sp.add_argument("--domain", help="'auto' or 'a,b' (default from config: auto)")
        sp.add_argument("--tol", type=float,
                        help="node quadrature tolerance of fits (default 1e-8; cluster uses dpm.tol)")

    sp = sub.add_parser("fit", help="fit a HAPT and write fit.json", formatter_class=fmt)
    sp.add_argument("input", help="CSV with header sample_id,value")
    common(sp)
    model(sp)
    sp.set_defaults(func=cmd_fit)

    sp = sub.add_parser("density", help="posterior mean densities on a grid", formatter_class=fmt)
    sp.add_argument("--fit", help="fit artifact (default <output>/fit.json)")
    sp.add_argument("--samples", action="store_true", help="add one column per sample")
    common(sp)
    sp.set_defaults(func=cmd_density)

    sp = sub.add_parser("dispersion", help="variance and CV functions on a grid", formatter_class=fmt)
    sp.add_argument("--fit", help="fit artifact (default <output>/fit.json)")
    common(sp)
    sp.set_defaults(func=cmd_dispersion)

    sp = sub.add_parser("cluster", help="DPM clustering of samples", formatter_class=fmt)
    sp.add_argument("input", help="CSV with header sample_id,value")
    sp.add_argument("--alpha", type=float, help="DP concentration (default from config: 1)")
    sp.add_argument("--burnin", type=int, help="burn-in sweeps (default from config: 500)")
    sp.add_argument("--draws", type=int, help="retained sweeps (default from config: 1000)")
    sp.add_argument("--save-draws", action="store_true", help="also write every retained assignment")
    common(sp)
    model(sp)
    sp.set_defaults(func=cmd_cluster)

    sp = sub.add_parser("simulate", help="draw a simulation scenario", formatter_class=fmt)
    sp.add_argument("--scenario", required=True, choices=SCENARIOS)
    sp.add_argument("--n-samples", type=int, default=10)
    sp.add_argument("--n-obs", type=int, default=100)
    sp.add_argument("--dirichlet-total", type=float, default=10.0)
    common(sp)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("defaults", help="print the default configuration", formatter_class=fmt)
    sp.set_defaults(func=cmd_defaults)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (ValueError, OSError, KeyError, TypeError, QuadratureError, FloatingPointError,
            json.JSONDecodeError) as exc:
        msg = str(exc).replace("\n", " ")
        print(f"hapt: error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
