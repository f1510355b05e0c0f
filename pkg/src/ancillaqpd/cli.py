"""Command-line front end.

Exit codes: 0 success, 1 unexpected failure, 2 configuration or input
validation error, 3 numerically infeasible weight system, 4 I/O error.
Data goes to stdout (or to files under ``--out``); diagnostics go to stderr.
The default seed is 0 unless ``ANCILLAQPD_SEED`` is set.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import scenario
from .config import ConfigError, RunConfig, load_config
from .estimate import (
    Estimate,
    correlation_from_distribution,
    estimate_correlation,
    estimate_qpd,
    exact_correlation,
    exact_qpd,
    lgi_k,
    qpd_from_distribution,
    sweep,
)
from .io import complex_pair, dumps, read_trajectories, sweep_csv, trajectories_csv, write_text
from .povm import MeasurementSetError, builtin_set
from .protocol import NoiseModel, exact_distribution, sample
from .qmodel import InvariantError, named_observable
from .weights import InfeasibleSystemError, WeightVector, default_mode, verify_weights, weights_for

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_IO = 4
SEED_ENV = "ANCILLAQPD_SEED"


class CliError(Exception):
    def __init__(self, msg: str, code: int):
        super().__init__(msg)
        self.code = code


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        seed = int(raw, 0)
    except ValueError:
        raise CliError(f"{SEED_ENV}={raw!r} is not an integer", EXIT_CONFIG) from None
    if not 0 <= seed < 2**64:
        raise CliError(f"{SEED_ENV} must be an unsigned 64-bit integer", EXIT_CONFIG)
    return seed


def _seed(args, cfg: RunConfig | None = None) -> int:
    if args.seed is not None:
        return args.seed
    if cfg is not None and cfg.seed is not None:
        return cfg.seed
    return default_seed()


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _count(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("count must be positive")
    return v


def parse_grid(text: str) -> np.ndarray:
    """``start,stop,count`` (inclusive); ``pi`` may appear as a factor, e.g. ``0.5pi``."""
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("grid must be start,stop,count")

    def num(s: str) -> float:
        if s.endswith("pi"):
            head = s[:-2].rstrip("*")
            return (float(head) if head else 1.0) * np.pi
        return float(s)

    try:
        start, stop, count = num(parts[0]), num(parts[1]), int(parts[2])
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    if count < 1:
        raise argparse.ArgumentTypeError("grid count must be positive")
    return np.linspace(start, stop, count)


def _read_json(path: str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO) from None
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: invalid JSON: {exc}", EXIT_CONFIG) from None


def _load_config(path: str | None) -> RunConfig:
    if path is None:
        raise CliError("--config is required", EXIT_CONFIG)
    try:
        return load_config(path)
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc}", EXIT_IO) from None


def _load_noise(path: str | None, cfg: RunConfig | None, n_steps: int) -> NoiseModel | None:
    """``--noise paper`` selects the calibrated preset; otherwise a JSON file."""
    if path is None:
        return cfg.noise_model() if cfg is not None else None
    if path == "paper":
        final = cfg.final_projective if cfg is not None else True
        return NoiseModel.paper_preset(n_steps, final)
    data = _read_json(path)
    if not isinstance(data, dict):
        raise CliError("noise file must hold a JSON object", EXIT_CONFIG)
    return NoiseModel.from_dict(data)


def _emit(args, name: str, text: str) -> None:
    if args.out is None:
        sys.stdout.write(text)
        return
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_text(out / name, text)
    except OSError as exc:
        raise CliError(f"cannot write {out / name}: {exc}", EXIT_IO) from None
    _log(f"wrote {out / name}")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_weights(args) -> int:
    ms = builtin_set(args.set)
    mode = default_mode(ms) if args.mode == "auto" else args.mode
    objective = "any_feasible" if args.objective == "any" else "min_inf_norm"
    A = named_observable(args.A, ms.dim)
    B = named_observable(args.B, ms.dim)
    w = weights_for(ms, A, B, mode=mode, objective=objective)
    doc = w.to_dict()
    doc["objective"] = args.objective
    doc["residual"] = verify_weights(ms, w)
    _emit(args, "weights.json", dumps(doc))
    return EXIT_OK


def _exact_inputs(cfg: RunConfig):
    p = cfg.to_protocol()
    chans = p.channels
    rho = chans[0].apply(p.initial.mat)
    return p, rho, chans[1:]


def cmd_oracle(args) -> int:
    cfg = _load_config(args.config)
    p, rho, between = _exact_inputs(cfg)
    doc: dict = {"estimator": cfg.estimator.kind, "n_steps": p.n_steps}
    dist = exact_distribution(p)
    if cfg.estimator.kind == "correlation":
        obs = [named_observable(n, cfg.dim) for n in cfg.estimator.observables]
        doc["correlation"] = complex_pair(exact_correlation(rho, obs, between))
        doc["estimator_mean"] = complex_pair(correlation_from_distribution(dist, cfg.correlation_weights()))
    else:
        projs = [[named_observable(f"P{i}", cfg.dim) for i in range(cfg.dim)]] * p.n_steps
        doc["qpd"] = exact_qpd(rho, projs, between).to_dict()
        doc["estimator_mean"] = qpd_from_distribution(dist, cfg.qpd_weights()).to_dict()
    doc["trajectory_distribution"] = dist.to_dict()
    _emit(args, "oracle.json", dumps(doc))
    return EXIT_OK


def cmd_sample(args) -> int:
    cfg = _load_config(args.config)
    p = cfg.to_protocol()
    n = args.n or cfg.n_trajectories
    noise = _load_noise(args.noise, cfg, p.n_steps)
    seed = _seed(args, cfg)
    _log(f"sampling {n} trajectories, seed {seed}")
    records = sample(p, n, seed, noise=noise, use_ms_decomposition=cfg.use_ms_decomposition,
                     workers=args.workers)
    _emit(args, "trajectories.csv", trajectories_csv(records))
    return EXIT_OK


def _load_weights(path: str, cfg: RunConfig):
    data = _read_json(path)
    sets = cfg.to_protocol().sets
    try:
        if cfg.estimator.kind == "correlation":
            if not isinstance(data, list) or len(data) != len(sets):
                raise CliError(f"expected {len(sets)} weight vectors in {path}", EXIT_CONFIG)
            return [WeightVector.from_dict(d, ms) for d, ms in zip(data, sets)]
        if not isinstance(data, list) or len(data) != len(sets):
            raise CliError(f"expected {len(sets)} lists of weight vectors in {path}", EXIT_CONFIG)
        return [[WeightVector.from_dict(d, ms) for d in row] for row, ms in zip(data, sets)]
    except (KeyError, TypeError, ValueError) as exc:
        raise CliError(f"{path}: bad weight vector: {exc}", EXIT_CONFIG) from None


def cmd_reconstruct(args) -> int:
    cfg = _load_config(args.config)
    p = cfg.to_protocol()
    try:
        records = read_trajectories(args.trajectories, p.outcome_shape)
    except OSError as exc:
        raise CliError(f"cannot read {args.trajectories}: {exc}", EXIT_IO) from None
    except ValueError as exc:
        raise CliError(f"{args.trajectories}: {exc}", EXIT_CONFIG) from None
    if args.weights is not None:
        weights = _load_weights(args.weights, cfg)
    elif cfg.estimator.kind == "correlation":
        weights = cfg.correlation_weights()
    else:
        weights = cfg.qpd_weights()
    try:
        if cfg.estimator.kind == "correlation":
            doc = {"estimator": "correlation", **estimate_correlation(records, weights).to_dict()}
        else:
            doc = {"estimator": "qpd", "qpd": estimate_qpd(records, weights).to_dict()}
    except ValueError as exc:
        raise CliError(f"trajectories do not match weights: {exc}", EXIT_CONFIG) from None
    _emit(args, "estimate.json", dumps(doc))
    return EXIT_OK


def cmd_lgi(args) -> int:
    theta = args.theta
    seed = _seed(args)
    noise = _load_noise(args.noise, None, 3)
    exact = scenario.lgi_exact(theta)
    doc: dict = {
        "theta": theta,
        "ry_convention": scenario.select_ry_convention(),
        "k_exact": exact.k,
        "k_closed_form": scenario.lgi_closed_form(theta),
        "terms_exact": list(exact.terms),
    }
    if noise is not None:
        doc["noise"] = noise.to_dict()
        doc["k_noisy_exact"] = scenario.lgi_noisy(theta, noise).k
    if args.n:
        est = lgi_k(scenario.sampled_qpd(theta, 3, args.n, seed, noise=noise))
        doc.update({"n": args.n, "seed": seed, "k_estimate": est.k, "k_sem": est.sem})
    _emit(args, "lgi.json", dumps(doc))
    return EXIT_OK


def cmd_sweep(args) -> int:
    grid = args.grid if args.grid is not None else scenario.default_grid()
    seed = _seed(args)
    nt = args.times
    if args.quantity == "correlation":
        exact_fn = lambda th: scenario.correlation_exact(th, nt)  # noqa: E731
        sample_fn = None
        if args.n:
            sample_fn = lambda k, th: scenario.sampled_correlation(  # noqa: E731
                th, nt, args.n, scenario.grid_seed(seed, k, nt))
    else:
        if nt != 3:
            raise CliError("the LGI sweep needs --times 3", EXIT_CONFIG)
        exact_fn = lambda th: scenario.lgi_exact(th).k  # noqa: E731

        def sample_k(k, th):
            r = lgi_k(scenario.sampled_qpd(th, 3, args.n, scenario.grid_seed(seed, k, 40)))
            return Estimate(complex(r.k), r.sem, 0.0, args.n)

        sample_fn = sample_k if args.n else None
    _emit(args, "sweep.csv", sweep_csv(sweep(grid, exact_fn, sample_fn)))
    return EXIT_OK


def _table_csv(rows: list[dict]) -> str:
    """Flatten report rows; list-valued cells become ``name_0, name_1, ...``."""
    if not rows:
        return ""
    cols, flat = [], []
    for r in rows:
        out = {}
        for key, v in r.items():
            if isinstance(v, list):
                for i, x in enumerate(v):
                    out[f"{key}_{i}"] = x
            else:
                out[key] = v
        flat.append(out)
        for c in out:
            if c not in cols:
                cols.append(c)
    lines = [",".join(cols)]
    for r in flat:
        lines.append(",".join(format(float(r[c]), ".17g") if not isinstance(r[c], int) else str(r[c])
                              for c in cols))
    return "\n".join(lines) + "\n"


def cmd_fig3(args) -> int:
    from .report import fig3_report

    seed = _seed(args)
    rep = fig3_report(args.n, seed, args.grid)
    for f in rep.flags:
        _log(f"{'PASS' if f.passed else 'FAIL'}  {f.criterion}: {f.detail}")
    _log(f"runtime {rep.runtime_s:.2f} s")
    _emit(args, "report.json", dumps(rep.to_dict()))
    if args.out is not None:
        for tag, rows in rep.tables.items():
            _emit(args, f"fig{tag}.csv", _table_csv(rows))
    return EXIT_OK if rep.passed else 1


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ancillaqpd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, config=False, noise=False, sampling=False):
        sp.add_argument("--out", metavar="DIR", help="write files here instead of stdout")
        if config:
            sp.add_argument("--config", metavar="PATH", required=True)
        if sampling:
            sp.add_argument("--seed", type=_u64, default=None, metavar="U64")
            sp.add_argument("--n", type=_count, default=None, metavar="COUNT")
        if noise:
            sp.add_argument("--noise", metavar="PATH", help="noise JSON, or 'paper' for the calibrated preset")

    sp = sub.add_parser("weights", help="solve for the weights gamma(B, A) of a measurement set")
    common(sp)
    sp.add_argument("--set", required=True, metavar="NAME")
    sp.add_argument("--A", default="Z")
    sp.add_argument("--B", default="I")
    sp.add_argument("--objective", choices=("any", "min-inf"), default="min-inf")
    sp.add_argument("--mode", choices=("auto", "full", "final"), default="auto")
    sp.set_defaults(func=cmd_weights)

    sp = sub.add_parser("oracle", help="exact values for a config")
    common(sp, config=True)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("sample", help="Monte Carlo trajectories as CSV")
    common(sp, config=True, noise=True, sampling=True)
    sp.add_argument("--workers", type=_count, default=1)
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("reconstruct", help="estimate from a trajectory CSV")
    common(sp, config=True)
    sp.add_argument("--trajectories", required=True, metavar="PATH")
    sp.add_argument("--weights", metavar="PATH", help="JSON weight vectors; derived from the config if absent")
    sp.set_defaults(func=cmd_reconstruct)

    sp = sub.add_parser("lgi", help="Leggett-Garg K for the trapped-ion scenario")
    common(sp, noise=True, sampling=True)
    sp.add_argument("--theta", type=float, default=scenario.THETA_STAR_3)
    sp.set_defaults(func=cmd_lgi)

    sp = sub.add_parser("sweep", help="theta sweep as plot-ready CSV")
    common(sp, sampling=True)
    sp.add_argument("--times", type=int, choices=(2, 3), default=2)
    sp.add_argument("--quantity", choices=("correlation", "lgi"), default="correlation")
    sp.add_argument("--grid", type=parse_grid, default=None, metavar="START,STOP,COUNT")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("fig3", help="full trapped-ion reproduction report")
    common(sp, sampling=True)
    sp.add_argument("--grid", type=parse_grid, default=None, metavar="START,STOP,COUNT")
    sp.set_defaults(func=cmd_fig3, n=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.command == "fig3" and args.n is None:
        args.n = scenario.PAPER_TRAJECTORIES
    try:
        return args.func(args)
    except CliError as exc:
        _log(f"error: {exc}")
        return exc.code
    except InfeasibleSystemError as exc:
        _log(f"error: infeasible weight system (residual {exc.residual:.3e}): {exc}")
        return EXIT_INFEASIBLE
    except ConfigError as exc:
        _log(f"error: invalid config: {exc}")
        return EXIT_CONFIG
    except (MeasurementSetError, InvariantError, KeyError, ValueError) as exc:
        _log(f"error: {exc}")
        return EXIT_CONFIG
    except OSError as exc:
        _log(f"error: {exc}")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
