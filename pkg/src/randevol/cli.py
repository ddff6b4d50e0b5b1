"""Command-line experiment runner.

Subcommands: walk1d, telegrapher, multiwalk, fit, dims, kolmogorov,
oscillator.  Parameters come from defaults, then an optional flat key=value
config file (--config), then explicit flags.  Every stochastic run requires
a seed (--seed, config, or the RANDEVOL_SEED environment variable).

Exit codes: 0 all checks passed, 1 a tolerance check failed, 2 invalid
input.  Identical configuration and seed produce byte-identical outputs.
"""

from __future__ import annotations

import argparse
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from . import matrixio, multiwalk, oscillator, reports, telegrapher, walk1d
from .densities import QuadraticDensity
from .errors import RandevolError
from .fields import (ComponentBundle, Field, PeriodicGrid,
                     bundle_sup_distance, random_band_limited, random_bundle)
from .propagators import ModePropagator

EXIT_OK = 0
EXIT_TOLERANCE = 1
EXIT_INVALID = 2

DEFAULT_SEED = 12345


class ConfigError(ValueError):
    pass


def parse_config(path) -> dict[str, str]:
    """Flat key=value file; '#' starts a comment, blank lines are ignored."""
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc})")
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{line_no}: expected key=value, got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        if not key or not value:
            raise ConfigError(f"{path}:{line_no}: empty key or value")
        if key in values:
            raise ConfigError(f"{path}:{line_no}: duplicate key {key!r}")
        values[key] = value
    return values


_PARAM_TYPES = {
    "grid_n": int, "length": float, "v": float, "a": float, "epsilon": float,
    "t_final": float, "dt": float, "samples": int, "seed": int,
    "densities": int, "tol": float, "out": str, "beta_file": str,
    "k": float, "b": float,
}


def resolve_params(args: argparse.Namespace, defaults: dict) -> dict:
    """defaults < config file < explicit flags; typed per _PARAM_TYPES."""
    merged = dict(defaults)
    if getattr(args, "config", None):
        for key, raw in parse_config(args.config).items():
            if key not in _PARAM_TYPES:
                raise ConfigError(f"{args.config}: unknown config key {key!r}")
            try:
                merged[key] = _PARAM_TYPES[key](raw)
            except ValueError:
                raise ConfigError(
                    f"{args.config}: bad value for {key!r}: {raw!r}")
    for key in _PARAM_TYPES:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    if "seed" in defaults and merged.get("seed") is None:
        env = os.environ.get("RANDEVOL_SEED")
        if env is not None:
            try:
                merged["seed"] = int(env)
            except ValueError:
                raise ConfigError(f"RANDEVOL_SEED={env!r} is not an integer")
        else:
            merged["seed"] = DEFAULT_SEED
    return merged


class CheckList:
    """Collects named pass/fail tolerance checks and prints one line each."""

    def __init__(self):
        self.failed = False

    def check(self, name: str, value: float, tol: float) -> None:
        ok = value <= tol
        self.failed |= not ok
        print(f"check {name}: {'PASS' if ok else 'FAIL'} ({value:.3e} <= {tol:.3e})")

    def check_true(self, name: str, ok: bool, detail: str = "") -> None:
        self.failed |= not ok
        suffix = f" ({detail})" if detail else ""
        print(f"check {name}: {'PASS' if ok else 'FAIL'}{suffix}")

    @property
    def exit_code(self) -> int:
        return EXIT_TOLERANCE if self.failed else EXIT_OK


def _density_report(propagator: ModePropagator, state: ComponentBundle,
                    densities: list[QuadraticDensity], times,
                    metadata: dict) -> reports.DensityReport:
    report = reports.DensityReport(
        columns=[d.name for d in densities], metadata=metadata)
    for t in times:
        moved = propagator.propagate(state, float(t))
        report.add_row(float(t), [d.value(moved) for d in densities])
    return report


def run_walk1d(params: dict) -> int:
    checks = CheckList()
    grid = PeriodicGrid((params["grid_n"],), (params["length"],))
    wp = walk1d.WalkParams(v=params["v"], a=params["a"], dt=params["dt"])
    rng = np.random.Generator(np.random.Philox(key=params["seed"]))
    tol = params["tol"]

    # discrete model against Monte Carlo on the lattice
    m = wp.lattice_size(params["length"])
    lattice_x = np.arange(m) * wp.dx
    length = params["length"]

    def phi(x):
        return np.sin(2 * np.pi * x / length) + 0.3 * np.cos(4 * np.pi * x / length)

    n_steps = 10
    rec_plus, rec_minus = walk1d.run_recursion(phi(lattice_x), n_steps, wp)
    worst = 0.0
    for idx in (0, m // 3, (2 * m) // 3):
        est_p, est_m, se_p, se_m = walk1d.monte_carlo_expectation(
            phi, lattice_x[idx], n_steps, wp, params["samples"],
            seed=params["seed"] + idx)
        gap_p = abs(est_p - rec_plus[idx]) / max(4.0 * se_p, 1e-300)
        gap_m = abs(est_m - rec_minus[idx]) / max(4.0 * se_m, 1e-300)
        worst = max(worst, gap_p, gap_m)
    checks.check("monte-carlo within 4 stderr of recursion", worst, 1.0)

    # conjugacy between damped and rescaled flows
    state = random_bundle(grid, rng, 2, max_mode=params["grid_n"] // 8)
    t_final = params["t_final"]
    damped = walk1d.evolve_unrescaled(state, t_final, wp)
    via_rescale = walk1d.rescale(damped, t_final, wp.a)
    direct = walk1d.evolve_hamiltonian(state, t_final, wp)
    checks.check("rescaled flow matches rescaling of damped flow",
                 bundle_sup_distance(via_rescale, direct), tol)

    # conserved densities along the rescaled flow
    densities = [walk1d.pair_density(n) for n in range(params["densities"] + 1)]
    propagator = ModePropagator(walk1d.hamiltonian_generator(wp), grid)
    times = np.linspace(0.0, t_final, 17)
    metadata = {
        "module": "walk1d", "family": "pair",
        "v": repr(wp.v), "a": repr(wp.a), "dt": repr(wp.dt),
        "grid_n": str(params["grid_n"]), "length": repr(params["length"]),
        "seed": str(params["seed"]),
    }
    report = _density_report(propagator, state, densities, times, metadata)
    checks.check("density drift", report.max_drift, tol)
    if params.get("out"):
        report.to_csv(params["out"])
        print(f"wrote {params['out']}")
    return checks.exit_code


def run_telegrapher(params: dict) -> int:
    checks = CheckList()
    grid = PeriodicGrid((params["grid_n"],), (params["length"],))
    system = telegrapher.default_system(
        grid, v=params["v"], a=params["a"], epsilon=params["epsilon"])
    rng = np.random.Generator(np.random.Philox(key=params["seed"]))
    tol = params["tol"]
    t_final = params["t_final"]

    u_bar0 = random_band_limited(grid, rng, max_mode=params["grid_n"] // 8)
    u_alt0 = random_band_limited(grid, rng, max_mode=params["grid_n"] // 8)
    matched = telegrapher.matched_initial_data(system, u_bar0, u_alt0)

    times = np.linspace(0.0, t_final, 9)
    gap_direct = gap_alternate = 0.0
    for t in times:
        can_bar, _ = telegrapher.evolve_canonical(*matched["canonical"], system, t)
        dir_bar, _ = telegrapher.evolve_skew_form(*matched["direct"], system, t,
                                                  variant="direct")
        alt_bar, _ = telegrapher.evolve_skew_form(*matched["alternate"], system, t,
                                                  variant="alternate")
        gap_direct = max(gap_direct, float(np.max(np.abs(
            can_bar.values - dir_bar.values))))
        gap_alternate = max(gap_alternate, float(np.max(np.abs(
            can_bar.values - alt_bar.values))))
    checks.check("direct skew form tracks canonical", gap_direct, tol)
    checks.check("alternate skew form tracks canonical", gap_alternate, tol)

    densities = [telegrapher.canonical_density(system, n)
                 for n in range(params["densities"] + 1)]
    propagator = ModePropagator(telegrapher.canonical_generator(system), grid)
    metadata = {
        "module": "telegrapher", "family": "canonical",
        "v": repr(params["v"]), "a": repr(params["a"]),
        "epsilon": repr(params["epsilon"]),
        "grid_n": str(params["grid_n"]), "length": repr(params["length"]),
        "seed": str(params["seed"]),
    }
    report = _density_report(
        propagator, ComponentBundle(list(matched["canonical"])), densities,
        times, metadata)
    checks.check("canonical density drift", report.max_drift, tol)

    gaps = [telegrapher.diffusion_limit_compare(1.0, s, u_bar0, 0.1)
            for s in (2.0, 4.0, 8.0, 16.0)]
    decreasing = all(b < a for a, b in zip(gaps, gaps[1:]))
    checks.check_true("diffusion gap decreases with scale", decreasing,
                      "gaps " + ", ".join(f"{g:.3e}" for g in gaps))
    if params.get("out"):
        report.to_csv(params["out"])
        print(f"wrote {params['out']}")
    return checks.exit_code


def run_multiwalk(params: dict) -> int:
    checks = CheckList()
    grid = PeriodicGrid((params["grid_n"],), (params["length"],))
    model = multiwalk.direct_sum_walk_model(2, v=params["v"], lam=params["a"])
    rng = np.random.Generator(np.random.Philox(key=params["seed"]))
    tol = params["tol"]
    t_final = params["t_final"]

    verdict = multiwalk.fit_hamiltonian(model.rescaled())
    if isinstance(verdict, multiwalk.NotRepresentable):
        checks.check_true("generator is representable", False, verdict.reason)
        return checks.exit_code
    checks.check("certificate reconstructs the generator",
                 verdict.reconstruction_residual(model.beta), tol)

    state = random_bundle(grid, rng, model.n, max_mode=params["grid_n"] // 8)
    damped = multiwalk.evolve_continuum(state, model, t_final)
    via_rescale = multiwalk.rescale_multi(damped, t_final, model.lam)
    direct = multiwalk.evolve_rescaled(state, model, t_final)
    checks.check("rescaled flow matches rescaling of damped flow",
                 bundle_sup_distance(via_rescale, direct), tol)

    ham = multiwalk.hamiltonian_evolve(state, verdict, model, t_final)
    checks.check("certificate flow matches generator flow",
                 bundle_sup_distance(ham, direct), tol)

    densities = [multiwalk.multiwalk_density(verdict.c)]
    densities += [multiwalk.proportional_density(verdict.c, n)
                  for n in range(1, params["densities"] + 1)]
    propagator = ModePropagator(multiwalk.rescaled_flow_generator(model), grid)
    metadata = {
        "module": "multiwalk", "family": "paired-velocities",
        "v": repr(params["v"]), "lambda": repr(params["a"]),
        "grid_n": str(params["grid_n"]), "length": repr(params["length"]),
        "seed": str(params["seed"]),
    }
    report = _density_report(propagator, state, densities,
                             np.linspace(0.0, t_final, 17), metadata)
    checks.check("density drift", report.max_drift, tol)
    if params.get("out"):
        report.to_csv(params["out"])
        print(f"wrote {params['out']}")
    return checks.exit_code


def bundled_beta_path() -> Path:
    return Path(str(resources.files("randevol").joinpath("data/beta0_n4.txt")))


def run_fit(params: dict) -> int:
    checks = CheckList()
    path = params.get("beta_file") or bundled_beta_path()
    beta = matrixio.read_matrix(path)
    if beta.shape[0] != beta.shape[1]:
        raise ConfigError(f"{path}: generator matrix must be square")
    sums = beta.sum(axis=1)
    lam = float(sums.mean())
    if np.max(np.abs(sums - lam)) > 1e-8 * max(1.0, np.abs(beta).max()):
        raise ConfigError(f"{path}: row sums are not constant; not a rescaled generator")
    generator = multiwalk.RescaledGenerator(beta, lam)
    verdict = multiwalk.fit_hamiltonian(generator, seed=params["seed"])
    if isinstance(verdict, multiwalk.NotRepresentable):
        print(f"not representable: {verdict.reason}")
        if verdict.detail:
            print(f"  {verdict.detail}")
        return EXIT_OK
    print(f"lambda {matrixio.format_floats([verdict.lam])}")
    print(f"c {matrixio.format_floats(verdict.c)}")
    print("gamma:")
    for row in verdict.gamma:
        print("  " + matrixio.format_floats(row))
    checks.check("certificate reconstructs the generator",
                 verdict.reconstruction_residual(beta), params["tol"])
    if params.get("out"):
        matrixio.write_certificate(params["out"], verdict)
        print(f"wrote {params['out']}")
    return checks.exit_code


def run_dims(params: dict) -> int:
    checks = CheckList()
    rows = []
    print(f"{'N':>3} {'total':>6} {'ham':>5} {'rank+1':>7}")
    for n in (2, 4, 6):
        n_bar = n // 2
        total = multiwalk.total_dim(n)
        ham = multiwalk.ham_dim(n)
        rank = multiwalk.tangent_rank_at_beta0(n_bar)
        print(f"{n:>3} {total:>6} {ham:>5} {rank + 1:>7}")
        rows.append([n, total, ham, rank + 1])
        checks.check_true(f"rank+1 equals ham dim at N={n}", rank + 1 == ham,
                          f"{rank + 1} vs {ham}")
    if params.get("out"):
        reports.write_table(params["out"], ["N", "total", "ham", "rank_plus_1"],
                            rows, metadata={"module": "multiwalk"})
        print(f"wrote {params['out']}")
    return checks.exit_code


def run_kolmogorov(params: dict) -> int:
    checks = CheckList()
    tol = params["tol"]
    if params.get("beta_file"):
        beta = matrixio.read_matrix(params["beta_file"])
        if beta.shape[0] != beta.shape[1]:
            raise ConfigError(f"{params['beta_file']}: matrix must be square")
    else:
        beta = np.array([[-2.0, 1.0, 1.0], [1.0, -1.0, 0.0], [2.0, 1.0, -3.0]])
    n = beta.shape[0]
    t_final = params["t_final"]
    p0 = np.eye(n)
    p_t = multiwalk.kolmogorov_evolve(p0, beta, t_final, direction="inverse")

    # column sums must follow the reduced flow (independent RK4 route)
    f0 = p0.sum(axis=0)
    dt = min(params["dt"], 1e-3)
    steps = int(np.ceil(t_final / dt))
    f = f0.copy()
    for _ in range(steps):
        h = t_final / steps
        k1 = f @ beta
        k2 = (f + 0.5 * h * k1) @ beta
        k3 = (f + 0.5 * h * k2) @ beta
        k4 = (f + h * k3) @ beta
        f = f + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    checks.check("column sums follow the reduced flow",
                 float(np.max(np.abs(p_t.sum(axis=0) - f))), tol)

    if np.max(np.abs(beta.sum(axis=1))) <= 1e-12 * max(1.0, np.abs(beta).max()):
        row_defect = float(np.max(np.abs(p_t.sum(axis=1) - 1.0)))
        min_entry = float(p_t.min())
        checks.check("rows stay probability vectors", max(row_defect, -min_entry), tol)

    direct_t = multiwalk.kolmogorov_evolve(p0, beta.T, t_final, direction="direct")
    checks.check("direct flow with transposed rates is the transpose",
                 float(np.max(np.abs(direct_t - p_t.T))), 1e-12)
    if params.get("out"):
        matrixio.write_matrix(params["out"], p_t)
        print(f"wrote {params['out']}")
    return checks.exit_code


def run_oscillator(params: dict) -> int:
    checks = CheckList()
    osc = oscillator.OscillatorParams(k=params["k"], b=params["b"])
    tol = params["tol"]
    times = np.linspace(0.0, params["t_final"], 41)
    h_values = []
    rows = []
    for t in times:
        x, xdot = oscillator.evolve_damped(osc, t)
        big_x, p, h = oscillator.rescale_oscillator(osc, t)
        energy = 0.5 * xdot ** 2 + 0.5 * osc.b * x ** 2
        h_values.append(h)
        rows.append([float(t), x, xdot, big_x, p, h, energy])
    h0 = h_values[0]
    drift = max(abs(h - h0) for h in h_values)
    drift = drift / abs(h0) if h0 != 0.0 else drift
    checks.check("rescaled invariant drift", drift, tol)
    energies = [row[-1] for row in rows]
    slack = 1e-12 * max(abs(e) for e in energies)
    monotone = all(b <= a + slack for a, b in zip(energies, energies[1:]))
    checks.check_true("unrescaled energy is non-increasing", monotone)
    if params.get("out"):
        reports.write_table(
            params["out"], ["t", "x", "xdot", "X", "P", "H", "E"], rows,
            metadata={"module": "oscillator", "k": repr(osc.k), "b": repr(osc.b)})
        print(f"wrote {params['out']}")
    return checks.exit_code


_SUBCOMMANDS = {
    "walk1d": (run_walk1d, {
        "grid_n": 256, "length": 1.0, "v": 1.0, "a": 0.5, "dt": 1.0 / 64.0,
        "t_final": 4.0, "samples": 2000, "seed": None, "densities": 3,
        "tol": 1e-10, "out": None}),
    "telegrapher": (run_telegrapher, {
        "grid_n": 256, "length": float(2 * np.pi), "v": 1.0, "a": 0.5,
        "epsilon": 1.0, "t_final": 4.0, "seed": None, "densities": 3,
        "tol": 1e-10, "out": None}),
    "multiwalk": (run_multiwalk, {
        "grid_n": 128, "length": 1.0, "v": 1.0, "a": 1.0, "t_final": 3.0,
        "seed": None, "densities": 3, "tol": 1e-10, "out": None}),
    "fit": (run_fit, {
        "beta_file": None, "seed": None, "tol": 1e-10, "out": None}),
    "dims": (run_dims, {"out": None}),
    "kolmogorov": (run_kolmogorov, {
        "t_final": 2.0, "dt": 1e-3, "beta_file": None, "tol": 1e-10,
        "out": None}),
    "oscillator": (run_oscillator, {
        "k": 0.3, "b": 2.0, "t_final": 20.0, "tol": 1e-10, "out": None}),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="randevol",
        description="Random evolutions in Hamiltonian representation: "
                    "experiment runner and checks.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in _SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=str, default=None,
                       help="flat key=value parameter file")
        p.add_argument("--grid-n", dest="grid_n", type=int, default=None)
        p.add_argument("--length", type=float, default=None)
        p.add_argument("--v", type=float, default=None)
        p.add_argument("--a", type=float, default=None)
        p.add_argument("--epsilon", type=float, default=None)
        p.add_argument("--t-final", dest="t_final", type=float, default=None)
        p.add_argument("--dt", type=float, default=None)
        p.add_argument("--samples", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--densities", type=int, default=None)
        p.add_argument("--out", type=str, default=None)
        p.add_argument("--beta-file", dest="beta_file", type=str, default=None)
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--k", type=float, default=None)
        p.add_argument("--b", type=float, default=None)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    runner, defaults = _SUBCOMMANDS[args.subcommand]
    try:
        params = resolve_params(args, defaults)
        return runner(params)
    except (ConfigError, matrixio.MatrixFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (RandevolError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
