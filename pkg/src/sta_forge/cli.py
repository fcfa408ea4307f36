"""Command-line front end.

Each subcommand designs one protocol (or a parameter sweep), forward-checks it,
and writes a trajectory CSV plus a JSON report into ``--out``.  Flags take
precedence over keys of the optional ``--config`` JSON file; config keys use
the flag names without leading dashes (hyphens or underscores).

Exit codes: 0 success, 2 usage error or unreachable target, 3 numerical failure.
"""

import argparse
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import expansion, spin, transport
from .ansatz import PolynomialShape, eval_shape
from .numerics import InfeasibleTargetError, NumericalError, integrate_adaptive
from .numerics.tolerances import env_rel_tol
from .report import RunReport, utc_timestamp, write_csv, write_report

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 2, 3
DEFAULT_POINTS = 2001
VERIFY_REL_TOL = 1e-10


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class Option:
    flag: str
    type: object
    default: object = None
    choices: tuple = None
    help: str = ""
    nargs: object = None

    @property
    def dest(self):
        return self.flag.lstrip("-").replace("-", "_")


EXPANSION_METHODS = ("quintic", "cubic-opt", "bang3", "bang2", "oct-energy")
TRANSPORT_METHODS = ("p5", "p7-opt", "p19-opt", "poly-opt", "hyp", "oct-energy", "time-optimal")
SPIN_METHODS = ("oct", "p2", "p3", "p9", "tanh")
SPIN_FAMILIES = {"p2": spin.QUADRATIC, "p3": spin.CUBIC, "p9": spin.NINTH_FLIP,
                 "tanh": spin.TANH_FLIP}
SWEEP_KINDS = ("expansion-sf", "bang-grid", "transport-tf", "spin-af")

_FREQ = (
    Option("--gamma-sq", float, help="gamma^2 = omega0 / omega_f"),
    Option("--omega-f-sq-ratio", float, help="omega_f^2 / omega0^2 (default 0.2)"),
)
_TRANSPORT_PHYS = (
    Option("--omega0", float, 2 * np.pi * 50.0, help="trap frequency in rad/s"),
    Option("--tf", float, help="final time in s (default 0.022)"),
    Option("--distance", float, 1.0, help="transport distance d in m"),
    Option("--mass", float, 1.0, help="particle mass in kg"),
)
_SPIN_TARGET = (
    Option("--case", str, "pi2", ("pi2", "flip"), "target angle pi/2 or pi"),
    Option("--rf", float, help="final spin length (required)"),
    Option("--epsilon", float, 1e-3, help="polar angle shift at the poles"),
    Option("--tf", float, help="final time in units of 1/R (default: optimal-control time)"),
    Option("--a3", float, 0.1, help="fixed a3 of the cubic family"),
    Option("--a5", float, 1.1, help="tan width of the tanh family"),
)

OPTIONS = {
    "expansion": (
        Option("--method", str, "quintic", EXPANSION_METHODS),
        *_FREQ,
        Option("--sf", float, help="normalized final time omega0 tf"),
        Option("--w1", float, 1.0, help="first bang frequency / omega0 (bang3)"),
        Option("--w2", float, 1.0, help="second bang frequency / omega0 (bang3)"),
        Option("--control-bound", float, 1.0, help="bound on |omega^2 / omega0^2|"),
        Option("--objective", str, "oct-fit", ("oct-fit", "energy"), "cubic-opt objective"),
    ),
    "transport": (
        Option("--method", str, "p5", TRANSPORT_METHODS),
        *_TRANSPORT_PHYS,
        Option("--delta", float, help="displacement bound for time-optimal transport in m"),
        Option("--degree", int, help="polynomial degree for poly-opt"),
        Option("--a1", float, help="hyperbolic a1 (with --a2; omit both to optimize)"),
        Option("--a2", float, help="hyperbolic a2"),
    ),
    "spin": (
        Option("--method", str, "oct", SPIN_METHODS),
        *_SPIN_TARGET,
        Option("--a1", float, help="explicit a1 (skips the radius root solve)"),
        Option("--phi", float, 0.0, help="azimuth of the field for the Bloch check"),
    ),
    "sweep": (
        Option("--kind", str, "expansion-sf", SWEEP_KINDS),
        Option("--grid", float, nargs=3, help="START STOP NUM of the swept parameter"),
        Option("--grid2", float, nargs=3, help="START STOP NUM of the second parameter (bang-grid)"),
        *_FREQ,
        Option("--objective", str, "oct-fit", ("oct-fit", "energy")),
        *(o for o in _TRANSPORT_PHYS if o.flag != "--tf"),
        Option("--family", str, "p2", ("p2", "p3", "tanh")),
        *(o for o in _SPIN_TARGET if o.flag not in ("--rf", "--tf")),
        Option("--rf", float, help="spin length that sets the default tf (spin-af)"),
        Option("--tf", float, help="final time of the spin-af family in units of 1/R"),
    ),
}

SWEEP_DEFAULT_GRIDS = {
    "expansion-sf": (1.0, 6.0, 51),
    "bang-grid": (0.2, 1.0, 17),
    "transport-tf": (0.01, 0.03, 21),
    "spin-af": (-1.0, 1.0, 41),
}


def _global_parser(suppress):
    parser = argparse.ArgumentParser(add_help=False)
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--out", default=default, help="output directory (default .)")
    parser.add_argument("--config", default=default, help="JSON file of default flag values")
    parser.add_argument("--points", type=int, default=default,
                        help=f"trajectory samples (default {DEFAULT_POINTS})")
    parser.add_argument("--seedless", action="store_true", default=default,
                        help="assert a run without random numbers (always the case)")
    return parser


def build_parser():
    parser = argparse.ArgumentParser(prog="sta-forge", parents=[_global_parser(False)],
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for command, options in OPTIONS.items():
        p = sub.add_parser(command, parents=[_global_parser(True)])
        for opt in options:
            kwargs = {"type": opt.type, "default": None, "help": opt.help}
            if opt.choices:
                kwargs["choices"] = opt.choices
            if opt.nargs:
                kwargs["nargs"] = opt.nargs
            p.add_argument(opt.flag, **kwargs)
    return parser


def _load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise UsageError(f"cannot read config {path!r}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config {path!r} is not valid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise UsageError(f"config {path!r} must hold a JSON object")
    return {str(k).lstrip("-").replace("-", "_"): v for k, v in data.items()}


def _coerce(opt, value):
    def one(v):
        if isinstance(v, bool):
            raise UsageError(f"config value for {opt.flag} must not be boolean")
        try:
            return opt.type(v)
        except (TypeError, ValueError):
            raise UsageError(f"config value {v!r} for {opt.flag} is not {opt.type.__name__}") from None

    if opt.nargs:
        if not isinstance(value, list) or len(value) != opt.nargs:
            raise UsageError(f"config value for {opt.flag} must be a list of {opt.nargs}")
        return [one(v) for v in value]
    value = one(value)
    if opt.choices and value not in opt.choices:
        raise UsageError(f"config value {value!r} for {opt.flag} not in {opt.choices}")
    return value


def resolve(args):
    """Merge flags, config file and defaults into ``(settings, given)``.

    ``given`` holds the names set explicitly by a flag or the config file.
    """
    config = _load_config(args.config) if getattr(args, "config", None) else {}
    options = OPTIONS[args.command]
    known = {o.dest for o in options} | {"out", "points", "seedless"}
    unknown = sorted(set(config) - known)
    if unknown:
        raise UsageError(f"unknown config keys for {args.command}: {', '.join(unknown)}")

    settings, given = {}, set()
    for opt in options:
        value = getattr(args, opt.dest)
        if value is None and opt.dest in config:
            value = _coerce(opt, config[opt.dest])
        if value is not None:
            given.add(opt.dest)
        settings[opt.dest] = opt.default if value is None else value

    out = getattr(args, "out", None) or config.get("out") or "."
    points = getattr(args, "points", None)
    if points is None:
        points = _coerce(Option("--points", int), config["points"]) if "points" in config else DEFAULT_POINTS
    seedless = config.get("seedless", False)
    if not isinstance(seedless, bool):
        raise UsageError("config key 'seedless' takes no value other than true/false")
    if points < 2:
        raise UsageError(f"--points must be at least 2, got {points}")
    return settings, given, str(out), int(points)


# ---------------------------------------------------------------- helpers


def _require(settings, given, name, why):
    if name not in given:
        raise UsageError(f"--{name.replace('_', '-')} is required {why}")
    return settings[name]


def _forbid(given, names, why):
    bad = [f"--{n.replace('_', '-')}" for n in names if n in given]
    if bad:
        raise UsageError(f"{', '.join(bad)} not allowed {why}")


def _gamma(settings, given):
    if "gamma_sq" in given and "omega_f_sq_ratio" in given:
        raise UsageError("give either --gamma-sq or --omega-f-sq-ratio, not both")
    if "gamma_sq" in given:
        gamma_sq = settings["gamma_sq"]
        if not gamma_sq > 1:
            raise UsageError(f"--gamma-sq must exceed 1, got {gamma_sq!r}")
        return float(np.sqrt(gamma_sq))
    ratio = settings["omega_f_sq_ratio"] if "omega_f_sq_ratio" in given else 0.2
    if not 0 < ratio < 1:
        raise UsageError(f"--omega-f-sq-ratio must lie in (0, 1), got {ratio!r}")
    return float(ratio ** -0.25)


def _verify_tol():
    return env_rel_tol() or VERIFY_REL_TOL


def _numeric(params, prefix=""):
    return {prefix + k: float(v) for k, v in params.items()
            if isinstance(v, (int, float, np.floating)) and not isinstance(v, bool)}


def _grid(lo, hi, points):
    return np.linspace(lo, hi, points)


def _outputs(out, stem):
    os.makedirs(out, exist_ok=True)
    return os.path.join(out, stem + ".csv"), os.path.join(out, stem + ".json")


def _finish(command, method, spec, scalars, rows, header, out, stem, notes=()):
    csv_path, json_path = _outputs(out, stem)
    report = RunReport(command=command, method=method, spec=spec, scalars=scalars,
                       trajectory_file=os.path.basename(csv_path), timestamp=utc_timestamp(),
                       notes=tuple(notes))
    write_csv(csv_path, header, rows)
    write_report(json_path, report)
    return report, json_path


# ---------------------------------------------------------------- expansion


def run_expansion(settings, given, out, points):
    method = settings["method"]
    gamma = _gamma(settings, given)
    notes = []
    if method in ("bang3", "bang2"):
        _forbid(given, ["sf"], f"with --method {method}: the final time follows from the bangs")
        if method == "bang2":
            _forbid(given, ["w1", "w2"], "with --method bang2: w2 = 1/gamma")
            protocol = expansion.two_jump_protocol(gamma)
        else:
            protocol = expansion.bang_bang_protocol(settings["w1"], settings["w2"], gamma,
                                                    settings["control_bound"])
        spec = expansion.ExpansionSpec(gamma, protocol.sf, settings["control_bound"])
    else:
        _forbid(given, ["w1", "w2"], f"with --method {method}")
        sf = _require(settings, given, "sf", f"for --method {method}")
        if not sf > 0:
            raise UsageError(f"--sf must be positive, got {sf!r}")
        spec = expansion.ExpansionSpec(gamma, sf, settings["control_bound"])
        if method == "quintic":
            protocol = expansion.quintic_protocol(spec)
        elif method == "cubic-opt":
            result, protocol = expansion.optimize_cubic(spec, objective=settings["objective"])
            notes.append(f"cubic objective: {settings['objective']}")
        else:
            protocol = expansion.oct_energy_protocol(spec)

    scalars = {"gamma": gamma, "gamma_sq": gamma**2, "sf": protocol.sf,
               "mean_energy": protocol.mean_energy_ratio}
    scalars.update(_numeric(protocol.parameters))
    if method == "cubic-opt":
        scalars.update(evaluations=result.evaluations, simplex_spread=result.simplex_spread)
    if method == "bang2":
        scalars["two_jump_energy_closed_form"] = float(expansion.two_jump_energy(protocol.sf))
        scalars["sf_closed_form"] = np.pi * gamma / 2
    if method in ("bang3", "bang2"):
        scalars["sf_min"] = np.pi / 4 + np.log(gamma)
    try:
        bound, _ = expansion.oct_energy_bound(gamma, protocol.sf)
        scalars["energy_bound"] = bound
        scalars["ratio_to_bound"] = protocol.mean_energy_ratio / bound
    except ValueError as exc:
        notes.append(f"energy bound unavailable: {exc}")

    closure = expansion.verify_expansion(protocol, rel_tol=_verify_tol())
    scalars.update({f"closure_{k}": float(v) for k, v in vars(closure).items() if v is not None})

    s = _grid(0.0, protocol.sf, points)
    b, d1, _ = eval_shape(protocol.b_shape, s)
    u = np.broadcast_to(protocol.control(s), s.shape)
    density = expansion.energy_density(protocol.b_shape, s)
    rows = np.column_stack([s, b, d1, u, density])
    echo = {"gamma": gamma, "sf": protocol.sf if method.startswith("bang") else spec.sf,
            "control_bound": settings["control_bound"], "points": points, "method": method}
    if method == "bang3":
        echo.update(w1=settings["w1"], w2=settings["w2"])
    if method == "cubic-opt":
        echo["objective"] = settings["objective"]
    header = ["s", "b", "bprime", "u", "energy_density"]
    return _finish("expansion", protocol.method, echo, scalars, rows, header, out,
                   f"expansion-{method}", notes)


# ---------------------------------------------------------------- transport


def _transport_spec(settings, given, tf=None, delta=None):
    return transport.TransportSpec(
        omega0=settings["omega0"],
        tf=tf if tf is not None else (settings["tf"] if "tf" in given else transport.DEFAULT_TF),
        d=settings["distance"],
        m=settings["mass"],
        delta=delta,
    )


def _transport_rows(protocol, points):
    """Uniform samples plus one-sided rows at every trap discontinuity.

    At ``t = 0`` the row before the jump comes first, at ``tf`` the row after
    it comes last; interior switches get a left- and a right-limit row.
    """
    spec = protocol.spec
    tf = protocol.tf
    interior = [b for b in protocol.breakpoints if 0 < b < tf]
    t = _grid(0.0, tf, points)
    t = t[~np.isin(t, interior)]
    keyed = [((ti, 0), ti, protocol.trap(ti)) for ti in t]
    for b in interior:
        keyed += [((b, 0), b, protocol.trap(np.nextafter(b, 0.0))), ((b, 1), b, protocol.trap(b))]
    for jump in protocol.jumps:
        if jump.time == 0.0:
            keyed.append(((jump.time, -1), jump.time, jump.before))
        else:
            keyed.append(((jump.time, 1), jump.time, jump.after))
    keyed.sort(key=lambda item: item[0])
    times = np.array([k[1] for k in keyed])
    x0 = np.array([k[2] for k in keyed], dtype=float)
    x = eval_shape(protocol.x_shape, times)[0]
    u = x - x0
    return np.column_stack([times, x, x0, u, 0.5 * spec.m * spec.omega0**2 * u**2])


def run_transport(settings, given, out, points):
    method = settings["method"]
    notes = []
    if method != "time-optimal":
        _forbid(given, ["delta"], f"with --method {method}")
    if method != "hyp":
        _forbid(given, ["a1", "a2"], f"with --method {method}")
    if method != "poly-opt":
        _forbid(given, ["degree"], f"with --method {method}")
    result = None

    if method == "time-optimal":
        if "delta" in given and "tf" in given:
            raise UsageError("give --delta or --tf for time-optimal transport, not both")
        probe = _transport_spec(settings, given)
        delta = settings["delta"] if "delta" in given else 4 * probe.d / (probe.omega0**2 * probe.tf**2)
        if not delta > 0:
            raise UsageError(f"--delta must be positive, got {delta!r}")
        tf = 2.0 / probe.omega0 * np.sqrt(probe.d / delta)
        spec = _transport_spec(settings, given, tf=tf, delta=delta)
        protocol, _, _ = transport.time_optimal_protocol(spec)
    else:
        spec = _transport_spec(settings, given)
        if method == "p5":
            protocol = transport.quintic_protocol(spec)
        elif method in ("p7-opt", "p19-opt", "poly-opt"):
            degree = {"p7-opt": 7, "p19-opt": 19}.get(method)
            if method == "poly-opt":
                degree = _require(settings, given, "degree", "for --method poly-opt")
                if degree < 5:
                    raise UsageError(f"--degree must be at least 5, got {degree}")
            result, protocol = transport.optimize_polynomial(spec, degree)
        elif method == "hyp":
            if ("a1" in given) != ("a2" in given):
                raise UsageError("give both --a1 and --a2, or neither to optimize them")
            if "a1" in given:
                if not settings["a2"] > 1:
                    raise UsageError(f"--a2 must exceed 1, got {settings['a2']!r}")
                protocol = transport.hyperbolic_protocol(spec, settings["a1"], settings["a2"])
            else:
                result, protocol = transport.optimize_hyperbolic(spec)
        else:
            protocol = transport.energy_optimal_protocol(spec)

    oct_normalized = 12.0 / (spec.omega0 * protocol.tf) ** 4
    scalars = {
        "omega0": spec.omega0,
        "tf": protocol.tf,
        "epsilon_joules": spec.epsilon,
        "mean_potential_joules": protocol.mean_potential.joules,
        "mean_potential_normalized": protocol.mean_potential.normalized,
        "oct_mean_potential_normalized": oct_normalized,
        "ratio": 1.0 if method == "oct-energy" else protocol.ratio,
    }
    if method == "oct-energy":
        scalars["quadrature_ratio"] = protocol.ratio
    if method == "time-optimal":
        scalars["delta"] = spec.delta
        scalars["time_optimal_identity_joules"] = 0.5 * spec.m * spec.omega0**2 * spec.delta**2
    scalars.update(_numeric(protocol.parameters))
    if isinstance(protocol.x_shape, PolynomialShape):
        for n, c in enumerate(protocol.x_shape.monomial_coefficients() / spec.d):
            scalars[f"c{n}"] = float(c)
    if method == "hyp":
        scalars["endpoint_mismatch"] = abs(eval_shape(protocol.x_shape, 0.0)[0]) / spec.d
    if result is not None:
        scalars.update(evaluations=result.evaluations, simplex_spread=result.simplex_spread)
    for jump in protocol.jumps:
        tag = "start" if jump.time == 0.0 else "end"
        scalars[f"jump_{tag}_before"] = jump.before
        scalars[f"jump_{tag}_after"] = jump.after

    closure = transport.verify_transport(protocol, rel_tol=_verify_tol())
    scalars.update({f"closure_{k}": float(v) for k, v in vars(closure).items()})

    rows = _transport_rows(protocol, points)
    echo = {"omega0": spec.omega0, "tf": protocol.tf, "distance": spec.d, "mass": spec.m,
            "delta": spec.delta, "points": points, "method": method}
    if method == "poly-opt":
        echo["degree"] = settings["degree"]
    if method == "hyp" and "a1" in given:
        echo.update(a1=settings["a1"], a2=settings["a2"])
    header = ["t", "x", "x0", "u", "Ep"]
    return _finish("transport", protocol.method, echo, scalars, rows, header, out,
                   f"transport-{method}", notes)


# ---------------------------------------------------------------- spin


def _spin_spec(settings, given, need_rf=True):
    theta_f = np.pi / 2 if settings["case"] == "pi2" else np.pi
    if need_rf:
        _require(settings, given, "rf", "for spin targets")
    rf = settings["rf"]
    tf = settings["tf"] if "tf" in given else None
    return spin.SpinSpec(theta_f, rf, settings["epsilon"], tf)


def _spin_rows(protocol, points, phi):
    shape = protocol.theta_shape
    tf = protocol.tf
    t = _grid(0.0, tf, points)
    theta, _, _ = eval_shape(shape, t)
    b = protocol.field(t)
    tol = env_rel_tol() or 1e-11
    log_r = integrate_adaptive(lambda s, y: np.array([-np.sin(eval_shape(shape, s)[0]) ** 2]),
                               [0.0], (0.0, tf), rel_tol=tol, abs_tol=1e-14)
    a = log_r(t)[:, 0]
    theta0 = eval_shape(shape, 0.0)[0]
    s0 = [np.sin(theta0) * np.cos(phi), np.sin(theta0) * np.sin(phi), np.cos(theta0)]
    bloch = spin.integrate_bloch(protocol.field, s0, (0.0, tf), phi=phi, rel_tol=tol)(t)
    return np.column_stack([t, theta, b, a, np.exp(a), bloch])


def run_spin(settings, given, out, points):
    method = settings["method"]
    spec = _spin_spec(settings, given)
    notes = []
    if method != "p3":
        _forbid(given, ["a3"], f"with --method {method}")
    if method != "tanh":
        _forbid(given, ["a5"], f"with --method {method}")
    if method in ("oct", "p9"):
        _forbid(given, ["a1"], f"with --method {method}")
    if method in ("p9", "tanh") and not spec.is_flip:
        raise UsageError(f"--method {method} is built for --case flip")

    if method == "oct" and spec.tf is not None:
        raise UsageError("--tf is fixed by the target for --method oct")

    oct_tf = spin.oct_final_time(spec)
    oct_e = spin.oct_energy(spec)
    result = None
    if method == "oct":
        sol = spin.oct_solution(spec)
        protocol = sol.protocol
    else:
        family = SPIN_FAMILIES[method]
        if "a1" in given:
            params = {"a1": settings["a1"]}
            if method == "p3":
                params["a3"] = settings["a3"]
            if method == "tanh":
                params["a5"] = settings["a5"]
            protocol = spin.ansatz_protocol(spec, family, params)
            notes.append("explicit a1: the final spin length is reported, not enforced")
        else:
            result, protocol = spin.optimize_ansatz(spec, family, a3=settings["a3"], a5=settings["a5"])

    scalars = {
        "theta_f": spec.theta_f,
        "r_f": spec.r_f,
        "epsilon": spec.epsilon,
        "tf": protocol.tf,
        "energy": protocol.energy,
        "final_log_radius": protocol.final_log_radius,
        "final_radius": float(np.exp(protocol.final_log_radius)),
        "oct_tf": oct_tf,
        "oct_energy": oct_e,
        "ratio_to_oct": protocol.energy / oct_e,
    }
    if method == "oct":
        scalars["oct_tf_closed_form"] = spin.oct_final_time_closed_form(spec)
    elif spec.theta_f == np.pi / 2:
        reference = spin.SpinSpec(spec.theta_f, float(np.exp(-2.0)), spec.epsilon)
        scalars["ratio_to_reference_oct"] = protocol.energy / spin.oct_energy(reference)
        notes.append("ratio_to_reference_oct uses the optimal energy for r_f = exp(-2)")
    scalars.update(_numeric(protocol.parameters))
    if result is not None:
        scalars.update(evaluations=result.evaluations, simplex_spread=result.simplex_spread)

    closure = spin.verify_spin(protocol, phi=settings["phi"], rel_tol=min(_verify_tol(), 1e-11))
    scalars.update({f"closure_{k}": float(v) for k, v in vars(closure).items() if k != "final_state"})

    rows = _spin_rows(protocol, points, settings["phi"])
    echo = {"case": settings["case"], "theta_f": spec.theta_f, "rf": spec.r_f,
            "epsilon": spec.epsilon, "tf": protocol.tf, "phi": settings["phi"],
            "points": points, "method": method}
    if method == "p3":
        echo["a3"] = settings["a3"]
    if method == "tanh":
        echo["a5"] = settings["a5"]
    if "a1" in given:
        echo["a1"] = settings["a1"]
    header = ["t", "theta", "B", "a", "r", "Sx", "Sy", "Sz"]
    return _finish("spin", protocol.method, echo, scalars, rows, header, out,
                   f"spin-{method}", notes)


# ---------------------------------------------------------------- sweep


def _grid_spec(settings, given, name, default):
    lo, hi, num = settings[name] if name in given else default
    if not float(num).is_integer() or num < 1:
        raise UsageError(f"--{name} NUM must be a positive integer, got {num!r}")
    if num > 1 and not hi > lo:
        raise UsageError(f"--{name} needs STOP > START, got {lo!r}, {hi!r}")
    return np.linspace(lo, hi, int(num))


def _or_nan(fn):
    try:
        return fn()
    except ValueError:
        return float("nan")


def _sweep_expansion_sf(settings, given):
    gamma = _gamma(settings, given)
    grid = _grid_spec(settings, given, "grid", SWEEP_DEFAULT_GRIDS["expansion-sf"])
    if np.any(grid <= 0):
        raise UsageError("final times must be positive")
    rows = []
    for sf in grid:
        spec = expansion.ExpansionSpec(gamma, float(sf))
        quintic = _or_nan(lambda: expansion.quintic_protocol(spec).mean_energy_ratio)
        cubic = _or_nan(
            lambda: expansion.optimize_cubic(spec, settings["objective"])[1].mean_energy_ratio)
        bound = _or_nan(lambda: expansion.oct_energy_bound(gamma, float(sf))[0])
        rows.append([sf, quintic, cubic, bound, float(expansion.two_jump_energy(sf))])
    header = ["sf", "quintic", "cubic_opt", "oct_energy", "two_jump"]
    echo = {"gamma": gamma, "grid": [float(grid[0]), float(grid[-1]), len(grid)],
            "objective": settings["objective"]}
    return rows, header, echo


def _sweep_bang_grid(settings, given):
    gamma = _gamma(settings, given)
    w1s = _grid_spec(settings, given, "grid", SWEEP_DEFAULT_GRIDS["bang-grid"])
    w2s = _grid_spec(settings, given, "grid2", (1.0 / gamma, 1.0, 17))
    rows = []
    for w1 in w1s:
        for w2 in w2s:
            protocol = expansion.bang_bang_protocol(float(w1), float(w2), gamma)
            rows.append([w1, w2, protocol.parameters["s1"], protocol.sf, protocol.mean_energy_ratio])
    header = ["w1", "w2", "s1", "sf", "mean_energy"]
    echo = {"gamma": gamma, "grid": [float(w1s[0]), float(w1s[-1]), len(w1s)],
            "grid2": [float(w2s[0]), float(w2s[-1]), len(w2s)]}
    return rows, header, echo


def _sweep_transport_tf(settings, given):
    _forbid(given, ["tf"], "with --kind transport-tf (use --grid)")
    grid = _grid_spec(settings, given, "grid", SWEEP_DEFAULT_GRIDS["transport-tf"])
    if np.any(grid <= 0):
        raise UsageError("final times must be positive")
    rows = []
    for tf in grid:
        spec = _transport_spec(settings, given, tf=float(tf))
        delta = 4 * spec.d / (spec.omega0**2 * tf**2)
        bang, _, _ = transport.time_optimal_protocol(_transport_spec(settings, given, float(tf), delta))
        values = [
            bang.mean_potential.normalized,
            transport.energy_optimal_protocol(spec).mean_potential.normalized,
            transport.quintic_protocol(spec).mean_potential.normalized,
            transport.optimize_polynomial(spec, 7)[1].mean_potential.normalized,
            transport.optimize_polynomial(spec, 19)[1].mean_potential.normalized,
        ]
        rows.append([tf, *values])
    header = ["tf", "time_optimal", "oct_energy", "p5", "p7_opt", "p19_opt"]
    echo = {"omega0": settings["omega0"], "distance": settings["distance"], "mass": settings["mass"],
            "grid": [float(grid[0]), float(grid[-1]), len(grid)]}
    return rows, header, echo


def _sweep_spin_af(settings, given):
    method = settings["family"]
    family = SPIN_FAMILIES[method]
    theta_f = np.pi / 2 if settings["case"] == "pi2" else np.pi
    if family == spin.TANH_FLIP and theta_f != np.pi:
        raise UsageError("--family tanh is built for --case flip")
    if "tf" in given:
        tf = settings["tf"]
        if not tf > 0:
            raise UsageError(f"--tf must be positive, got {tf!r}")
    else:
        tf = spin.oct_final_time(_spin_spec(settings, given))
    grid = _grid_spec(settings, given, "grid", SWEEP_DEFAULT_GRIDS["spin-af"])
    # the target spin length only sets tf; any valid value builds the family
    spec = spin.SpinSpec(theta_f, 0.5, settings["epsilon"], tf)
    rows = []
    for a1 in grid:
        params = {"a1": float(a1), "a3": settings["a3"], "a5": settings["a5"]}
        protocol = spin.ansatz_protocol(spec, family, params)
        rows.append([a1, protocol.final_log_radius, np.exp(protocol.final_log_radius),
                     protocol.energy])
    header = ["a1", "a_f", "r_f", "energy"]
    echo = {"family": method, "theta_f": theta_f, "tf": tf, "epsilon": settings["epsilon"],
            "grid": [float(grid[0]), float(grid[-1]), len(grid)]}
    if family == spin.CUBIC:
        echo["a3"] = settings["a3"]
    if family == spin.TANH_FLIP:
        echo["a5"] = settings["a5"]
    return rows, header, echo


_SWEEPS = {
    "expansion-sf": _sweep_expansion_sf,
    "bang-grid": _sweep_bang_grid,
    "transport-tf": _sweep_transport_tf,
    "spin-af": _sweep_spin_af,
}


def run_sweep(settings, given, out, points):
    kind = settings["kind"]
    rows, header, echo = _SWEEPS[kind](settings, given)
    echo["kind"] = kind
    data = np.array(rows, dtype=float)
    scalars = {"rows": float(len(rows))}
    for j, name in enumerate(header[1:], start=1):
        finite = data[:, j][np.isfinite(data[:, j])]
        if finite.size:
            scalars[f"min_{name}"] = float(finite.min())
            scalars[f"max_{name}"] = float(finite.max())
    notes = []
    if not np.all(np.isfinite(data)):
        notes.append("NaN cells mark grid points where a quantity is undefined")
    return _finish("sweep", kind, echo, scalars, data, header, out, f"sweep-{kind}", notes)


_RUNNERS = {"expansion": run_expansion, "transport": run_transport, "spin": run_spin,
            "sweep": run_sweep}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        env_rel_tol()
        settings, given, out, points = resolve(args)
        report, json_path = _RUNNERS[args.command](settings, given, out, points)
    except InfeasibleTargetError as exc:
        print(f"sta-forge: target out of reach: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"sta-forge: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"sta-forge: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(json_path)
    for name in sorted(report.scalars):
        print(f"  {name} = {report.scalars[name]:.12g}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
