"""Command-line front end.

Every subcommand that writes files writes one manifest JSON listing each
output with its row count and a 64-bit FNV-1a checksum. Exit codes: 0 success,
1 validation error, 2 numerical failure.
"""

import argparse
import json
import re
import sys
from pathlib import Path

import numpy as np

from . import __version__, diagnostics, front_solver, ks_solver, resolvent_lab, symbol_engine
from .spectral_grid import PeriodicGrid, RealField, differentiate, l2_from_modes

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK64 = 0xFFFFFFFFFFFFFFFF


class ValidationError(Exception):
    pass


class NumericalFailure(Exception):
    pass


def fnv1a64(data):
    h = FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & MASK64
    return f"{h:016x}"


def fmt(x):
    # adding 0.0 folds -0 into 0
    return format(float(x) + 0.0, ".17g")


# input parsing

_TERM = re.compile(r"(cos|sin):(\d+):([-+0-9.eE]+)$")


def parse_ic(text, grid):
    """Initial field from ``cos:M:A,sin:M:A`` terms or ``file:PATH``."""
    if text.startswith("file:"):
        return _read_ic_file(text[5:], grid)
    values = np.zeros(grid.n)
    position = 0
    for term in text.split(","):
        match = _TERM.match(term.strip())
        if not match:
            raise ValidationError(f"malformed initial-condition term {term!r} at position {position}")
        kind, mode, amp = match.group(1), int(match.group(2)), match.group(3)
        try:
            amplitude = float(amp)
        except ValueError:
            raise ValidationError(f"bad amplitude {amp!r} at position {position}") from None
        if mode < 1:
            raise ValidationError(f"mode must be positive at position {position}")
        if mode > grid.n / 3:
            raise ValidationError(
                f"mode {mode} at position {position} exceeds the dealias bound n/3 = {grid.n // 3}")
        arg = 2.0 * np.pi * mode * grid.nodes / grid.ell0
        values += amplitude * (np.cos(arg) if kind == "cos" else np.sin(arg))
        position += len(term) + 1
    return RealField(grid, values)


def _read_ic_file(path, grid):
    try:
        data = np.loadtxt(path, delimiter=",", ndmin=1)
    except (OSError, ValueError) as err:
        raise ValidationError(f"cannot read initial condition file {path}: {err}") from None
    data = np.ravel(data)
    if data.size != grid.n:
        raise ValidationError(f"initial condition file has {data.size} values, grid needs {grid.n}")
    return RealField(grid, data)


def read_config(path):
    """key=value lines; blank lines and # comments ignored."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as err:
        raise ValidationError(f"cannot read config {path}: {err}") from None
    for number, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{number}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


# output

class OutputSet:
    def __init__(self):
        self.files = []

    def write_csv(self, path, header, rows):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        lines = [",".join(header)]
        for row in rows:
            lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
        data = ("\n".join(lines) + "\n").encode()
        path.write_bytes(data)
        self.files.append({"path": str(path), "row_count": len(lines) - 1, "checksum": fnv1a64(data)})

    def write_json(self, path, payload):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        data = (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode()
        path.write_bytes(data)
        self.files.append({"path": str(path), "row_count": 1, "checksum": fnv1a64(data)})


def _json_value(v):
    if isinstance(v, (list, tuple)):
        return [_json_value(x) for x in v]
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def write_manifest(path, args, outputs, grid=None, dt=None, t_final=None, fek_variant=None):
    params = {k: _json_value(v) for k, v in sorted(vars(args).items()) if k not in ("handler", "config")}
    manifest = {
        "tool_version": __version__,
        "subcommand": args.command,
        "parameters": params,
        "grid": None if grid is None else {"ell0": grid.ell0, "n": grid.n},
        "scheme": "etdrk4",
        "dt": dt,
        "t_final": t_final,
        "fek_variant": fek_variant,
        "outputs": outputs.files,
    }
    data = (json.dumps(manifest, indent=2, sort_keys=True) + "\n").encode()
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_bytes(data)
    return manifest


def _out_dir(out):
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


# g-variant resolution

def resolve_variant(choice, eps, grid):
    """Return (variant, label) with the label recorded in the manifest."""
    if choice in ("4", "14"):
        return int(choice), choice
    if eps == 0:
        return symbol_engine.DEFAULT_FEK_VARIANT, "oracle:skipped(eps=0)"
    checks = resolvent_lab.trace_check(eps, grid)
    variant = resolvent_lab.select_variant(checks)
    if variant is None:
        raise NumericalFailure("trace oracle did not single out one g variant")
    return variant, f"oracle:{variant}"


# subcommands

def _grid(args):
    try:
        return PeriodicGrid(args.ell, args.modes)
    except ValueError as err:
        raise ValidationError(str(err)) from None


def _config(args, grid, save_every=None):
    try:
        return ks_solver.SolverConfig(grid, args.dt, args.t_final, save_every or args.save_every)
    except ValueError as err:
        raise ValidationError(str(err)) from None


def _check_eps(eps):
    try:
        symbol_engine._check_eps(eps)
    except ValueError as err:
        raise ValidationError(str(err)) from None


def cmd_symbols(args):
    _check_eps(args.eps)
    grid = _grid(args)
    variant, label = resolve_variant(args.fek_variant, args.eps, grid)
    table = symbol_engine.build(args.eps, grid, variant)
    outputs = OutputSet()
    outputs.write_csv(args.out, ["mode", "lambda", "X", "b", "s", "g", "r", "q", "z", "u1", "u2"],
                      ((str(row[0]),) + row[1:] for row in table.rows()))
    write_manifest(f"{args.out}.manifest.json", args, outputs, grid, fek_variant=label)
    return 0


def cmd_oracle(args):
    _check_eps(args.eps)
    if args.eps == 0:
        raise ValidationError("the trace oracle needs eps > 0")
    grid = _grid(args)
    checks = resolvent_lab.trace_check(args.eps, grid, workers=args.workers)
    variant = resolvent_lab.select_variant(checks)
    outputs = OutputSet()
    header = ["mode", "lambda", "u1_closed", "u1_quad", "u1_bvp", "u2_closed", "u2_quad", "u2_bvp",
              "g_variant4", "g_variant14", "g_oracle", "winner"]
    rows = [(str(c.mode), c.lam, c.u1_closed, c.u1_quad, c.u1_bvp, c.u2_closed, c.u2_quad, c.u2_bvp,
             c.g_variant4, c.g_variant14, c.g_oracle, c.winner) for c in checks]
    outputs.write_csv(args.out, header, rows)
    label = "none" if variant is None else str(variant)
    write_manifest(f"{args.out}.manifest.json", args, outputs, grid, fek_variant=label)
    if variant is None or any(c.flagged for c in checks):
        print("trace oracle disagreement", file=sys.stderr)
        return 2
    print(f"winner={variant}")
    return 0


def _snapshot_rows(traj):
    nodal = traj.nodal()
    return [(t,) + tuple(row) for t, row in zip(traj.times, nodal)]


def _norm_rows(traj, eps=None):
    rows = []
    nodal = traj.nodal()
    for i, t in enumerate(traj.times):
        state = traj.state(i)
        row = (t, l2_from_modes(differentiate(state, 1)), float(np.max(np.abs(nodal[i]))), state.coeffs[0].real)
        rows.append(row if eps is None else (eps,) + row)
    return rows


def _write_trajectory(outputs, out, traj, eps=None):
    n = traj.grid.n
    outputs.write_csv(out / "snapshots.csv", ["tau"] + [f"eta_{j}" for j in range(n)], _snapshot_rows(traj))
    header = ["tau", "l2_phi_eta", "sup_phi", "mean_phi"]
    if eps is not None:
        header = ["eps"] + header
    outputs.write_csv(out / "norms.csv", header, _norm_rows(traj, eps))


def _ic(args, grid):
    return parse_ic(args.ic, grid)


def cmd_solve_ks(args):
    grid = _grid(args)
    config = _config(args, grid)
    phi0 = _ic(args, grid)
    try:
        traj = ks_solver.solve_ks(phi0, config)
    except ks_solver.BlowUpError as err:
        raise NumericalFailure(str(err)) from None
    out = _out_dir(args.out)
    outputs = OutputSet()
    _write_trajectory(outputs, out, traj)
    write_manifest(out / "solve-ks.manifest.json", args, outputs, grid, args.dt, args.t_final)
    return 0


def cmd_solve_front(args):
    _check_eps(args.eps)
    grid = _grid(args)
    config = _config(args, grid)
    psi0 = _ic(args, grid)
    variant, label = resolve_variant(args.fek_variant, args.eps, grid)
    try:
        psi = front_solver.solve_front(args.eps, psi0, config, variant)
        phi = ks_solver.solve_ks(psi0, config) if args.eps > 0 else None
    except ks_solver.BlowUpError as err:
        raise NumericalFailure(str(err)) from None
    out = _out_dir(args.out)
    outputs = OutputSet()
    _write_trajectory(outputs, out, psi, args.eps)
    if phi is not None and len(psi) >= 3:
        prof = diagnostics.remainder_profiles(front_solver.remainder(psi, phi, args.eps))
        keys = ["tau", "sup_rho", "l2_rho_etaeta", "l2_rho_tau_cum", "l2_rho_taueta_cum"]
        outputs.write_csv(out / "remainder.csv", keys, zip(*(prof[k] for k in keys)))
    write_manifest(out / "solve-front.manifest.json", args, outputs, grid, args.dt, args.t_final, label)
    return 0


def _eps_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ValidationError(f"bad eps list {text!r}") from None


def cmd_converge(args):
    grid = _grid(args)
    config = _config(args, grid)
    ic = _ic(args, grid)
    eps_list = _eps_list(args.eps_list)
    for e in eps_list:
        _check_eps(e)
    positive = [e for e in eps_list if e > 0]
    variant, label = resolve_variant(args.fek_variant, positive[0] if positive else 0.0, grid)
    try:
        report = diagnostics.convergence_study(grid.ell0, config.t_final, ic, eps_list, config, variant,
                                               workers=args.workers)
    except ValueError as err:
        raise ValidationError(str(err)) from None
    out = _out_dir(args.out)
    outputs = OutputSet()
    rows = []
    for i, eps in enumerate(report.eps_list):
        ratio = report.ratios[i] if i < len(report.ratios) else ""
        order = report.orders[i] if i < len(report.orders) else ""
        rows.append((eps, report.errors[i], ratio, order))
    outputs.write_csv(out / "converge.csv", ["eps", "sup_err", "ratio_to_next", "fitted_order"], rows)
    summary = {"ell0": grid.ell0, "T": config.t_final, "n": grid.n, "dt": config.dt,
               "order": _json_safe(report.order), "M_estimate": report.m_estimate,
               "failed": {fmt(k): v for k, v in report.failed.items()}}
    outputs.write_json(out / "converge.json", summary)
    write_manifest(out / "converge.manifest.json", args, outputs, grid, args.dt, args.t_final, label)
    if report.failed:
        print(f"blow-up in runs {sorted(report.failed)}", file=sys.stderr)
        return 2
    print(f"order={fmt(report.order)} M_estimate={fmt(report.m_estimate)}")
    return 0


def _json_safe(x):
    return None if x is None or not np.isfinite(x) else float(x)


def cmd_energy(args):
    grid = _grid(args)
    config = _config(args, grid, save_every=1)
    ic = _ic(args, grid)
    eps_list = _eps_list(args.eps_list)
    for e in eps_list:
        _check_eps(e)
        if e == 0:
            raise ValidationError("energy diagnostics need eps > 0")
    variant, label = resolve_variant(args.fek_variant, eps_list[0], grid)
    try:
        report = diagnostics.convergence_study(grid.ell0, config.t_final, ic, eps_list, config, variant,
                                               workers=args.workers, with_energy=True)
    except ValueError as err:
        raise ValidationError(str(err)) from None
    out = _out_dir(args.out)
    outputs = OutputSet()
    keys = ["sup_rho", "sup_rho_eta", "sup_l2_rho_etaeta", "int_l2_rho_tau", "int_l2_rho_taueta"]
    rows = [(eps,) + tuple(report.energy[eps].as_dict()[k] for k in keys) for eps in report.eps_list
            if eps in report.energy]
    outputs.write_csv(out / "energy.csv", ["eps"] + keys, rows)
    write_manifest(out / "energy.manifest.json", args, outputs, grid, args.dt, args.t_final, label)
    return 2 if report.failed else 0


def cmd_ansatz(args):
    grid = _grid(args)
    psi0 = _ic(args, grid)
    psi_tau = None if args.psi_tau == "ks" else RealField(grid, np.zeros(grid.n))
    bundle = front_solver.build_ansatz(psi0, None, grid, psi0_tau=psi_tau)
    report = front_solver.ansatz_residuals(bundle)
    out = _out_dir(args.out)
    outputs = OutputSet()
    rows = [(name, value) for name, value in report.residuals.items()]
    rows.append(("max_defect", report.max_defect))
    outputs.write_csv(out / "ansatz.csv", ["relation", "max_abs"], rows)
    write_manifest(out / "ansatz.manifest.json", args, outputs, grid)
    print(f"max_defect={fmt(report.max_defect)}")
    return 0


def cmd_threshold(args):
    _check_eps(args.eps)
    print(f"ell_crit={fmt(symbol_engine.stability_threshold(args.eps))}")
    return 0


# parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _add_grid(p, ell=12.0, modes=128):
    p.add_argument("--ell", type=float, default=ell, help="strip width ell0")
    p.add_argument("--modes", type=int, default=modes, help="even grid size n")


def _add_time(p):
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--t-final", type=float, default=1.0)
    p.add_argument("--save-every", type=int, default=100)
    p.add_argument("--ic", default="cos:1:1.0,cos:2:0.5")


def _add_variant(p):
    p.add_argument("--fek-variant", choices=["4", "14", "oracle"], default="oracle")


def build_parser():
    parser = _Parser(prog="frontlab", description="Spectral lab for the front equation and its K-S limit.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, required=True)

    def command(name, handler, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="key=value file; flags override it")
        p.set_defaults(handler=handler)
        return p

    p = command("symbols", cmd_symbols, "write the symbol table")
    p.add_argument("--eps", type=float, required=True)
    _add_grid(p, ell=2 * np.pi, modes=16)
    _add_variant(p)
    p.add_argument("--out", required=True)

    p = command("oracle", cmd_oracle, "compare trace symbols against the oracles")
    p.add_argument("--eps", type=float, default=0.5)
    _add_grid(p, ell=2 * np.pi, modes=16)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)

    p = command("solve-ks", cmd_solve_ks, "integrate the K-S equation")
    _add_grid(p)
    _add_time(p)
    p.add_argument("--out", required=True)

    p = command("solve-front", cmd_solve_front, "integrate the front equation")
    p.add_argument("--eps", type=float, required=True)
    _add_grid(p)
    _add_time(p)
    _add_variant(p)
    p.add_argument("--out", required=True)

    p = command("converge", cmd_converge, "eps sweep of sup |psi - Phi|")
    _add_grid(p)
    _add_time(p)
    _add_variant(p)
    p.add_argument("--eps-list", default="0.04,0.02,0.01")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)

    p = command("energy", cmd_energy, "a priori quantities of the remainder")
    _add_grid(p)
    _add_time(p)
    _add_variant(p)
    p.add_argument("--eps-list", default="0.02,0.01")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)

    p = command("ansatz", cmd_ansatz, "residuals of the two-term expansion")
    _add_grid(p, ell=2 * np.pi, modes=16)
    p.add_argument("--ic", default="cos:1:1.0")
    p.add_argument("--psi-tau", choices=["ks", "zero"], default="ks")
    p.add_argument("--out", required=True)

    p = command("threshold", cmd_threshold, "critical strip width")
    p.add_argument("--eps", type=float, default=0.0)
    return parser


def _config_path(argv):
    for i, token in enumerate(argv):
        if token == "--config" and i + 1 < len(argv):
            return argv[i + 1]
        if token.startswith("--config="):
            return token.split("=", 1)[1]
    return None


def _apply_config(parser, argv):
    """Install config values as subcommand defaults so explicit flags win."""
    argv = list(sys.argv[1:] if argv is None else argv)
    path = _config_path(argv)
    commands = parser._subparsers._group_actions[0].choices
    command = next((t for t in argv if t in commands), None)
    if path is None or command is None:
        return parser.parse_args(argv)
    sub = commands[command]
    known = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in read_config(path).items():
        action = known.get(key)
        if action is None or key in ("config", "help"):
            raise ValidationError(f"unknown config key {key!r}")
        try:
            defaults[key] = action.type(raw) if action.type else raw
        except ValueError:
            raise ValidationError(f"bad value {raw!r} for config key {key!r}") from None
        if action.choices is not None and defaults[key] not in action.choices:
            raise ValidationError(f"config key {key!r} must be one of {sorted(action.choices)}")
        action.required = False
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def parse_and_dispatch(argv=None):
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        return args.handler(args)
    except SystemExit as exit_:
        return int(exit_.code or 0)
    except ValidationError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except NumericalFailure as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return 2


def main():
    sys.exit(parse_and_dispatch())


if __name__ == "__main__":
    main()
