"""``loopspec`` command-line front end.

Exit codes: 0 success, 2 invalid input, 3 numerical failure, 4 a probe
found ``e0`` below one.
"""

from __future__ import annotations

import argparse
import ast
import csv
import io
import json
import sys
from importlib import resources
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import collapsed, curve, ellipse_variation as ev, gegenbauer, probe
from .eigensolver import e0_of_curve
from .errors import DegenerateAxes, LoopspecError, NumericalError, ValidationError

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL, EXIT_VIOLATION = 0, 2, 3, 4
SIG = 12


def schema(name: str) -> dict:
    """Published JSON schema of a subcommand's ``--format json`` output."""
    if name not in COMMANDS:
        raise ValidationError(f"no schema for {name!r}")
    return json.loads(resources.files("loopspec").joinpath("schemas", f"{name}.json").read_text())


# -- parsing helpers ---------------------------------------------------------------------

def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _seeds(text: str) -> list[int]:
    out = []
    try:
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            if "-" in part:
                lo, hi = part.split("-", 1)
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(part))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected seeds like 0,3,7 or 0-199, got {text!r}") from exc
    return out


_FUNCS = {"sin": np.sin, "cos": np.cos, "tan": np.tan, "exp": np.exp, "sqrt": np.sqrt,
          "abs": np.abs, "log": np.log}
_CONSTS = {"pi": np.pi}
_NODES = (ast.Expression, ast.BinOp, ast.UnaryOp, ast.Call, ast.Name, ast.Load, ast.Constant,
          ast.Add, ast.Sub, ast.Mult, ast.Div, ast.Pow, ast.USub, ast.UAdd)


def field_expression(text: str):
    """Vector field ``s -> (len(s), 3)`` from three comma-separated expressions in ``s``."""
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 3:
        raise ValidationError(f"field needs three components, got {text!r}")
    codes = []
    for p in parts:
        try:
            tree = ast.parse(p, mode="eval")
        except SyntaxError as exc:
            raise ValidationError(f"cannot parse {p!r}") from exc
        for node in ast.walk(tree):
            if not isinstance(node, _NODES):
                raise ValidationError(f"unsupported syntax in {p!r}")
            if isinstance(node, ast.Name) and node.id not in _FUNCS and node.id not in _CONSTS \
                    and node.id != "s":
                raise ValidationError(f"unknown name {node.id!r} in {p!r}")
            if isinstance(node, ast.Call) and not (isinstance(node.func, ast.Name)
                                                    and node.func.id in _FUNCS):
                raise ValidationError(f"unsupported call in {p!r}")
        codes.append(compile(tree, "<field>", "eval"))

    def f(s):
        s = np.asarray(s, dtype=float)
        env = {"__builtins__": {}, "s": s, **_FUNCS, **_CONSTS}
        return np.stack([np.broadcast_to(np.asarray(eval(c, env), float), s.shape)  # noqa: S307
                         for c in codes], axis=-1)
    return f


def read_config(path) -> list[str]:
    """``key=value`` lines as ``--key value`` arguments; ``#`` starts a comment."""
    args = []
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{n}: expected key=value")
        key, value = (t.strip() for t in line.split("=", 1))
        args += [f"--{key.replace('_', '-')}", value]
    return args


# -- output --------------------------------------------------------------------------------

def _round(obj):
    if isinstance(obj, dict):
        return {k: _round(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _round(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return float(f"{v:.{SIG}g}") if np.isfinite(v) else None
    return obj


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):#.{SIG}g}"
    return str(v)


@dataclass
class Output:
    data: dict
    header: list
    rows: list
    violation: bool = False

    def render(self, fmt: str) -> str:
        if fmt == "json":
            return json.dumps(_round(self.data), indent=2, sort_keys=True) + "\n"
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        for r in self.rows:
            w.writerow([_cell(v) for v in r])
        return buf.getvalue()


@dataclass
class RunConfig:
    subcommand: str
    params: dict = field(default_factory=dict)
    fmt: str = "csv"
    out: str | None = None
    seed: int | None = None


# -- subcommands ------------------------------------------------------------------------------

def cmd_e0(p) -> Output:
    if (p["curve"] is None) == (p["family"] is None):
        raise ValidationError("give exactly one of --curve or --family")
    if p["family"] is not None:
        if len(p["family"]) != 2:
            raise ValidationError("--family takes alpha,beta")
        a, b = p["family"]
        U = curve.family_F(a, b, grid_size=curve.default_grid_size(p["modes"] or 1))
        source = f"family:{a:.{SIG}g},{b:.{SIG}g}"
    else:
        U = curve.read_curve(p["curve"], p["modes"])
        source = str(p["curve"])
    e0, _ = e0_of_curve(U)
    kappa = curve.curvature(U).curvature
    data = {"source": source, "e0": e0, "grid_size": U.grid_size,
            "kappa_max": float(kappa.max()), "closure_defect": float(np.linalg.norm(U.closure_defect)),
            "unit_defect": U.unit_defect}
    return Output(data, ["e0", "grid_size", "kappa_max"], [[e0, U.grid_size, float(kappa.max())]])


def cmd_identity(p) -> Output:
    a, b = p["alpha"], p["beta"]
    I1, I2, I3 = ev.I_integrals(a, b)
    lhs, rhs = a**2 * I1, b**2 * I2
    gap = abs(lhs - rhs) / abs(lhs)
    try:
        cf = ev.closed_form_I(a, b)
        closed = {"I1": cf[0], "I2": cf[1]}
    except DegenerateAxes:
        closed = None
    data = {"alpha": a, "beta": b, "I1": I1, "I2": I2, "I3": I3,
            "alpha2_I1": lhs, "beta2_I2": rhs, "relative_gap": gap, "closed_form": closed}
    return Output(data, ["alpha", "beta", "alpha2_I1", "beta2_I2", "relative_gap"],
                  [[a, b, lhs, rhs, gap]])


def cmd_eta(p) -> Output:
    rep = ev.d_matrix_eta(p["alpha"], p["beta"], p["mode_cutoff"])
    return Output(rep.to_dict(), list(rep.CSV_FIELDS), [rep.csv_row()])


def cmd_asymptotics(p) -> Output:
    rows = ev.beta_asymptotics(p["betas"], p["alpha"])
    header = list(rows[0].keys()) if rows else ["beta"]
    return Output({"alpha": p["alpha"], "rows": rows}, header,
                  [[r[k] for k in header] for r in rows])


def cmd_collapsed(p) -> Output:
    r = collapsed.constrained_spectrum(p["alpha"], p["beta"], p["neigs"], p["basis"])
    g1, g2 = collapsed.coupling(p["alpha"], p["beta"])
    data = {"alpha": r.alpha, "beta": r.beta, "g1": g1, "g2": g2,
            "eta_values": r.eta_values, "eigenvector_overlap": r.eigenvector_overlap,
            "w0_check": r.w0_check, "lambda_bounds": list(r.lambda_bounds),
            "lambda_galerkin": r.lambda_galerkin, "basis_size": r.basis_size}
    rows = [[k, float(v)] for k, v in enumerate(r.eta_values)]
    return Output(data, ["index", "eta"], rows)


_LEMMA_DEFAULTS = {1: ("sin(s),cos(2*s),0", None), 2: ("0,cos(s),0", "-0.3,0,0")}


def cmd_lemma4(p) -> Output:
    order = p["order"]
    if order not in (1, 2):
        raise ValidationError("--order must be 1 or 2")
    x1_text = p["x1"] or _LEMMA_DEFAULTS[order][0]
    x1 = field_expression(x1_text)
    a = p["alpha"]
    if order == 1:
        rows = collapsed.lemma41_check(a, x1, p["mus"])
        fits = collapsed.fit_first_order(a, x1, max(abs(m) for m in p["mus"]))
        x2_text = None
    else:
        x2_text = p["x2"] or _LEMMA_DEFAULTS[2][1]
        x2 = field_expression(x2_text)
        rows = collapsed.lemma42_check(a, x1, x2, p["mus"])
        fits = collapsed.fit_second_order(a, x1, x2, min(abs(m) for m in p["mus"]))
    header = ["mu", "component", "direct", "predicted", "residual", "residual_over_power"]
    table = [[r.mu, r.component, r.direct, r.predicted, r.residual, r.residual_over_power]
             for r in rows]
    data = {"order": order, "alpha": a, "x1": x1_text, "x2": x2_text,
            "rows": [dict(zip(header, t)) for t in table],
            "fits": {k: {"fitted": v[0], "predicted": v[1]} for k, v in fits.items()}}
    return Output(data, header, table)


def cmd_gegenbauer(p) -> Output:
    if p["nmax"] < 0:
        raise ValidationError("--nmax must be nonnegative")
    rows = gegenbauer.spectrum_table(p["g"], p["nmax"])
    header = ["g", "n", "lambda_exact", "lambda_numeric", "abserr"]
    return Output({"g": p["g"], "a": gegenbauer.exponent_a(p["g"]), "rows": rows}, header,
                  [[r[k] for k in header] for r in rows])


def cmd_probe(p) -> Output:
    settings = {"modes": p["modes"], "amplitude": p["amplitude"], "max_evals": p["max_evals"]}
    cfg = probe.ProbeConfig(**settings)
    if not p["seeds"]:
        raise ValidationError("--seeds is empty")
    records = probe.run_probes(p["seeds"], cfg, out=p["jsonl"], workers=p["workers"])
    violation = any(r.violation_flag for r in records)
    if violation and p["jsonl"] is None:
        probe.append_jsonl([r for r in records if r.violation_flag], "loopspec_violations.jsonl")
    keys = ["seed", "start_e0", "best_e0", "evaluations", "accepted_steps", "status",
            "family_distance", "violation_flag"]
    summary = [{k: getattr(r, k) for k in keys} for r in records]
    data = {"config": asdict(cfg), "records": summary,
            "min_best_e0": min(r.best_e0 for r in records), "violation": violation}
    return Output(data, keys, [[s[k] for k in keys] for s in summary], violation)


def cmd_theorem1(p) -> Output:
    r = probe.theorem1_scan(p["alpha"], p["beta"], p["direction"],
                            p["mus"] or probe.DEFAULT_MUS)
    return Output(r.to_dict(), ["mu", "e0", "excess"],
                  [[m, e, e - 1.0] for m, e in zip(r.mu, r.e0)])


COMMANDS = {"e0": cmd_e0, "identity": cmd_identity, "eta": cmd_eta,
            "asymptotics": cmd_asymptotics, "collapsed": cmd_collapsed, "lemma4": cmd_lemma4,
            "gegenbauer": cmd_gegenbauer, "probe": cmd_probe, "theorem1": cmd_theorem1}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="loopspec", description="Spectral geometry of closed loops.")
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    def add(name, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--format", choices=["csv", "json"], default="csv")
        sp.add_argument("--out", default=None, help="write output here instead of stdout")
        sp.add_argument("--config", default=None, help="key=value file of default flags")
        return sp

    sp = add("e0", "lowest eigenvalue of a loop")
    sp.add_argument("--curve", default=None)
    sp.add_argument("--family", type=_floats, default=None)
    sp.add_argument("--modes", type=int, default=None)

    for name, help_ in (("identity", "kernel integrals and their identity"),
                        ("eta", "second-variation matrix and its lowest eigenvalue")):
        sp = add(name, help_)
        sp.add_argument("--alpha", type=float, required=True)
        sp.add_argument("--beta", type=float, required=True)
        if name == "eta":
            sp.add_argument("--mode-cutoff", type=int, default=256)

    sp = add("asymptotics", "small-beta behaviour of the kernel integrals")
    sp.add_argument("--betas", type=_floats, required=True)
    sp.add_argument("--alpha", type=float, default=1.0)

    sp = add("collapsed", "constrained spectrum of the reduced form")
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--beta", type=float, required=True)
    sp.add_argument("--neigs", type=int, default=4)
    sp.add_argument("--basis", type=int, default=400)

    sp = add("lemma4", "expansion checks near a collapsed orbit")
    sp.add_argument("--order", type=int, required=True)
    sp.add_argument("--mus", type=_floats, default=[1e-2, 1e-3, 1e-4])
    sp.add_argument("--alpha", type=float, default=1.0)
    sp.add_argument("--x1", default=None, help="three expressions in s, comma separated")
    sp.add_argument("--x2", default=None)

    sp = add("gegenbauer", "exact and numeric spectra of -d2/ds2 + g sec^2")
    sp.add_argument("--g", type=float, required=True)
    sp.add_argument("--nmax", type=int, default=3)

    sp = add("probe", "randomised descent of e0")
    sp.add_argument("--seeds", type=_seeds, required=True)
    sp.add_argument("--modes", type=int, default=6)
    sp.add_argument("--amplitude", type=float, default=0.3)
    sp.add_argument("--max-evals", type=int, default=2000)
    sp.add_argument("--workers", type=int, default=None)
    sp.add_argument("--jsonl", default=None, help="append full records to this file")

    sp = add("theorem1", "e0 along a perturbation of an ellipse")
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--beta", type=float, required=True)
    sp.add_argument("--direction", default="outofplane")
    sp.add_argument("--mus", type=_floats, default=None)
    return parser


def _with_config(argv: list[str]) -> list[str]:
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        raise ValidationError("--config needs a path")
    path = argv[i + 1]
    rest = argv[:i] + argv[i + 2:]
    if not rest:
        raise ValidationError("subcommand required")
    # config lines act as defaults: explicit flags come later and win
    return rest[:1] + read_config(path) + rest[1:]


def parse(argv) -> RunConfig:
    ns = build_parser().parse_args(_with_config(list(argv)))
    params = {k: v for k, v in vars(ns).items() if k not in ("subcommand", "format", "out", "config")}
    return RunConfig(ns.subcommand, params, ns.format, ns.out, params.get("seed"))


def run(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse(argv)
        result = COMMANDS[cfg.subcommand](cfg.params)
        text = result.render(cfg.fmt)
        if cfg.out:
            Path(cfg.out).write_text(text)
        else:
            sys.stdout.write(text)
    except (ValidationError, ValueError, OSError) as exc:
        print(f"loopspec: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericalError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"loopspec: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except LoopspecError as exc:
        print(f"loopspec: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if result.violation:
        print("loopspec: a probe found e0 below 1; records persisted", file=sys.stderr)
        return EXIT_VIOLATION
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
