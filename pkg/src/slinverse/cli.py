"""Forward and inverse spectral computations for a two-layer medium.

    slinverse forward        --a 2 --alpha 0.5 --modes 64 --in cos --out spec.csv
    slinverse inverse        --a 2 --alpha 0.5 --trunc 64 --in spec.csv --out q.csv
    slinverse roundtrip      --a 2 --alpha 0.5 --modes 64 --in cos
    slinverse example-verify --a 2 --alpha 0.5
    slinverse parseval       --a 2 --alpha 0.5 --modes 64

Settings come from an optional ``--config`` file of ``key = value`` lines;
command-line flags override it.  Exit codes: 0 success, 1 a check ran but
missed its bound, 2 invalid configuration, 3 numerical failure, 4 file
problems.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .degenerate import (ExampleData, oracle_slice, phi_integral, phi_integral_quadrature,
                         residual_main_equation)
from .errors import DomainError, EigenvalueSearchError, ProfileError, SingularSystemError
from .forward import PotentialGrid, SpectralData, forward_spectrum
from .geometry import PI, MediumProfile
from .kernels import TAPERS
from .main_equation import InversionConfig, build_slice, reconstruct, relative_l2_error, solve_slice
from .unperturbed import parseval_defects

EXIT_OK, EXIT_BOUND, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3, 4
MODES = ("forward", "inverse", "roundtrip", "example-verify", "parseval")


class ConfigError(ValueError):
    pass


class DataFileError(OSError):
    pass


@dataclass(frozen=True)
class RunConfig:
    a: float | None = None
    alpha: float | None = None
    mode: str | None = None
    modes: int = 64
    x_grid: int = 101
    t_grid: int = 128
    trunc: int | None = None
    tol_root: float = 1e-12
    tol_solve: float = 1e-8
    input: str | None = None
    output: str | None = None
    bound_l2: float = 0.1
    bound_sup: float = math.inf
    taper: str = "lanczos"

    def validated(self) -> "RunConfig":
        if self.a is None or self.alpha is None:
            raise ConfigError("both a and alpha must be given")
        MediumProfile(self.a, self.alpha)
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {', '.join(MODES)}")
        for name, low in (("modes", 1), ("x_grid", 5), ("t_grid", 8)):
            if getattr(self, name) < low:
                raise ConfigError(f"{name} must be >= {low}")
        if self.trunc is not None and not 1 <= self.trunc:
            raise ConfigError("trunc must be >= 1")
        for name in ("tol_root", "tol_solve", "bound_l2", "bound_sup"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.taper not in TAPERS:
            raise ConfigError(f"taper must be one of {', '.join(sorted(TAPERS))}")
        return self

    @property
    def profile(self) -> MediumProfile:
        return MediumProfile(self.a, self.alpha)

    @property
    def n_trunc(self) -> int:
        return self.trunc if self.trunc is not None else self.modes

    def inversion(self) -> InversionConfig:
        return InversionConfig(self.n_trunc, self.x_grid, self.t_grid, self.tol_solve, self.taper)


# file key -> (field, parser)
_KEYS = {
    "a": ("a", float), "alpha": ("alpha", float), "mode": ("mode", str),
    "modes": ("modes", int), "x_grid": ("x_grid", int), "t_grid": ("t_grid", int),
    "trunc": ("trunc", int), "tol_root": ("tol_root", float), "tol_solve": ("tol_solve", float),
    "in": ("input", str), "out": ("output", str), "bound_l2": ("bound_l2", float),
    "bound_sup": ("bound_sup", float), "taper": ("taper", str),
}


def read_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataFileError(f"cannot read config {path}: {exc.strerror}") from exc
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        name, parse = _KEYS[key]
        try:
            values[name] = parse(value)
        except ValueError:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return values


def _fmt(v) -> str:
    return format(float(v), ".17g")


def _write_rows(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([r if isinstance(r, (int, np.integer)) else _fmt(r) for r in row])
    if path is None:
        sys.stdout.write(buf.getvalue())
        return
    try:
        Path(path).write_text(buf.getvalue())
    except OSError as exc:
        raise DataFileError(f"cannot write {path}: {exc.strerror}") from exc


def _read_rows(path, required):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataFileError(f"cannot read {path}: {exc.strerror}") from exc
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataFileError(f"{path}: file is empty") from None
    missing = [c for c in required if c not in header]
    if missing:
        raise DataFileError(f"{path}:1: missing column(s) {', '.join(missing)}")
    idx = [header.index(c) for c in required]
    rows = []
    for lineno, row in enumerate(reader, 2):
        if not row or not "".join(row).strip():
            continue
        try:
            rows.append([float(row[i]) for i in idx])
        except (ValueError, IndexError):
            raise DataFileError(f"{path}:{lineno}: malformed row {row!r}") from None
    if not rows:
        raise DataFileError(f"{path}: no data rows")
    return np.array(rows)


def builtin_potential(name: str):
    """zero, cos or const:c as a callable, else None."""
    if name == "zero":
        return lambda x: np.zeros_like(np.asarray(x, dtype=float))
    if name == "cos":
        return np.cos
    if name.startswith("const:"):
        try:
            c = float(name[6:])
        except ValueError:
            raise ConfigError(f"bad constant potential {name!r}") from None
        return lambda x: np.full_like(np.asarray(x, dtype=float), c)
    return None


def load_potential(cfg: RunConfig) -> PotentialGrid:
    spec = cfg.input or "zero"
    func = builtin_potential(spec)
    if func is not None:
        return PotentialGrid.from_function(cfg.profile, func)
    data = _read_rows(spec, ["x", "q"])
    try:
        return PotentialGrid(cfg.profile, data[:, 0], data[:, 1])
    except ValueError as exc:
        raise DataFileError(f"{spec}: {exc}") from None


def load_spectral(cfg: RunConfig) -> SpectralData:
    if cfg.input is None:
        raise ConfigError("inverse needs a spectral data file (in / --in)")
    data = _read_rows(cfg.input, ["n", "lambda", "alpha"])
    order = np.argsort(data[:, 0], kind="stable")
    data = data[order]
    if not np.array_equal(data[:, 0], np.arange(1, len(data) + 1)):
        raise DataFileError(f"{cfg.input}: n must run 1, 2, ..., N without gaps")
    try:
        return SpectralData(cfg.profile, data[:, 1], data[:, 2])
    except ValueError as exc:
        raise DataFileError(f"{cfg.input}: {exc}") from None


def _trace_path(out):
    p = Path(out)
    return p.with_name(p.stem + "_trace" + (p.suffix or ".csv"))


def cmd_forward(cfg: RunConfig) -> int:
    q = load_potential(cfg)
    sd = forward_spectrum(cfg.profile, q, cfg.modes, tol=cfg.tol_root)
    rows = [(n + 1, lam, al, res) for n, (lam, al, res)
            in enumerate(zip(sd.lambdas, sd.alphas, sd.char_residual))]
    _write_rows(cfg.output, ["n", "lambda", "alpha", "char_residual"], rows)
    if cfg.output is not None:
        print(f"wrote {cfg.modes} modes to {cfg.output}; max |Delta(lambda_n)| = "
              f"{sd.char_residual.max():.3g}")
    return EXIT_OK


def _run_inverse(cfg: RunConfig, spectral: SpectralData):
    if len(spectral) < cfg.n_trunc:
        raise ConfigError(f"trunc = {cfg.n_trunc} exceeds the {len(spectral)} available modes")
    res = reconstruct(spectral, cfg.inversion())
    if cfg.output is not None:
        pot = res.potential
        _write_rows(cfg.output, ["x", "q"], zip(pot.x, pot.q))
        tx, tv = res.trace.as_rows()
        _write_rows(_trace_path(cfg.output), ["x", "A_diag"], zip(tx, tv))
    return res


def cmd_inverse(cfg: RunConfig) -> int:
    res = _run_inverse(cfg, load_spectral(cfg))
    if cfg.output is None:
        _write_rows(None, ["x", "q"], zip(res.potential.x, res.potential.q))
    else:
        print(f"wrote potential to {cfg.output} and trace to {_trace_path(cfg.output)}")
    return EXIT_OK


def cmd_roundtrip(cfg: RunConfig) -> int:
    q = load_potential(cfg)
    sd = forward_spectrum(cfg.profile, q, max(cfg.modes, cfg.n_trunc), tol=cfg.tol_root)
    res = _run_inverse(cfg, sd)
    rel, sup = relative_l2_error(res.potential, q)
    ok = rel < cfg.bound_l2 and sup < cfg.bound_sup
    print(f"modes={cfg.n_trunc} x_grid={cfg.x_grid} t_grid={cfg.t_grid}")
    print(f"relative L2 error on [0.05, pi-0.05]: {rel:.6g} (bound {cfg.bound_l2:g})")
    print(f"sup error on [0.05, pi-0.05]: {sup:.6g} (bound {cfg.bound_sup:g})")
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_BOUND


def example_report(profile: MediumProfile, t_grid: int = 128, samples: int = 20):
    """Max closed-form residual, closed-form vs quadrature defect and solver error."""
    data = ExampleData(profile)
    xs = np.linspace(PI / samples, PI, samples)
    resid = 0.0
    for x in xs:
        for frac in np.linspace(0.025, 0.975, samples):
            resid = max(resid, residual_main_equation(data, x, frac * x))
    phi_def = max(abs(phi_integral(data, x) - phi_integral_quadrature(data, x)) for x in xs)
    kern = data.kernel_inputs(8)
    slice_err = 0.0
    for x in (0.25 * PI, profile.a, 0.5 * (profile.a + PI), PI):
        got = solve_slice(build_slice(profile, kern, x, t_grid)).a_values
        slice_err = max(slice_err, float(np.max(np.abs(got - oracle_slice(data, x, t_grid).a_values))))
    return resid, phi_def, slice_err


def cmd_example_verify(cfg: RunConfig) -> int:
    resid, phi_def, slice_err = example_report(cfg.profile, cfg.t_grid)
    checks = [("closed-form residual", resid, 1e-6),
              ("Phi closed form vs quadrature", phi_def, 1e-8),
              (f"solver vs closed form (t_grid={cfg.t_grid})", slice_err, 5e-3)]
    ok = True
    for name, val, bound in checks:
        good = val < bound
        ok &= good
        print(f"{'PASS' if good else 'FAIL'} {name}: {val:.3g} (bound {bound:g})")
    return EXIT_OK if ok else EXIT_BOUND


_PARSEVAL_FUNCS = {
    "cos-half": (lambda x: np.cos(0.5 * x), True),
    "parabola": (lambda x: PI ** 2 - x ** 2, True),
    "one": (lambda x: np.ones_like(x), False),
}


def cmd_parseval(cfg: RunConfig) -> int:
    name = cfg.input or "cos-half"
    if name not in _PARSEVAL_FUNCS:
        raise ConfigError(f"parseval test function must be one of {', '.join(_PARSEVAL_FUNCS)}")
    f, admissible = _PARSEVAL_FUNCS[name]
    defects = parseval_defects(cfg.profile, f, cfg.modes)
    print("N,defect")
    ns = sorted({1, 2, 4, 8, 16, 32, 64, 128, 256, 512, 1024, cfg.modes} & set(range(1, cfg.modes + 1)))
    for n in ns:
        print(f"{n},{_fmt(defects[n - 1])}")
    if not admissible:
        print(f"note: {name} does not vanish at pi; slow convergence is expected and not checked")
        return EXIT_OK
    final = defects[-1]
    early = defects[min(16, cfg.modes) - 1]
    ok = final < 1e-2 and (cfg.modes <= 16 or final < early)
    print(f"{'PASS' if ok else 'FAIL'} defect({cfg.modes}) = {final:.3g}")
    return EXIT_OK if ok else EXIT_BOUND


COMMANDS = {"forward": cmd_forward, "inverse": cmd_inverse, "roundtrip": cmd_roundtrip,
            "example-verify": cmd_example_verify, "parseval": cmd_parseval}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="slinverse", description=__doc__.split("\n")[0])
    ap.add_argument("mode", nargs="?", choices=MODES, help="command (or 'mode' in the config file)")
    ap.add_argument("--config", help="key = value settings file")
    ap.add_argument("--a", type=float)
    ap.add_argument("--alpha", type=float)
    ap.add_argument("--modes", type=int, help="number of eigenpairs N")
    ap.add_argument("--x-grid", dest="x_grid", type=int, help="x-values for the inversion")
    ap.add_argument("--t-grid", dest="t_grid", type=int, help="panels per slice")
    ap.add_argument("--trunc", type=int, help="series truncation (default: modes)")
    ap.add_argument("--in", dest="input",
                    help="input file, or a built-in potential: zero, cos, const:C")
    ap.add_argument("--out", dest="output", help="output CSV (stdout if omitted)")
    return ap


def resolve_config(args) -> RunConfig:
    values = read_config(args.config) if args.config else {}
    for f in fields(RunConfig):
        v = getattr(args, f.name, None)
        if v is not None:
            values[f.name] = v
    return RunConfig(**values).validated()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[cfg.mode](cfg)
    except (ConfigError, ProfileError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (EigenvalueSearchError, SingularSystemError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
