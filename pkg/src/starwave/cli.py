"""Command-line front end: verification suites and CSV-emitting scans."""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, StarWaveError
from .tolerances import DEFAULT_TOL

COMMANDS = ("verify", "pseudospec", "evolve", "eigchain", "converge")

DEFAULTS = {
    "edges": "2",
    "alpha": "2.5,0",
    "z": "1,0",
    "zgrid": "0.1,2,41,-2,2,41",
    "out": "",
    "seed": "0",
    "times": "0,5,51",
    "length": "5",
    "nlist": "4,8,16,32,64,128,256,512",
    "workers": "1",
    "trunc_length": "",
    "elements_per_edge": "3000",
}
# converge lives in the coercive half-plane by default
COMMAND_DEFAULTS = {"converge": {"alpha": "1,0", "z": "-1,0"}}
DEFAULT_OUT = {
    "verify": "verify_report.json",
    "pseudospec": "pseudospec.csv",
    "evolve": "evolve.csv",
    "eigchain": "eigchain.csv",
    "converge": "converge.csv",
}
HEADERS = {
    "pseudospec": ["re_z", "im_z", "re_alpha", "im_alpha", "norm_lower", "eta_bound", "axis_bound"],
    "evolve": ["t", "energy", "re_u0", "im_u0", "robin_abs", "continuity_defect"],
    "eigchain": ["n", "chain_residual", "energy_norm", "re_u0", "im_u0", "robin_abs"],
    "converge": ["n", "sup_gap", "mesh_floor", "slope_running"],
}


@dataclass
class RunConfig:
    command: str
    n_edges: int
    alpha: complex
    z: complex
    zgrid: tuple
    out: str
    seed: int
    tol: dict
    times: tuple
    length: int
    nlist: tuple
    workers: int
    trunc_length: float | None
    elements_per_edge: int
    raw: dict = field(default_factory=dict)
    explicit: frozenset = frozenset()

    def echo(self) -> dict:
        return {
            "command": self.command,
            "version": __version__,
            "n_edges": self.n_edges,
            "alpha": [self.alpha.real, self.alpha.imag],
            "z": [self.z.real, self.z.imag],
            "zgrid": list(self.zgrid),
            "out": self.out,
            "seed": self.seed,
            "tol": dict(sorted(self.tol.items())),
            "times": list(self.times),
            "length": self.length,
            "nlist": list(self.nlist),
            "workers": self.workers,
            "trunc_length": self.trunc_length,
            "elements_per_edge": self.elements_per_edge,
        }


def parse_complex(text: str) -> complex:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) not in (1, 2):
        raise ConfigError(f"complex values are written RE,IM; got {text!r}")
    try:
        vals = [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"not a number pair: {text!r}") from None
    return complex(vals[0], vals[1] if len(vals) == 2 else 0.0)


def _floats(text: str, count: int, what: str) -> list[float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != count:
        raise ConfigError(f"{what} needs {count} comma-separated values; got {text!r}")
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise ConfigError(f"bad number in {what}: {text!r}") from None


def _int(text: str, what: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise ConfigError(f"{what} must be an integer; got {text!r}") from None


def _count(x: float, what: str) -> int:
    if x != int(x) or x < 1:
        raise ConfigError(f"{what} count must be a positive integer")
    return int(x)


def parse_tol(items, base: dict | None = None) -> dict:
    out = dict(base or {})
    for item in items:
        for part in item.split(","):
            part = part.strip()
            if not part:
                continue
            name, sep, val = part.partition("=")
            name = name.strip()
            if not sep or name not in DEFAULT_TOL:
                raise ConfigError(f"tolerance override must be NAME=VAL with NAME in {sorted(DEFAULT_TOL)}; got {part!r}")
            try:
                out[name] = float(val)
            except ValueError:
                raise ConfigError(f"bad tolerance value {val!r}") from None
    return out


def read_config_file(path: str) -> tuple[dict, list[str]]:
    """Flat key = value lines; '#' starts a comment; ``tol`` may repeat."""
    values: dict = {}
    tols: list[str] = []
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        if key == "tol":
            tols.append(val.strip())
        elif key in DEFAULTS:
            values[key] = val.strip()
        else:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
    return values, tols


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="starwave", description=__doc__)
    p.add_argument("--version", action="version", version=f"starwave {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="flat key=value file; flags override it")
        s.add_argument("--edges", help="number of edges N")
        s.add_argument("--alpha", help="coupling RE,IM")
        s.add_argument("--z", help="spectral parameter RE,IM")
        s.add_argument("--zgrid", help="RMIN,RMAX,RN,IMIN,IMAX,IN")
        s.add_argument("--out", help="output path")
        s.add_argument("--seed", help="random seed")
        s.add_argument("--tol", action="append", default=[], help="NAME=VAL, repeatable")
        s.add_argument("--times", help="TMIN,TMAX,COUNT (evolve)")
        s.add_argument("--length", help="chain length (eigchain)")
        s.add_argument("--nlist", help="comma-separated n values (converge)")
        s.add_argument("--workers", help="worker processes")
        s.add_argument("--trunc-length", dest="trunc_length", help="truncation length L (converge)")
        s.add_argument("--elements-per-edge", dest="elements_per_edge", help="elements per edge (converge)")
    return p


def resolve_config(args: argparse.Namespace) -> RunConfig:
    raw = dict(DEFAULTS)
    raw.update(COMMAND_DEFAULTS.get(args.command, {}))
    file_tols: list[str] = []
    if args.config:
        values, file_tols = read_config_file(args.config)
        raw.update(values)
    explicit = set(values) if args.config else set()
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            raw[key] = val
            explicit.add(key)
    tol = parse_tol(args.tol, parse_tol(file_tols, DEFAULT_TOL))
    n_edges = _int(raw["edges"], "edges")
    if n_edges < 1:
        raise ConfigError("edges must be at least 1")
    zg = _floats(raw["zgrid"], 6, "zgrid")
    zgrid = (zg[0], zg[1], _count(zg[2], "zgrid"), zg[3], zg[4], _count(zg[5], "zgrid"))
    tm = _floats(raw["times"], 3, "times")
    times = (tm[0], tm[1], _count(tm[2], "times"))
    nlist = tuple(_int(x.strip(), "nlist") for x in raw["nlist"].split(",") if x.strip())
    if not nlist or min(nlist) < 1:
        raise ConfigError("nlist must hold positive integers")
    trunc = float(raw["trunc_length"]) if raw["trunc_length"] else None
    workers = _int(raw["workers"], "workers")
    length = _int(raw["length"], "length")
    if workers < 1 or length < 1:
        raise ConfigError("workers and length must be positive")
    return RunConfig(
        command=args.command,
        n_edges=n_edges,
        alpha=parse_complex(raw["alpha"]),
        z=parse_complex(raw["z"]),
        zgrid=zgrid,
        out=raw["out"] or DEFAULT_OUT[args.command],
        seed=_int(raw["seed"], "seed"),
        tol=tol,
        times=times,
        length=length,
        nlist=nlist,
        workers=workers,
        trunc_length=trunc,
        elements_per_edge=_int(raw["elements_per_edge"], "elements_per_edge"),
        raw=raw,
        explicit=frozenset(explicit),
    )


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_csv(path: str, header: list[str], rows) -> int:
    count = 0
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, (int, np.integer)) and not isinstance(v, bool) else fmt(v)
                        for v in row])
            count += 1
    return count


def write_json(path: str, payload: dict) -> None:
    with open(path, "w", newline="\n") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def sidecar(cfg: RunConfig, extra: dict | None = None) -> None:
    payload = {"config": cfg.echo()}
    if extra:
        payload["diagnostics"] = extra
    write_json(cfg.out + ".json", payload)


def _finish(cfg: RunConfig, rows: list, extra: dict | None = None) -> int:
    n = write_csv(cfg.out, HEADERS[cfg.command], rows)
    sidecar(cfg, extra)
    print(f"wrote {cfg.out} ({n} rows)")
    return 0


def cmd_verify(cfg: RunConfig) -> int:
    from .verify import run_all

    results = run_all(cfg.n_edges, cfg.seed, cfg.tol, cfg.alpha, cfg.z)
    for r in results:
        print(r.line())
    ok = all(r.passed for r in results)
    write_json(cfg.out, {
        "config": cfg.echo(),
        "passed": ok,
        "suites": [{"name": r.name, "passed": r.passed, "measured": r.measured} for r in results],
    })
    print(f"{'all suites passed' if ok else 'some suites failed'}; report in {cfg.out}")
    return 0 if ok else 1


def cmd_pseudospec(cfg: RunConfig) -> int:
    from .dictionary import domain_dictionary
    from .spectra import ZGrid, pseudospectrum_scan

    if cfg.alpha == cfg.n_edges:
        raise ConfigError(f"critical coupling alpha = N = {cfg.n_edges}: the resolvent set is empty "
                          "in Re z > 0; use eigchain instead")
    recs = pseudospectrum_scan(cfg.alpha, ZGrid(*cfg.zgrid), cfg.n_edges,
                               domain_dictionary(cfg.n_edges, cfg.seed), workers=cfg.workers)
    return _finish(cfg, [r.row() for r in recs])


def cmd_evolve(cfg: RunConfig) -> int:
    from .dictionary import random_domain_splines
    from .evolve import energy, make_problem, solution_at, vertex_report

    if cfg.alpha == cfg.n_edges:
        raise ConfigError(f"critical coupling alpha = N = {cfg.n_edges}: solutions are not unique")
    D = random_domain_splines(np.random.default_rng(cfg.seed), cfg.n_edges, cfg.alpha)
    P = make_problem(cfg.alpha, D.u, D.v)
    t0, t1, n = cfg.times
    if t0 < 0:
        raise ConfigError("times must be non-negative")
    rows = []
    for t in np.linspace(t0, t1, n):
        S = solution_at(P, float(t))
        u0, rob, cont = vertex_report(S, cfg.alpha)
        rows.append((float(t), energy(P, float(t)), u0.real, u0.imag, rob, cont))
    return _finish(cfg, rows)


def cmd_eigchain(cfg: RunConfig) -> int:
    from .graphfun import energy_norm, robin_residual
    from .spectra import chain_residual, eig_chain

    N = cfg.n_edges
    if "alpha" in cfg.explicit and cfg.alpha != N:
        raise ConfigError(f"eigchain runs at the critical coupling alpha = N = {N}")
    cfg.alpha = complex(N)
    chain = eig_chain(N, cfg.z, cfg.length)
    res = chain_residual(chain, cfg.z, N)
    rows = []
    for k, (U, r) in enumerate(zip(chain, res), 1):
        u0 = U.u[0].at0()
        rows.append((k, r, energy_norm(U), u0.real, u0.imag, abs(robin_residual(U, N))))
    return _finish(cfg, rows)


def cmd_converge(cfg: RunConfig) -> int:
    from .approx import MeshProblem, convergence_study, fitted_slope, ladder_dictionary, truncation_drift

    if cfg.trunc_length:
        L = cfg.trunc_length
    elif cfg.z.real:
        L = max(10.0, 12.0 / abs(cfg.z.real))
    else:
        raise ConfigError("z on the imaginary axis needs an explicit trunc_length")
    mesh = MeshProblem(trunc_length=L, elements_per_edge=cfg.elements_per_edge,
                       n_max=float(2 ** math.ceil(math.log2(max(cfg.nlist)))))
    dic = ladder_dictionary(cfg.n_edges)
    rows = convergence_study(cfg.alpha, cfg.z, dic, cfg.nlist, mesh)
    floor, floor_2l = truncation_drift(cfg.alpha, cfg.z, dic, mesh)
    extra = {"fitted_slope": fitted_slope(rows), "mesh_floor": floor, "mesh_floor_doubled_length": floor_2l}
    return _finish(cfg, [(r.n, r.sup_gap, r.mesh_floor, r.slope_running) for r in rows], extra)


HANDLERS = {
    "verify": cmd_verify,
    "pseudospec": cmd_pseudospec,
    "evolve": cmd_evolve,
    "eigchain": cmd_eigchain,
    "converge": cmd_converge,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return HANDLERS[cfg.command](cfg)
    except (ConfigError, StarWaveError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
