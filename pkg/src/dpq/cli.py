"""Batch entry point: validated run configurations, artifact writers.

Every subcommand accepts its options either as flags or through
``--config file.json`` (flags win).  Outputs are written atomically
(temp file + rename) and a one-line JSON summary goes to stdout.

Exit codes: 0 success, 1 selftest failure, 2 configuration error
(message names the offending key), 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from . import automata, entanglement, hamiltonian, kasteleyn, observables, qstate, scaling
from . import __version__
from .errors import DpqError

__all__ = ["RunConfig", "main", "run"]


class ConfigError(Exception):
    """Bad run configuration; the message names the offending key."""


@dataclass
class RunConfig:
    """Merged, validated options of one subcommand invocation."""

    command: str
    p: float | None = None
    p1: float | None = None
    p2: float | None = None
    p3: float | None = None
    family: str = "site"
    L: int | None = None
    Lx: int | None = None
    Ly: int | None = None
    direction: str | None = None
    r_list: list | None = None
    window: list | None = None
    p_list: list | None = None
    g_list: list | None = None
    sizes: list | None = None
    ell: int | None = None
    d: list | None = None
    samples: int = 100_000
    steps: int | None = None
    seed: int = 7
    tail_rows: int = 1
    k: int = 6
    bc: str = "periodic"
    boundary: str = "active"
    threads: int | None = None
    out: str = "."

    @classmethod
    def merge(cls, command: str, config_file: str | None, cli: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)} - {"command"}
        merged: dict = {}
        if config_file is not None:
            try:
                loaded = json.loads(Path(config_file).read_text())
            except OSError as exc:
                raise ConfigError(f"config: cannot read {config_file}: {exc}") from exc
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config: invalid JSON in {config_file}: {exc}") from exc
            if not isinstance(loaded, dict):
                raise ConfigError("config: top level must be a JSON object")
            for key in loaded:
                if key not in known:
                    raise ConfigError(f"{key}: unknown configuration key")
            merged.update(loaded)
        for key, value in cli.items():
            if value is not None:
                merged[key] = value
        return cls(command=command, **merged)

    def require(self, *names: str) -> None:
        for name in names:
            if getattr(self, name) is None:
                raise ConfigError(f"{name}: required for {self.command}")

    def probability(self, name: str) -> float:
        value = getattr(self, name)
        if not (0.0 <= value <= 1.0):
            raise ConfigError(f"{name}: {value} is not a probability in [0, 1]")
        return float(value)

    def positive(self, name: str) -> int:
        value = getattr(self, name)
        if int(value) < 1:
            raise ConfigError(f"{name}: must be a positive integer")
        return int(value)


# ---------------------------------------------------------------------------
# small helpers


def _write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=str(path.parent), prefix=path.name + ".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _summary(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True))


def _header_lines(meta: dict) -> str:
    """`# key = value` artifact header, one line per entry, sorted."""
    return "".join(f"# {key} = {meta[key]}\n" for key in sorted(meta))


def _parse_int_list(text: str, key: str) -> list[int]:
    try:
        return [int(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"{key}: expected comma-separated integers") from exc


def _parse_float_list(text: str, key: str) -> list[float]:
    try:
        return [float(tok) for tok in text.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"{key}: expected comma-separated numbers") from exc


def _parse_sizes(text: str) -> list[tuple[int, int]]:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        try:
            lx, ly = tok.split("x")
            out.append((int(lx), int(ly)))
        except ValueError as exc:
            raise ConfigError("sizes: expected entries like 4x2") from exc
    return out


def _default_r_grid(L: int) -> list[int]:
    rmax = max(2, L // 4)
    raw = np.unique(np.round(np.logspace(0, math.log10(rmax), 26)).astype(int))
    return [int(r) for r in raw if r >= 1]


def _set_threads(config: RunConfig) -> None:
    value = config.threads
    if value is None:
        env = os.environ.get("DPQ_THREADS")
        if env:
            try:
                value = int(env)
            except ValueError as exc:
                raise ConfigError(f"threads: DPQ_THREADS={env!r} is not an integer") from exc
    if value is None:
        return
    import numba

    try:
        numba.set_num_threads(int(value))
    except ValueError as exc:
        raise ConfigError(f"threads: {exc}") from exc


def _dk_rule_from(config: RunConfig) -> automata.UpdateRule:
    config.require("p1", "p2", "p3")
    return automata.dk_rule(
        config.probability("p1"), config.probability("p2"), config.probability("p3")
    )


# ---------------------------------------------------------------------------
# subcommand bodies


def _cmd_scan_correlations(config: RunConfig) -> int:
    config.require("p", "L", "direction")
    p = config.probability("p")
    L = config.positive("L")
    samples = config.positive("samples")
    family = config.family
    if family == "site":
        rule = automata.dk_rule(0.0, p, p)
        lattice = automata.LatticeSpec(Lx=L, Ly=L, boundary_x="open", boundary_y="open")
    elif family == "bond":
        rule = automata.dk_bond_line(p)
        lattice = automata.LatticeSpec(Lx=L, Ly=L, boundary_x="open", boundary_y="open")
    elif family == "bond3":
        rule = automata.bond_dp_rule_2d(p)
        lattice = automata.LatticeSpec(
            Lx=L, Ly=L, Lz=L, geometry="cubic3d",
            boundary_x="open", boundary_y="open",
        )
    else:
        raise ConfigError(f"family: unknown rule family {family!r}")
    direction = config.direction
    if direction not in ("y", "x", "xminusy"):
        raise ConfigError(f"direction: must be y, x or xminusy, got {direction!r}")
    r_list = config.r_list or _default_r_grid(L)
    series = observables.correlation_scan(
        rule, lattice, direction, r_list, samples, config.seed
    )
    window = tuple(config.window) if config.window else scaling.default_window(L)
    fit = scaling.fit_power_law(series, window=window)
    out = Path(config.out)
    csv_path = out / f"correlations_{family}_{direction}.csv"
    fit_path = out / f"fit_{family}_{direction}.json"
    _write_atomic(csv_path, series.to_csv())
    fit_doc = fit.as_dict()
    fit_doc["meta"] = dict(series.meta)
    _write_atomic(fit_path, json.dumps(fit_doc, indent=2, sort_keys=True) + "\n")
    _summary({
        "command": config.command,
        "csv": str(csv_path),
        "fit": str(fit_path),
        "exponent": fit.params["exponent"],
        "stderr": fit.errors["exponent"],
        "reduced_chi2": fit.reduced_chi2,
    })
    return 0


def _cmd_phase_scan(config: RunConfig) -> int:
    config.require("p_list", "L", "steps")
    ps = [float(v) for v in config.p_list]
    for v in ps:
        if not (0.0 <= v <= 1.0):
            raise ConfigError(f"p_list: {v} is not a probability in [0, 1]")
    L = config.positive("L")
    if config.family == "bond3":
        lattice = automata.LatticeSpec(
            Lx=L, Ly=1, Lz=L, geometry="cubic3d",
            boundary_x="periodic", boundary_y="open",
        )
    else:
        lattice = automata.LatticeSpec(
            Lx=L, Ly=1, boundary_x="periodic", boundary_y="open"
        )
    series = observables.phase_scan(
        config.family, ps, lattice, config.positive("steps"),
        config.positive("samples"), config.seed, tail_rows=config.tail_rows,
    )
    out = Path(config.out)
    csv_path = out / f"phase_scan_{config.family}.csv"
    _write_atomic(csv_path, series.to_csv())
    _summary({
        "command": config.command,
        "csv": str(csv_path),
        "n_points": int(series.x.size),
    })
    return 0


def _cmd_exact_state(config: RunConfig) -> int:
    rule = _dk_rule_from(config)
    config.require("Lx", "Ly")
    Lx, Ly = config.positive("Lx"), config.positive("Ly")
    if config.bc == "periodic":
        psi = qstate.build_state_periodic(rule, Lx, Ly)
    elif config.bc == "open":
        lattice = automata.LatticeSpec(
            Lx=Lx, Ly=Ly, boundary_x="periodic", boundary_y="open"
        )
        if config.boundary == "active":
            row = automata.row_all_active(lattice)
        elif config.boundary == "empty":
            row = automata.row_all_empty(lattice)
        else:
            raise ConfigError(f"boundary: must be active or empty, got {config.boundary!r}")
        psi = qstate.build_state_open(rule, lattice, row)
    else:
        raise ConfigError(f"bc: must be periodic or open, got {config.bc!r}")
    out = Path(config.out)
    state_path = out / f"state_{config.bc}_{Lx}x{Ly}.txt"
    header = _header_lines({
        "rule_table": ",".join(f"{v:.17g}" for v in rule.table),
        "lattice": f"{Lx}x{Ly} bc={config.bc} boundary={config.boundary}",
        "seed": "none (exact construction)",
        "version": __version__,
    })
    _write_atomic(state_path, header + psi.to_text())
    payload = {
        "command": config.command,
        "state": str(state_path),
        "n_configs": len(psi.amps),
        "norm": psi.norm(),
        "vacuum_weight": psi.amplitude(0) ** 2,
    }
    _summary(payload)
    return 0


def _cmd_ground_space(config: RunConfig) -> int:
    rule = _dk_rule_from(config)
    config.require("Lx", "Ly")
    Lx, Ly = config.positive("Lx"), config.positive("Ly")
    lattice = automata.LatticeSpec(
        Lx=Lx, Ly=Ly, boundary_x="periodic", boundary_y="periodic"
    )
    H = hamiltonian.build_parent_hamiltonian(rule, lattice)
    nd = hamiltonian.defect_number(lattice)
    space = hamiltonian.ground_space(H, k=config.positive("k"))
    conserves = "conserves-defects" in H.tags
    sectors = hamiltonian.sector_decompose(H if conserves else None, nd)
    kernel = space.vectors[:, : space.kernel_dim]

    def overlap(vec: np.ndarray) -> float:
        c = kernel.T @ vec
        return float(c @ c)

    vac = np.zeros(1 << lattice.n_edges)
    vac[0] = 1.0
    dk = qstate.build_state_periodic(rule, Lx, Ly).to_dense()
    one_string = qstate.build_one_string_state(Lx, Ly).to_dense()
    report = {
        "eigenvalues": [float(v) for v in space.eigenvalues],
        "kernel_dim": space.kernel_dim,
        "ambiguous": space.ambiguous,
        "defect_conserving": conserves,
        "sectors": {str(key): int(dim) for key, dim in sectors.items()},
        "overlaps": {
            "vac": overlap(vac),
            "dk": overlap(dk),
            "one_string": overlap(one_string),
        },
        "meta": {
            "rule_table": ",".join(f"{v:.17g}" for v in rule.table),
            "lattice": f"{Lx}x{Ly} doubly periodic",
            "seed": "none (exact diagonalization)",
            "version": __version__,
        },
    }
    out = Path(config.out)
    report_path = out / f"ground_space_{Lx}x{Ly}.json"
    _write_atomic(report_path, json.dumps(report, indent=2, sort_keys=True) + "\n")
    _summary({
        "command": config.command,
        "report": str(report_path),
        "kernel_dim": space.kernel_dim,
        "ambiguous": space.ambiguous,
    })
    return 0


def _cmd_negativity(config: RunConfig) -> int:
    config.require("Lx", "Ly", "ell", "d")
    Lx, Ly = config.positive("Lx"), config.positive("Ly")
    ell = config.positive("ell")
    rows = []
    for d in config.d:
        value, bound, passed = entanglement.verify_negativity_bound(Lx, Ly, ell, int(d))
        rows.append({
            "Lx": Lx, "Ly": Ly, "ell": ell, "d": int(d),
            "negativity": value, "bound": bound, "pass": passed,
        })
    out = Path(config.out)
    path = out / f"negativity_{Lx}x{Ly}_l{ell}.json"
    doc = {
        "rows": rows,
        "meta": {
            "state": f"one-string sector, {Lx}x{Ly}",
            "seed": "none (exact construction)",
            "version": __version__,
        },
    }
    _write_atomic(path, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    _summary({
        "command": config.command,
        "report": str(path),
        "all_pass": all(r["pass"] for r in rows),
    })
    return 0


def _cmd_kasteleyn(config: RunConfig) -> int:
    config.require("g_list", "sizes")
    gs = [float(g) for g in config.g_list]
    for g in gs:
        if not (0.0 <= g <= 1.0):
            raise ConfigError(f"g_list: {g} is outside [0, 1]")
    sizes = [tuple(int(v) for v in s) for s in config.sizes]
    series = kasteleyn.vac_overlap_curve(gs, sizes)
    header = _header_lines({
        "w_matrix": "kasteleyn, parameter g per row",
        "sizes": ",".join(f"{lx}x{ly}" for lx, ly in sizes),
        "seed": "none (exact enumeration)",
        "version": __version__,
    })
    lines = ["g,Lx,Ly,overlap"]
    for s in series:
        for g, val in zip(s.x, s.values):
            lines.append(f"{g:.17g},{s.meta['Lx']},{s.meta['Ly']},{val:.17g}")
    out = Path(config.out)
    path = out / "kasteleyn_overlap.csv"
    _write_atomic(path, header + "\n".join(lines) + "\n")
    _summary({
        "command": config.command,
        "csv": str(path),
        "n_rows": len(lines) - 1,
    })
    return 0


# ---------------------------------------------------------------------------
# selftest


def _selftest_checks():
    import numpy.random as npr

    def check_rng_mix():
        from . import _kernels, _mix

        key = _mix.stream_key(12345, 7)
        scalar = [_mix.uniform(key, i) for i in range(4)]
        vector = _mix.uniform(key, np.arange(4))
        compiled = [_kernels.draw_u01(key, i) for i in range(4)]
        assert np.allclose(scalar, vector, atol=0), "scalar/vector RNG disagree"
        assert np.allclose(scalar, compiled, atol=0), "numpy/numba RNG disagree"
        assert all(0.0 <= u < 1.0 for u in scalar), "uniforms out of range"

    def check_isometry():
        rng = npr.default_rng(20240405)
        for _ in range(100):
            p1, p2, p3 = rng.uniform(0.0, 1.0, size=3)
            rule = automata.dk_rule(p1, p2, p3)
            resid = qstate.check_isometry(qstate.build_dk_tensor(rule))
            assert resid <= 1e-12, f"isometry residual {resid}"

    def check_projector_algebra():
        lattice = automata.LatticeSpec(
            Lx=3, Ly=3, boundary_x="periodic", boundary_y="periodic"
        )
        env = hamiltonian.VertexEnvironment.from_lattice(lattice, 1, 1)
        for p1 in (0.0, 0.1):
            B = hamiltonian.build_projector(automata.dk_rule(p1, 0.7, 0.7), env)
            assert B.hermiticity_residual() <= 1e-12
            assert B.idempotency_residual() <= 1e-12

    def check_mc_vs_enumeration():
        rule = automata.dk_rule(0.0, 0.6, 0.6)
        lattice = automata.LatticeSpec(Lx=4, Ly=2, boundary_x="periodic", boundary_y="open")
        initial = automata.row_all_active(lattice)
        histories, weights = automata.enumerate_histories(initial, rule, lattice, 2)
        mean_exact = float(np.sum(weights * histories[:, 2, 1]))
        mc = automata.sample_trajectories(initial, rule, lattice, 2, 20000, seed=31)
        mean_mc, err = observables.density(mc, observables.SitePoint(x=1, y=2))
        assert abs(mean_mc - mean_exact) <= 5 * max(err, 1e-4), (
            f"MC {mean_mc} vs exact {mean_exact}"
        )

    def check_w_state():
        psi = entanglement.w_state(6)
        rho = entanglement.reduced_density_matrix(psi, [0], [1])
        value = entanglement.negativity(rho)
        closed = (6 - 2) / 12 * (math.sqrt(1 + (2 / 4) ** 2) - 1)
        assert abs(value - closed) <= 1e-10, f"W negativity {value} vs {closed}"

    def check_negativity_bound():
        value, bound, passed = entanglement.verify_negativity_bound(8, 2, 3, 1)
        assert passed and value >= bound

    def check_kasteleyn():
        psi = kasteleyn.kasteleyn_state(0.6, 4, 2)
        assert abs(psi.norm() - 1.0) <= 1e-12
        vac_amp = psi.amplitude(0)
        for c in kasteleyn.enumerate_string_configs(4, 2):
            n = bin(c.mask).count("1")
            expect = vac_amp * 0.6 ** n
            assert abs(psi.amplitude(c.mask) - expect) <= 1e-12

    def check_csv_roundtrip():
        series = observables.EstimatorSeries(
            x=np.array([1.0, 2.0, 4.0]),
            values=np.array([0.5, 0.25, 0.125]),
            stderr=np.array([0.01, 0.01, 0.01]),
            n_samples=100,
            meta={"seed": 1},
        )
        back = observables.EstimatorSeries.from_csv(series.to_csv())
        assert back.to_csv() == series.to_csv(), "CSV round trip changed bytes"

    return [
        ("rng-mix", check_rng_mix),
        ("isometry", check_isometry),
        ("projector-algebra", check_projector_algebra),
        ("mc-vs-enumeration", check_mc_vs_enumeration),
        ("w-state", check_w_state),
        ("negativity-bound", check_negativity_bound),
        ("kasteleyn", check_kasteleyn),
        ("csv-roundtrip", check_csv_roundtrip),
    ]


def _cmd_selftest(config: RunConfig) -> int:
    fault = os.environ.get("DPQ_SELFTEST_FAULT")
    failures = 0
    for name, check in _selftest_checks():
        try:
            if fault == name:
                raise AssertionError("fault injected for testing")
            check()
        except Exception as exc:  # noqa: BLE001 - report and continue
            failures += 1
            print(f"FAIL {name}: {exc}")
        else:
            print(f"ok   {name}")
    _summary({
        "command": "selftest",
        "passed": len(_selftest_checks()) - failures,
        "failed": failures,
    })
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# parser and dispatch


_COMMANDS = {
    "scan-correlations": _cmd_scan_correlations,
    "phase-scan": _cmd_phase_scan,
    "exact-state": _cmd_exact_state,
    "ground-space": _cmd_ground_space,
    "negativity": _cmd_negativity,
    "kasteleyn": _cmd_kasteleyn,
    "selftest": _cmd_selftest,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpq",
        description="Percolation-automaton sampling and exact quantum-state checks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", help="JSON file with option defaults")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("scan-correlations", help="corner-geometry correlation decay")
    add_common(p)
    p.add_argument("--p", type=float)
    p.add_argument("--L", type=int)
    p.add_argument("--dir", dest="direction", choices=("y", "x", "xminusy"))
    p.add_argument("--family", choices=("site", "bond", "bond3"))
    p.add_argument("--samples", type=int)
    p.add_argument("--r", dest="r_list", type=lambda s: _parse_int_list(s, "r_list"))
    p.add_argument("--window", type=lambda s: _parse_int_list(s, "window"))

    p = sub.add_parser("phase-scan", help="late-time density over a parameter grid")
    add_common(p)
    p.add_argument("--family", choices=("site", "bond", "bond3"))
    p.add_argument("--p-list", dest="p_list", type=lambda s: _parse_float_list(s, "p_list"))
    p.add_argument("--L", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--samples", type=int)
    p.add_argument("--tail-rows", dest="tail_rows", type=int)

    p = sub.add_parser("exact-state", help="enumerate a small lattice wavefunction")
    add_common(p)
    p.add_argument("--p1", type=float)
    p.add_argument("--p2", type=float)
    p.add_argument("--p3", type=float)
    p.add_argument("--Lx", type=int)
    p.add_argument("--Ly", type=int)
    p.add_argument("--bc", choices=("periodic", "open"))
    p.add_argument("--boundary", choices=("active", "empty"))

    p = sub.add_parser("ground-space", help="parent-Hamiltonian spectrum report")
    add_common(p)
    p.add_argument("--p1", type=float)
    p.add_argument("--p2", type=float)
    p.add_argument("--p3", type=float)
    p.add_argument("--Lx", type=int)
    p.add_argument("--Ly", type=int)
    p.add_argument("--k", type=int)

    p = sub.add_parser("negativity", help="two-region negativity of the string state")
    add_common(p)
    p.add_argument("--Lx", type=int)
    p.add_argument("--Ly", type=int)
    p.add_argument("--ell", type=int)
    p.add_argument("--d", type=lambda s: _parse_int_list(s, "d"))

    p = sub.add_parser("kasteleyn", help="vacuum overlap of the dimer-string state")
    add_common(p)
    p.add_argument("--g-list", dest="g_list", type=lambda s: _parse_float_list(s, "g_list"))
    p.add_argument(
        "--sizes", type=_parse_sizes, help="comma-separated LxY pairs, e.g. 4x2,4x4"
    )

    p = sub.add_parser("selftest", help="fast invariant suite")
    add_common(p)

    return parser


def run(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    cli = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        config = RunConfig.merge(args.command, args.config, cli)
        _set_threads(config)
        return _COMMANDS[args.command](config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (DpqError, OSError, ValueError) as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


def main(argv=None) -> int:
    return run(argv)
