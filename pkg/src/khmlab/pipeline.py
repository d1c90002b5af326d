"""Experiment orchestration shared by the command line, the scripts and the acceptance suite.

Every task returns a plain dict report with a ``gates`` list; each gate is
``{"name", "value", "tolerance", "pass"}`` and a task passes iff all of its
gates do.
"""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import Config
from .grid import (
    ConfigurationError,
    Grid,
    VectorField,
    curl,
    inverse_curl,
    random_field,
    random_scalar,
)
from .identities import check_hall_rewrites, check_lemma21, check_lemma22
from .increments import DirectionQuadrature, SeparationScan, ShellCsvWriter, ShellRecord
from .laws import (
    AUDITS,
    audit_khm,
    d_functionals,
    helicity_dissipation,
    plateau_report,
    scan_laws,
    verify_coarea_constants,
)
from .mollify import PROFILES, RadialKernel, projection_tensor, verify_pressure_claim
from .snapshot import Snapshot, read_snapshot, write_snapshot
from .solver import InvariantLedger, SolverState, initial_state, run, step_rk4

SNAPSHOT_DIR = "snapshots"
LEDGER_FILE = "ledger.csv"


def gate(name: str, value: float, tolerance: float, upper: bool = True) -> dict:
    ok = value <= tolerance if upper else value >= tolerance
    return {"name": name, "value": float(value), "tolerance": float(tolerance), "pass": bool(ok), "kind": "max" if upper else "min"}


def all_pass(report: dict) -> bool:
    return all(g["pass"] for g in report.get("gates", []))


# --- builders -----------------------------------------------------------------


def build_kernel(cfg: Config) -> RadialKernel:
    return RadialKernel(cfg["kernel.profile"], cfg["kernel.epsilon"])


def build_quad(cfg: Config) -> DirectionQuadrature:
    return DirectionQuadrature.by_name(cfg["quad.kind"], cfg["quad.directions"])


def build_audit_quad(cfg: Config) -> DirectionQuadrature:
    return DirectionQuadrature.gauss_product(cfg["audit.directions"])


def build_scan(cfg: Config) -> SeparationScan:
    return SeparationScan.geometric(cfg["scan.lambda_min"], cfg["scan.lambda_max"], cfg["scan.count"])


def build_state(cfg: Config) -> SolverState:
    return initial_state(
        Grid(cfg["grid.n"]),
        cfg["solver.model"],
        cfg["ic.kind"],
        seed=cfg["ic.seed"],
        amplitude=cfg["ic.amplitude"],
        kmax=cfg["ic.kmax"],
        d_i=cfg["solver.d_i"],
        nu=cfg["solver.nu"],
        eta=cfg["solver.eta"],
        nu_h=cfg["solver.nu_h"],
    )


# --- snapshots on disk ----------------------------------------------------------


def state_to_snapshot(state: SolverState) -> Snapshot:
    fields = {"b": state.b}
    if state.u is not None:
        fields["u"] = state.u
    return Snapshot(state.t, fields, state.params())


def snapshot_to_state(snap: Snapshot) -> SolverState:
    p = snap.params
    if "b" not in snap.fields:
        raise ConfigurationError("snapshot has no magnetic field 'b'")
    return SolverState(
        snap.time,
        snap.fields["b"],
        snap.fields.get("u"),
        p.get("d_i", 1.0),
        p.get("nu", 0.0),
        p.get("eta", 0.0),
        p.get("nu_h", 0.0),
    )


def load_states(directory) -> list[SolverState]:
    d = Path(directory) / SNAPSHOT_DIR
    files = sorted(d.glob("*.khm"))
    if not files:
        raise ConfigurationError(f"no snapshots under {d}")
    return [snapshot_to_state(read_snapshot(f)) for f in files]


def load_ledger(directory) -> InvariantLedger:
    path = Path(directory) / LEDGER_FILE
    if not path.is_file():
        raise ConfigurationError(f"ledger not found: {path}")
    led = InvariantLedger()
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            led.append({k: float(v) for k, v in row.items()})
    return led


# --- manifest ---------------------------------------------------------------------


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class RunManifest:
    command: str
    config_hash: str
    version: str = __version__
    started: float = field(default_factory=time.time)
    finished: float | None = None
    files: dict = field(default_factory=dict)

    def add(self, path: Path, root: Path):
        self.files[str(path.relative_to(root))] = sha256(path)

    def write(self, root: Path) -> Path:
        self.finished = time.time()
        path = root / "manifest.json"
        path.write_text(json.dumps(asdict(self), indent=2, sort_keys=True))
        return path


def verify_manifest(root) -> list[str]:
    """Names of listed files whose checksum no longer matches (empty when intact)."""
    root = Path(root)
    data = json.loads((root / "manifest.json").read_text())
    bad = []
    for name, digest in data["files"].items():
        p = root / name
        if not p.is_file() or sha256(p) != digest:
            bad.append(name)
    return bad


def write_json(path: Path, obj) -> Path:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=float))
    return path


# --- tasks ---------------------------------------------------------------------------


def simulate(cfg: Config, out: Path) -> tuple[dict, list[Path]]:
    """Run the solver, storing snapshots and the invariant ledger."""
    state = build_state(cfg)
    snapdir = out / SNAPSHOT_DIR
    snapdir.mkdir(parents=True, exist_ok=True)
    written = []

    def save(s: SolverState):
        p = snapdir / f"snap_{len(written):04d}.khm"
        write_snapshot(p, state_to_snapshot(s))
        written.append(p)

    res = run(
        state,
        cfg["solver.t_end"],
        cfg["solver.dt"],
        snapshot_interval=cfg["solver.snapshot_interval"],
        ledger_interval=cfg["solver.ledger_interval"],
        on_snapshot=save,
    )
    ledger_path = out / LEDGER_FILE
    res.ledger.write_csv(ledger_path)
    report = {"task": "simulate", "model": state.model, "final_time": res.final.t, "snapshots": len(written), "gates": []}
    drifts = {}
    for name in ("E", "H_M") + (("H_G",) if state.model == "hallmhd" else ()):
        drifts[name] = res.ledger.drift(name)
    report["drifts"] = drifts
    if state.model == "hallmhd":
        report["drifts"]["H_C"] = res.ledger.drift("H_C")
    if state.inviscid:
        tol = cfg["tolerances.energy_drift"] if state.model == "emhd" else cfg["tolerances.hall_drift"]
        span = max(res.final.t - state.t, 1e-300)
        for name in ("E", "H_M") + (("H_G",) if state.model == "hallmhd" else ()):
            report["gates"].append(gate(f"drift_{name}_per_unit_time", drifts[name] / span, tol))
    return report, written + [ledger_path]


def verify_constants(cfg: Config) -> dict:
    tol = cfg["tolerances.constants"]
    report = {"task": "verify-constants", "kernels": {}, "gates": []}
    for profile in PROFILES:
        r = verify_coarea_constants(RadialKernel(profile), tol)
        report["kernels"][profile] = r
        for name, e in r["entries"].items():
            report["gates"].append(gate(f"{profile}.{name}", e["error"], tol))
    return report


def verify_identities(cfg: Config) -> dict:
    """Projection identity, tensor and shell-integral identities, Hall rewrites, operators, pressure claim."""
    rng = np.random.default_rng(cfg["identities.seed"])
    kernel = build_kernel(cfg)
    quad = build_quad(cfg)
    fine = DirectionQuadrature.fibonacci(cfg["identities.directions"])
    nodes = cfg["quad.radial_nodes"]
    report = {"task": "verify-identities", "gates": [], "details": {}}
    gates = report["gates"]

    proj = projection_tensor(kernel, quad, nodes)
    gates.append(gate("projection_identity", float(np.max(np.abs(proj - np.eye(3) / 3))), cfg["tolerances.projection"]))

    m = cfg["identities.samples"]
    E, F, G, ell = (rng.standard_normal((m, 3)) for _ in range(4))
    r21 = check_lemma21(E, F, G, ell)
    gates.append(gate("tensor_identity", r21.residual, cfg["tolerances.lemma21"]))

    g32 = Grid(32)
    Ef = random_field(g32, cfg["identities.kmax"], rng)
    Ff = random_field(g32, cfg["identities.kmax"], rng)
    for rep in check_lemma22(None, Ef, Ff, kernel, fine, nodes):
        gates.append(gate(rep.identity_name, rep.relative_residual, cfg["tolerances.lemma22"]))
        report["details"][rep.identity_name] = rep.to_dict()

    bf = random_field(g32, 10, rng)
    for rep in check_hall_rewrites(bf):
        gates.append(gate(rep.identity_name, rep.residual, cfg["tolerances.hall_rewrites"]))

    A = inverse_curl(bf)
    err = (curl(A) - bf).max_norm() / bf.max_norm()
    gates.append(gate("curl_inverse_curl", err, cfg["tolerances.hall_rewrites"]))

    pi = random_scalar(g32, 4, rng)
    pr = verify_pressure_claim(pi, g32, kernel, fine, nodes)
    gates.append(gate("pressure_claim", pr.residual, cfg["tolerances.pressure"]))
    return report


def audit(cfg: Config, states: list[SolverState] | None = None) -> dict:
    """KHM audits on two snapshots 2 dt apart (generated from the config when none are given)."""
    if states is None:
        s0 = build_state(cfg)
        dt = cfg["solver.dt"]
        states = [s0, step_rk4(step_rk4(s0, dt), dt)]
    if len(states) < 2:
        raise ConfigurationError("audit needs two snapshots")
    s0, s1 = states[0], states[1]
    kernel = build_kernel(cfg)
    quad = build_audit_quad(cfg)
    tol = cfg["tolerances.audit"]
    which = [w for w in AUDITS if not (w.startswith("energy") and s0.model != "emhd")]
    report = {"task": "audit-khm", "model": s0.model, "audits": {}, "gates": []}
    for w in which:
        r = audit_khm(s0, s1, kernel, w, quad, cfg["quad.radial_nodes"], tolerance=tol)
        report["audits"][w] = r.to_dict()
        report["gates"].append(gate(w, r.residual, tol))
        for f in (0.9, 1.1):
            p = r.with_factor(f * r.factor)
            report["gates"].append(gate(f"{w}_factor_x{f}_breaks", p.residual, tol, upper=False))
    return report


ESTIMATORS = ("S_EL", "S_ET", "S_E_bar", "S_ML", "S_MT", "S_HL")


def estimate(cfg: Config, states: list[SolverState], out: Path) -> tuple[dict, list[Path]]:
    """Shell averages of every S functional per snapshot plus the D functionals."""
    quad = build_quad(cfg)
    scan = build_scan(cfg)
    kernel = build_kernel(cfg)
    paths = []
    report = {"task": "estimate", "dissipation": [], "gates": []}
    for i, s in enumerate(states):
        recs = scan_laws([s], scan, quad)
        p = out / f"shells_{i:04d}.csv"
        with ShellCsvWriter(p) as w:
            for r in recs:
                for name in ESTIMATORS:
                    v = getattr(r, name)
                    if v is not None:
                        w.write(ShellRecord(r.lam, len(quad), v, name))
        paths.append(p)
        d = d_functionals(s.b, kernel, build_audit_quad(cfg), s.d_i, cfg["quad.radial_nodes"])
        report["dissipation"].append({"t": s.t, "epsilon": kernel.epsilon, **d})
    return report, paths


def scan(cfg: Config, states: list[SolverState], ledger: InvariantLedger, out: Path) -> tuple[dict, list[Path]]:
    """Law scan over the analysis window with a plateau report."""
    quad = build_quad(cfg)
    lo, hi = cfg["scan.window_start"], cfg["scan.window_end"]
    window = [s for s in states if lo <= s.t <= hi]
    if not window:
        raise ConfigurationError("no snapshots inside the analysis window")
    recs = scan_laws(window, build_scan(cfg), quad, include_hl=cfg["scan.include_hl"])
    t = np.asarray(ledger.t)
    sel = (t >= lo) & (t <= hi)
    if not sel.any():
        raise ConfigurationError("no ledger rows inside the analysis window")
    eps_E = float(np.mean(np.asarray(ledger.eps_E)[sel]))
    eps_M = float(np.mean([helicity_dissipation(s) for s in window]))
    rep = plateau_report(
        recs,
        eps_E,
        eps_M if eps_M != 0 else None,
        window=(lo, hi),
        ratio_window=(cfg["scan.ratio_low"], cfg["scan.ratio_high"]),
        min_decades=cfg["scan.min_decades"],
        route_tolerance=cfg["tolerances.route_agreement"],
    )
    csv_path = out / "laws.csv"
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(recs[0].COLUMNS + ("eps_E",))
        for r in recs:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r.row()] + [repr(eps_E)])
    plateau_path = write_json(out / "plateau.json", asdict(rep))
    report = {
        "task": "scan-laws",
        "eps_E": eps_E,
        "eps_M": eps_M,
        "plateau": asdict(rep),
        "gates": [
            gate("plateau_decades", rep.band_decades, rep.min_decades, upper=False),
            gate("route_agreement", rep.route_agreement if rep.route_agreement is not None else np.inf, rep.route_tolerance),
        ],
    }
    return report, [csv_path, plateau_path]


def summarize(directory) -> dict:
    """Aggregate the gates of every task report found under ``directory``."""
    root = Path(directory)
    reports = sorted(p for p in root.rglob("*_report.json"))
    if not reports:
        raise ConfigurationError(f"no task reports under {root}")
    tasks = {}
    for p in reports:
        data = json.loads(p.read_text())
        tasks[str(p.relative_to(root))] = {
            "task": data.get("task"),
            "pass": all_pass(data),
            "gates": {g["name"]: g["pass"] for g in data.get("gates", [])},
        }
    gates = [gate(name, 0.0 if t["pass"] else 1.0, 0.0) for name, t in tasks.items()]
    return {"task": "report", "tasks": tasks, "gates": gates}
