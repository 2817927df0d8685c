"""Config ingestion, experiment orchestration, and machine-readable output.

This is the only component that performs I/O. Configs and reports are JSON,
trajectories are CSV with units in every column header, and each output
directory gets a MANIFEST of content hashes so identical configs can be
checked for byte-identical reruns. Exit codes: 0 success, 2 validation
error, 3 integration/fit failure, 4 I/O failure; diagnostics go to stderr
as ``LEVEL key=value`` lines.

``CHIRALSPIN_THREADS`` (default 1) parallelizes independent experiment
points; it changes wall time only, never metrics, because results merge in
deterministic parameter order and all I/O stays on this single writer.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from copy import deepcopy
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import DensityMatrix, basis_vector
from .dynamics import IntegratorConfig, evolve
from .errors import ConvergenceError, DomainError, FitError, IntegrationError
from .experiments import (
    ExperimentReport,
    cascade_chain,
    decoherence_budget,
    elimination_validation,
    reciprocity_sweep,
    transfer_asymmetry,
)
from .materials import (
    MaterialParams,
    ResonatorGeometry,
    builtin_material,
    coupling_table,
    resonator_mode,
)
from .models import (
    CascadeSpec,
    ModeSpec,
    SpinSite,
    build_bidirectional_model,
    build_cascaded_model,
    build_chain_model,
    build_full_model,
    site_number_operators,
    total_excitation,
)

__all__ = ["RunConfig", "run", "emit_report", "main"]

TWO_PI = 2.0 * math.pi
SCHEMA_VERSION = 1

_SECTION_KEYS = {
    "": {"schema_version", "material", "geometry", "spin", "modes", "cascade",
         "integrator", "experiment", "output"},
    "material": {"name", "density_kg_m3", "v_plus_m_s", "v_minus_m_s", "xi_S_hz",
                 "xi_I_hz", "provenance"},
    "geometry": {"l_m", "w_m", "h_m"},
    "spin": {"kind", "s", "frequency_hz", "positions_m", "initial"},
    "mode": {"momentum_sign", "pam", "detuning_hz", "g_hz", "fock_cutoff"},
    "cascade": {"gamma_hz", "gamma_prime_hz", "k_z_rad_m", "k_z_d", "direction"},
    "integrator": {"dt", "t_final", "rate_scale_hz", "tolerance", "sample_stride"},
    "experiment": {"name", "parameters"},
    "output": {"directory", "formats"},
}

_EXPERIMENT_NAMES = ("simulate", "couplings", "transfer_asymmetry", "reciprocity_sweep",
                     "cascade_chain", "elimination_validation", "decoherence_budget")


def _diag(level: str, **fields):
    parts = [level]
    for key, value in fields.items():
        text = str(value)
        if any(ch.isspace() for ch in text):
            text = '"' + text.replace('"', "'") + '"'
        parts.append(f"{key}={text}")
    print(" ".join(parts), file=sys.stderr)


def _reject_unknown(section: str, data: dict, path: str):
    allowed = _SECTION_KEYS[section]
    for key in data:
        if key not in allowed:
            raise DomainError(f"unknown key {path + key!r} (allowed: {sorted(allowed)})")


@dataclass(frozen=True)
class RunConfig:
    """A validated run configuration; wraps the canonical JSON dict.

    Only keys the user supplied are stored, so parse -> serialize -> parse is
    the identity. Typed accessors construct the domain objects on demand.
    """

    data: dict

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise DomainError("config root must be a JSON object")
        _reject_unknown("", data, "")
        version = data.get("schema_version")
        if version != SCHEMA_VERSION:
            raise DomainError(f"unsupported schema_version {version!r}; this build reads {SCHEMA_VERSION}")
        if "experiment" not in data or not isinstance(data["experiment"], dict):
            raise DomainError("config must contain exactly one 'experiment' object")
        _reject_unknown("experiment", data["experiment"], "experiment.")
        name = data["experiment"].get("name")
        if name not in _EXPERIMENT_NAMES:
            raise DomainError(f"unknown experiment {name!r}; known: {_EXPERIMENT_NAMES}")
        if "material" in data and isinstance(data["material"], dict):
            _reject_unknown("material", data["material"], "material.")
        elif "material" in data and not isinstance(data["material"], str):
            raise DomainError("material must be a name or an inline parameter object")
        for section in ("geometry", "spin", "cascade", "integrator", "output"):
            if section in data:
                if not isinstance(data[section], dict):
                    raise DomainError(f"section {section!r} must be an object")
                _reject_unknown(section, data[section], section + ".")
        if "modes" in data:
            modes = data["modes"]
            if modes != "auto":
                if not isinstance(modes, list):
                    raise DomainError("modes must be 'auto' or a list of mode objects")
                for i, mode in enumerate(modes):
                    _reject_unknown("mode", mode, f"modes[{i}].")
        cls._check_positive(data)
        return cls(deepcopy(data))

    @staticmethod
    def _check_positive(data: dict):
        geometry = data.get("geometry", {})
        for key, value in geometry.items():
            if value <= 0:
                raise DomainError(f"geometry.{key} must be positive, got {value}")
        integ = data.get("integrator", {})
        for key in ("dt", "t_final", "rate_scale_hz", "tolerance"):
            if key in integ and integ[key] <= 0:
                raise DomainError(f"integrator.{key} must be positive, got {integ[key]}")
        cascade = data.get("cascade", {})
        for key in ("gamma_hz", "gamma_prime_hz"):
            if key in cascade and cascade[key] < 0:
                raise DomainError(f"cascade.{key} must be non-negative, got {cascade[key]}")

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise DomainError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return deepcopy(self.data)

    def with_overrides(self, overrides) -> "RunConfig":
        """Apply ``section.key=value`` overrides on top of the file values."""
        data = self.to_dict()
        for item in overrides:
            if "=" not in item:
                raise DomainError(f"override {item!r} must look like section.key=value")
            dotted, raw = item.split("=", 1)
            try:
                value = json.loads(raw)
            except json.JSONDecodeError:
                value = raw
            node = data
            parts = dotted.split(".")
            for part in parts[:-1]:
                node = node.setdefault(part, {})
                if not isinstance(node, dict):
                    raise DomainError(f"override path {dotted!r} crosses a non-object value")
            node[parts[-1]] = value
        return RunConfig.from_dict(data)

    # -- typed accessors ----------------------------------------------------

    @property
    def experiment_name(self) -> str:
        return self.data["experiment"]["name"]

    @property
    def experiment_parameters(self) -> dict:
        return deepcopy(self.data["experiment"].get("parameters", {}))

    def material(self):
        section = self.data.get("material", "alpha-SiO2")
        if isinstance(section, str):
            return builtin_material(section)
        return MaterialParams(section.get("name", "custom"), section["density_kg_m3"],
                              section["v_plus_m_s"], section["v_minus_m_s"],
                              section["xi_S_hz"], section["xi_I_hz"],
                              section.get("provenance", "inline config"))

    def geometry(self) -> ResonatorGeometry:
        g = self.data.get("geometry", {})
        return ResonatorGeometry(g.get("l_m", 1e-6), g.get("w_m", 1e-7), g.get("h_m", 1e-7))

    def spin_positions(self) -> list[float]:
        return list(self.data.get("spin", {}).get("positions_m", [0.0, 2.5e-7]))

    def cascade_spec(self) -> CascadeSpec:
        cascade = self.data.get("cascade", {})
        spin = self.data.get("spin", {})
        positions = self.spin_positions()
        s = spin.get("s", 0.5)
        sites = tuple(SpinSite(s, z, chr(ord("A") + i) if i < 26 else f"s{i}")
                      for i, z in enumerate(positions))
        gamma = TWO_PI * cascade.get("gamma_hz", 0.0)
        gamma_prime = TWO_PI * cascade.get("gamma_prime_hz", 0.0)
        if "k_z_rad_m" in cascade:
            k_z = cascade["k_z_rad_m"]
        elif "k_z_d" in cascade:
            if len(positions) < 2:
                raise DomainError("k_z_d needs at least two spin positions")
            k_z = cascade["k_z_d"] / (positions[1] - positions[0])
        else:
            k_z = 0.0
        return CascadeSpec(gamma, gamma_prime, k_z, sites)

    def integrator_config(self, default_rate_scale: float) -> IntegratorConfig:
        integ = self.data.get("integrator", {})
        rate_scale = TWO_PI * integ["rate_scale_hz"] if "rate_scale_hz" in integ else default_rate_scale
        return IntegratorConfig(
            t_final=integ.get("t_final", 8.0),
            rate_scale=rate_scale,
            dt=integ.get("dt"),
            tolerance=integ.get("tolerance", 1e-10),
            sample_stride=integ.get("sample_stride", 1),
        )

    def output_directory(self) -> Path:
        return Path(self.data.get("output", {}).get("directory", "out"))

    def output_formats(self) -> tuple[str, ...]:
        formats = tuple(self.data.get("output", {}).get("formats", ("json", "csv")))
        for fmt in formats:
            if fmt not in ("json", "csv"):
                raise DomainError(f"unknown output format {fmt!r}")
        return formats


# -- experiment dispatch ----------------------------------------------------


def _config_modes(config: RunConfig) -> tuple[ModeSpec, ...]:
    """Mode list from the config: explicit entries or derived from the geometry.

    ``"auto"`` builds the near-resonant co-rotating mode of the configured
    material and resonator: its detuning comes from the spin frequency against
    the fast branch and its coupling from the vacuum strain.
    """
    section = config.data["modes"]
    if section == "auto":
        material = config.material()
        geom = config.geometry()
        spin = config.data.get("spin", {})
        kind = spin.get("kind", "electron")
        _, omega_plus = resonator_mode(geom, material.v_plus, 1)
        f_plus = omega_plus / TWO_PI
        f_spin = spin.get("frequency_hz", f_plus + 1e4)
        delta_hz = f_spin - f_plus
        if delta_hz == 0:
            raise DomainError("auto mode derivation hit zero detuning; adjust spin.frequency_hz")
        budget = coupling_table(material, geom, kind, abs(delta_hz))
        g_hz = budget.row(+1, +1).g_hz
        return (ModeSpec(+1, +1, TWO_PI * delta_hz, TWO_PI * g_hz, 2),)
    modes = []
    for entry in section:
        modes.append(ModeSpec(entry.get("momentum_sign", +1), entry.get("pam", +1),
                              TWO_PI * entry["detuning_hz"], TWO_PI * entry["g_hz"],
                              entry.get("fock_cutoff", 2)))
    return tuple(modes)


def _simulate_full_model(config: RunConfig) -> ExperimentReport:
    modes = _config_modes(config)
    positions = config.spin_positions()
    if len(positions) != 2:
        raise DomainError("mode-based simulation takes exactly two spin positions")
    s = config.data.get("spin", {}).get("s", 0.5)
    spins = (SpinSite(s, positions[0], "A"), SpinSite(s, positions[1], "B"))
    model = build_full_model(spins, modes)
    space = model.space

    pattern = [0, 1] + [0] * len(modes)  # first spin excited, vacuum modes
    rho0 = DensityMatrix.from_pure(space, basis_vector(space, pattern))
    cfg = config.integrator_config(abs(modes[0].detuning))
    watch = [(f"pop_{label}", op)
             for label, op in zip("AB", site_number_operators(space, spins))]
    watch.append(("total_excitation", total_excitation(space)))
    traj = evolve(model, rho0, cfg, watch)
    metrics = {}
    for label, _ in watch[:2]:
        series = np.real(traj.observables[label])
        metrics[f"peak_{label}"] = float(np.max(series))
        metrics[f"final_{label}"] = float(series[-1])
    report = ExperimentReport(
        "simulate",
        {"modes": [{"momentum_sign": m.momentum_sign, "pam": m.pam,
                    "detuning_hz": m.detuning / TWO_PI, "g_hz": m.g / TWO_PI,
                    "fock_cutoff": m.fock_cutoff} for m in modes],
         "positions_m": positions,
         "integrator": {"dt": cfg.dt, "t_final": cfg.t_final, "rate_scale_rad_s": cfg.rate_scale}},
        metrics, {}, trajectories={"simulation": traj})
    return report.validate()


def _simulate(config: RunConfig) -> ExperimentReport:
    if "modes" in config.data:
        return _simulate_full_model(config)
    spec = config.cascade_spec()
    direction = config.data.get("cascade", {}).get("direction", "forward")
    if direction == "bidirectional":
        model = build_bidirectional_model(spec)
    elif direction == "chain":
        model = build_chain_model(spec)
    elif direction in ("forward", "backward"):
        if len(spec.sites) == 2:
            model = build_cascaded_model(spec, direction)
        else:
            model = build_chain_model(spec, direction)
    else:
        raise DomainError(f"unknown cascade.direction {direction!r}")

    initial = config.data.get("spin", {}).get("initial", "head_excited")
    if initial == "head_excited":
        pattern = [0] + [1] * (len(spec.sites) - 1)
    elif initial == "tail_excited":
        pattern = [1] * (len(spec.sites) - 1) + [0]
    elif initial == "all_ground":
        pattern = [1] * len(spec.sites)
    elif isinstance(initial, list):
        mapping = {"up": 0, "down": 1}
        try:
            pattern = [mapping[token] for token in initial]
        except KeyError as exc:
            raise DomainError(f"spin.initial entries must be 'up' or 'down', got {exc}") from exc
        if len(pattern) != len(spec.sites):
            raise DomainError("spin.initial length must match the number of positions")
    else:
        raise DomainError(f"unknown spin.initial {initial!r}")
    rho0 = DensityMatrix.from_pure(model.space, basis_vector(model.space, pattern))

    default_scale = max(spec.gamma, spec.gamma_prime)
    if default_scale <= 0:
        raise DomainError("simulate needs a positive channel rate")
    cfg = config.integrator_config(default_scale)
    ops = site_number_operators(model.space, spec.sites)
    watch = [(f"pop_{site.label}", op) for site, op in zip(spec.sites, ops)]
    traj = evolve(model, rho0, cfg, watch)

    metrics = {}
    for label, _ in watch:
        series = np.real(traj.observables[label])
        metrics[f"peak_{label}"] = float(np.max(series))
        metrics[f"final_{label}"] = float(series[-1])
    report = ExperimentReport(
        "simulate",
        {"direction": direction, "gamma_rad_s": spec.gamma, "gamma_prime_rad_s": spec.gamma_prime,
         "k_z_rad_m": spec.k_z, "positions_m": [s.position_z for s in spec.sites],
         "initial": initial,
         "integrator": {"dt": cfg.dt, "t_final": cfg.t_final, "rate_scale_rad_s": cfg.rate_scale}},
        metrics, {}, trajectories={"simulation": traj})
    return report.validate()


def _couplings(config: RunConfig) -> ExperimentReport:
    params = config.experiment_parameters
    material = config.material()
    geom = config.geometry()
    spin_kind = config.data.get("spin", {}).get("kind", "electron")
    delta_hz = params.get("delta_hz", 1e4)
    budget = coupling_table(material, geom, spin_kind, delta_hz,
                            drive_u=params.get("drive_u"), n=params.get("n", 1))
    metrics = {}
    for row in budget.rows:
        tag = f"{'p' if row.momentum_sign > 0 else 'm'}k_{'p' if row.pam > 0 else 'm'}L"
        metrics[f"g_hz_{tag}"] = row.g_hz
        metrics[f"detuning_hz_{tag}"] = row.detuning_hz
        if row.gamma_hz is not None:
            metrics[f"gamma_hz_{tag}"] = row.gamma_hz
        if row.suppression_bound_hz is not None:
            metrics[f"suppression_bound_hz_{tag}"] = row.suppression_bound_hz
    if budget.gamma_ratio is not None:
        metrics["gamma_ratio"] = budget.gamma_ratio
    report = ExperimentReport("couplings", {"budget": budget.to_dict()}, metrics, {})
    return report.validate()


def _dispatch(config: RunConfig) -> ExperimentReport:
    name = config.experiment_name
    params = config.experiment_parameters
    if name == "simulate":
        return _simulate(config)
    if name == "couplings":
        return _couplings(config)
    if name == "transfer_asymmetry":
        return transfer_asymmetry(config.cascade_spec())
    if name == "reciprocity_sweep":
        return reciprocity_sweep(config.cascade_spec(), params.get("ratios", (0.0, 0.25, 0.5, 1.0)))
    if name == "cascade_chain":
        spec = config.cascade_spec()
        return cascade_chain(params.get("n_sites", len(spec.sites)), spec)
    if name == "elimination_validation":
        g = TWO_PI * params.get("g_hz", 1.0)
        return elimination_validation(g, params.get("delta_over_g", (25.0, 50.0, 100.0)),
                                      params.get("cutoff", 2))
    if name == "decoherence_budget":
        return decoherence_budget(params.get("gamma0_hz", 1.0),
                                  params.get("drive_u", (1e-4, 2e-4)),
                                  xi=params.get("xi_hz", 1e6),
                                  delta_hz=params.get("delta_hz"))
    raise DomainError(f"unknown experiment {name!r}")


# -- emission ----------------------------------------------------------------


def _sanitize(value):
    """Make metrics JSON-safe: non-finite floats become strings."""
    if isinstance(value, dict):
        return {k: _sanitize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_sanitize(v) for v in value]
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
    if isinstance(value, (np.floating, np.integer)):
        return _sanitize(float(value))
    return value


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _csv_label(label: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in label)


def _write_trajectory_csv(path: Path, traj) -> None:
    labels = list(traj.observables.keys())
    header = ["t[1/rate_scale]"]
    for label in labels:
        header.append(f"Re<{label}>[dimensionless]")
        header.append(f"Im<{label}>[dimensionless]")
    lines = [",".join(header)]
    columns = [np.asarray(traj.observables[label]) for label in labels]
    for i, t in enumerate(traj.times):
        row = [_fmt(t)]
        for col in columns:
            row.append(_fmt(col[i].real))
            row.append(_fmt(col[i].imag))
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def emit_report(report: ExperimentReport, directory, formats=("json", "csv")) -> list[Path]:
    """Write report.json, one CSV per trajectory, and a MANIFEST of content hashes.

    Outputs contain no timestamps or environment data, so re-running an
    identical config reproduces byte-identical files.
    """
    outdir = Path(directory)
    outdir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    refs: list[str] = []
    if "csv" in formats:
        for label, traj in report.trajectories.items():
            name = _csv_label(label) + ".csv"
            _write_trajectory_csv(outdir / name, traj)
            refs.append(name)
            written.append(outdir / name)
    report.trajectory_refs = refs

    if "json" in formats:
        payload = {
            "name": report.name,
            "parameters": _sanitize(report.parameters),
            "metrics": _sanitize(report.metrics),
            "pass_flags": {k: bool(v) for k, v in report.pass_flags.items()},
            "trajectory_refs": refs,
            "trajectory_diagnostics": {
                label: _sanitize(traj.diagnostics) for label, traj in report.trajectories.items()
            },
            "units": {"metrics": "suffix of each key (hz, rad_s, ratios dimensionless)",
                      "trajectory_time": "1/rate_scale"},
        }
        text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
        (outdir / "report.json").write_text(text, encoding="utf-8")
        written.append(outdir / "report.json")

    manifest_lines = []
    for path in sorted(written, key=lambda p: p.name):
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        manifest_lines.append(f"sha256:{digest}  {path.name}")
    (outdir / "MANIFEST").write_text("\n".join(manifest_lines) + "\n", encoding="utf-8")
    written.append(outdir / "MANIFEST")
    return written


# -- entry points ------------------------------------------------------------


def run(config_path, overrides=(), experiment_name=None, output_dir=None) -> int:
    """Execute one configured run; returns the process exit code."""
    try:
        config = RunConfig.load(config_path)
        if experiment_name is not None:
            config = config.with_overrides([f"experiment.name={experiment_name}"])
        config = config.with_overrides(overrides)
    except (DomainError, OSError) as exc:
        _diag("ERROR", invariant="config_schema", detail=exc)
        return 2
    try:
        report = _dispatch(config)
    except IntegrationError as exc:
        _diag("ERROR", invariant="trace_drift", step=exc.step, detail=exc)
        return 3
    except (FitError, ConvergenceError) as exc:
        _diag("ERROR", invariant=type(exc).__name__, detail=exc)
        return 3
    except DomainError as exc:
        _diag("ERROR", invariant="domain", detail=exc)
        return 2
    try:
        outdir = Path(output_dir) if output_dir else config.output_directory()
        files = emit_report(report, outdir, config.output_formats())
    except OSError as exc:
        _diag("ERROR", invariant="io", detail=exc)
        return 4
    _diag("INFO", experiment=report.name, outputs=len(files), directory=outdir)
    for key, ok in report.pass_flags.items():
        _diag("INFO" if ok else "WARN", flag=key, passed=ok)
    return 0


def _budget_table_text(budget_dict: dict) -> str:
    rows = budget_dict["rows"]
    header = f"{'mode':>10} | {'interaction':>12} | {'class':>16} | {'detuning [Hz]':>14} | {'rate [Hz]':>12} | {'v [m/s]':>8}"
    lines = [header, "-" * len(header)]
    for row in rows:
        rate = row["gamma_hz"]
        rate_text = f"{rate:.4g}" if rate is not None else f"<{row['suppression_bound_hz']:.2g}"
        lines.append(f"{row['mode']:>10} | {row['interaction']:>12} | {row['coupling_class']:>16} | "
                     f"{row['detuning_hz']:>14.4g} | {rate_text:>12} | {row['velocity_m_s']:>8.3g}")
    lines.append("")
    fwd = rows[0]
    lines.append(f"u = {fwd['u_strain']:.4g}  g = {fwd['g_hz']:.4g} Hz"
                 + (f"  (h-quantum variant: g = {fwd['g_hz_hplanck']:.4g} Hz)" if fwd["g_hz_hplanck"] else ""))
    if budget_dict["gamma_ratio"] is not None:
        lines.append(f"forward/backward rate ratio = {budget_dict['gamma_ratio']:.4g}")
    if budget_dict["flags"]:
        lines.append("flags: " + ", ".join(budget_dict["flags"]))
    return "\n".join(lines)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="chiralspin",
        description="Directional phonon-mediated spin-spin coupling: budgets, simulations, experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_coup = sub.add_parser("couplings", help="four-mode coupling budget for a material/resonator")
    p_coup.add_argument("--material", default="alpha-SiO2")
    p_coup.add_argument("--l", type=float, default=1e-6, help="beam length along the chiral axis, m")
    p_coup.add_argument("--w", type=float, default=1e-7, help="beam width, m")
    p_coup.add_argument("--h", type=float, default=1e-7, help="beam height, m")
    p_coup.add_argument("--delta", type=float, default=1e4, help="detuning from the co-rotating branch, Hz")
    p_coup.add_argument("--spin", choices=("electron", "nuclear"), default="electron")
    p_coup.add_argument("--drive-u", type=float, default=None, help="driven strain amplitude (replaces vacuum)")
    p_coup.add_argument("--n", type=int, default=1, help="standing-mode index")
    p_coup.add_argument("--output", default=None, help="emit report files into this directory")

    p_sim = sub.add_parser("simulate", help="integrate a configured model and emit trajectories")
    p_sim.add_argument("config", help="JSON run configuration")
    p_sim.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE", help="override a config value (dotted path)")
    p_sim.add_argument("--output", default=None, help="override the output directory")

    p_exp = sub.add_parser("experiment", help="run a named experiment from a config")
    p_exp.add_argument("name", choices=_EXPERIMENT_NAMES)
    p_exp.add_argument("--config", default=None, help="JSON run configuration (optional)")
    p_exp.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE")
    p_exp.add_argument("--output", default=None)

    sub.add_parser("validate", help="run the built-in invariant suite")

    args = parser.parse_args(argv)

    if args.command == "couplings":
        config_dict = {
            "schema_version": SCHEMA_VERSION,
            "material": args.material,
            "geometry": {"l_m": args.l, "w_m": args.w, "h_m": args.h},
            "spin": {"kind": args.spin},
            "experiment": {"name": "couplings",
                           "parameters": {"delta_hz": args.delta, "n": args.n,
                                          **({"drive_u": args.drive_u} if args.drive_u is not None else {})}},
        }
        try:
            config = RunConfig.from_dict(config_dict)
            report = _couplings(config)
        except DomainError as exc:
            _diag("ERROR", invariant="domain", detail=exc)
            return 2
        print(_budget_table_text(report.parameters["budget"]))
        if args.output:
            try:
                emit_report(report, args.output)
            except OSError as exc:
                _diag("ERROR", invariant="io", detail=exc)
                return 4
        return 0

    if args.command == "simulate":
        return run(args.config, args.overrides, experiment_name="simulate", output_dir=args.output)

    if args.command == "experiment":
        if args.config is not None:
            return run(args.config, args.overrides, experiment_name=args.name, output_dir=args.output)
        minimal = {
            "schema_version": SCHEMA_VERSION,
            "cascade": {"gamma_hz": 1.0, "k_z_d": 0.7},
            "experiment": {"name": args.name},
        }
        try:
            config = RunConfig.from_dict(minimal).with_overrides(args.overrides)
        except DomainError as exc:
            _diag("ERROR", invariant="config_schema", detail=exc)
            return 2
        try:
            report = _dispatch(config)
        except IntegrationError as exc:
            _diag("ERROR", invariant="trace_drift", step=exc.step, detail=exc)
            return 3
        except (FitError, ConvergenceError) as exc:
            _diag("ERROR", invariant=type(exc).__name__, detail=exc)
            return 3
        except DomainError as exc:
            _diag("ERROR", invariant="domain", detail=exc)
            return 2
        try:
            outdir = args.output or config.output_directory()
            emit_report(report, outdir, config.output_formats())
        except OSError as exc:
            _diag("ERROR", invariant="io", detail=exc)
            return 4
        for key, ok in report.pass_flags.items():
            _diag("INFO" if ok else "WARN", flag=key, passed=ok)
        return 0

    if args.command == "validate":
        from .validation import run_invariant_suite

        results = run_invariant_suite()
        failed = 0
        for name, ok, detail in results:
            print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
            if not ok:
                failed += 1
                _diag("ERROR", invariant=name, detail=detail)
        print(f"{len(results) - failed}/{len(results)} invariants passed")
        return 0 if failed == 0 else 3

    parser.error(f"unknown command {args.command!r}")  # pragma: no cover
    return 2  # pragma: no cover


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
