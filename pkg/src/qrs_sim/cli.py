"""Command-line front end: deterministic scenario runs with CSV/JSON reports.

``qrs-sim run --scenario <name> [options]`` evaluates one scenario and
prints a human-readable summary; ``--out`` additionally writes a
machine-readable report (``--format csv|json``).  Output is byte-identical
for identical options (including the seed).  Exit codes: 0 on success, 1
when any internal consistency residual reaches 1e-10, 2 on configuration
errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import bell
from .errors import ConfigError, NotNormalized, QrsError
from .linalg import SpaceRegistry, StateVector, basis_state, tensor_product
from .reference import (
    JointDistribution,
    ReferenceSystem,
    internal_state_candidates,
    joint_distribution,
    state_of,
)

SCENARIOS = ("intro-measurement", "pair-correlations", "bell", "bell-ancilla", "chsh-scan")
RESIDUAL_GATE = 1e-10
MAX_ANGLE = 2.0 * math.pi + 1e-9
DEFAULT_QUADRUPLE = (0.0, math.pi / 2.0, math.pi / 4.0, 3.0 * math.pi / 4.0)

_FILE_KEYS = (
    "scenario",
    "a",
    "b",
    "theta1",
    "theta2",
    "angles",
    "grid",
    "seed",
    "samples",
    "format",
    "out",
)


@dataclass(frozen=True)
class ScenarioSpec:
    """Validated run configuration (defaults: maximally entangled pair,
    settings (0, pi/2), JSON format, seed 0, no sampling)."""

    scenario: str
    a: complex = complex(bell.ROOT_HALF)
    b: complex = complex(bell.ROOT_HALF)
    theta1: float = 0.0
    theta2: float = math.pi / 2.0
    angles: tuple[float, float, float, float] | None = None
    grid: tuple[float, float, int] | None = None
    seed: int = 0
    samples: int = 0
    format: str = "json"
    out: str | None = None

    def config(self, ancilla: bool = False) -> bell.ExperimentConfig:
        return bell.ExperimentConfig(
            a=self.a, b=self.b, theta1=self.theta1, theta2=self.theta2, ancilla=ancilla
        )


@dataclass
class ReportTable:
    kind: str
    values: np.ndarray
    axis_names: tuple[str, ...]
    settings: tuple[float, float] | None = None


@dataclass
class RunReport:
    spec: ScenarioSpec
    tables: list[ReportTable] = field(default_factory=list)
    empirical: ReportTable | None = None
    residuals: dict[str, float] = field(default_factory=dict)
    metrics: dict[str, float] = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)

    @property
    def ok(self) -> bool:
        return self.max_residual < RESIDUAL_GATE


# ---------------------------------------------------------------------------
# configuration parsing


def _fail(flag: str, message: str) -> ConfigError:
    return ConfigError(f"--{flag}: {message}")


def _parse_complex(text: str, flag: str) -> complex:
    parts = [p.strip() for p in str(text).split(",")]
    if len(parts) not in (1, 2) or not all(parts):
        raise _fail(flag, f"expected 're' or 're,im', got {text!r}")
    try:
        re = float(parts[0])
        im = float(parts[1]) if len(parts) == 2 else 0.0
    except ValueError:
        raise _fail(flag, f"expected numbers, got {text!r}") from None
    return complex(re, im)


def _parse_float(text: str, flag: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise _fail(flag, f"expected a number, got {text!r}") from None


def _parse_int(text: str, flag: str) -> int:
    try:
        return int(str(text), 10)
    except ValueError:
        raise _fail(flag, f"expected an integer, got {text!r}") from None


def _check_angle(value: float, flag: str) -> float:
    if abs(value) > MAX_ANGLE:
        raise _fail(
            flag,
            f"{value!r} is outside [-2*pi, 2*pi]; angles are radians, not degrees",
        )
    return float(value)


def load_config_file(path: str) -> dict[str, str]:
    """Flat ``key = value`` file, ``#`` comments; returns raw strings."""
    values: dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as handle:
            lines = handle.readlines()
    except OSError as exc:
        raise ConfigError(f"--config: cannot read {path!r}: {exc}") from None
    for number, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{number}: expected 'key = value', got {raw.strip()!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _FILE_KEYS:
            raise ConfigError(f"{path}:{number}: unknown key {key!r}")
        values[key] = value
    return values


def build_spec(values: dict[str, str]) -> ScenarioSpec:
    """Validate merged file/flag values into a :class:`ScenarioSpec`."""
    scenario = values.get("scenario")
    if not scenario:
        raise ConfigError("--scenario: missing (required field)")
    if scenario not in SCENARIOS:
        raise ConfigError(f"--scenario: unknown scenario {scenario!r}; choose from {', '.join(SCENARIOS)}")

    kwargs: dict = {"scenario": scenario}
    if "a" in values:
        kwargs["a"] = _parse_complex(values["a"], "a")
    if "b" in values:
        kwargs["b"] = _parse_complex(values["b"], "b")
    if "theta1" in values:
        kwargs["theta1"] = _check_angle(_parse_float(values["theta1"], "theta1"), "theta1")
    if "theta2" in values:
        kwargs["theta2"] = _check_angle(_parse_float(values["theta2"], "theta2"), "theta2")
    if "angles" in values:
        parts = [p.strip() for p in str(values["angles"]).split(",")]
        if len(parts) != 4:
            raise _fail("angles", f"expected four comma-separated angles, got {values['angles']!r}")
        kwargs["angles"] = tuple(
            _check_angle(_parse_float(p, "angles"), "angles") for p in parts
        )
    if "grid" in values:
        parts = [p.strip() for p in str(values["grid"]).split(",")]
        if len(parts) != 3:
            raise _fail("grid", f"expected 'start,stop,steps', got {values['grid']!r}")
        start = _check_angle(_parse_float(parts[0], "grid"), "grid")
        stop = _check_angle(_parse_float(parts[1], "grid"), "grid")
        steps = _parse_int(parts[2], "grid")
        if steps < 1:
            raise _fail("grid", f"steps must be >= 1, got {steps}")
        kwargs["grid"] = (start, stop, steps)
    if "seed" in values:
        kwargs["seed"] = _parse_int(values["seed"], "seed")
    if "samples" in values:
        samples = _parse_int(values["samples"], "samples")
        if samples < 0:
            raise _fail("samples", f"must be >= 0, got {samples}")
        kwargs["samples"] = samples
    if "format" in values:
        fmt = str(values["format"]).strip().lower()
        if fmt not in ("csv", "json"):
            raise _fail("format", f"expected 'csv' or 'json', got {values['format']!r}")
        kwargs["format"] = fmt
    if "out" in values and values["out"]:
        kwargs["out"] = str(values["out"])

    total = abs(kwargs.get("a", complex(bell.ROOT_HALF))) ** 2
    total += abs(kwargs.get("b", complex(bell.ROOT_HALF))) ** 2
    if abs(total - 1.0) > 1e-12:
        raise NotNormalized(f"|a|^2 + |b|^2 = {total!r} must be 1 within 1e-12")

    if scenario != "chsh-scan":
        if kwargs.get("grid") is not None:
            raise _fail("grid", "only the chsh-scan scenario takes a grid")
        if kwargs.get("angles") is not None:
            raise _fail("angles", "only the chsh-scan scenario takes an angle quadruple")
    elif kwargs.get("samples", 0) > 0:
        raise _fail("samples", "the chsh-scan scenario has no distribution to sample")

    return ScenarioSpec(**kwargs)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qrs-sim",
        description="Deterministic spin-correlation scenario runner.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser(
        "run",
        help="evaluate one scenario",
        description=(
            "Evaluate one scenario and print a summary; --out writes a CSV or "
            "JSON report.  All angles are radians (values beyond 2*pi are "
            "rejected as likely degrees).  Defaults: the maximally entangled "
            "pair a = b = 1/sqrt(2) at settings theta1 = 0, theta2 = pi/2."
        ),
        epilog=(
            "chsh-scan uses the quadruple from --angles (default 0, pi/2, "
            "pi/4, 3*pi/4); with --grid start,stop,steps it scans the third "
            "angle over the grid, keeping the first two fixed and the fourth "
            "at its original offset from the third."
        ),
    )
    run_p.add_argument("--scenario", choices=SCENARIOS, help="scenario to run")
    run_p.add_argument("--config", help="flat key=value config file; flags override it")
    run_p.add_argument("--a", help="first pair coefficient, 're' or 're,im'")
    run_p.add_argument("--b", help="second pair coefficient, 're' or 're,im'")
    run_p.add_argument("--theta1", help="first measurement angle from z, radians")
    run_p.add_argument("--theta2", help="second measurement angle from z, radians")
    run_p.add_argument("--angles", help="CHSH quadruple 'alpha,alpha2,beta,beta2', radians")
    run_p.add_argument("--grid", help="scan grid 'start,stop,steps' (chsh-scan only)")
    run_p.add_argument("--seed", help="sampling seed (default 0)")
    run_p.add_argument("--samples", help="number of samples to draw (default 0)")
    run_p.add_argument("--format", help="report format: csv or json (default json)")
    run_p.add_argument("--out", help="path for the machine-readable report")
    return parser


def parse_config(argv) -> ScenarioSpec:
    """Parse command-line arguments (and an optional config file) into a
    validated spec.  Flags override file values."""
    args = _build_parser().parse_args(argv)
    values: dict[str, str] = {}
    if args.config:
        values.update(load_config_file(args.config))
    for key in _FILE_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    return build_spec(values)


# ---------------------------------------------------------------------------
# scenario evaluation


def _frequencies(dist: JointDistribution, seed: int, samples: int) -> np.ndarray:
    draws = dist.sample(seed, samples)
    counts = np.zeros(dist.probabilities.shape, dtype=float)
    for index in draws:
        counts[index] += 1.0
    return counts / float(samples)


def _attach_sampling(report: RunReport, dist: JointDistribution, axis_names) -> None:
    spec = report.spec
    if spec.samples <= 0:
        return
    freq = _frequencies(dist, spec.seed, spec.samples)
    report.empirical = ReportTable(kind="empirical", values=freq, axis_names=tuple(axis_names))
    report.metrics["empirical_max_deviation"] = float(np.max(np.abs(freq - dist.probabilities)))


def _run_intro(spec: ScenarioSpec) -> RunReport:
    spec.config()  # validates the coefficients
    space = SpaceRegistry([("P", bell.SPIN_DIM), ("M", bell.POINTER_DIM)])
    spin = StateVector(SpaceRegistry([("P", bell.SPIN_DIM)]), [spec.a, spec.b])
    start = tensor_product(spin, basis_state(SpaceRegistry([("M", bell.POINTER_DIM)]), bell.READY))
    unitary = bell.measurement_unitary(spec.theta1, "P", "M")
    final = unitary.apply(start)
    reference = ReferenceSystem(final, isolated=True)

    dist = joint_distribution(
        [("M",)], reference, candidates=[bell.pointer_outcome_states("M")]
    )
    marginal = dist.probabilities
    xi = bell.spin_eigenstates(spec.theta1, "P")
    born = np.array([abs(state.overlap(spin)) ** 2 for state in xi])
    candidates = internal_state_candidates(("M",), reference)
    device_state = state_of("M", reference).matrix

    report = RunReport(spec=spec)
    report.tables.append(ReportTable("device_marginal", marginal, ("j",)))
    report.tables.append(
        ReportTable("device_state_diagonal", np.real(np.diag(device_state)), ("m",))
    )
    report.tables.append(ReportTable("candidate_weights", candidates.eigenvalues, ("n",)))
    report.metrics["candidate_degenerate"] = float(candidates.degenerate)
    report.residuals["state_norm"] = abs(final.norm() - 1.0)
    report.residuals["table_sum:device_marginal"] = abs(float(marginal.sum()) - 1.0)
    report.residuals["route:born_vs_direct"] = float(np.max(np.abs(marginal - born)))
    off_diagonal = device_state - np.diag(np.diag(device_state))
    report.residuals["device_state_offdiagonal"] = float(np.max(np.abs(off_diagonal)))
    _attach_sampling(report, dist, ("j",))
    return report


def _run_pair(spec: ScenarioSpec) -> RunReport:
    config = spec.config()
    dist = bell.pair_distribution(config)
    weights = np.abs(np.array(config.coefficients)) ** 2
    report = RunReport(spec=spec)
    report.tables.append(ReportTable("pair_table", dist.probabilities, ("j", "k")))
    report.residuals["table_sum:pair_table"] = abs(float(dist.probabilities.sum()) - 1.0)
    report.residuals["route:direct_vs_coefficients"] = float(
        np.max(np.abs(dist.probabilities - np.diag(weights)))
    )
    _attach_sampling(report, dist, ("j", "k"))
    return report


def _device_joint(config: bell.ExperimentConfig, state: StateVector) -> JointDistribution:
    reference = ReferenceSystem(state, isolated=True)
    return joint_distribution(
        [(bell.M1,), (bell.M2,)],
        reference,
        candidates=[bell.pointer_outcome_states(bell.M1), bell.pointer_outcome_states(bell.M2)],
    )


def _run_bell(spec: ScenarioSpec) -> RunReport:
    config = spec.config()
    final = bell.evolve_experiment(config)
    entangled = bell.correlation_entangled(config)
    factorized = bell.correlation_factorized(config)
    direct = _device_joint(config, final)
    marginal1 = bell.device_marginal(final, 1)
    marginal2 = bell.device_marginal(final, 2)

    settings = (spec.theta1, spec.theta2)
    report = RunReport(spec=spec)
    report.tables.append(ReportTable("entangled", entangled.table, ("j", "k"), settings))
    report.tables.append(ReportTable("factorized", factorized.table, ("j", "k"), settings))
    report.tables.append(ReportTable("direct", direct.probabilities, ("j", "k"), settings))
    report.tables.append(ReportTable("device_marginal_1", marginal1, ("j",)))
    report.tables.append(ReportTable("device_marginal_2", marginal2, ("k",)))

    report.residuals["state_norm"] = abs(final.norm() - 1.0)
    report.residuals["route:entangled_vs_direct"] = float(
        np.max(np.abs(entangled.table - direct.probabilities))
    )
    for name, table in (("entangled", entangled.table), ("factorized", factorized.table)):
        report.residuals[f"table_sum:{name}"] = abs(float(table.sum()) - 1.0)
    report.residuals["marginal:entangled_vs_device"] = float(
        max(
            np.max(np.abs(entangled.table.sum(axis=1) - marginal1)),
            np.max(np.abs(entangled.table.sum(axis=0) - marginal2)),
        )
    )
    report.metrics["correlator_entangled"] = bell.correlator(entangled)
    report.metrics["correlator_factorized"] = bell.correlator(factorized)
    _attach_sampling(report, direct, ("j", "k"))
    return report


def _run_ancilla(spec: ScenarioSpec) -> RunReport:
    config = spec.config(ancilla=True)
    state = bell.ancilla_experiment(config)
    n4 = bell.ancilla_joint_distribution(config)
    intuitive = bell.intuitive_joint(config)
    collapsed = bell.ancilla_device_table(config)
    factorized = bell.correlation_factorized(config)
    entangled = bell.correlation_entangled(config)

    settings = (spec.theta1, spec.theta2)
    report = RunReport(spec=spec)
    report.tables.append(ReportTable("ancilla_joint", n4.probabilities, ("l1", "l2", "j", "k"), settings))
    report.tables.append(ReportTable("direct", collapsed.table, ("j", "k"), settings))
    report.tables.append(ReportTable("factorized", factorized.table, ("j", "k"), settings))
    report.tables.append(ReportTable("entangled", entangled.table, ("j", "k"), settings))

    report.residuals["state_norm"] = abs(state.norm() - 1.0)
    report.residuals["route:ancilla_joint_vs_intuitive"] = float(
        np.max(np.abs(n4.probabilities - intuitive))
    )
    report.residuals["route:devices_vs_factorized"] = float(
        np.max(np.abs(collapsed.table - factorized.table))
    )
    report.residuals["table_sum:ancilla_joint"] = abs(float(n4.probabilities.sum()) - 1.0)
    report.metrics["correlation_change"] = float(np.max(np.abs(collapsed.table - entangled.table)))
    _attach_sampling(report, n4, ("l1", "l2", "j", "k"))
    return report


def _run_chsh_scan(spec: ScenarioSpec) -> RunReport:
    alpha, alpha_p, beta, beta_p = spec.angles if spec.angles else DEFAULT_QUADRUPLE
    offset = beta_p - beta
    if spec.grid:
        start, stop, steps = spec.grid
        points = np.linspace(start, stop, steps)
    else:
        points = np.array([beta])

    s_ent, s_fac, residual = [], [], 0.0
    for t in points:
        quad = (alpha, alpha_p, float(t), float(t) + offset)
        s_e = bell.chsh("entangled", quad, spec.a, spec.b)
        s_f = bell.chsh("factorized", quad, spec.a, spec.b)
        s_direct = bell.chsh("direct", quad, spec.a, spec.b)
        residual = max(residual, abs(s_e - s_direct))
        s_ent.append(s_e)
        s_fac.append(s_f)

    report = RunReport(spec=spec)
    report.tables.append(ReportTable("scan_angle", points.astype(float), ("point",)))
    report.tables.append(ReportTable("chsh_entangled", np.array(s_ent), ("point",)))
    report.tables.append(ReportTable("chsh_factorized", np.array(s_fac), ("point",)))
    report.residuals["route:chsh_closed_vs_direct"] = residual
    report.metrics["chsh_entangled_max_abs"] = float(np.max(np.abs(s_ent)))
    report.metrics["chsh_factorized_max_abs"] = float(np.max(np.abs(s_fac)))
    return report


_RUNNERS = {
    "intro-measurement": _run_intro,
    "pair-correlations": _run_pair,
    "bell": _run_bell,
    "bell-ancilla": _run_ancilla,
    "chsh-scan": _run_chsh_scan,
}


def run(spec: ScenarioSpec) -> RunReport:
    """Evaluate the scenario and collect tables plus consistency residuals."""
    return _RUNNERS[spec.scenario](spec)


# ---------------------------------------------------------------------------
# report rendering


def _spec_dict(spec: ScenarioSpec) -> dict:
    return {
        "scenario": spec.scenario,
        "a": [spec.a.real, spec.a.imag],
        "b": [spec.b.real, spec.b.imag],
        "theta1": spec.theta1,
        "theta2": spec.theta2,
        "angles": list(spec.angles) if spec.angles else None,
        "grid": list(spec.grid) if spec.grid else None,
        "seed": spec.seed,
        "samples": spec.samples,
    }


def _table_dict(table: ReportTable) -> dict:
    out = {
        "kind": table.kind,
        "axis_names": list(table.axis_names),
        "shape": list(table.values.shape),
        "values": table.values.tolist(),
    }
    if table.settings is not None:
        out["settings"] = list(table.settings)
    return out


def report_dict(report: RunReport) -> dict:
    out = {
        "spec": _spec_dict(report.spec),
        "tables": [_table_dict(t) for t in report.tables],
        "residuals": report.residuals,
        "metrics": report.metrics,
        "ok": report.ok,
    }
    if report.empirical is not None:
        out["empirical"] = _table_dict(report.empirical)
    return out


def _csv_rows(report: RunReport):
    scenario = report.spec.scenario
    tables = list(report.tables)
    if report.empirical is not None:
        tables.append(report.empirical)
    for table in tables:
        for index in np.ndindex(table.values.shape):
            cells = [str(i + 1) for i in index] + [""] * (4 - len(index))
            yield [scenario, table.kind, *cells, f"{float(table.values[index]):.17g}"]
    for name in sorted(report.residuals):
        yield [scenario, f"residual:{name}", "", "", "", "", f"{report.residuals[name]:.17g}"]


def emit(report: RunReport, fmt: str, path: str) -> None:
    """Write the machine-readable report; byte-identical for identical
    specs (including the seed)."""
    if fmt == "json":
        payload = json.dumps(report_dict(report), indent=2) + "\n"
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(payload)
    elif fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["scenario", "kind", "i1", "i2", "i3", "i4", "value"])
            writer.writerows(_csv_rows(report))
    else:
        raise ConfigError(f"--format: expected 'csv' or 'json', got {fmt!r}")


def format_text(report: RunReport) -> str:
    lines = [f"scenario: {report.spec.scenario}"]
    spec = report.spec
    lines.append(
        f"  a = {spec.a}, b = {spec.b}, theta1 = {spec.theta1!r}, theta2 = {spec.theta2!r}"
    )
    if spec.angles:
        lines.append(f"  angles = {tuple(spec.angles)}")
    if spec.grid:
        lines.append(f"  grid = {tuple(spec.grid)}")
    tables = list(report.tables)
    if report.empirical is not None:
        tables.append(report.empirical)
    for table in tables:
        label = table.kind
        if table.settings is not None:
            label += f" @ ({table.settings[0]:.6g}, {table.settings[1]:.6g})"
        body = np.array2string(table.values, precision=12, suppress_small=False)
        lines.append(f"{label} {table.axis_names}:")
        lines.extend("  " + row for row in body.splitlines())
    for name, value in report.metrics.items():
        lines.append(f"metric {name} = {value:.12g}")
    for name in sorted(report.residuals):
        lines.append(f"residual {name} = {report.residuals[name]:.3e}")
    verdict = "OK" if report.ok else "FAIL"
    lines.append(f"invariants {verdict} (max residual {report.max_residual:.3e}, gate {RESIDUAL_GATE:g})")
    return "\n".join(lines)


def main(argv=None) -> int:
    try:
        spec = parse_config(sys.argv[1:] if argv is None else argv)
    except (ConfigError, NotNormalized) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        report = run(spec)
    except QrsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(format_text(report))
    if spec.out:
        try:
            emit(report, spec.format, spec.out)
        except OSError as exc:
            print(f"error: cannot write {spec.out!r}: {exc}", file=sys.stderr)
            return 2
    if not report.ok:
        print(
            f"invariant failure: max residual {report.max_residual:.3e} >= {RESIDUAL_GATE:g}",
            file=sys.stderr,
        )
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
