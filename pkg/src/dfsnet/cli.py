"""Command-line front end: ``dfsnet <command> --config scenario.json``.

Exit codes
----------
0  success
1  unexpected internal error
2  bad invocation or scenario (schema violation, malformed JSON, missing seed)
3  physics or consistency failure (leakage, beam collision, routing error,
   failed validation or oracle mismatch)

Results go to stdout (or ``--out``); diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import sys
from dataclasses import asdict, fields, replace
from importlib import resources
from typing import Any, Sequence

import jsonschema
import numpy as np

from . import __version__
from . import network as nw
from . import noise as nz
from . import oracle as orc
from . import protocols as pr
from . import qstate as qs
from .optics import ConfigError as OpticsConfigError
from .optics import PortError
from .timing import TimingParams, timing_table, validate_regime

EXIT_OK, EXIT_INTERNAL, EXIT_CONFIG, EXIT_PHYSICS = 0, 1, 2, 3


class ConfigError(Exception):
    """Scenario or invocation problem (exit 2)."""


class PhysicsError(Exception):
    """The run itself failed or a check did not pass (exit 3)."""


def _schema(name: str) -> dict:
    text = resources.files("dfsnet").joinpath("schemas", name).read_text()
    return json.loads(text)


SCENARIO_SCHEMA = _schema("scenario.schema.json")
RESULT_SCHEMA = _schema("result.schema.json")


def load_scenario_text(text: str, source: str = "<config>") -> dict:
    """Parse and schema-check a scenario; raises :class:`ConfigError` with location details."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{source}: malformed JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e
    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        lines = [f"{source}: /{'/'.join(map(str, e.absolute_path))}: {e.message}" for e in errors]
        raise ConfigError("\n".join(lines))
    n = data["n_nodes"]
    proto = data["protocol"]
    bad = [p for p in proto["participants"] if p >= n]
    if bad or proto.get("entry", 0) >= n:
        raise ConfigError(f"{source}: participant or entry node outside 0..{n - 1}")
    if "entry" in proto and proto["entry"] not in proto["participants"]:
        raise ConfigError(f"{source}: entry node {proto['entry']} is not a participant")
    if proto["op"] == "toffoli" and len(proto["participants"]) != 3:
        raise ConfigError(f"{source}: toffoli needs exactly three participants (controls, then target)")
    return data


def load_scenario(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e.strerror}") from e
    return load_scenario_text(text, path)


def _amplitudes(data: dict) -> tuple[complex, ...] | None:
    k = len(data["protocol"]["participants"])
    block = data.get("input", {})
    if "basis" in block:
        bits = block["basis"]
        if len(bits) != k:
            raise ConfigError(f"input basis needs {k} bits, got {len(bits)}")
        amps = np.zeros(2**k, dtype=complex)
        amps[int(bits, 2)] = 1
        return tuple(amps)
    if "amplitudes" in block:
        raw = block["amplitudes"]
        if len(raw) != 2**k:
            raise ConfigError(f"input needs {2**k} amplitudes, got {len(raw)}")
        amps = np.array([complex(*a) if isinstance(a, list) else complex(a) for a in raw])
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ConfigError("input amplitudes are all zero")
        return tuple(amps / norm)
    return None


def build_scenario(data: dict) -> nz.GateScenario:
    proto = data["protocol"]
    try:
        return nz.GateScenario(
            n_nodes=data["n_nodes"],
            participants=tuple(proto["participants"]),
            entry=proto.get("entry"),
            op=proto["op"],
            encoding=data.get("encoding", "dfs"),
            amplitudes=_amplitudes(data),
            combiner=data.get("combiner", "ideal"),
            max_attempts=data.get("max_attempts", 100),
        )
    except ValueError as e:
        raise ConfigError(str(e)) from e


def build_noise(data: dict) -> nz.NoiseParams:
    try:
        return nz.NoiseParams(**data.get("noise", {}))
    except ValueError as e:
        raise ConfigError(str(e)) from e


def build_timing(data: dict) -> TimingParams:
    try:
        return TimingParams(**data.get("timing", {}))
    except ValueError as e:
        raise ConfigError(str(e)) from e


def _is_noisy(params: nz.NoiseParams) -> bool:
    return any(
        (params.dephasing_sigma, params.loss_per_element, params.path_jitter_sigma, params.dark_rate,
         params.scattering_phase_error)
    )


def _seed(args, data: dict, required: bool) -> int | None:
    seed = args.seed if getattr(args, "seed", None) is not None else data.get("seed")
    if seed is None and required:
        raise ConfigError("this run is stochastic; give a seed (--seed or \"seed\" in the scenario)")
    return seed


def _trials(args, data: dict) -> int:
    trials = args.trials if getattr(args, "trials", None) is not None else data.get("trials", 1000)
    if trials < 1:
        raise ConfigError("trials must be at least 1")
    return trials


def _bits(m: int, k: int) -> str:
    return format(m, f"0{k}b")


def _readout(components: Sequence[tuple[float, qs.JointState]], nodes: Sequence[int], encoding: str) -> dict:
    """Probability of each single-node value in a (possibly mixed) conditioned register."""
    one = (0, 1) if encoding == "dfs" else (0, 0)
    zero = (1, 0)
    out = {}
    for n in nodes:
        tally = {"0": 0.0, "1": 0.0, "leak": 0.0}
        for w, state in components:
            for (_, atoms), a in state.amplitudes.items():
                bits = qs.node_bits(atoms, n)
                key = "1" if bits == one else "0" if bits == zero else "leak"
                tally[key] += w * abs(a) ** 2
        out[str(n)] = {k: min(1.0, v) for k, v in tally.items()}
    return out


def _dv_components(scenario: nz.GateScenario, branches: dict) -> list[tuple[float, qs.JointState]]:
    if "Dv" not in branches:
        return []
    comps = branches["Dv"].components
    if scenario.op == "toffoli":
        target = scenario.participants[-1]
        comps = [(w, pr.logical_hadamard(s, target)) for w, s in comps]
    return comps


def _gate_input(scenario: nz.GateScenario) -> qs.JointState:
    state = scenario.initial_state()
    if scenario.op == "toffoli":
        state = pr.logical_hadamard(state, scenario.participants[-1])
    return state


def cmd_simulate(args, data: dict) -> dict:
    scenario = build_scenario(data)
    params = build_noise(data)
    timing = build_timing(data)
    mode = "sampled" if args.sampled else "exact" if args.exact else data.get("mode", "exact")
    graph = scenario.graph()
    start = scenario.initial_state()
    ideal = scenario.ideal_output(start)
    nodes = list(scenario.participants)
    check = scenario.encoding == "dfs"
    result: dict[str, Any] = {"command": "simulate", "version": __version__, "mode": mode}

    if mode == "exact":
        branches = pr.cp_branches(
            _gate_input(scenario), graph, scenario.ring_participants, scenario.entry_node, check_leakage=check
        )
        result["probabilities"] = {o: branches[o].probability if o in branches else 0.0 for o in ("Dv", "Dh", qs.NO_CLICK)}
        comps = _dv_components(scenario, branches)
        result["fidelity"] = nz._mixture_fidelity(comps, ideal) if comps else None
        result["readout"] = _readout(comps, nodes, scenario.encoding)
        if _is_noisy(params):
            seed = _seed(args, data, required=True)
            mc = nz.monte_carlo_fidelity(scenario, params, _trials(args, data), seed, timing)
            result["monte_carlo"] = mc.to_json()
            result["seed"] = seed
        return result

    seed = _seed(args, data, required=True)
    rng = np.random.default_rng(seed)
    real0 = nz.sample_realization(params, rng, scenario.n_nodes, timing)
    state = nz.apply_boundary_dephasing(start, real0)

    def noise_for_attempt(_k: int):
        return nz.sample_realization(params, rng, scenario.n_nodes, timing)

    if scenario.op == "toffoli":
        i, j, k = scenario.participants
        try:
            out = pr.toffoli(state, graph, (i, j), k, scenario.max_attempts, rng, noise_for_attempt)
        except pr.GateExhausted as e:
            out = e.outcome
    else:
        out = pr.repeat_until_success(
            state, graph, scenario.ring_participants, scenario.entry_node, scenario.max_attempts, rng,
            noise_for_attempt, check_leakage=check,
        )
    result["seed"] = seed
    result["herald"] = out.to_json()
    result["probabilities"] = {out.apparent: out.probability}
    result["fidelity"] = qs.fidelity_up_to_global_phase(out.post_state, ideal) if out.success else None
    result["readout"] = _readout([(1.0, out.post_state)], nodes, scenario.encoding)
    return result


def truth_table_rows(scenario: nz.GateScenario) -> list[dict]:
    """One row per logical basis input: herald probabilities and the dominant conditioned output."""
    graph = scenario.graph()
    k = len(scenario.participants)
    rows = []
    for m in range(2**k):
        amps = np.zeros(2**k, dtype=complex)
        amps[m] = 1
        sc = replace(scenario, amplitudes=tuple(amps))
        branches = pr.cp_branches(
            _gate_input(sc), graph, sc.ring_participants, sc.entry_node, check_leakage=sc.encoding == "dfs"
        )
        comps = _dv_components(sc, branches)
        row = {
            "input": _bits(m, k),
            "p_dv": branches["Dv"].probability if "Dv" in branches else 0.0,
            "p_dh": branches["Dh"].probability if "Dh" in branches else 0.0,
            "output": "",
            "sign": 0,
            "weight": 0.0,
        }
        if comps:
            _, state = comps[0]
            full = state.atomic_vector()
            vec = np.array([full[sc.basis_string(b)] for b in range(2**k)])
            best = int(np.argmax(np.abs(vec)))
            row["output"] = _bits(best, k)
            # the input amplitude was +1, so a real output gives the phase picked up
            row["sign"] = int(np.sign(vec[best].real)) if abs(vec[best].imag) < 1e-12 else 0
            row["weight"] = float(abs(vec[best]) ** 2)
        rows.append(row)
    return rows


def cmd_truth_table(args, data: dict) -> dict:
    scenario = build_scenario(data)
    return {"command": "truth-table", "version": __version__, "rows": truth_table_rows(scenario)}


SWEEP_TIMING = tuple(f.name for f in fields(TimingParams))


def cmd_sweep(args, data: dict) -> dict:
    scenario = build_scenario(data)
    params = build_noise(data)
    timing = build_timing(data)
    block = data.get("sweep", {})
    parameter = args.param or block.get("parameter")
    if parameter is None:
        raise ConfigError("sweep needs --param (or a \"sweep\" block)")
    if args.values is not None:
        try:
            values = [float(v) for v in args.values.split(",") if v.strip()]
        except ValueError as e:
            raise ConfigError(f"--values must be comma-separated numbers: {e}") from e
    else:
        values = block.get("values")
    if not values:
        raise ConfigError("sweep needs --values (or \"values\" in the sweep block)")
    seed = _seed(args, data, required=True)
    trials = _trials(args, data)
    if parameter in SWEEP_TIMING:
        rows = []
        for v in values:
            try:
                t = replace(timing, **{parameter: v})
            except ValueError as e:
                raise ConfigError(str(e)) from e
            res = nz.monte_carlo_fidelity(scenario, params, trials, seed, t)
            rows.append({"parameter": parameter, "value": v, "success_prob": res.success_prob,
                         "fidelity_mean": res.fidelity_mean, "fidelity_stderr": res.fidelity_stderr,
                         "trials": res.trials})
    elif parameter in nz.SWEEP_PARAMS:
        try:
            rows = nz.sweep(scenario, params, parameter, values, trials, seed, timing)
        except ValueError as e:
            raise ConfigError(str(e)) from e
    else:
        raise ConfigError(f"cannot sweep {parameter!r}; choose from {nz.SWEEP_PARAMS + SWEEP_TIMING}")
    return {"command": "sweep", "version": __version__, "seed": seed, "rows": rows}


def cmd_timing(args, data: dict | None) -> dict:
    base = build_timing(data) if data else TimingParams()
    overrides = {
        name: getattr(args, name) for name in SWEEP_TIMING if getattr(args, name, None) is not None
    }
    try:
        timing = replace(base, **overrides)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    return {
        "command": "timing",
        "version": __version__,
        "parameters": asdict(timing),
        "durations": timing_table(timing),
        "warnings": validate_regime(timing),
    }


def cmd_validate(args, data: dict) -> dict:
    scenario = build_scenario(data)
    graph = scenario.graph()
    try:
        schedule = nw.compile_schedule(graph, scenario.ring_participants, scenario.entry_node)
    except nw.ScheduleError as e:
        raise PhysicsError(str(e)) from e
    mismatches = nw.validate_equal_arrival(graph, schedule)
    result = {
        "command": "validate",
        "version": __version__,
        "valid": not mismatches,
        "equal_arrival": [[list(a), list(b)] for a, b in mismatches],
        "warnings": validate_regime(build_timing(data)),
    }
    return result


def _matrix_json(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def oracle_cases(n_max: int) -> list[tuple[int, tuple[int, ...], int]]:
    cases = []
    for n in range(1, n_max + 1):
        for k in range(1, n + 1):
            for subset in itertools.combinations(range(n), k):
                for entry in subset:
                    cases.append((n, subset, entry))
    return cases


def cmd_oracle_check(args, data: dict | None) -> dict:
    tol = args.tol
    if data is not None:
        sc = build_scenario(data)
        cases = [(sc.n_nodes, sc.participants, sc.entry_node)]
    else:
        if not 1 <= args.n_nodes <= 5:
            raise ConfigError("--n-nodes must be between 1 and 5")
        cases = oracle_cases(args.n_nodes)
    worst = 0.0
    failures = []
    maps = []
    graphs: dict[int, nw.NetworkGraph] = {}
    for n, subset, entry in cases:
        graph = graphs.setdefault(n, nw.build_ring_network(n))
        parts = nw.ring_order(n, entry, subset)
        schedule = nw.compile_schedule(graph, parts, entry)
        lm = orc.enumerate_logical_map(graph, schedule)
        engine = pr.conditioned_maps(graph, schedule)
        for outcome in ("Dv", "Dh"):
            try:
                dev = orc.assert_equal_up_to_global_phase(engine[outcome], lm.matrix(outcome), tol)
            except orc.GlobalPhaseMismatch as e:
                dev = e.deviation
                failures.append({"n_nodes": n, "participants": list(parts), "entry": entry, "outcome": outcome})
            worst = max(worst, dev)
        if args.show_maps:
            maps.append({"n_nodes": n, "participants": list(parts), "entry": entry,
                         "maps": {o: _matrix_json(lm.matrix(o)) for o in ("Dv", "Dh")}})
    result = {
        "command": "oracle-check",
        "version": __version__,
        "cases": len(cases),
        "tolerance": tol,
        "max_deviation": worst,
        "ok": not failures,
        "failures": failures,
    }
    if args.show_maps:
        result["maps"] = maps
    return result


def _csv_rows(result: dict) -> tuple[list[str], list[dict]]:
    if "rows" in result:
        rows = result["rows"]
        return list(rows[0].keys()) if rows else [], rows
    if result["command"] == "timing":
        rows = [{"quantity": k, "seconds": v} for k, v in result["durations"].items()]
        return ["quantity", "seconds"], rows
    flat = []

    def walk(prefix: str, value):
        if isinstance(value, dict):
            for k, v in value.items():
                walk(f"{prefix}.{k}" if prefix else str(k), v)
        else:
            flat.append({"key": prefix, "value": json.dumps(value) if isinstance(value, list) else value})

    walk("", result)
    return ["key", "value"], flat


def render(result: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(result, indent=2, sort_keys=False) + "\n"
    header, rows = _csv_rows(result)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def validate_result(result: dict) -> None:
    jsonschema.validate(result, RESULT_SCHEMA)


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dfsnet", description="Heralded multi-node phase gates on a cavity ring.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True, fmt="json"):
        p.add_argument("--config", required=config_required, metavar="PATH", help="scenario JSON file")
        p.add_argument("--out", metavar="PATH", help="write the result here instead of stdout")
        p.add_argument("--format", choices=("json", "csv"), default=None, help=f"output format (default {fmt})")
        p.set_defaults(default_format=fmt)

    p = sub.add_parser("simulate", help="run the scenario's gate once, exactly or sampled")
    common(p)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--exact", action="store_true", help="enumerate herald branches (default)")
    group.add_argument("--sampled", action="store_true", help="sample detector outcomes until success")
    p.add_argument("--seed", type=int, help="random seed (required for sampled or noisy runs)")
    p.add_argument("--trials", type=int, help="Monte Carlo trials when noise is configured")

    p = sub.add_parser("truth-table", help="conditioned output for every logical basis input")
    common(p, fmt="csv")

    p = sub.add_parser("sweep", help="Monte Carlo over values of one noise or timing parameter")
    common(p, fmt="csv")
    p.add_argument("--param", help="parameter name")
    p.add_argument("--values", help="comma-separated values")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int)

    p = sub.add_parser("timing", help="gate durations and regime warnings")
    common(p, config_required=False)
    for name in SWEEP_TIMING:
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float)

    p = sub.add_parser("validate", help="schema, equal-arrival and regime checks for a scenario")
    common(p)

    p = sub.add_parser("oracle-check", help="compare engine and brute-force oracle maps")
    common(p, config_required=False)
    p.add_argument("--n-nodes", type=int, default=3, help="check every subset and entry up to this size")
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--show-maps", action="store_true", help="include the oracle matrices")
    return parser


COMMANDS = {
    "simulate": cmd_simulate,
    "truth-table": cmd_truth_table,
    "sweep": cmd_sweep,
    "timing": cmd_timing,
    "validate": cmd_validate,
    "oracle-check": cmd_oracle_check,
}


def run(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    stderr = sys.stderr if stderr is None else stderr
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        data = load_scenario(args.config) if args.config else None
        fmt = args.format or (data or {}).get("output", {}).get("format") or args.default_format
        out_path = args.out or (data or {}).get("output", {}).get("path")
        result = COMMANDS[args.command](args, data)
        validate_result(result)
        text = render(result, fmt)
        if out_path:
            with open(out_path, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            stdout.write(text)
        if result["command"] == "timing" and fmt == "csv":
            for w in result["warnings"]:
                print(f"warning: {w}", file=stderr)
        if result["command"] == "validate" and not result["valid"]:
            print("error: routes reach the detectors at different ticks", file=stderr)
            return EXIT_PHYSICS
        if result["command"] == "oracle-check" and not result["ok"]:
            print("error: engine and oracle disagree", file=stderr)
            return EXIT_PHYSICS
        return EXIT_OK
    except ConfigError as e:
        print(f"error: {e}", file=stderr)
        return EXIT_CONFIG
    except (PhysicsError, qs.StateError, nw.ScheduleError, nw.RoutingError, PortError, OpticsConfigError) as e:
        print(f"error: {type(e).__name__}: {e}", file=stderr)
        return EXIT_PHYSICS
    except OSError as e:
        print(f"error: {e}", file=stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
