"""Command line interface.

::

    stinespring run --config cfg.json [--output out.csv] [--seed N] [--verbose]
    stinespring validate --config cfg.json
    stinespring suite

Exit codes: 0 success, 1 bad configuration, 2 numerical guard tripped.
Results are written atomically, so a failed run leaves no partial output.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
import time
from typing import Any, Callable

import jsonschema
import numpy as np

from . import __version__
from . import decoherence as dec
from . import detectors as det
from . import sterngerlach as sg
from .hilbert import NumericalGuardError, trace_distance
from .protocol import GATES, ProtocolSpec, matrix_from_json, run_dilated, sample_outcomes
from .spectral import measurement_unitary, spectral_decompose

log = logging.getLogger("stinespring")


class ConfigError(ValueError):
    pass


_complex = {"oneOf": [{"type": "number"}, {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}]}
_vector = {"type": "array", "items": _complex, "minItems": 1}
_matrix = {
    "oneOf": [
        {"type": "string", "enum": sorted(GATES)},
        {"type": "array", "items": {"type": "string", "enum": sorted(GATES)}, "minItems": 1},
        {
            "type": "object",
            "properties": {"re": {"type": "array"}, "im": {"type": "array"}},
            "required": ["re"],
            "additionalProperties": False,
        },
    ]
}


def _obj(props: dict, required: list[str]) -> dict:
    return {"type": "object", "properties": props, "required": required, "additionalProperties": False}


_num = {"type": "number"}
_pos = {"type": "number", "exclusiveMinimum": 0}
_int = {"type": "integer", "minimum": 0}

PARAM_SCHEMAS = {
    "measure": _obj({"observable": _matrix, "state": _vector}, ["observable", "state"]),
    "protocol": _obj({"protocol": {"type": "object"}, "state": _vector, "shots": _int}, ["protocol", "state"]),
    "photodetect": _obj(
        {"n": _int, "N": {"type": "integer", "minimum": 1, "maximum": 12}, "g": _pos, "tau": _pos},
        ["n", "N", "g", "tau"],
    ),
    "homodyne": _obj({"beta_abs": _pos, "phi": _num, "state": _vector}, ["beta_abs", "state"]),
    "fluorescence": _obj(
        {"c_g": _complex, "c_e": _complex, "p": {"type": "number", "minimum": 0, "maximum": 1}, "n": _int},
        ["c_g", "c_e", "p", "n"],
    ),
    "dispersive": _obj({"c_g": _complex, "c_e": _complex, "alpha": {"type": "number", "minimum": 0}, "theta": _num},
                       ["c_g", "c_e", "alpha", "theta"]),
    "sterngerlach": _obj(
        {
            "M": _pos, "b": _num, "mu_B": _num, "B0": _num, "delta": _pos, "z0": _num, "v": _pos, "L": _pos,
            "c_up": _complex, "c_down": _complex, "n_steps": {"type": "integer", "minimum": 1},
            "profile": {"type": "boolean"},
            "grid": _obj({"z_min": _num, "z_max": _num, "points": {"type": "integer", "minimum": 8}},
                         ["z_min", "z_max", "points"]),
        },
        ["c_up", "c_down"],
    ),
    "decohere": _obj(
        {"observable": _matrix, "state": _vector, "block_size": {"type": "integer", "minimum": 1},
         "samples": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1}},
        ["observable", "state"],
    ),
    "bell": _obj({"obs_b": {"enum": ["Z", "X"]}, "b_first": {"type": "boolean"}}, []),
}

CONFIG_SCHEMA = _obj(
    {
        "scenario": {"enum": sorted(PARAM_SCHEMAS)},
        "params": {"type": "object"},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "output": _obj({"format": {"enum": ["csv", "json"]}}, []),
    },
    ["scenario", "params"],
)


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
        jsonschema.validate(cfg["params"], PARAM_SCHEMAS[cfg["scenario"]])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"schema error at {where}: {exc.message}") from exc
    return cfg


def _c(x) -> complex:
    return complex(x[0], x[1]) if isinstance(x, list) else complex(x)


def _vec(xs) -> np.ndarray:
    v = np.array([_c(x) for x in xs])
    n = np.linalg.norm(v)
    if n == 0:
        raise ConfigError("state vector is zero")
    return v / n


Rows = tuple[list[str], list[list[Any]]]


def _measure(p: dict, seed: int) -> Rows:
    O = matrix_from_json(p["observable"])
    psi = _vec(p["state"])
    if O.shape[0] != psi.size:
        raise ConfigError("state and observable dimensions differ")
    sd = spectral_decompose(O)
    mu = measurement_unitary(sd)
    out = mu.unitary.data @ np.kron(psi, np.eye(sd.n_outcomes)[0])
    probs = np.abs(out.reshape(psi.size, sd.n_outcomes)) ** 2
    born = probs.sum(axis=0)
    return ["outcome", "eigenvalue", "probability"], [[m, sd.eigenvalues[m], born[m]] for m in range(sd.n_outcomes)]


def _protocol(p: dict, seed: int) -> Rows:
    try:
        spec = ProtocolSpec.from_dict(p["protocol"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed protocol: {exc}") from exc
    psi = _vec(p["state"])
    joint = run_dilated(spec, psi).joint_outcomes()
    header = list(spec.ss_labels) + ["probability"]
    shots = p.get("shots", 0)
    freq = None
    if shots:
        header.append("frequency")
        rec = sample_outcomes(spec, psi, seed, shots)
        dims = spec.layout.sub(spec.ss_labels).dims
        freq = np.bincount(np.ravel_multi_index(rec.T, dims), minlength=int(np.prod(dims))) / shots
    rows = []
    for i, key in enumerate(sorted(joint)):
        row = list(key) + [joint[key]]
        if freq is not None:
            row.append(freq[i])
        rows.append(row)
    return header, rows


def _photodetect(p: dict, seed: int) -> Rows:
    n = p["n"]
    cfg = det.PhotonCounterConfig(p["N"], p["g"], p["tau"], cutoff=n)
    psi = np.zeros(n + 1)
    psi[n] = 1.0
    exact = det.exact_count_distribution(det.photodetect_exact(psi, cfg))[: n + 1]
    closed = det.photocount_distribution(n, cfg.zeta)
    return ["counts", "p_binomial", "p_exact"], [[k, closed[k], exact[k]] for k in range(n + 1)]


def _homodyne(p: dict, seed: int) -> Rows:
    cfg = det.HomodyneConfig(p["beta_abs"], p.get("phi", 0.0))
    psi = _vec(p["state"])
    Ng, pN, Dg, pD = det.homodyne_distributions(psi, cfg)
    rows = [["N", int(n), q] for n, q in zip(Ng, pN)] + [["D", int(d), q] for d, q in zip(Dg, pD)]
    return ["variable", "value", "probability"], rows


def _fluorescence(p: dict, seed: int) -> Rows:
    c_g, c_e = _c(p["c_g"]), _c(p["c_e"])
    res = det.fluorescence_measure(c_g, c_e, det.FluorescenceConfig(p["p"], p["n"]))
    rows = [["count_probability", m, q] for m, q in enumerate(res.count_distribution)]
    rows += [["p_false_negative", "", res.p_false_negative], ["dark_g_weight", "", res.dark_g_weight]]
    return ["quantity", "index", "value"], rows


def _dispersive(p: dict, seed: int) -> Rows:
    res = det.dispersive_readout(_c(p["c_g"]), _c(p["c_e"]), det.DispersiveConfig(p["alpha"], p["theta"]))
    return ["quantity", "value"], [
        ["p_error", res.p_error],
        ["p_outcome_g", res.p_outcome[0]],
        ["p_outcome_e", res.p_outcome[1]],
    ]


def _sterngerlach(p: dict, seed: int) -> Rows:
    keys = ("M", "b", "mu_B", "B0", "delta", "z0", "v", "L")
    cfg = sg.SGConfig(**{k: p[k] for k in keys if k in p})
    c = np.array([_c(p["c_up"]), _c(p["c_down"])])
    c = c / np.linalg.norm(c)
    z = None
    if "grid" in p:
        g = p["grid"]
        if g["z_max"] <= g["z_min"]:
            raise ConfigError("grid needs z_max > z_min")
        z = np.linspace(g["z_min"], g["z_max"], g["points"], endpoint=False)
    r = sg.sg_split_step(cfg, tuple(c), n_steps=p.get("n_steps", 200), z=z)
    if p.get("profile", False):
        dens = np.abs(r.psi) ** 2
        return ["z", "density_up", "density_down"], [[r.z[i], dens[0, i], dens[1, i]] for i in range(r.z.size)]
    out = sg.sg_outcome_distribution(cfg, tuple(c))
    t = cfg.transit_time
    rows = []
    for i, s in enumerate(sg.SPINS):
        rows.append([s, out.probabilities[i], r.branch_probability(s), sg.sg_heisenberg_z(cfg, t, s),
                     r.branch_mean(s), cfg.width(t) ** 2, r.branch_variance(s), out.misbinning])
    header = ["spin", "probability", "probability_split_step", "mean_z", "mean_z_split_step",
              "variance", "variance_split_step", "misbinning"]
    return header, rows


def _decohere(p: dict, seed: int) -> Rows:
    O = matrix_from_json(p["observable"])
    psi = _vec(p["state"])
    if O.shape[0] != psi.size:
        raise ConfigError("state and observable dimensions differ")
    sd = spectral_decompose(O)
    block = p.get("block_size", 2)
    rng = np.random.default_rng(seed)
    big, blocks = dec.nonminimal_dilated(np.outer(psi, psi.conj()), sd, block, rng)
    exact = dec.dephase_exact(big, blocks)
    rows = []
    for i, S in enumerate(p.get("samples", [100, 1000, 10000])):
        mc = dec.dephase_sampled(big, blocks, S, seed=np.random.SeedSequence(seed, spawn_key=(i,)))
        rows.append([S, trace_distance(mc, exact), dec.coherence_norm(mc, blocks), 5 / math.sqrt(S)])
    return ["samples", "trace_distance", "coherence_norm", "bound"], rows


def _bell(p: dict, seed: int) -> Rows:
    from .acceptance import BELL, bell_protocol

    run = run_dilated(bell_protocol("Z", p.get("obs_b", "Z"), p.get("b_first", False)), BELL)
    joint = run.joint_outcomes()
    labels = run.spec.ss_labels
    return list(labels) + ["probability"], [list(k) + [v] for k, v in sorted(joint.items())]


SCENARIOS: dict[str, Callable[[dict, int], Rows]] = {
    "measure": _measure,
    "protocol": _protocol,
    "photodetect": _photodetect,
    "homodyne": _homodyne,
    "fluorescence": _fluorescence,
    "dispersive": _dispersive,
    "sterngerlach": _sterngerlach,
    "decohere": _decohere,
    "bell": _bell,
}


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    if isinstance(x, complex):
        return format(x.real, ".17g") + format(x.imag, "+.17g") + "j"
    return str(x)


def render(header: list[str], rows: list[list[Any]], fmt: str = "csv") -> str:
    if fmt == "json":
        recs = [{h: (_fmt(v) if isinstance(v, complex) else (v.item() if hasattr(v, "item") else v))
                 for h, v in zip(header, r)} for r in rows]
        return json.dumps(recs, indent=1) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


def _atomic_write(path: str, text: str) -> None:
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def execute(cfg: dict, seed: int | None = None) -> str:
    """Run a validated config and return the rendered output."""
    seed = cfg.get("seed", 0) if seed is None else seed
    header, rows = SCENARIOS[cfg["scenario"]](cfg["params"], int(seed))
    return render(header, rows, cfg.get("output", {}).get("format", "csv"))


def cmd_run(args) -> int:
    t0 = time.perf_counter()
    cfg = load_config(args.config)
    text = execute(cfg, args.seed)
    wall = time.perf_counter() - t0
    manifest = {
        "config": cfg,
        "seed": cfg.get("seed", 0) if args.seed is None else args.seed,
        "version": __version__,
        "wall_time_s": wall,
    }
    if args.output:
        _atomic_write(args.output, text)
        _atomic_write(args.output + ".manifest.json", json.dumps(manifest, indent=1) + "\n")
    else:
        sys.stdout.write(text)
    log.info("scenario %s finished in %.3f s", cfg["scenario"], wall)
    return 0


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    if cfg["scenario"] == "protocol":
        try:
            ProtocolSpec.from_dict(cfg["params"]["protocol"])
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed protocol: {exc}") from exc
    print(f"ok: {cfg['scenario']}")
    return 0


def cmd_suite(args) -> int:
    from .acceptance import run_all

    results = run_all()
    for r in results:
        print(r.line())
    n_pass = sum(r.passed for r in results)
    print(f"{n_pass}/{len(results)} criteria passed")
    return 0 if n_pass == len(results) else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stinespring", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a scenario config")
    run.add_argument("--config", required=True)
    run.add_argument("--output")
    run.add_argument("--seed", type=int)
    run.add_argument("--verbose", action="store_true")
    run.set_defaults(func=cmd_run)
    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("--config", required=True)
    val.set_defaults(func=cmd_validate)
    suite = sub.add_parser("suite", help="run the acceptance checks")
    suite.set_defaults(func=cmd_suite)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 2**64:
        print("error: seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except NumericalGuardError as exc:
        print(f"numerical guard: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
