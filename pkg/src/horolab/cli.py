"""Command-line harness: config ingestion, dispatch, reproducible outputs.

Exit codes: 0 success, 2 malformed configuration, 3 numerical failure,
4 ping-pong validation failure.  Every CSV row carries the seed and a
stable hash of the resolved configuration; rerunning a command with the
same configuration reproduces its output files byte for byte (wall time
goes to the stderr log only).  LAB_THREADS sets the worker budget.
"""

import argparse
import csv
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import dynamics, growth, product, quasimetric, schottky
from .errors import HorolabError, PingPongError

CONFIG_KEYS = {"system", "seed", "out", "tolerances", "params"}


@dataclass
class LabConfig:
    system: str = None  # path to a system JSON, optional
    seed: int = 0
    out: str = None
    tolerances: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "system": self.system,
            "seed": self.seed,
            "out": self.out,
            "tolerances": self.tolerances,
            "params": self.params,
        }


class ConfigError(ValueError):
    pass


def parse_config(text):
    """Strict LabConfig parse: unknown keys rejected, defaults echoed."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            f"malformed JSON at line {exc.lineno} column {exc.colno}:"
            f" {exc.msg}"
        ) from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = LabConfig(
        system=data.get("system"),
        seed=int(data.get("seed", 0)),
        out=data.get("out"),
        tolerances=dict(data.get("tolerances", {})),
        params=dict(data.get("params", {})),
    )
    if cfg.system is not None and not isinstance(cfg.system, str):
        raise ConfigError("config field 'system' must be a path string")
    if not (-(2**63) <= cfg.seed < 2**63):
        raise ConfigError("seed must fit in 64 bits")
    if cfg.system is not None and not os.path.exists(cfg.system):
        raise ConfigError(f"system file does not exist: {cfg.system}")
    return cfg


def serialize_config(cfg):
    return json.dumps(cfg.as_dict(), sort_keys=True, indent=1)


def config_hash(command, cfg, system_data=None):
    payload = {
        "command": command,
        "seed": cfg.seed,
        "params": cfg.params,
        "tolerances": cfg.tolerances,
        "system": system_data,
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]


def fmt(x):
    """Shortest round-trip decimal for floats; stable across runs."""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, np.integer):
        return str(int(x))
    return str(x)


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _thread_budget():
    try:
        return max(1, int(os.environ.get("LAB_THREADS", "1")))
    except ValueError:
        return 1


def _parse_vec(text):
    return np.asarray([float(p) for p in text.split(",")], dtype=float)


def _load_system(cfg):
    if cfg.system is None:
        raise ConfigError("this command needs --system")
    return schottky.load_system(cfg.system)


def _require_valid(system):
    report = schottky.validate_ping_pong(system)
    report.raise_if_invalid()
    return report


# ------------------------------------------------------------- commands


def cmd_validate(cfg):
    system = _load_system(cfg)
    report = schottky.validate_ping_pong(system)
    payload = {
        "valid": report.valid,
        "margins": [float(m) for m in report.margins],
        "violations": report.violations,
        "zariski_flags": schottky.zariski_density_flags(system)
        if report.valid
        else {},
        "seed": cfg.seed,
        "config_hash": config_hash(
            "validate", cfg, schottky.system_to_dict(system)
        ),
    }
    if cfg.out:
        _write_json(cfg.out, payload)
    else:
        print(json.dumps(payload, sort_keys=True))
    if not report.valid:
        raise PingPongError("; ".join(report.violations[:4]))
    return 0


def cmd_cone(cfg):
    system = _load_system(cfg)
    _require_valid(system)
    max_len = int(cfg.params.get("max_len", 8))
    cone = schottky.limit_cone(system, max_len)
    chash = config_hash("cone", cfg, schottky.system_to_dict(system))
    header = ["seed", "config_hash"] + [
        f"dir_{i}" for i in range(system.r)
    ] + ["angle"]
    rows = []
    for d in cone.directions:
        angle = float(np.arctan2(d[1], d[0])) if system.r >= 2 else 0.0
        rows.append([cfg.seed, chash] + [float(x) for x in d] + [angle])
    _write_csv(cfg.out or "cone.csv", header, rows)
    return 0


def cmd_cover(cfg):
    p = cfg.params
    v = _parse_vec(p.get("v", "1,2"))
    n = int(p.get("n", 1000))
    space = quasimetric.abelian_space(len(v))
    rng = np.random.default_rng(cfg.seed)
    centers = rng.uniform(0.0, 1.0, size=(n, space.dim))
    radii = np.exp(rng.uniform(np.log(0.01), np.log(0.2), n))
    selected, mult = quasimetric.besicovitch_cover(
        list(zip(centers, radii)), v, space=space
    )
    kappa = quasimetric.kappa_estimate(space, v)
    chash = config_hash("cover", cfg)
    _write_csv(
        cfg.out or "cover.csv",
        ["seed", "config_hash", "n", "v", "selected", "multiplicity",
         "kappa_estimate"],
        [[cfg.seed, chash, n, ";".join(map(fmt, v)), len(selected), mult,
          kappa]],
    )
    return 0


def cmd_maximal(cfg):
    p = cfg.params
    v = _parse_vec(p.get("v", "1,2"))
    res = int(p.get("resolution", 2**10))
    n_cfg = int(p.get("configs", 20))
    r_max = float(p.get("r_max", 0.25))
    space = quasimetric.abelian_space(len(v))
    kappa = quasimetric.kappa_estimate(space, v)
    rng = np.random.default_rng(cfg.seed)
    chash = config_hash("maximal", cfg)
    rows = []
    for i in range(n_cfg):
        alpha = float(np.exp(rng.uniform(np.log(0.05), np.log(1.0))))
        omega1, omega2 = _random_indicators(rng, (res,) * len(v))
        lhs, rhs = quasimetric.maximal_set_bound_check(
            space, v, omega1, omega2, alpha, r_max, kappa_v=kappa
        )
        rows.append([cfg.seed, chash, i, alpha, lhs, rhs, int(lhs <= rhs)])
    _write_csv(
        cfg.out or "maximal.csv",
        ["seed", "config_hash", "config", "alpha", "lhs", "rhs", "holds"],
        rows,
    )
    return 0


def _random_indicators(rng, shape):
    """Random union-of-boxes indicators on the torus grid."""
    out = []
    for _ in range(2):
        grid = np.zeros(shape, dtype=bool)
        for _ in range(int(rng.integers(1, 5))):
            sel = tuple(
                _wrap_slice(rng, n) for n in shape
            )
            _set_wrapped(grid, sel)
        if not grid.any():
            grid[tuple(0 for _ in shape)] = True
        out.append(grid)
    return out


def _wrap_slice(rng, n):
    start = int(rng.integers(0, n))
    width = int(rng.integers(max(1, n // 64), max(2, n // 4)))
    return start, width


def _set_wrapped(grid, sel):
    idx = np.ix_(
        *[
            (np.arange(start, start + width) % grid.shape[ax])
            for ax, (start, width) in enumerate(sel)
        ]
    )
    grid[idx] = True


def cmd_volume(cfg):
    p = cfg.params
    model = p.get("space", "abelian")
    if model == "heisenberg":
        space = quasimetric.heisenberg_space()
        v = _parse_vec(p.get("v", "1"))
    else:
        v = _parse_vec(p.get("v", "1,2"))
        space = quasimetric.abelian_space(len(v))
    radii = np.geomspace(
        float(p.get("r_min", 1e-2)), float(p.get("r_max", 1e2)),
        int(p.get("n_radii", 9)),
    )
    mode = p.get("mode", "closed")
    vols = [
        quasimetric.ball_volume(space, v, float(R), mode=mode, seed=cfg.seed)
        for R in radii
    ]
    slope = float(np.polyfit(np.log(radii), np.log(vols), 1)[0])
    q = quasimetric.homogeneous_dimension(space, v)
    chash = config_hash("volume", cfg)
    rows = [
        [cfg.seed, chash, float(R), float(vol), slope, q]
        for R, vol in zip(radii, vols)
    ]
    _write_csv(
        cfg.out or "volume.csv",
        ["seed", "config_hash", "radius", "volume", "fit_slope",
         "homogeneous_dim"],
        rows,
    )
    return 0


def cmd_ps(cfg):
    system = _load_system(cfg)
    _require_valid(system)
    p = cfg.params
    max_len = int(p.get("max_len", 8))
    phi = _parse_vec(p.get("phi", ",".join(["1"] * system.r)))
    data = growth.word_data(system, max_len)
    if "s" in p:
        s = float(p["s"])
    else:
        s = growth.delta_phi(system, phi, max_len, data=data).delta + 0.01
    nu = growth.patterson_atoms(system, phi, s, max_len, data=data)
    atoms = [
        {"xi": [float(t) for t in nu.thetas[i]], "w": float(nu.weights[i])}
        for i in range(len(nu.weights))
    ]
    _write_json(cfg.out or "atoms.json", atoms)
    return 0


def cmd_tangent(cfg):
    system = _load_system(cfg)
    _require_valid(system)
    p = cfg.params
    v = _parse_vec(p.get("v", ",".join(["1"] * system.r)))
    max_len = int(p.get("max_len", 7))
    est = growth.psi_tangent(system, v, max_len)
    payload = {
        "psi_gamma": est.value,
        "phi_v": [float(c) for c in est.form],
        "residuals": {
            "grid_values": [float(x) for x in est.grid_values],
        },
        "seed": cfg.seed,
        "config_hash": config_hash(
            "tangent", cfg, schottky.system_to_dict(system)
        ),
    }
    _write_json(cfg.out or "tangent.json", payload)
    return 0


def cmd_recur(cfg):
    system = _load_system(cfg)
    _require_valid(system)
    p = cfg.params
    v = _parse_vec(p.get("v", ",".join(["1"] * system.r)))
    horizon = float(p.get("horizon", 20.0))
    threshold = float(p.get("threshold", 0.5))
    w = int(p.get("W", 8))
    x = dynamics.OrbitPoint(product.identity(system.r), system)
    scan = dynamics.recurrence_scan(x, v, horizon, threshold, w)
    chash = config_hash("recur", cfg, schottky.system_to_dict(system))
    rows = [
        [cfg.seed, chash, float(t), float(d), int(d <= threshold),
         scan.verdict]
        for t, d in zip(scan.times, scan.displacements)
    ]
    _write_csv(
        cfg.out or "recur.csv",
        ["seed", "config_hash", "t", "displacement", "is_return", "verdict"],
        rows,
    )
    return 0


def cmd_scenery(cfg):
    system = _load_system(cfg)
    _require_valid(system)
    p = cfg.params
    v = _parse_vec(p.get("v", ",".join(["1"] * system.r)))
    horizon = float(p.get("horizon", 20.0))
    eps = float(p.get("eps", 0.05))
    w = int(p.get("W", 8))
    x = dynamics.OrbitPoint(product.identity(system.r), system)
    elems = dynamics.scenery_sample(x, v, horizon, eps, w)
    chash = config_hash("scenery", cfg, schottky.system_to_dict(system))
    rows = []
    for el in elems:
        lam = ";".join(fmt(float(c)) for c in el.lam) if el.lam is not None \
            else ""
        rows.append(
            [cfg.seed, chash, el.t,
             "".join(str(l) + "." for l in el.word), el.defect,
             int(el.flags_transverse), lam]
        )
    _write_csv(
        cfg.out or "scenery.csv",
        ["seed", "config_hash", "t", "word", "defect", "transverse",
         "lambda"],
        rows,
    )
    return 0


def cmd_dichotomy(cfg):
    p = cfg.params
    r_values = [int(x) for x in str(p.get("r", "2,3,4,5")).split(",")]
    steps = int(float(p.get("steps", 1e5)))
    trials = int(p.get("trials", 200))
    rho = float(p.get("rho", 1.0))
    table = dynamics.dichotomy_experiment(
        r_values, n_steps=steps, trials=trials, rho=rho, seed=cfg.seed,
        threads=_thread_budget(),
    )
    chash = config_hash("dichotomy", cfg)
    rows = [
        [rec["r"], rec["trial"], rec["returns"],
         rec["min_late_distance"], rec["growth_exponent"], cfg.seed, chash]
        for rec in table.as_records()
    ]
    _write_csv(
        cfg.out or "dichotomy.csv",
        ["r", "trial", "returns", "min_late_distance", "growth_exponent",
         "seed", "config_hash"],
        rows,
    )
    return 0


COMMANDS = {
    "validate": cmd_validate,
    "cone": cmd_cone,
    "cover": cmd_cover,
    "maximal": cmd_maximal,
    "volume": cmd_volume,
    "ps": cmd_ps,
    "tangent": cmd_tangent,
    "recur": cmd_recur,
    "scenery": cmd_scenery,
    "dichotomy": cmd_dichotomy,
}

_FLAG_PARAMS = [
    ("--v", "v", str),
    ("--max-len", "max_len", int),
    ("--horizon", "horizon", float),
    ("--threshold", "threshold", float),
    ("--W", "W", int),
    ("--trials", "trials", int),
    ("--steps", "steps", str),
    ("--r", "r", str),
    ("--phi", "phi", str),
    ("--s", "s", float),
    ("--n", "n", int),
    ("--configs", "configs", int),
    ("--resolution", "resolution", int),
    ("--space", "space", str),
    ("--mode", "mode", str),
    ("--eps", "eps", float),
    ("--rho", "rho", float),
]


def build_parser():
    parser = argparse.ArgumentParser(
        prog="horolab",
        description="Numerical laboratory for horospherical dynamics "
        "on rank-one products",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cp = sub.add_parser(name)
        cp.add_argument("--config", help="LabConfig JSON file")
        cp.add_argument("--system", help="system JSON file")
        cp.add_argument("--seed", type=int, default=None)
        cp.add_argument("--out", help="output path")
        for flag, dest, typ in _FLAG_PARAMS:
            cp.add_argument(flag, dest=f"param_{dest}", type=typ,
                            default=None)
    return parser


def run(command, cfg):
    """Dispatch a parsed configuration; returns the process exit code."""
    start = time.time()
    try:
        code = COMMANDS[command](cfg)
    except ConfigError as exc:
        print(f"horolab: config error: {exc}", file=sys.stderr)
        return 2
    except PingPongError as exc:
        print(f"horolab: validation failure: {exc}", file=sys.stderr)
        return 4
    except HorolabError as exc:
        print(f"horolab: numerical failure: {exc}", file=sys.stderr)
        return 3
    record = {
        "experiment": command,
        "config_hash": config_hash(command, cfg),
        "parameters": cfg.params,
        "seed": cfg.seed,
        "wall_time_s": round(time.time() - start, 3),
    }
    print(json.dumps(record, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config:
            with open(args.config, "r", encoding="utf-8") as fh:
                cfg = parse_config(fh.read())
        else:
            cfg = LabConfig()
        if args.system:
            cfg.system = args.system
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out:
            cfg.out = args.out
        for _, dest, _ in _FLAG_PARAMS:
            val = getattr(args, f"param_{dest}")
            if val is not None:
                cfg.params[dest] = val
        if cfg.system is not None and not os.path.exists(cfg.system):
            raise ConfigError(f"system file does not exist: {cfg.system}")
    except ConfigError as exc:
        print(f"horolab: config error: {exc}", file=sys.stderr)
        return 2
    return run(args.command, cfg)


if __name__ == "__main__":
    sys.exit(main())
