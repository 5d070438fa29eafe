"""Command-line interface: ``gtdyn <subcommand> [--config run.json] [flags]``.

Flags override values from the JSON config. Outputs are CSV, JSON and
JSON-lines only. Exit codes: 0 ok, 1 verification failure, 2 invalid input,
3 resource limit (coefficient window or box size).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import evolve, generators, links, toeplitz, verify
from .signatures import GTPattern, SignatureBox, enumerate_box, format_signature, parse_signature
from .voiculescu import DomainError, OmegaPoint, WindowCapError, validate_q_case

MAX_BOX_STATES = 20_000

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_RESOURCE = 0, 1, 2, 3


class ConfigError(ValueError):
    pass


class ResourceError(RuntimeError):
    pass


@dataclass
class RunConfig:
    omega: OmegaPoint = field(default_factory=OmegaPoint)
    N: int = 1
    q: Any = None  # None = classical, float or Fraction in (0,1)
    box: tuple[int, int] = (-2, 2)
    times: tuple[float, ...] = (1.0,)
    steps: int = 1
    seed: int | None = None
    mode: str = "float"
    out: Path = Path("out")
    route: str = "determinantal"
    paths: int = 1
    start: tuple[int, ...] | None = None
    initial: str | None = None
    fusion_span: int = 2
    tv_samples: int = 0
    only: tuple[str, ...] = ()
    corrupt: bool = False
    workers: int = 1

    @property
    def classical(self) -> bool:
        return self.q is None

    def qfloat(self) -> float | None:
        return None if self.q is None else float(self.q)

    def to_json(self) -> dict:
        return {
            "omega": self.omega.to_dict(),
            "N": self.N,
            "q": "classical" if self.q is None else str(self.q),
            "box": list(self.box),
            "times": list(self.times),
            "steps": self.steps,
            "seed": self.seed,
            "mode": self.mode,
            "route": self.route,
        }


def _parse_q(value, mode: str):
    if value is None or value == "classical" or value == 1 or value == "1":
        return None
    if mode == "rational":
        q = Fraction(str(value))
    else:
        q = float(Fraction(str(value))) if isinstance(value, str) and "/" in value else float(value)
    if not 0 < q < 1:
        raise ConfigError(f"q must be 'classical' or lie in (0,1), got {value}")
    return q


def _parse_box(value) -> tuple[int, int]:
    if isinstance(value, str):
        value = [int(v) for v in value.split(",")]
    lo, hi = (int(v) for v in value)
    if lo > hi:
        raise ConfigError(f"box needs lo <= hi, got ({lo}, {hi})")
    return lo, hi


def _parse_times(value) -> tuple[float, ...]:
    if isinstance(value, str):
        value = [float(v) for v in value.split(",")]
    elif isinstance(value, (int, float)):
        value = [value]
    times = tuple(float(v) for v in value)
    if any(t < 0 for t in times):
        raise ConfigError(f"times must be nonnegative, got {times}")
    return times


def load_config(path: str | None, overrides: dict) -> RunConfig:
    """Merge the JSON file with command-line overrides and validate everything up front."""
    data: dict = {}
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    data.update({k: v for k, v in overrides.items() if v is not None})
    known = set(RunConfig.__dataclass_fields__)
    extra = set(data) - known
    if extra:
        raise ConfigError(f"unknown config keys: {sorted(extra)}")
    cfg = RunConfig()
    cfg.mode = data.get("mode", "float")
    if cfg.mode not in ("float", "rational"):
        raise ConfigError(f"mode must be float or rational, got {cfg.mode}")
    om = data.get("omega", {})
    if isinstance(om, str):
        om = json.loads(om)
    try:
        cfg.omega = OmegaPoint.from_dict(om)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid omega: {exc}") from exc
    cfg.N = int(data.get("N", 1))
    if cfg.N < 1:
        raise ConfigError("N must be >= 1")
    cfg.q = _parse_q(data.get("q"), cfg.mode)
    cfg.box = _parse_box(data.get("box", (-2, 2)))
    cfg.times = _parse_times(data.get("times", (1.0,)))
    cfg.steps = int(data.get("steps", 1))
    if cfg.steps < 0:
        raise ConfigError("steps must be nonnegative")
    cfg.seed = None if data.get("seed") is None else int(data["seed"])
    cfg.out = Path(data.get("out", "out"))
    cfg.route = data.get("route", "determinantal")
    if cfg.route not in ("determinantal", "fusion", "both"):
        raise ConfigError(f"route must be determinantal, fusion or both, got {cfg.route}")
    cfg.paths = int(data.get("paths", 1))
    if cfg.paths < 1:
        raise ConfigError("paths must be >= 1")
    start = data.get("start")
    cfg.start = None if start is None else (parse_signature(start) if isinstance(start, str) else tuple(start))
    cfg.initial = data.get("initial")
    cfg.fusion_span = int(data.get("fusion_span", 2))
    cfg.tv_samples = int(data.get("tv_samples", 0))
    only = data.get("only", ())
    cfg.only = tuple(only.split(",")) if isinstance(only, str) else tuple(only)
    cfg.corrupt = bool(data.get("corrupt", False))
    env = os.environ.get("GTDYN_WORKERS")
    cfg.workers = int(env) if env else int(data.get("workers", os.cpu_count() or 1))
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    if cfg.q is not None:
        try:
            validate_q_case(cfg.omega, cfg.N, float(cfg.q))
        except DomainError as exc:
            raise ConfigError(str(exc)) from exc
    return cfg


# ---------------------------------------------------------------------------
# writers


def _fmt(x) -> str:
    if isinstance(x, Fraction):
        return str(x)
    return repr(float(x))


def write_matrix(path: Path, rows: Sequence, cols: Sequence, entries: np.ndarray) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([""] + [format_signature(c) for c in cols])
        for r, vals in zip(rows, entries):
            w.writerow([format_signature(r)] + [_fmt(v) for v in vals])


def write_measure(path: Path, states: Sequence, probs, deficit: float | None = None) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["signature", "probability"] + (["deficit"] if deficit is not None else []))
        for s, p in zip(states, probs):
            w.writerow([format_signature(s), _fmt(p)] + ([_fmt(deficit)] if deficit is not None else []))


def read_measure(path: str) -> dict:
    out = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out[parse_signature(row["signature"])] = float(row["probability"])
    return out


def write_json(path: Path, data: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _box(cfg: RunConfig, N: int | None = None) -> SignatureBox:
    from math import comb

    N = cfg.N if N is None else N
    lo, hi = cfg.box
    size = comb(hi - lo + N, N)
    if size > MAX_BOX_STATES:
        raise ResourceError(f"box N={N} [{lo},{hi}] has {size} states, above the cap {MAX_BOX_STATES}")
    return enumerate_box(N, lo, hi)


# ---------------------------------------------------------------------------
# subcommands


def _fusion_weights(cfg: RunConfig) -> dict:
    span = cfg.fusion_span
    wbox = enumerate_box(cfg.N, -span, span)
    if cfg.classical:
        m = links.boundary_link(cfg.omega, cfg.N, wbox)
    else:
        m = generators.q2_schur_measure(cfg.omega, cfg.N, cfg.qfloat(), wbox)
    return dict(zip(wbox.states, m))


def cmd_gen(cfg: RunConfig) -> int:
    box = _box(cfg)
    out = cfg.out
    side = {**cfg.to_json(), "states": len(box)}
    kernels = {}
    if cfg.route in ("determinantal", "both"):
        kernels["determinantal"] = generators.generator(cfg.omega, cfg.N, cfg.qfloat(), box)
    if cfg.route in ("fusion", "both"):
        kernels["fusion"] = generators.generator_fusion(_fusion_weights(cfg), cfg.N, cfg.qfloat(), box, partial=True)
    for name, L in kernels.items():
        suffix = "" if cfg.route != "both" else f"_{name}"
        Q = L.transition()
        write_matrix(out / f"generator{suffix}.csv", box.states, box.states, L.entries)
        write_matrix(out / f"transition{suffix}.csv", box.states, box.states, Q.entries)
        deficits = Q.row_deficits()
        side[f"route{suffix or '_' + name}"] = {
            **{k: v for k, v in L.meta.items() if k != "omega"},
            "max_row_deficit": float(deficits.max()),
            "min_row_deficit": float(deficits.min()),
        }
    if cfg.route == "both":
        span = cfg.fusion_span
        mask = generators.fusion_complete(box.states, box, -span, span)
        diff = np.abs(kernels["determinantal"].entries - kernels["fusion"].entries)
        side["defect"] = float(diff[mask].max()) if mask.any() else None
        side["entries_compared"] = int(mask.sum())
    write_json(out / "generator.json", side)
    return EXIT_OK


def cmd_link(cfg: RunConfig) -> int:
    if cfg.N < 2:
        raise ConfigError("link needs N >= 2")
    rb, cb = _box(cfg), _box(cfg, cfg.N - 1)
    exact = cfg.mode == "rational"
    L = links.link(cfg.N, cfg.q, rb, cb, exact=exact)
    write_matrix(cfg.out / "link.csv", rb.states, cb.states, L.entries)
    sums = L.entries.sum(axis=1)
    side = {**cfg.to_json(), "exact": L.exact}
    if L.exact:
        side["exact_row_sums"] = all(s == 1 for s in sums)
    else:
        side["max_row_sum_error"] = float(np.abs(sums.astype(float) - 1).max())
    write_json(cfg.out / "link.json", side)
    return EXIT_OK


def cmd_boundary(cfg: RunConfig) -> int:
    if not cfg.classical:
        raise ConfigError("boundary kernels exist for the classical case only; use 'measure' for q < 1")
    box = _box(cfg)
    m = links.boundary_link(cfg.omega, cfg.N, box)
    write_measure(cfg.out / "boundary.csv", box.states, m)
    write_json(cfg.out / "boundary.json", {**cfg.to_json(), "mass": float(m.sum())})
    return EXIT_OK


def cmd_measure(cfg: RunConfig) -> int:
    box = _box(cfg)
    if cfg.classical:
        m = links.boundary_link(cfg.omega, cfg.N, box)
    else:
        m = generators.q2_schur_measure(cfg.omega, cfg.N, cfg.qfloat(), box)
    write_measure(cfg.out / "measure.csv", box.states, m)
    write_json(cfg.out / "measure.json", {**cfg.to_json(), "mass": float(m.sum())})
    return EXIT_OK


def _initial_vector(cfg: RunConfig, box: SignatureBox) -> np.ndarray:
    if cfg.initial:
        meas = read_measure(cfg.initial)
    elif cfg.start is not None:
        meas = {tuple(cfg.start): 1.0}
    else:
        meas = {(0,) * cfg.N: 1.0}
    vec = np.zeros(len(box))
    for lam, p in meas.items():
        if len(lam) != cfg.N or lam not in box:
            raise ConfigError(f"initial measure charges {lam}, outside the box")
        vec[box.index(lam)] += p
    return vec


def cmd_evolve(cfg: RunConfig) -> int:
    """Measures at each requested time, evolving from the previous time (sorted grid)."""
    box = _box(cfg)
    Q = generators.generator(cfg.omega, cfg.N, cfg.qfloat(), box).transition()
    vec = _initial_vector(cfg, box)
    mass0 = float(vec.sum())
    prev = 0.0
    summary = []
    for t in sorted(cfg.times):
        if t > prev:
            vec = evolve.evolve_measure(vec, evolve.semigroup_at(Q, t - prev)).probs
        prev = t
        deficit = mass0 - float(vec.sum())
        write_measure(cfg.out / f"measure_t{t:g}.csv", box.states, vec, deficit)
        summary.append({"t": t, "mass": float(vec.sum()), "deficit": deficit})
    write_json(cfg.out / "evolve.json", {**cfg.to_json(), "measures": summary})
    return EXIT_OK


def _sample_chunk(args):
    Q, start, t_end, seeds = args
    out = []
    for s in seeds:
        try:
            out.append(("ok", evolve.sample_path(Q, start, t_end, s)))
        except evolve.TruncationExitError as exc:
            out.append(("exit", exc.path))
    return out


def _ordered_map(fn, chunks, workers: int):
    if workers <= 1 or len(chunks) <= 1:
        return [fn(c) for c in chunks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, chunks))


def cmd_sample(cfg: RunConfig) -> int:
    if cfg.seed is None:
        raise ConfigError("sampling needs an explicit seed")
    box = _box(cfg)
    Q = generators.generator(cfg.omega, cfg.N, cfg.qfloat(), box).transition()
    start = tuple(cfg.start) if cfg.start is not None else (0,) * cfg.N
    if start not in box:
        raise ConfigError(f"start {start} is outside the box")
    t_end = max(cfg.times)
    seeds = evolve.spawn_seeds(cfg.seed, cfg.paths)
    size = max(1, -(-len(seeds) // cfg.workers))
    chunks = [(Q, start, t_end, seeds[i : i + size]) for i in range(0, len(seeds), size)]
    results = [r for part in _ordered_map(_sample_chunk, chunks, cfg.workers) for r in part]
    cfg.out.mkdir(parents=True, exist_ok=True)
    exits = 0
    with (cfg.out / "trajectories.jsonl").open("w") as fh:
        header = {"seed": cfg.seed, "seed_rule": "SeedSequence(seed).spawn(paths)[i]", "config": cfg.to_json()}
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for i, (status, path) in enumerate(results):
            exits += status == "exit"
            rec = {"path": i, "status": status, "points": [[t, format_signature(s)] for t, s in path]}
            fh.write(json.dumps(rec) + "\n")
    with (cfg.out / "trajectories.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["path", "time", "signature"])
        for i, (_, path) in enumerate(results):
            for t, s in path:
                w.writerow([i, repr(float(t)), format_signature(s)])
    write_json(cfg.out / "sample.json", {**cfg.to_json(), "paths": cfg.paths, "exits": exits})
    return EXIT_OK


def cmd_gt_sample(cfg: RunConfig) -> int:
    if cfg.seed is None:
        raise ConfigError("sampling needs an explicit seed")
    if cfg.classical and cfg.tv_samples:
        raise ConfigError("the exact P_N comparison needs q in (0,1)")
    state = GTPattern.constant(cfg.N, 0) if cfg.start is None else _pattern_from_top(cfg.start)
    rng = np.random.default_rng(cfg.seed)
    cfg.out.mkdir(parents=True, exist_ok=True)
    with (cfg.out / "gt_trajectory.jsonl").open("w") as fh:
        fh.write(json.dumps({"seed": cfg.seed, "config": cfg.to_json()}, sort_keys=True) + "\n")
        fh.write(json.dumps(state.to_lists()) + "\n")
        cur = state
        for _ in range(cfg.steps):
            cur = toeplitz.multilevel_step(cur, cfg.omega, cfg.qfloat(), rng)
            fh.write(json.dumps(cur.to_lists()) + "\n")
    if cfg.tv_samples:
        row = toeplitz.pn_row(state, cfg.omega, cfg.qfloat())
        counts: dict = {}
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(1)[0])
        for _ in range(cfg.tv_samples):
            y = toeplitz.multilevel_step(state, cfg.omega, cfg.qfloat(), rng).levels
            counts[y] = counts.get(y, 0) + 1
        keys = sorted(set(row) | set(counts), reverse=True)
        tv = 0.5 * sum(abs(counts.get(k, 0) / cfg.tv_samples - row.get(k, 0.0)) for k in keys)
        table = [
            {"pattern": [list(l) for l in k], "exact": row.get(k, 0.0), "empirical": counts.get(k, 0) / cfg.tv_samples}
            for k in keys
        ]
        write_json(cfg.out / "tv.json", {"samples": cfg.tv_samples, "tv": tv, "threshold": 0.01, "law": table})
    return EXIT_OK


def _pattern_from_top(top) -> GTPattern:
    """The pattern whose lower levels are the largest interlacing choices (lam_1..lam_{n-1})."""
    levels = [tuple(top)]
    while len(levels[-1]) > 1:
        levels.append(levels[-1][:-1])
    return GTPattern(tuple(reversed(levels)))


def cmd_toeplitz(cfg: RunConfig) -> int:
    if cfg.classical:
        raise ConfigError("Toeplitz kernels need q in (0,1)")
    q = cfg.qfloat()
    box = _box(cfg)
    X = toeplitz.xconfigs(box.states)
    T = toeplitz.toeplitz_T_matrix(toeplitz.psi_spec(cfg.omega, cfg.N, q), X, X)
    G = generators.generator(cfg.omega, cfg.N, q, box).transition().entries
    write_matrix(cfg.out / "toeplitz_T.csv", box.states, box.states, T)
    report = {**cfg.to_json(), "T_vs_generator": float(np.abs(T - G).max())}
    if cfg.N >= 2:
        cb = _box(cfg, cfg.N - 1)
        Y = toeplitz.xconfigs(cb.states)
        Td = toeplitz.toeplitz_Tdown_matrix(toeplitz.link_spec(cfg.N, q), X, Y)
        L = links.link_uqn(cfg.N, q, box, cb).entries
        D = toeplitz.delta_kernel(cfg.N, cfg.omega, q, box, cb)
        write_matrix(cfg.out / "toeplitz_Tdown.csv", box.states, cb.states, Td)
        write_matrix(cfg.out / "delta_product.csv", box.states, cb.states, D.product)
        write_matrix(cfg.out / "delta_direct.csv", box.states, cb.states, D.direct)
        report["Tdown_vs_link"] = float(np.abs(Td - L).max())
        report["delta_two_routes"] = D.defect
    write_json(cfg.out / "toeplitz.json", report)
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    report = verify.run_all(list(cfg.only) or None, corrupt=cfg.corrupt)
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if cfg.out and str(cfg.out) != "-":
        cfg.out.mkdir(parents=True, exist_ok=True)
        (cfg.out / "verify.json").write_text(text)
    for c in report["criteria"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['criterion']} ({c['seconds']}s)")
    return EXIT_OK if report["passed"] else EXIT_VERIFY


COMMANDS = {
    "gen": cmd_gen,
    "link": cmd_link,
    "boundary": cmd_boundary,
    "measure": cmd_measure,
    "evolve": cmd_evolve,
    "sample": cmd_sample,
    "gt-sample": cmd_gt_sample,
    "toeplitz": cmd_toeplitz,
    "verify": cmd_verify,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gtdyn", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", help="JSON run configuration")
    p.add_argument("--omega", help='JSON object, e.g. \'{"beta_plus": [0.3]}\'')
    p.add_argument("--N", type=int)
    p.add_argument("--q", help="'classical', a float, or a fraction such as 1/2")
    p.add_argument("--box", nargs=2, type=int, metavar=("LO", "HI"), help="part range of the box")
    p.add_argument("--times", help="comma-separated times")
    p.add_argument("--steps", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=["float", "rational"])
    p.add_argument("--out")
    p.add_argument("--route", choices=["determinantal", "fusion", "both"])
    p.add_argument("--paths", type=int)
    p.add_argument("--start", help="signature text such as 1,0 (write --start=-1,-2 for a leading minus)")
    p.add_argument("--initial", help="measure CSV with columns signature,probability")
    p.add_argument("--fusion-span", dest="fusion_span", type=int)
    p.add_argument("--tv-samples", dest="tv_samples", type=int)
    p.add_argument("--only", help="comma-separated criterion numbers or names")
    p.add_argument("--corrupt", action="store_true", default=None, help="negate one coefficient (fault injection)")
    p.add_argument("--workers", type=int)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        cfg = load_config(args.config, overrides)
        return COMMANDS[args.command](cfg)
    except (WindowCapError, ResourceError, MemoryError) as exc:
        print(f"gtdyn: resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ConfigError, DomainError, ValueError, KeyError) as exc:
        print(f"gtdyn: invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
