"""Command-line front end.

Subcommands:
  gen     build synthetic trace files from a trace-spec config
  run     execute the multi-node window protocol over trace files
  verify  run the self-check suites (worked example, property sweeps)

Config files are plain `key = value` lines with `#` comments. Keys for
`run`: r, l, s, u_hat, v_hat, le_len, theta, g, seed, nodes, mode,
window_seconds, trace_dir, out, oracle, ftr_gate. Keys for `gen`:
planted ("addr:card;addr:card", dotted-quad or integer addresses),
planted_count/planted_min_card/planted_max_card (random planting),
background_hosts, zipf_s, max_background_card, duplication, theta,
straddle, nodes, partition, weights, seed, format.
"""

from __future__ import annotations

import argparse
import dataclasses
import glob
import json
import os
import sys

import numpy as np

from .coordinator import MODE_NAIVE, MODE_READ, run_window
from .estimators import DetectorParams
from .harness import (
    TraceSpec,
    generate_trace,
    oracle_evaluate,
    partition_stream,
    true_super_points,
)
from .node import (
    ObservationNode,
    Trace,
    dotted,
    parse_dotted,
    read_trace_binary,
    read_trace_csv,
    write_trace_binary,
    write_trace_csv,
)
from .recube import RECubeConfig

MODE_SINGLE = "single_node"

DEFAULTS = {
    "r": 6,
    "l": (14, 14, 14),
    "s": (0, 10, 20),
    "u_hat": 5,
    "v_hat": 2**15,
    "le_len": 2**14,
    "theta": 1024,
    "g": 8,
    "seed": 1,
    "nodes": 1,
    "mode": MODE_READ,
    "window_seconds": 300,
    "oracle": False,
    "ftr_gate": 100.0,
}


def load_config(path: str) -> dict:
    """Parse a `key = value` config file."""
    values: dict = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value, got {raw!r}")
            key, _, text = line.partition("=")
            values[key.strip()] = text.strip()
    return values


def _parse_int_tuple(text: str) -> tuple[int, ...]:
    return tuple(int(tok) for tok in text.replace("(", "").replace(")", "").split(",") if tok.strip())


def _parse_bool(text: str) -> bool:
    return text.lower() in ("1", "true", "yes", "on")


def _parse_address(text: str) -> int:
    text = text.strip()
    if "." in text:
        return parse_dotted(text)
    return int(text, 0)


@dataclasses.dataclass
class RunConfig:
    r: int = DEFAULTS["r"]
    l: tuple[int, ...] = DEFAULTS["l"]
    s: tuple[int, ...] = DEFAULTS["s"]
    u_hat: int = DEFAULTS["u_hat"]
    v_hat: int = DEFAULTS["v_hat"]
    le_len: int = DEFAULTS["le_len"]
    theta: int = DEFAULTS["theta"]
    g: int = DEFAULTS["g"]
    seed: int = DEFAULTS["seed"]
    nodes: int = DEFAULTS["nodes"]
    mode: str = DEFAULTS["mode"]
    window_seconds: int = DEFAULTS["window_seconds"]
    trace_dir: str = "."
    out: str | None = None
    oracle: bool = DEFAULTS["oracle"]
    ftr_gate: float = DEFAULTS["ftr_gate"]

    @classmethod
    def from_file(cls, path: str | None, overrides: dict) -> "RunConfig":
        values = load_config(path) if path else {}
        cfg = cls()
        parsers = {
            "l": _parse_int_tuple,
            "s": _parse_int_tuple,
            "mode": str,
            "trace_dir": str,
            "out": str,
            "oracle": _parse_bool,
            "ftr_gate": float,
        }
        for key, text in values.items():
            if not hasattr(cfg, key):
                raise ValueError(f"unknown config key {key!r}")
            parser = parsers.get(key, int)
            setattr(cfg, key, parser(text))
        for key, value in overrides.items():
            if value is not None:
                setattr(cfg, key, value)
        return cfg

    def cube_config(self) -> RECubeConfig:
        return RECubeConfig(r=self.r, l=self.l, s=self.s)

    def detector_params(self) -> DetectorParams:
        return DetectorParams(
            theta=self.theta,
            le_len=self.le_len,
            u_hat=self.u_hat,
            v_hat=self.v_hat,
            g=self.g,
        )


def parse_trace_spec(values: dict) -> TraceSpec:
    planted: list[tuple[int, int]] = []
    if "planted" in values:
        for entry in values["planted"].split(";"):
            entry = entry.strip()
            if not entry:
                continue
            addr_text, _, card_text = entry.partition(":")
            planted.append((_parse_address(addr_text), int(card_text)))
    theta = int(values.get("theta", DEFAULTS["theta"]))
    if "planted_count" in values:
        count = int(values["planted_count"])
        low = int(values.get("planted_min_card", 2 * theta))
        high = int(values.get("planted_max_card", 16 * theta))
        rng = np.random.default_rng(int(values.get("seed", 1)) ^ 0x9E37)
        addresses: set[int] = set(a for a, _ in planted)
        target = len(planted) + count
        while len(planted) < target:
            addr = int(rng.integers(0, 2**32))
            if addr in addresses:
                continue
            addresses.add(addr)
            planted.append((addr, int(rng.integers(low, high + 1))))
    return TraceSpec(
        planted=tuple(planted),
        background_hosts=int(values.get("background_hosts", 0)),
        zipf_s=float(values.get("zipf_s", 1.2)),
        max_background_card=int(values.get("max_background_card", theta // 2)),
        duplication=int(values.get("duplication", 1)),
        theta=theta,
        straddle=_parse_bool(values.get("straddle", "false")),
    )


def cmd_gen(args) -> int:
    values = load_config(args.spec)
    spec = parse_trace_spec(values)
    seed = args.seed if args.seed is not None else int(values.get("seed", 1))
    n = args.nodes if args.nodes is not None else int(values.get("nodes", 1))
    mode = args.partition or values.get("partition", "round_robin")
    weights = None
    if "weights" in values:
        weights = [float(tok) for tok in values["weights"].split(",")]
    fmt = args.format or values.get("format", "bin")

    trace = generate_trace(spec, seed)
    parts = partition_stream(trace, n, mode=mode, seed=seed, weights=weights)
    os.makedirs(args.out, exist_ok=True)
    for i, part in enumerate(parts):
        if fmt == "csv":
            path = os.path.join(args.out, f"node_{i:03d}.csv")
            write_trace_csv(path, part)
        else:
            path = os.path.join(args.out, f"node_{i:03d}.bin")
            write_trace_binary(path, part)
        print(f"wrote {path} ({len(part)} pairs)")
    print(f"total pairs: {len(trace)}")
    return 0


def _load_node_traces(cfg: RunConfig) -> tuple[list[Trace], int]:
    paths = sorted(
        glob.glob(os.path.join(cfg.trace_dir, "*.bin"))
        + glob.glob(os.path.join(cfg.trace_dir, "*.csv"))
    )
    if not paths:
        raise FileNotFoundError(f"no .bin or .csv trace files in {cfg.trace_dir}")
    traces = []
    malformed = 0
    for path in paths:
        reader = read_trace_csv if path.endswith(".csv") else read_trace_binary
        trace, bad = reader(path)
        traces.append(trace)
        malformed += bad
    if len(traces) == cfg.nodes:
        return traces, malformed
    if len(traces) == 1 and cfg.nodes > 1:
        return partition_stream(traces[0], cfg.nodes, seed=cfg.seed), malformed
    raise ValueError(
        f"found {len(traces)} trace files but nodes={cfg.nodes}; provide one "
        "file per node or a single file to auto-partition"
    )


def _split_windows(traces: list[Trace], window_seconds: int) -> list[tuple[int, list[Trace]]]:
    has_ts = any(t.ts is not None and t.ts.any() for t in traces)
    if not has_ts:
        return [(0, traces)]
    ids = sorted(
        set(
            np.unique(
                np.concatenate(
                    [t.ts // window_seconds for t in traces if t.ts is not None]
                )
            ).tolist()
        )
    )
    windows = []
    for wid in ids:
        per_node = [
            t.take(np.flatnonzero(t.ts // window_seconds == wid)) for t in traces
        ]
        windows.append((int(wid), per_node))
    return windows


def _print_summary(report, metrics) -> None:
    n = len(report.stage1_bytes)
    print(
        f"window {report.window_id} [{report.mode}]: "
        f"{report.candidates_count} candidates, "
        f"{len(report.super_points)} super points"
    )
    print(
        "  comms/node: "
        f"w={report.candidates_count}  "
        f"cube={report.stage1_total // n} B  "
        f"stage2={report.stage2_total // n} B  "
        f"stage3={report.stage3_total // n} B  "
        f"total={(report.stage1_total + report.stage2_total + report.stage3_total) // n} B  "
        f"fraction={100 * report.transmitted_fraction:.3f}%"
    )
    if metrics is not None:
        print(
            f"  oracle: N={metrics.n_true}  FPR={metrics.fpr:.2f}%  "
            f"FNR={metrics.fnr:.2f}%  FTR={metrics.ftr:.2f}%"
        )
    for sp in report.super_points[:20]:
        line = f"  super point {dotted(sp.address)}  estimate={sp.estimate:.1f}"
        if sp.saturated:
            line += " (saturated)"
        print(line)
    if len(report.super_points) > 20:
        print(f"  ... {len(report.super_points) - 20} more")


def cmd_run(args) -> int:
    overrides = {
        "trace_dir": args.trace_dir,
        "nodes": args.nodes,
        "theta": args.theta,
        "seed": args.seed,
        "mode": args.mode,
        "out": args.out,
        "oracle": args.oracle or None,
    }
    cfg = RunConfig.from_file(args.config, overrides)
    cube_cfg = cfg.cube_config()  # raises with the violated inequality
    params = cfg.detector_params()
    mode = MODE_SINGLE if cfg.mode == MODE_SINGLE else cfg.mode
    if mode not in (MODE_READ, MODE_NAIVE, MODE_SINGLE):
        raise ValueError(f"unknown mode {cfg.mode!r}")

    traces, malformed = _load_node_traces(cfg)
    if mode == MODE_SINGLE:
        traces = [Trace.concatenate(traces)]
    protocol_mode = MODE_NAIVE if mode == MODE_NAIVE else MODE_READ

    records = []
    worst_ftr = 0.0
    oracle_enabled = cfg.oracle
    for window_id, per_node in _split_windows(traces, cfg.window_seconds):
        nodes = []
        for i, trace in enumerate(per_node):
            node = ObservationNode(i, params, cube_cfg, cfg.seed, window_id)
            node.reset_window(window_id)
            node.scan_window(trace, malformed if i == 0 else 0)
            nodes.append(node)
        report = run_window(nodes, cfg.theta, protocol_mode)
        metrics = None
        if oracle_enabled:
            detected = {sp.address for sp in report.super_points}
            metrics = oracle_evaluate(per_node, cfg.theta, detected)
            if metrics is not None:
                worst_ftr = max(worst_ftr, metrics.ftr)
        _print_summary(report, metrics)
        summary = {
            "type": "summary",
            "window_id": report.window_id,
            "mode": report.mode,
            "candidates_count": report.candidates_count,
            "super_points": len(report.super_points),
            "stage1_bytes": report.stage1_bytes,
            "stage2_bytes": report.stage2_bytes,
            "stage3_bytes": report.stage3_bytes,
            "master_structure_bytes": report.master_structure_bytes,
            "transmitted_fraction": report.transmitted_fraction,
            "pairs_scanned": report.pairs_scanned,
            "malformed_skipped": report.malformed_skipped,
        }
        if metrics is not None:
            summary["metrics"] = {
                "n_true": metrics.n_true,
                "fpr": metrics.fpr,
                "fnr": metrics.fnr,
                "ftr": metrics.ftr,
            }
        records.append(summary)
        truth_set = true_super_points(per_node, cfg.theta) if oracle_enabled else None
        for sp in report.super_points:
            record = {
                "type": "super_point",
                "window_id": report.window_id,
                "address": dotted(sp.address),
                "estimate": sp.estimate,
                "saturated": sp.saturated,
            }
            if truth_set is not None:
                record["oracle_true"] = sp.address in truth_set
            records.append(record)

    if cfg.out:
        with open(cfg.out, "w") as fh:
            for record in records:
                fh.write(json.dumps(record) + "\n")
        print(f"wrote {cfg.out}")

    if oracle_enabled and worst_ftr > cfg.ftr_gate:
        print(f"FTR {worst_ftr:.2f}% exceeds gate {cfg.ftr_gate:.2f}%")
        return 1
    return 0


def cmd_verify(args) -> int:
    from .verify import run_all

    failed = False
    try:
        for name, detail in run_all(
            theorem1_instances=args.theorem1, algebra_cases=args.algebra, seed=args.seed
        ):
            print(f"PASS {name}: {detail}")
    except AssertionError as exc:
        print(f"FAIL: {exc}")
        failed = True
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="superpoint",
        description="Distributed high-cardinality host detection over IP-pair streams.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("gen", help="generate synthetic trace files")
    p_gen.add_argument("--spec", required=True, help="trace-spec config file")
    p_gen.add_argument("--out", required=True, help="output directory")
    p_gen.add_argument("--nodes", type=int)
    p_gen.add_argument("--partition", choices=["round_robin", "hash_by_pair", "skewed"])
    p_gen.add_argument("--seed", type=int)
    p_gen.add_argument("--format", choices=["bin", "csv"])
    p_gen.set_defaults(func=cmd_gen)

    p_run = sub.add_parser("run", help="run the window protocol over traces")
    p_run.add_argument("--config", help="run config file")
    p_run.add_argument("--trace-dir")
    p_run.add_argument("--nodes", type=int)
    p_run.add_argument("--theta", type=int)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--mode", choices=[MODE_READ, MODE_NAIVE, MODE_SINGLE])
    p_run.add_argument("--out", help="write line-delimited JSON report records here")
    p_run.add_argument("--oracle", action="store_true", help="score against exact truth")
    p_run.set_defaults(func=cmd_run)

    p_verify = sub.add_parser("verify", help="run the self-check suites")
    p_verify.add_argument("--theorem1", type=int, default=100)
    p_verify.add_argument("--algebra", type=int, default=500)
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
