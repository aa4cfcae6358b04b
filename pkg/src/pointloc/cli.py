"""Command-line entry point: replay, serve, simulate, evaluate and study."""
from __future__ import annotations

import argparse
import asyncio
from dataclasses import replace
import logging
from pathlib import Path
import sys

import numpy as np

from .board import InvalidGrid, parse_grid
from .config import ConfigError, load_config
from .engine import NonMonotoneTime, PointingEngine, write_trace
from .evaluation import ConfusionMatrix, EmptyInput, OverlappingIntervals, accuracy, match_trials, render_report
from .server import PointingServer, run as run_server
from .simulator import (Participant, SessionScript, UnreachableTarget, make_participants,
                        read_truth, simulate_session, target_sequence, write_session)
from .stream import read_events, replay, serialize_event
from .study import ASYMMETRY_MODES, StudySettings, run_study, write_study

log = logging.getLogger("pointloc")


class DataError(Exception):
    """Bad input data; reported with exit status 1."""


def _grid_arg(text: str) -> tuple[int, int]:
    try:
        return parse_grid(text)
    except InvalidGrid as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _engine(cfg, grid=None, trace=False) -> PointingEngine:
    rows, cols = grid or (cfg.rows, cfg.cols)
    return PointingEngine(cfg.board, cfg.grid(rows, cols), cfg.engine, cfg.sensor_to_world, trace=trace)


def cmd_replay(args, cfg) -> int:
    engine = _engine(cfg, args.grid, trace=args.trace is not None)
    out = open(args.output, "w", encoding="utf-8") if args.output else sys.stdout
    try:
        for frame in replay(args.input, args.speed):
            for ev in engine.step(frame):
                out.write(serialize_event(ev) + "\n")
    except OSError as e:
        raise DataError(f"{args.input}: {e.strerror or e}") from None
    finally:
        if out is not sys.stdout:
            out.close()
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            write_trace(engine.trace, fh)
    if engine.rejected:
        log.info("%d samples had no forward intersection with the board", engine.rejected)
    return 0


def cmd_serve(args, cfg) -> int:
    server = PointingServer(lambda: _engine(cfg, args.grid), args.host or cfg.io.host,
                            cfg.io.ingest_port if args.ingest_port is None else args.ingest_port,
                            cfg.io.events_port if args.events_port is None else args.events_port,
                            gap_reset_s=cfg.io.gap_reset_s if args.gap_reset is None else args.gap_reset)
    try:
        asyncio.run(run_server(server))
    except KeyboardInterrupt:
        pass
    except OSError as e:
        raise DataError(f"cannot bind: {e.strerror or e}") from None
    log.info("served %d frames, %d malformed lines, %d events", server.frames, server.malformed, server.events)
    return 0


def cmd_simulate(args, cfg) -> int:
    rows, cols = args.grid or (cfg.rows, cfg.cols)
    grid = cfg.grid(rows, cols)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    noise = cfg.noise
    if args.sigma is not None:
        noise = replace(noise, jitter_sigma_mm=args.sigma)
    people = make_participants(args.participants, args.seed) if args.participants > 1 else [Participant()]
    per_cell = cfg.trials_per_cell if args.trials_per_cell is None else args.trials_per_cell
    for p, person in enumerate(people):
        seed = args.seed + p
        script = SessionScript(grid, target_sequence(grid, per_cell * grid.n_cells, np.random.default_rng(seed)),
                               cfg.hold_s, args.arm)
        try:
            frames, truth = simulate_session(person, script, replace(noise, seed=seed), cfg.scene)
        except UnreachableTarget as e:
            raise DataError(f"participant {p + 1}: {e}") from None
        write_session(frames, truth, out / f"frames_p{p + 1:02d}.ndjson", out / f"truth_p{p + 1:02d}.ndjson")
        log.info("participant %d: %d frames, %d targets", p + 1, len(frames), len(truth))
    return 0


def cmd_evaluate(args, cfg) -> int:
    if len(args.events) != len(args.truth):
        raise DataError("--events and --truth need the same number of files")
    rows, cols = args.grid or (cfg.rows, cfg.cols)
    grid = cfg.grid(rows, cols)
    records = []
    for ev_path, gt_path in zip(args.events, args.truth):
        try:
            events = read_events(ev_path)
            truth = read_truth(gt_path)
            records.extend(match_trials(events, truth))
        except OSError as e:
            raise DataError(f"{e.filename}: {e.strerror}") from None
        except OverlappingIntervals as e:
            raise DataError(f"{gt_path}: {e}") from None
        except ValueError as e:  # messages already name file:line
            raise DataError(str(e)) from None
    try:
        matrix = ConfusionMatrix.from_records(records, grid.cell_ids)
        text, csv_text = render_report(matrix, records, title=f"{grid.label} grid")
    except (EmptyInput, ValueError) as e:
        raise DataError(str(e)) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.txt").write_text(text, encoding="utf-8")
    (out / "report.csv").write_text(csv_text, encoding="utf-8")
    sys.stdout.write(text)
    acc = accuracy(records)
    if args.min_accuracy is not None and acc < args.min_accuracy:
        log.error("accuracy %.2f %% below the %.2f %% gate", acc, args.min_accuracy)
        return 1
    return 0


def cmd_study(args, cfg) -> int:
    settings = StudySettings(sigma=args.sigma, trials=args.trials, participants=args.participants,
                             hold_s=cfg.hold_s, asymmetry=args.asymmetry,
                             noise=cfg.noise, engine=cfg.engine)
    results = run_study(settings, args.seed, cfg.scene)
    summary = write_study(results, args.out, settings)
    sys.stdout.write(summary.read_text(encoding="utf-8"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pointloc", description="Pointing-gesture localisation on a gridded board.")
    p.add_argument("--config", help="run configuration JSON (default: $POINTLOC_CONFIG or built-in)")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("replay", help="run the engine over a recorded frame file")
    r.add_argument("--input", required=True)
    r.add_argument("--output", help="event file (default: stdout)")
    r.add_argument("--trace", help="write t, r, drdt, phase as CSV")
    r.add_argument("--grid", type=_grid_arg, help="RxC (default: from config)")
    r.add_argument("--speed", type=float, default=0.0, help="0 = as fast as possible, 1 = real time")
    r.set_defaults(func=cmd_replay)

    s = sub.add_parser("serve", help="ingest frames over TCP and publish events")
    s.add_argument("--ingest-port", type=int)
    s.add_argument("--events-port", type=int)
    s.add_argument("--host")
    s.add_argument("--grid", type=_grid_arg, help="RxC (default: from config)")
    s.add_argument("--gap-reset", type=float, help="seconds without frames before a stream is reset")
    s.set_defaults(func=cmd_serve)

    m = sub.add_parser("simulate", help="generate synthetic frame streams with ground truth")
    m.add_argument("--participants", type=int, default=1)
    m.add_argument("--grid", type=_grid_arg)
    m.add_argument("--sigma", type=float, help="joint jitter in mm")
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--arm", choices=("left", "right"), default="right")
    m.add_argument("--trials-per-cell", type=int)
    m.add_argument("--out", required=True)
    m.set_defaults(func=cmd_simulate)

    e = sub.add_parser("evaluate", help="score events against ground truth")
    e.add_argument("--events", nargs="+", required=True)
    e.add_argument("--truth", nargs="+", required=True)
    e.add_argument("--grid", type=_grid_arg)
    e.add_argument("--min-accuracy", type=float)
    e.add_argument("--out", default=".")
    e.set_defaults(func=cmd_evaluate)

    st = sub.add_parser("study", help="simulate the four arm x grid conditions")
    st.add_argument("--seed", type=int, default=0)
    st.add_argument("--out", required=True)
    st.add_argument("--sigma", type=float, default=15.0)
    st.add_argument("--trials", type=int, default=500, help="trials per condition")
    st.add_argument("--participants", type=int, default=25)
    st.add_argument("--asymmetry", choices=ASYMMETRY_MODES, default="angular")
    st.set_defaults(func=cmd_study)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = load_config(args.config)
        return args.func(args, cfg)
    except (ConfigError, DataError, NonMonotoneTime) as e:
        print(f"pointloc: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
