"""``eegchair`` command line.

Subcommands: synth, train, eval, compare, stream, simulate, bench.
Exit status: 0 ok, 2 usage/config, 3 data/schema, 4 training, 5 I/O.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence

from .classify import KINDS, load_model, save_model
from .config import ConfigError, RunConfig, apply_overrides, load_config
from .errors import EegChairError, ModelFileError, SchemaError, TrainingError, ValidationError
from .runtime import Pipeline, parse_sample_lines, run_stream, tcp_lines
from .signal_io import (CHANNELS, Command, generate_synthetic_session, load_session_csv, replay_frames,
                        save_session_csv)
from .vehicle import (Rect, VehicleState, WorldSpec, encode_command, run_episode,
                      write_episode_log)
from .workflow import (compare_on_session, evaluate_on_session, render_model_report,
                       train_from_session)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_TRAIN, EXIT_IO = 0, 2, 3, 4, 5


def _write_report(prefix: Optional[str], text: str, csv_text: str, matrix_csv: str = "") -> None:
    if not prefix:
        return
    Path(f"{prefix}.txt").write_text(text, encoding="utf-8")
    Path(f"{prefix}.csv").write_text(csv_text, encoding="utf-8")
    if matrix_csv:
        Path(f"{prefix}.confusion.csv").write_text(matrix_csv, encoding="utf-8")


def cmd_synth(args, cfg: RunConfig) -> int:
    if args.trials_per_command is not None:
        cfg.set("signal_io", "trials_per_command", args.trials_per_command)
    if args.commands:
        cfg.set("signal_io", "commands", args.commands)
    session = generate_synthetic_session(cfg.synth_spec())
    save_session_csv(session, args.out)
    counts = ", ".join(f"{c.value}={n}" for c, n in session.counts().items() if n)
    print(f"wrote {len(session)} trials ({counts}) to {args.out}")
    return EXIT_OK


def cmd_train(args, cfg: RunConfig) -> int:
    session = load_session_csv(args.session)
    res = train_from_session(session, args.classifier, cfg.seed, cfg.k(), cfg.train_fraction(),
                             cfg.preprocess(), cfg.feature_mode(),
                             cfg.classifier_params()[args.classifier])
    save_model(res.model, args.model)
    text = render_model_report(res.model, res.confusion, res.n_rejected)
    _write_report(args.report, text, res.confusion.table_csv(), res.confusion.matrix_csv())
    sys.stdout.write(text)
    return EXIT_OK


def cmd_eval(args, cfg: RunConfig) -> int:
    model = load_model(args.model)
    session = load_session_csv(args.session)
    res = evaluate_on_session(model, session)
    text = render_model_report(model, res.confusion, res.n_rejected)
    _write_report(args.report, text, res.confusion.table_csv(), res.confusion.matrix_csv())
    sys.stdout.write(text)
    return EXIT_OK


def cmd_compare(args, cfg: RunConfig) -> int:
    session = load_session_csv(args.session)
    report = compare_on_session(session, cfg.seed, cfg.k(), cfg.train_fraction(), cfg.preprocess(),
                                cfg.feature_mode(), cfg.classifier_params())
    text = report.render()
    _write_report(args.report, text, report.to_csv())
    sys.stdout.write(text)
    return EXIT_OK


def _live_lines(args):
    if args.port is None:
        return sys.stdin

    def ready(port):
        print(f"listening on 127.0.0.1:{port}", file=sys.stderr, flush=True)

    return tcp_lines(args.port, ready=ready)


def cmd_stream(args, cfg: RunConfig) -> int:
    model = load_model(args.model)
    pipeline = Pipeline(model, cfg.pipeline())
    lines = _live_lines(args)
    sink = open(args.wire_out, "wb") if args.wire_out else None
    try:
        run_stream(pipeline, lines, sys.stdout, sink)
    finally:
        if sink is not None:
            sink.close()
    return EXIT_OK


def _world(cfg: RunConfig) -> WorldSpec:
    half = float(cfg.get("vehicle", "world_half_size", 5.0))
    return WorldSpec(Rect(-half, -half, half, half), (),
                     float(cfg.get("vehicle", "sensor_range", 4.0)))


def cmd_simulate(args, cfg: RunConfig) -> int:
    model = load_model(args.model)
    pcfg = cfg.pipeline()
    safety = cfg.safety()
    world = _world(cfg)
    dt = float(cfg.get("vehicle", "dt", 0.1))
    if args.session:
        session = load_session_csv(args.session)
        channels = session.channels
        frames = replay_frames(session, pcfg.hop_samples)
    else:
        channels = CHANNELS
        frames = parse_sample_lines(_live_lines(args), len(channels), pcfg.hop_samples)
    pipeline = Pipeline(model, pcfg, channels)
    state = VehicleState()
    requested = Command.STOP
    rows = []
    wire = bytearray()
    seq = 0
    for frame in frames:
        for d in pipeline.push(frame):
            if not d.suppressed_by_debounce:
                requested = d.command
                wire += encode_command(d.command, seq)
                seq = (seq + 1) % 256
        # hold the latest released command for the frame's duration
        n_steps = int(round(frame.shape[1] / pcfg.sample_rate / dt))
        ep = run_episode(state, [requested] * n_steps, world, safety, dt)
        state = ep.final
        rows += ep.log
    with open(args.log, "w", newline="", encoding="utf-8") as fh:
        write_episode_log(rows, fh)
    if args.wire_out:
        Path(args.wire_out).write_bytes(bytes(wire))
    last = rows[-1].gated_cmd.value if rows else "none"
    print(f"{len(rows)} steps; final pose x={state.x:.3f} y={state.y:.3f} "
          f"heading={state.heading:.3f}; last executed={last}")
    return EXIT_OK


def cmd_bench(args, cfg: RunConfig) -> int:
    model = load_model(args.model)
    if args.session:
        session = load_session_csv(args.session)
    else:
        session = generate_synthetic_session(cfg.synth_spec())
    pipeline = Pipeline(model, cfg.pipeline(), session.channels)
    for frame in replay_frames(session, args.chunk):
        pipeline.push(frame)
    st = pipeline.stats()
    print(f"windows_processed={st.windows_processed} decisions_emitted={st.decisions_emitted}")
    print(f"latency_ms p50={st.latency_p50_ms:.3f} p95={st.latency_p95_ms:.3f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="config file (default: $EEGCHAIR_CONFIG)")
    common.add_argument("--seed", type=int, help="overrides [cli] seed")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override one config value (repeatable)")

    p = argparse.ArgumentParser(prog="eegchair", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="write a synthetic session CSV")
    s.add_argument("--out", required=True)
    s.add_argument("--trials-per-command", type=int)
    s.add_argument("--commands", help="comma-separated subset, e.g. FORWARD,STOP")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train", parents=[common], help="train one classifier on a session")
    s.add_argument("--session", required=True)
    s.add_argument("--classifier", choices=KINDS, default="svm")
    s.add_argument("--model", required=True, help="output model file")
    s.add_argument("--report", help="report path prefix (.txt/.csv/.confusion.csv)")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", parents=[common], help="per-command accuracy table")
    s.add_argument("--model", required=True)
    s.add_argument("--session", required=True)
    s.add_argument("--report")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("compare", parents=[common], help="four-classifier comparison")
    s.add_argument("--session", required=True)
    s.add_argument("--report")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("stream", parents=[common], help="classify a live sample stream")
    s.add_argument("--model", required=True)
    s.add_argument("--port", type=int, help="listen on this TCP port instead of stdin")
    s.add_argument("--wire-out", help="append wire frames to this file")
    s.set_defaults(func=cmd_stream)

    s = sub.add_parser("simulate", parents=[common], help="drive the simulator from a session")
    s.add_argument("--model", required=True)
    s.add_argument("--session", help="replay this session (default: live records on stdin)")
    s.add_argument("--port", type=int, help="read live records from this TCP port")
    s.add_argument("--log", required=True, help="episode log CSV")
    s.add_argument("--wire-out")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("bench", parents=[common], help="per-window latency statistics")
    s.add_argument("--model", required=True)
    s.add_argument("--session", help="defaults to a synthetic session")
    s.add_argument("--chunk", type=int, default=128)
    s.set_defaults(func=cmd_bench)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = apply_overrides(load_config(args.config), args.set)
        if args.seed is not None:
            cfg.set("cli", "seed", args.seed)
        return args.func(args, cfg)
    except ConfigError as exc:
        print(f"eegchair: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingError as exc:
        print(f"eegchair: training error: {exc}", file=sys.stderr)
        return EXIT_TRAIN
    except (SchemaError, ModelFileError, ValidationError, EegChairError) as exc:
        print(f"eegchair: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"eegchair: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
