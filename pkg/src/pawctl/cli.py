"""Command-line entry points for the whole stack."""

from __future__ import annotations

import argparse
import json
import logging
import socket
import sys
import time
from pathlib import Path

import numpy as np

log = logging.getLogger("pawctl")


def _parse_seeds(text: str) -> list:
    if ".." in text:
        lo, hi = text.split("..", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(s) for s in text.split(",") if s]


def _write_json(path, payload) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def cmd_classify(args) -> int:
    from .config import load_config
    from .corpus import evaluate_corpus

    cfg = load_config(args.config)
    report = evaluate_corpus(args.corpus, cfg.classifier,
                             noise_sigma=args.noise_sigma, seed=args.seed)
    _write_json(args.report, report)
    hand, head = report["hand"], report["head"]
    print(f"hand: {hand['correct']}/{hand['total']}  "
          f"head: {head['correct']}/{head['total']}  "
          f"latency: {report['latency_ms_per_frame']:.3f} ms/frame", file=sys.stderr)
    return 0


def cmd_bridge(args) -> int:
    from .config import load_config
    from .server import BridgeServer, send_command

    cfg = load_config(args.config)
    if args.bridge_cmd == "serve":
        port = args.port if args.port is not None else cfg.bridge.port
        server = BridgeServer(host=args.host, port=port,
                              classifier_config=cfg.classifier,
                              cooldown_ms=cfg.bridge.cooldown_ms)
        server.start()
        print(f"bridge serving on {args.host}:{server.port}", file=sys.stderr, flush=True)
        try:
            while True:
                time.sleep(0.2)
        except KeyboardInterrupt:
            pass
        finally:
            server.stop()
        return 0
    if args.bridge_cmd == "send":
        port = args.port if args.port is not None else cfg.bridge.port
        reply = send_command(args.command, host=args.host, port=port)
        if reply is not None:
            print(json.dumps(reply))
        return 0
    raise ValueError(args.bridge_cmd)


def cmd_actuate(args) -> int:
    from .bridge import parse_command_line, FrameError
    from .config import load_config
    from .actuator import Actuator, BusyError
    from .gestures import CheckpointError

    cfg = load_config(args.config)
    library = {}
    if args.checkpoint_dir:
        library = _load_gesture_library(args.checkpoint_dir, cfg)
    actuator = Actuator(geom=cfg.geometry, schedule=cfg.schedule,
                        limits=cfg.limits, gesture_library=library)

    port = args.port if args.port is not None else cfg.bridge.port
    sock = socket.create_connection((args.host, port))
    sock_file = sock.makefile("rb")
    sock.setblocking(False)

    dt = 1.0 / cfg.schedule.rate_hz
    print(f"actuator connected to {args.host}:{port}", file=sys.stderr)
    try:
        while True:
            try:
                while True:
                    data = sock.recv(65536)
                    if not data:
                        return 0
                    for raw in data.splitlines():
                        if not raw.strip():
                            continue
                        try:
                            cmd = parse_command_line(raw)
                        except FrameError:
                            continue
                        try:
                            actuator.apply_command(cmd)
                        except (BusyError, CheckpointError) as exc:
                            log.warning("dropped %s: %s", cmd.kind.value, exc)
            except BlockingIOError:
                pass
            sample = actuator.tick()
            line = json.dumps({"telemetry": sample}, separators=(",", ":")) + "\n"
            sock.sendall(line.encode("utf-8"))
            time.sleep(dt)
    except KeyboardInterrupt:
        return 0
    finally:
        sock_file.close()
        sock.close()


def _load_checkpoints(directory) -> dict:
    from .training import Checkpoint

    checkpoints = {}
    for path in sorted(Path(directory).glob("stage*.json")):
        ck = Checkpoint.load(path)
        checkpoints[ck.stage] = ck
    return checkpoints


def _load_gesture_library(directory, cfg) -> dict:
    from .gestures import gesture_library

    checkpoints = _load_checkpoints(directory)
    return gesture_library(checkpoints, cfg.geometry, schedule=cfg.schedule)


def cmd_score(args) -> int:
    from .config import load_config
    from .rewards import QuadState, evaluate_metrics, stage_reward

    cfg = load_config(args.config)
    states = []
    with open(args.trajectory, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                states.append(QuadState.from_dict(json.loads(line)))
    steps = [stage_reward(args.stage, s, cfg.reward).to_dict() for s in states]
    metrics = evaluate_metrics(states, cfg.reward)
    _write_json(args.report, {"stage": args.stage, "steps": steps,
                              "metrics": metrics.to_dict()})
    return 0


def cmd_train(args) -> int:
    from .config import load_config
    from .training import Checkpoint, configure_targets, train_stage

    cfg = load_config(args.config)
    reward = configure_targets(cfg.reward, cfg.geometry)
    specs = {s.stage: s for s in cfg.stage_specs()}
    parent = Checkpoint.load(args.from_checkpoint) if args.from_checkpoint else None
    ck = train_stage(specs[args.stage], args.seed, cfg.geometry, reward,
                     parent=parent, no_curriculum=args.no_curriculum)
    ck.save(args.out)
    print(f"stage {args.stage} seed {args.seed}: "
          f"{'PASS' if ck.passed else 'FAIL'} -> {args.out}", file=sys.stderr)
    return 0 if ck.passed else 1


def cmd_curriculum(args) -> int:
    from .config import load_config
    from .training import run_curriculum

    cfg = load_config(args.config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = []
    for seed in _parse_seeds(args.seeds):
        checkpoints = run_curriculum(cfg.geometry, cfg.reward, seed,
                                     specs=cfg.stage_specs())
        seed_dir = out_dir / f"seed_{seed}"
        seed_dir.mkdir(exist_ok=True)
        for ck in checkpoints:
            ck.save(seed_dir / f"stage{ck.stage}.json")
        summary.append({"seed": seed,
                        "passed": {ck.stage: ck.passed for ck in checkpoints}})
        print(f"seed {seed}: " + " ".join(
            f"stage{ck.stage}={'PASS' if ck.passed else 'FAIL'}"
            for ck in checkpoints), file=sys.stderr)
    _write_json(out_dir / "summary.json", summary)
    return 0


def cmd_ablate(args) -> int:
    from .config import load_config
    from .training import run_ablation

    cfg = load_config(args.config)
    report = run_ablation(cfg.geometry, cfg.reward, args.seed,
                          specs=cfg.stage_specs())
    _write_json(args.report, report)
    cur = report["curriculum"]
    direct = report["direct"]
    print(f"curriculum: success={cur['success']} "
          f"lift={cur.get('lift_success_rate', 0.0):.3f} | "
          f"direct: success={direct['success']} "
          f"lift={direct.get('lift_success_rate', 0.0):.3f}", file=sys.stderr)
    return 0


def cmd_gesture(args) -> int:
    from .config import load_config
    from .gestures import compose_gesture, replay_states
    from .training import configure_targets

    cfg = load_config(args.config)
    reward = configure_targets(cfg.reward, cfg.geometry)
    checkpoints = _load_checkpoints(args.checkpoint_dir)
    traj = compose_gesture(args.kind, checkpoints, cfg.geometry)
    states = replay_states(traj, cfg.geometry, reward)
    with open(args.out, "w", encoding="utf-8") as fh:
        for i, (state, label) in enumerate(zip(states, traj.labels)):
            record = state.to_dict()
            record["t_ms"] = int(round(1000.0 * i / traj.rate_hz))
            record["phase"] = label
            fh.write(json.dumps(record, separators=(",", ":")) + "\n")
    print(f"{args.kind}: {len(states)} steps -> {args.out}", file=sys.stderr)
    return 0


def cmd_make_corpus(args) -> int:
    from .corpus import generate_corpus

    n = generate_corpus(args.out, clips_per_hand=args.clips_per_hand,
                        clips_per_head=args.clips_per_head, seed=args.seed)
    print(f"wrote {n} clips under {args.out}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pawctl")
    parser.add_argument("--config", default=None, help="TOML config file")
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("classify", help="score a labeled landmark corpus")
    p.add_argument("--corpus", required=True)
    p.add_argument("--report", default="-")
    p.add_argument("--noise-sigma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("bridge", help="command bridge server / client")
    bsub = p.add_subparsers(dest="bridge_cmd", required=True)
    serve = bsub.add_parser("serve")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=None)
    send = bsub.add_parser("send")
    send.add_argument("command")
    send.add_argument("--host", default="127.0.0.1")
    send.add_argument("--port", type=int, default=None)
    p.set_defaults(func=cmd_bridge)

    p = sub.add_parser("actuate", help="run the actuator as a bridge client")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=None)
    p.add_argument("--checkpoint-dir", default=None)
    p.set_defaults(func=cmd_actuate)

    p = sub.add_parser("score", help="score a trajectory NDJSON under a stage reward")
    p.add_argument("--stage", type=int, required=True, choices=(1, 2, 3))
    p.add_argument("--trajectory", required=True)
    p.add_argument("--report", default="-")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("train", help="train one curriculum stage")
    p.add_argument("--stage", type=int, required=True, choices=(1, 2, 3))
    p.add_argument("--from", dest="from_checkpoint", default=None)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--out", required=True)
    p.add_argument("--no-curriculum", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("curriculum", help="train all stages over several seeds")
    p.add_argument("--seeds", default="1..5")
    p.add_argument("--out-dir", default="checkpoints")
    p.set_defaults(func=cmd_curriculum)

    p = sub.add_parser("ablate", help="curriculum vs direct training comparison")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--report", default="-")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("gesture", help="compose a G1..G5 trajectory from checkpoints")
    p.add_argument("--kind", required=True, choices=("G1", "G2", "G3", "G4", "G5"))
    p.add_argument("--checkpoint-dir", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gesture)

    p = sub.add_parser("make-corpus", help="generate the synthetic labeled corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--clips-per-hand", type=int, default=25)
    p.add_argument("--clips-per-head", type=int, default=5)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=cmd_make_corpus)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
