"""Command line entry points: serve, batch, bench-sched, comfort."""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from . import bench, hierarchy, lattice, partition, scheduler, thermal
from .scene import Scene
from .server import BatchJob, ServerConfig, SteeringServer, run_batch_job


def _parse_res(text: str) -> tuple[int, int]:
    try:
        nx, ny = text.lower().split("x")
        return int(nx), int(ny)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected NxM, got {text!r}") from exc


def _load_scene(path: str | None, base_res=None, max_level=None, budget_ms=None) -> Scene:
    scene = Scene.load(path) if path else Scene()
    plan = scene.plan
    kw = {}
    if base_res is not None:
        kw["base_resolution"] = base_res
    if max_level is not None:
        kw["max_level"] = max_level
    if budget_ms is not None:
        kw["budget_ms"] = budget_ms
    if kw:
        from dataclasses import replace

        scene.plan = replace(plan, **kw)
    return scene


def cmd_serve(args) -> int:
    scene = _load_scene(args.scene, args.base_res, args.max_level, args.budget_ms)
    config = ServerConfig.from_env(
        host=args.host,
        port=args.port,
        ws_port=args.ws_port,
        dump_dir=args.dump_dir,
        dump_frames=args.dump_frames,
        ui_dir=args.ui_dir,
        frame_px=args.frame_px,
        slaves=args.slaves,
        traders=args.traders,
    )
    if args.token is not None:
        config.token = args.token
    server = SteeringServer(scene, config)
    server.start()
    tcp_port, ws_port = server.ports
    print(f"steerflow serving tcp={config.host}:{tcp_port} ws={config.host}:{ws_port}",
          flush=True)
    if config.ui_dir:
        print(f"ui assets from {config.ui_dir} at http://{config.host}:{ws_port}/",
              flush=True)
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        print("shutting down")
        server.stop()
    return 0


def cmd_batch(args) -> int:
    scene = _load_scene(args.scene)
    plan = scene.plan
    results = []
    hierarchy.run_budgeted(scene, plan, results.append)
    if not results:
        print("no interactive result produced", file=sys.stderr)
        return 1
    finest = results[-1].grid
    job = BatchJob(
        job_id=0,
        scene=scene,
        grid=finest,
        target_level=args.level,
        steps=args.steps,
        out_dir=Path(args.out),
        dump_interval=args.dump_interval or max(1, args.steps // 10 if args.steps else 1),
    )
    t0 = time.perf_counter()
    run_batch_job(job)
    print(
        f"batch done: level {args.level}, {args.steps} steps, "
        f"dumps in {args.out} ({time.perf_counter() - t0:.1f}s)"
    )
    return 0


def cmd_bench_sched(args) -> int:
    scene = _load_scene(args.scene)
    nx, ny = scene.plan.base_resolution
    flags_field = lattice.rasterize(scene, nx, ny)
    grid = lattice.init_grid(scene, nx, ny, flag_field=flags_field)
    if args.blocks:
        side = max(1, round(args.blocks**0.5))
        tasks = partition.uniform_blocks(grid.flags, side, max(1, args.blocks // side))
        layout = f"{len(tasks)} uniform blocks"
    else:
        tree = partition.build_tree(grid.flags, args.max_leaf_cells)
        tasks = partition.coalesce(tree, theta=args.theta)
        layout = f"{len(tasks)} coalesced tasks (theta={args.theta})"
    roles = scheduler.RoleConfig(
        n_traders=args.traders or scheduler.default_traders(args.slaves),
        n_slaves=args.slaves,
    )
    virtual = bench.synthetic_balance_run(tasks, roles)
    t0 = time.perf_counter()
    _, trace = bench.run_scheduled_steps(
        grid, scene.params, tasks, args.steps, roles, threaded=True
    )
    wall = time.perf_counter() - t0
    measured = scheduler.busy_fraction(trace)
    print(f"layout: {layout}")
    print(f"roles: {roles.n_traders} traders, {roles.n_slaves} slaves")
    print(f"busy fraction (virtual clock): {virtual:.3f}")
    print(f"busy fraction (threaded, {args.steps} steps in {wall:.2f}s): {measured:.3f}")
    if args.trace_out:
        Path(args.trace_out).write_text(trace.to_jsonl())
        print(f"trace written to {args.trace_out}")
    return 0


def cmd_comfort(args) -> int:
    scene = _load_scene(args.scene)
    nx, ny = scene.plan.base_resolution
    grid = lattice.init_grid(scene, nx, ny)
    state = thermal.RegulatorState()
    out = open(args.out, "w") if args.out else None
    try:
        for record in thermal.coupling_loop(
            grid, scene.params, state,
            n_cfd_steps=args.cfd_steps_per_exchange,
            n_exchanges=args.exchanges,
        ):
            line = record.to_json()
            print(line)
            if out:
                out.write(line + "\n")
    finally:
        if out:
            out.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="steerflow",
                                description="interactive 2D flow steering stack")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("serve", help="run the steering server")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=7870)
    s.add_argument("--ws-port", type=int, default=7871)
    s.add_argument("--base-res", type=_parse_res, default=None, metavar="NxM")
    s.add_argument("--max-level", type=int, default=None)
    s.add_argument("--budget-ms", type=float, default=None)
    s.add_argument("--slaves", type=int, default=4)
    s.add_argument("--traders", type=int, default=1)
    s.add_argument("--scene", default=None)
    s.add_argument("--token", default=None, help="overrides STEERFLOW_TOKEN")
    s.add_argument("--dump-dir", default="dumps")
    s.add_argument("--dump-frames", default=None, metavar="DIR",
                   help="also write every broadcast frame as PPM into DIR")
    s.add_argument("--ui-dir", default=None, help="serve browser UI assets from here")
    s.add_argument("--frame-px", type=int, default=384)
    s.set_defaults(func=cmd_serve)

    b = sub.add_parser("batch", help="detached high-resolution run")
    b.add_argument("--scene", required=True)
    b.add_argument("--level", type=int, required=True)
    b.add_argument("--steps", type=int, required=True)
    b.add_argument("--out", required=True)
    b.add_argument("--dump-interval", type=int, default=0)
    b.set_defaults(func=cmd_batch)

    e = sub.add_parser("bench-sched", help="scheduler balance experiment")
    e.add_argument("--scene", required=True)
    e.add_argument("--slaves", type=int, default=4)
    e.add_argument("--traders", type=int, default=0, help="0 = ceil(slaves/4)")
    e.add_argument("--steps", type=int, default=10)
    e.add_argument("--theta", type=float, default=0.3)
    e.add_argument("--max-leaf-cells", type=int, default=64)
    e.add_argument("--trace-out", default=None)
    group = e.add_mutually_exclusive_group()
    group.add_argument("--blocks", type=int, default=0,
                       help="use N uniform blocks instead of the BSP tree")
    group.add_argument("--coalesced", action="store_true", default=True)
    e.set_defaults(func=cmd_bench_sched)

    c = sub.add_parser("comfort", help="thermal comfort coupling run")
    c.add_argument("--scene", required=True)
    c.add_argument("--exchanges", type=int, default=100)
    c.add_argument("--cfd-steps-per-exchange", type=int, default=10)
    c.add_argument("--out", default=None)
    c.set_defaults(func=cmd_comfort)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
