"""Steering session and network server.

One Session actor owns the scene. Edits bump the scene version, cancel the
running budgeted simulation cooperatively and start a fresh one; every
level result is rendered through the partition tree and fanned out to
subscribers. Outbound queues are bounded and drop the oldest frames first
(never acknowledgements or level summaries), so slow viewers see fresh
data. Batch jobs deep-copy the interactive state at trigger time and are
immune to later edits.

Transports: length-prefixed messages over raw TCP, and the same framing
inside binary WebSocket messages (plus static asset serving for the
browser UI on the WebSocket port).
"""

from __future__ import annotations

import itertools
import os
import queue
import socket
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from . import compositor, fieldio, hierarchy, lattice, protocol, viz, ws
from .compositor import RenderStyle
from .hierarchy import params_at_level, run_budgeted
from .lattice import MacroFields
from .partition import build_tree
from .scene import (
    DegenerateGeometry,
    FluidParams,
    InvalidGeometry,
    Scene,
    SceneObject,
    UnknownId,
)

TECHNIQUES = ("none", "iso", "streamlines", "streambands", "glyphs")


@dataclass
class ServerConfig:
    host: str = "127.0.0.1"
    port: int = 7870
    ws_port: int = 7871
    token: str = ""
    max_leaf_cells: int = 256
    frame_px: int = 384
    dump_dir: str = "dumps"
    dump_frames: Optional[str] = None   # write every broadcast frame as PPM
    ui_dir: Optional[str] = None
    queue_cap: int = 64
    seed_count: int = 8
    glyph_stride: int = 4
    iso_count: int = 5
    slaves: int = 1        # render worker pool; 1 = deterministic serial mode
    traders: int = 1

    @classmethod
    def from_env(cls, **kw) -> "ServerConfig":
        kw.setdefault("token", os.environ.get("STEERFLOW_TOKEN", ""))
        return cls(**kw)


class OutQueue:
    """Bounded FIFO that sheds the oldest droppable entries when full."""

    def __init__(self, cap: int):
        self.cap = cap
        self._items: list[tuple[bytes, bool]] = []
        self._lock = threading.Lock()
        self._ready = threading.Condition(self._lock)
        self.closed = False

    def put(self, data: bytes, droppable: bool) -> None:
        with self._ready:
            if self.closed:
                return
            if len(self._items) >= self.cap:
                for i, (_, d) in enumerate(self._items):
                    if d:
                        del self._items[i]
                        break
            self._items.append((data, droppable))
            self._ready.notify()

    def get(self, timeout: Optional[float] = None) -> Optional[bytes]:
        with self._ready:
            if not self._items and not self.closed:
                self._ready.wait(timeout)
            if not self._items:
                return None
            return self._items.pop(0)[0]

    def close(self) -> None:
        with self._ready:
            self.closed = True
            self._ready.notify_all()


class Client:
    _ids = itertools.count(1)

    def __init__(self, cap: int = 64):
        self.id = next(Client._ids)
        self.queue = OutQueue(cap)
        self.subscribed = False


@dataclass
class ViewStyle:
    field_id: int = fieldio.FIELD_UX
    value_range: Optional[tuple[float, float]] = None
    colormap: str = "diverging"
    technique: str = "none"
    options: dict = field(default_factory=dict)


@dataclass
class BatchJob:
    job_id: int
    scene: Scene
    grid: lattice.DistributionGrid
    target_level: int
    steps: int
    out_dir: Path
    dump_interval: int
    state: str = "Queued"   # Queued | Running | Done | Failed
    error: str = ""


def display_macro(macro: MacroFields, level: int, ratio: int) -> MacroFields:
    """Convert a level's lattice fields to level-0 display units.

    Under the diffusive per-level scaling velocities shrink by 1/r per level
    and density fluctuations by 1/r^2; scaling them back makes colors and
    ranges comparable across levels. Temperature is physical already.
    """
    if level == 0:
        return macro
    r = float(ratio**level)
    return MacroFields(
        rho=1.0 + (macro.rho - 1.0) * r * r,
        ux=macro.ux * r,
        uy=macro.uy * r,
        temp=macro.temp,
    )


class Session:
    """Owner of one steering scene; processes messages on a single thread."""

    def __init__(self, scene: Scene, config: ServerConfig):
        scene.validate()
        self.scene = scene
        self.config = config
        self.version = 1
        self.seq = 0
        self.style = ViewStyle()
        self.inbox: queue.Queue = queue.Queue()
        self.clients: dict[int, Client] = {}
        self.latest: dict[int, lattice.DistributionGrid] = {}  # level -> grid
        self.finest: Optional[lattice.DistributionGrid] = None
        self.latest_frames: dict[int, tuple[dict, bytes]] = {}
        self._trees: dict[tuple[int, int], object] = {}
        self._cancel = threading.Event()
        self._run_thread: Optional[threading.Thread] = None
        self.batch: Optional[BatchJob] = None
        self._batch_ids = itertools.count(1)
        self._stopped = False
        Path(config.dump_dir).mkdir(parents=True, exist_ok=True)

    # ---- lifecycle ------------------------------------------------------

    def start(self) -> None:
        self._thread = threading.Thread(target=self.run_loop, daemon=True)
        self._thread.start()
        self.submit(None, {"type": "__start_run__"})

    def stop(self) -> None:
        self._stopped = True
        self._cancel.set()
        self.inbox.put(("__stop__",))
        if hasattr(self, "_thread"):
            self._thread.join(timeout=10)

    def submit(self, client: Optional[Client], header: dict) -> None:
        self.inbox.put(("msg", client, header))

    def run_loop(self) -> None:
        while True:
            item = self.inbox.get()
            if item[0] == "__stop__":
                return
            if item[0] == "msg":
                _, client, header = item
                if header.get("type") == "__start_run__":
                    self._start_run()
                else:
                    self.handle(header, client)
            elif item[0] == "level":
                _, version, result = item
                self._on_level_result(version, result)
            elif item[0] == "run_error":
                _, version, text = item
                if version == self.version:
                    self.broadcast({"type": "error", "code": "NumericalBlowup",
                                    "text": text, "version": self.version},
                                   droppable=False)
            elif item[0] == "job":
                _, job_id, state, error = item
                self.broadcast({"type": "job", "id": job_id, "state": state,
                                "error": error, "version": self.version},
                               droppable=False)

    # ---- client management ---------------------------------------------

    def attach(self, client: Client) -> None:
        self.clients[client.id] = client

    def detach(self, client: Client) -> None:
        self.clients.pop(client.id, None)
        client.queue.close()

    def subscribers(self) -> list[Client]:
        return [c for c in self.clients.values() if c.subscribed]

    def broadcast(self, header: dict, payload: Optional[bytes] = None,
                  droppable: bool = True) -> None:
        data = protocol.encode(header, payload)
        for c in self.subscribers():
            c.queue.put(data, droppable)

    def _reply(self, client: Optional[Client], header: dict,
               payload: Optional[bytes] = None) -> tuple[dict, Optional[bytes]]:
        if client is not None:
            client.queue.put(protocol.encode(header, payload), droppable=False)
        return header, payload

    # ---- steering messages ----------------------------------------------

    def handle(self, msg: dict, client: Optional[Client]) -> list[tuple[dict, Optional[bytes]]]:
        """Process one steering message; returns the replies sent to sender."""
        mtype = msg.get("type")
        out: list[tuple[dict, Optional[bytes]]] = []
        try:
            if mtype == "hello":
                out.append(self._ack(client))
            elif mtype == "subscribe":
                if client is not None:
                    if client.id not in self.clients:
                        self.attach(client)
                    client.subscribed = True
                out.append(self._ack(client))
                if client is not None:
                    for level in sorted(self.latest_frames):
                        header, payload = self.latest_frames[level]
                        client.queue.put(protocol.encode(header, payload), droppable=True)
            elif mtype == "add_geometry":
                obj = SceneObject.from_dict(msg["object"])
                if any(o.id == obj.id for o in self.scene.objects):
                    raise InvalidGeometry(f"duplicate object id {obj.id!r}")
                self.scene.objects.append(obj)
                try:
                    self.scene.validate()
                except Exception:
                    self.scene.objects.pop()
                    raise
                out.append(self._edit_ack(client))
            elif mtype == "delete_geometry":
                obj = self.scene.find(msg["id"])
                self.scene.objects.remove(obj)
                out.append(self._edit_ack(client))
            elif mtype == "move_geometry":
                obj = self.scene.find(msg["id"])
                old = obj.center
                obj.center = tuple(msg["center"])
                try:
                    self.scene.validate()
                except Exception:
                    obj.center = old
                    raise
                out.append(self._edit_ack(client))
            elif mtype == "scale_geometry":
                obj = self.scene.find(msg["id"])
                factor = float(msg["factor"])
                if factor <= 0:
                    raise InvalidGeometry("scale factor must be positive")
                old = obj.size
                if obj.shape == "circle":
                    obj.size = float(obj.size) * factor
                else:
                    obj.size = (obj.size[0] * factor, obj.size[1] * factor)
                try:
                    self.scene.validate()
                except Exception:
                    obj.size = old
                    raise
                out.append(self._edit_ack(client))
            elif mtype == "set_params":
                self.scene.params = FluidParams.from_dict(msg["params"])
                out.append(self._edit_ack(client))
            elif mtype == "set_budget":
                ms = float(msg["ms"])
                if ms < 0:
                    raise ValueError("budget must be >= 0")
                self.scene.plan = replace(self.scene.plan, budget_ms=ms)
                out.append(self._edit_ack(client))
            elif mtype == "set_field":
                fid = int(msg["field"])
                if fid not in fieldio.FIELD_NAMES:
                    raise ValueError(f"unknown field id {fid}")
                self.style.field_id = fid
                out.append(self._ack(client))
                self._rerender_latest()
            elif mtype == "set_style":
                technique = msg.get("technique", "none")
                if technique not in TECHNIQUES:
                    raise ValueError(f"unknown technique {technique!r}")
                self.style.technique = technique
                self.style.options = dict(msg.get("options", {}))
                if "colormap" in self.style.options:
                    name = self.style.options["colormap"]
                    if name not in viz.COLORMAPS:
                        raise ValueError(f"unknown colormap {name!r}")
                    self.style.colormap = name
                rng = self.style.options.get("range")
                self.style.value_range = tuple(rng) if rng else None
                out.append(self._ack(client))
                self._rerender_latest()
            elif mtype == "snapshot":
                out.extend(self._snapshot(client))
            elif mtype == "trigger_batch":
                out.append(self._trigger_batch(client, msg))
            else:
                raise ValueError(f"unknown message type {mtype!r}")
        except UnknownId as exc:
            out.append(self._error(client, "UnknownId", str(exc)))
        except (InvalidGeometry, DegenerateGeometry) as exc:
            out.append(self._error(client, "InvalidGeometry", str(exc)))
        except KeyError as exc:
            out.append(self._error(client, "BadRequest", f"missing field {exc}"))
        except ValueError as exc:
            out.append(self._error(client, "InvalidParams", str(exc)))
        except JobLimit as exc:
            out.append(self._error(client, "JobLimitExceeded", str(exc)))
        return out

    def _scene_ack_header(self) -> dict:
        return {"type": "scene_ack", "version": self.version,
                "scene": self.scene.to_dict(),
                "style": {"field": self.style.field_id,
                          "technique": self.style.technique}}

    def _ack(self, client) -> tuple[dict, Optional[bytes]]:
        return self._reply(client, self._scene_ack_header())

    def _edit_ack(self, client) -> tuple[dict, Optional[bytes]]:
        self.version += 1
        ack = self._ack(client)
        self._start_run()
        return ack

    def _error(self, client, code: str, text: str) -> tuple[dict, Optional[bytes]]:
        return self._reply(client, {"type": "error", "code": code, "text": text,
                                    "version": self.version})

    # ---- simulation runs -------------------------------------------------

    def _start_run(self) -> None:
        self._cancel.set()
        self._cancel = threading.Event()
        cancel = self._cancel
        version = self.version
        scene = self.scene.copy()
        self.latest.clear()
        self.latest_frames.clear()
        self._trees.clear()

        def work():
            try:
                run_budgeted(
                    scene,
                    scene.plan,
                    emit=lambda r: self.inbox.put(("level", version, r)),
                    should_cancel=cancel.is_set,
                )
            except lattice.NumericalBlowup as exc:
                self.inbox.put(("run_error", version, str(exc)))

        self._run_thread = threading.Thread(target=work, daemon=True)
        self._run_thread.start()

    def _tree_for(self, grid) -> object:
        key = (self.version, grid.level)
        if key not in self._trees:
            self._trees[key] = build_tree(grid.flags, self.config.max_leaf_cells)
        return self._trees[key]

    def _px_for(self, grid) -> int:
        return max(1, self.config.frame_px // max(grid.nx, grid.ny))

    def _on_level_result(self, version: int, result: hierarchy.LevelResult) -> None:
        if version != self.version or self._stopped:
            return  # stale run, superseded by a newer edit
        grid = result.grid
        self.latest[grid.level] = grid
        self.finest = grid
        header, payload = self._render(grid)
        self.latest_frames[grid.level] = (header, payload)
        self._dump_frame(header, payload)
        self.broadcast(header, payload, droppable=True)
        prims = self._primitives(grid)
        if prims is not None:
            self.broadcast(prims, droppable=True)
        self.broadcast(
            {
                "type": "level_done",
                "version": self.version,
                "level": result.level,
                "residual": result.residual,
                "elapsed_ms": result.elapsed_ms,
                "steps": result.steps,
            },
            droppable=False,
        )

    def _render(self, grid) -> tuple[dict, bytes]:
        ratio = self.scene.plan.refinement_ratio
        macro = display_macro(lattice.macroscopics(grid), grid.level, ratio)
        style = RenderStyle(
            field_id=self.style.field_id,
            value_range=self.style.value_range,
            colormap=self.style.colormap,
            px_per_cell=self._px_for(grid),
        )
        self.seq += 1
        roles = None
        if self.config.slaves > 1:
            from .scheduler import RoleConfig

            roles = RoleConfig(n_traders=self.config.traders,
                               n_slaves=self.config.slaves)
        frame = compositor.render_frame(
            self._tree_for(grid), macro, style, grid.flags,
            seq=self.seq, level=grid.level, roles=roles,
        )
        header = {
            "type": "frame",
            "seq": frame.seq,
            "version": self.version,
            "level": frame.level,
            "field": frame.field_id,
            "w": frame.width,
            "h": frame.height,
        }
        return header, frame.buffer.tobytes()

    def _primitives(self, grid) -> Optional[dict]:
        technique = self.style.technique
        if technique in ("none", "colormap"):
            return None
        ratio = self.scene.plan.refinement_ratio
        macro = display_macro(lattice.macroscopics(grid), grid.level, ratio)
        opts = self.style.options
        polylines: list[viz.Polyline] = []
        glyph_list = []
        if technique == "iso":
            fld = compositor.field_of(macro, self.style.field_id)
            lo, hi = compositor.resolve_range(fld, RenderStyle(
                field_id=self.style.field_id, value_range=self.style.value_range))
            levels = list(np.linspace(lo, hi, self.config.iso_count + 2)[1:-1])
            polylines = viz.iso_lines(fld, levels)
        elif technique in ("streamlines", "streambands"):
            seeds = opts.get("seeds")
            if not seeds:
                n = int(opts.get("seed_count", self.config.seed_count))
                seeds = [(0.04, y) for y in np.linspace(0.12, 0.88, n)]
            if technique == "streamlines":
                polylines = viz.streamlines(macro.ux, macro.uy, grid.flags,
                                            seeds, h=0.004, max_steps=500)
            else:
                polylines = viz.streambands(macro.ux, macro.uy, grid.flags,
                                            seeds, h=0.004, max_steps=500,
                                            width=float(opts.get("width", 0.012)))
        elif technique == "glyphs":
            stride = int(opts.get("stride", self.config.glyph_stride))
            glyph_list = viz.glyphs(macro.ux, macro.uy, grid.flags, stride)
        return {
            "type": "primitives",
            "version": self.version,
            "level": grid.level,
            "polylines": [p.to_dict() for p in polylines],
            "glyphs": [
                {"anchor": list(a), "dir": list(d), "mag": m}
                for a, d, m in glyph_list
            ],
        }

    def _dump_frame(self, header: dict, payload: bytes) -> None:
        if not self.config.dump_frames:
            return
        out = Path(self.config.dump_frames)
        out.mkdir(parents=True, exist_ok=True)
        rgba = np.frombuffer(payload, dtype=np.uint8).reshape(
            header["h"], header["w"], 4
        )
        fieldio.write_ppm(out / f"frame_{header['seq']:06d}.ppm", rgba)

    def _rerender_latest(self) -> None:
        for level in sorted(self.latest):
            grid = self.latest[level]
            header, payload = self._render(grid)
            self.latest_frames[level] = (header, payload)
            self._dump_frame(header, payload)
            self.broadcast(header, payload, droppable=True)
            prims = self._primitives(grid)
            if prims is not None:
                self.broadcast(prims, droppable=True)

    # ---- snapshot & batch -------------------------------------------------

    def _snapshot(self, client) -> list[tuple[dict, Optional[bytes]]]:
        if self.finest is None:
            return [self._error(client, "BadRequest", "no results yet")]
        grid = self.finest
        macro = display_macro(
            lattice.macroscopics(grid), grid.level, self.scene.plan.refinement_ratio
        )
        fid = self.style.field_id
        name = fieldio.FIELD_NAMES[fid]
        path = Path(self.config.dump_dir) / (
            f"snapshot_v{self.version}_L{grid.level}_{name}.dump"
        )
        fieldio.write_dump(path, compositor.field_of(macro, fid), fid)
        out = []
        out.append(self._reply(client, {
            "type": "snapshot_info",
            "version": self.version,
            "level": grid.level,
            "field": fid,
            "dump_path": str(path),
        }))
        if grid.level in self.latest_frames:
            header, payload = self.latest_frames[grid.level]
            out.append(self._reply(client, header, payload))
        return out

    def _trigger_batch(self, client, msg: dict) -> tuple[dict, Optional[bytes]]:
        if self.finest is None:
            raise ValueError("no interactive result to seed the batch from")
        if self.batch is not None and self.batch.state in ("Queued", "Running"):
            raise JobLimit("a batch job is already active for this session")
        target = int(msg["level"])
        steps = int(msg["steps"])
        if steps < 0:
            raise ValueError("steps must be >= 0")
        if target < self.finest.level:
            raise ValueError(
                f"target level {target} below interactive level {self.finest.level}"
            )
        jid = next(self._batch_ids)
        out_dir = Path(msg.get("out_path") or
                       (Path(self.config.dump_dir) / f"batch_{jid}"))
        interval = int(msg.get("dump_interval", 0)) or max(1, steps // 10 if steps else 1)
        job = BatchJob(
            job_id=jid,
            scene=self.scene.copy(),
            grid=self.finest.copy(),
            target_level=target,
            steps=steps,
            out_dir=out_dir,
            dump_interval=interval,
        )
        self.batch = job
        self.inbox.put(("job", job.job_id, "Queued", ""))
        threading.Thread(target=self._run_batch, args=(job,), daemon=True).start()
        return self._ack(client)

    def _run_batch(self, job: BatchJob) -> None:
        job.state = "Running"
        self.inbox.put(("job", job.job_id, "Running", ""))
        try:
            run_batch_job(job)
            job.state = "Done"
            self.inbox.put(("job", job.job_id, "Done", ""))
        except Exception as exc:  # noqa: BLE001 - reported to clients
            job.state = "Failed"
            job.error = str(exc)
            self.inbox.put(("job", job.job_id, "Failed", str(exc)))


class JobLimit(RuntimeError):
    pass


def run_batch_job(job: BatchJob) -> None:
    """Detached high-resolution run seeded from the interactive grid.

    Prolongates the snapshot up to the target level, then steps it for the
    requested count, writing all four field dumps at every interval and at
    the start and end. Entirely self-contained: edits to the live session
    cannot influence the output.
    """
    scene = job.scene
    ratio = scene.plan.refinement_ratio
    grid = job.grid
    for level in range(grid.level + 1, job.target_level + 1):
        nx = scene.plan.base_resolution[0] * ratio**level
        ny = scene.plan.base_resolution[1] * ratio**level
        flags = lattice.rasterize(scene, nx, ny)
        grid = hierarchy.prolongate(
            grid, ratio, flags,
            velocity_scale=1.0 / ratio,
            density_fluct_scale=1.0 / ratio**2,
        )
    params = params_at_level(scene.params, ratio, grid.level)
    job.out_dir.mkdir(parents=True, exist_ok=True)

    def dump(step: int) -> None:
        macro = lattice.macroscopics(grid)
        for fid, name in fieldio.FIELD_NAMES.items():
            fieldio.write_dump(
                job.out_dir / f"step_{step:06d}_{name}.dump",
                compositor.field_of(macro, fid),
                fid,
            )

    dump(0)
    for k in range(1, job.steps + 1):
        grid = lattice.step(grid, params)
        if k % job.dump_interval == 0 or k == job.steps:
            dump(k)


class SteeringServer:
    """TCP + WebSocket front door around a Session."""

    def __init__(self, scene: Scene, config: ServerConfig):
        self.config = config
        self.session = Session(scene, config)
        self._listeners: list[socket.socket] = []
        self._threads: list[threading.Thread] = []
        self._running = False

    # -- lifecycle

    def start(self) -> None:
        self._running = True
        self.session.start()
        tcp = socket.create_server((self.config.host, self.config.port))
        wss = socket.create_server((self.config.host, self.config.ws_port))
        self._listeners = [tcp, wss]
        for sock, handler in ((tcp, self._tcp_client), (wss, self._ws_client)):
            th = threading.Thread(target=self._accept_loop, args=(sock, handler),
                                  daemon=True)
            th.start()
            self._threads.append(th)

    @property
    def ports(self) -> tuple[int, int]:
        return (self._listeners[0].getsockname()[1],
                self._listeners[1].getsockname()[1])

    def stop(self) -> None:
        self._running = False
        for sock in self._listeners:
            try:
                sock.close()
            except OSError:
                pass
        self.session.stop()

    def _accept_loop(self, listener: socket.socket, handler) -> None:
        while self._running:
            try:
                conn, _ = listener.accept()
            except OSError:
                return
            threading.Thread(target=handler, args=(conn,), daemon=True).start()

    # -- TCP transport

    def _tcp_client(self, conn: socket.socket) -> None:
        client = Client(self.config.queue_cap)
        try:
            header, _ = protocol.read_message(conn)
            if self.config.token and header.get("token") != self.config.token:
                protocol.write_message(conn, {"type": "error", "code": "AuthFailed",
                                              "text": "bad token"})
                return
            if header.get("type") != "hello":
                # first message doubles as hello when no auth is configured
                pass
            self.session.attach(client)
            writer = threading.Thread(
                target=self._tcp_writer, args=(conn, client), daemon=True
            )
            writer.start()
            self.session.submit(client, header)
            while True:
                header, _ = protocol.read_message(conn)
                self.session.submit(client, header)
        except (ConnectionError, OSError, ValueError):
            pass
        finally:
            self.session.detach(client)
            try:
                conn.close()
            except OSError:
                pass

    def _tcp_writer(self, conn: socket.socket, client: Client) -> None:
        while True:
            data = client.queue.get(timeout=1.0)
            if data is None:
                if client.queue.closed:
                    return
                continue
            try:
                conn.sendall(data)
            except OSError:
                client.queue.close()
                return

    # -- WebSocket transport (and static assets)

    def _ws_client(self, conn: socket.socket) -> None:
        client = Client(self.config.queue_cap)
        try:
            method, target, headers = ws.read_http_request(conn)
            if not ws.is_upgrade(headers):
                if method == "GET" and self.config.ui_dir:
                    ws.serve_static(conn, target, Path(self.config.ui_dir))
                else:
                    conn.sendall(b"HTTP/1.1 404 Not Found\r\nContent-Length: 0\r\n\r\n")
                return
            params = ws.query_params(target)
            if self.config.token and params.get("token") != self.config.token:
                conn.sendall(b"HTTP/1.1 403 Forbidden\r\nContent-Length: 0\r\n\r\n")
                return
            ws.complete_handshake(conn, headers)
            self.session.attach(client)
            writer = threading.Thread(
                target=self._ws_writer, args=(conn, client), daemon=True
            )
            writer.start()
            while True:
                opcode, data = ws.read_message(conn)
                if opcode == 8:
                    ws.send_close(conn)
                    return
                header, _, consumed = protocol.decode(data)
                if consumed:
                    self.session.submit(client, header)
        except (ConnectionError, OSError, ValueError):
            pass
        finally:
            self.session.detach(client)
            try:
                conn.close()
            except OSError:
                pass

    def _ws_writer(self, conn: socket.socket, client: Client) -> None:
        while True:
            data = client.queue.get(timeout=1.0)
            if data is None:
                if client.queue.closed:
                    return
                continue
            try:
                ws.send_binary(conn, data)
            except OSError:
                client.queue.close()
                return
