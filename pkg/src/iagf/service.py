"""Live teleoperation session server.

Exposes the exact batch pipeline tick over a WebSocket JSON protocol: the
client streams 2-D input commands, the server advances the simulation at a
fixed rate, broadcasts state/belief/field frames, and persists each session
as a standard episode log. See docs/protocol.md for the message schema.
"""

from __future__ import annotations

import asyncio
import itertools
import json
import math
import time
from pathlib import Path
from typing import Optional

import numpy as np
import uvicorn
from fastapi import FastAPI, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from .config import SimConfig
from .field import FieldSpec, field_boundary
from .harness import ProgressTracker, episode_result_from_log, write_log
from .impedance import RobotState
from .inference import GoalBelief
from .pipeline import METHODS, SharedAutonomySim, TickRecord

PROTOCOL_VERSION = 1
BOUNDARY_POINTS = 64

_session_counter = itertools.count(1)


class ProtocolError(Exception):
    pass


def frame_encode(
    state: RobotState,
    belief: GoalBelief,
    fields: list,
    f_c: np.ndarray,
    m: float,
    goal_ids: list,
) -> dict:
    """Schema-stable frame payload; rejects non-finite values.

    ``fields`` holds (label, FieldSpec, d_h) triples; each gets a boundary
    polyline so clients never re-derive the field shape.
    """
    values = np.concatenate(
        [state.x, state.v, state.q, f_c, belief.posterior, [belief.confidence, m, state.t]]
    )
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite value in frame")
    return {
        "t": state.t,
        "x": [float(state.x[0]), float(state.x[1])],
        "v": [float(state.v[0]), float(state.v[1])],
        "q": [float(qi) for qi in state.q],
        "m": float(m),
        "f_c": [float(f_c[0]), float(f_c[1])],
        "belief": {
            "posterior": [float(p) for p in belief.posterior],
            "confidence": float(belief.confidence),
            "predicted": goal_ids[belief.predicted],
        },
        "fields": [
            {
                **spec.to_dict(),
                "label": label,
                "d_h": float(d_h),
                "boundary": [
                    [float(px), float(py)] for px, py in field_boundary(spec, BOUNDARY_POINTS)
                ],
            }
            for label, spec, d_h in fields
        ],
    }


def record_fields_to_specs(rec: TickRecord) -> list:
    return [
        (f["label"], FieldSpec.from_dict(f), f["d_h"])
        for f in rec.fields
    ]


class Session:
    """One live session: a simulation loop fed by last-write-wins input."""

    def __init__(self, cfg: SimConfig, ws: WebSocket, log_dir: Optional[Path]):
        self.cfg = cfg
        self.ws = ws
        self.log_dir = log_dir
        self.session_id = f"{int(time.time())}-{next(_session_counter)}"
        self.out_seq = itertools.count()
        self.last_client_seq = -1
        self.input_vec = np.zeros(2)
        self.input_time: Optional[float] = None
        self.method = "iagf"
        self.scenario = "s1"
        self.records: list[TickRecord] = []
        self.done = asyncio.Event()
        self.end_reason = "disconnect"
        self.error: Optional[str] = None

    async def send(self, kind: str, payload: dict) -> None:
        msg = {"kind": kind, "seq": next(self.out_seq), "payload": payload}
        await self.ws.send_text(json.dumps(msg, sort_keys=True))

    def check_seq(self, msg: dict) -> None:
        seq = msg.get("seq")
        if not isinstance(seq, int) or seq <= self.last_client_seq:
            raise ProtocolError("client seq must be a strictly increasing integer")
        self.last_client_seq = seq

    async def expect(self, kind: str) -> dict:
        raw = await self.ws.receive_text()
        try:
            msg = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"invalid JSON: {exc}") from None
        self.check_seq(msg)
        if msg.get("kind") != kind:
            raise ProtocolError(f"expected {kind!r}, got {msg.get('kind')!r}")
        return msg

    async def handshake(self) -> None:
        hello = await self.expect("hello")
        version = (hello.get("payload") or {}).get("version")
        if version != PROTOCOL_VERSION:
            raise ProtocolError(f"unsupported protocol version {version!r}")
        await self.send("hello", {"version": PROTOCOL_VERSION, "session": self.session_id})
        config_msg = await self.expect("config")
        payload = config_msg.get("payload") or {}
        method = payload.get("method", "iagf")
        scenario = payload.get("scenario", "s1")
        if method not in METHODS:
            raise ProtocolError(f"unknown method {method!r}")
        if scenario not in self.cfg.workspace.scenarios:
            raise ProtocolError(f"unknown scenario {scenario!r}")
        self.method = method
        self.scenario = scenario

    async def receiver(self) -> None:
        loop = asyncio.get_running_loop()
        try:
            while not self.done.is_set():
                raw = await self.ws.receive_text()
                try:
                    msg = json.loads(raw)
                except json.JSONDecodeError as exc:
                    raise ProtocolError(f"invalid JSON: {exc}") from None
                self.check_seq(msg)
                kind = msg.get("kind")
                if kind == "input":
                    u = (msg.get("payload") or {}).get("u")
                    if (
                        not isinstance(u, list)
                        or len(u) != 2
                        or not all(isinstance(c, (int, float)) and math.isfinite(c) for c in u)
                    ):
                        raise ProtocolError("input payload must hold a finite 2-D command")
                    # unit-disc command from the client, scaled to a per-tick
                    # displacement server-side
                    n = math.hypot(u[0], u[1])
                    if n > 1.0:
                        u = [u[0] / n, u[1] / n]
                    self.input_vec = np.array(u) * self.cfg.inference.step_max
                    self.input_time = loop.time()
                elif kind == "bye":
                    self.end_reason = "bye"
                    self.done.set()
                else:
                    raise ProtocolError(f"unexpected message kind {kind!r}")
        except ProtocolError as exc:
            self.error = str(exc)
            self.end_reason = "error"
            self.done.set()
        except WebSocketDisconnect:
            self.end_reason = "disconnect"
            self.done.set()

    def current_input(self, now: float) -> np.ndarray:
        if self.input_time is None or now - self.input_time > self.cfg.service.input_staleness:
            return np.zeros(2)
        return self.input_vec

    async def loop(self) -> None:
        cfg = self.cfg
        sim = SharedAutonomySim(cfg, self.method)
        sequence = cfg.goal_sequence(self.scenario)
        tracker = ProgressTracker(
            len(sequence),
            cfg.workspace.line_point,
            cfg.workspace.line_normal,
            cfg.workspace.line_hysteresis,
        )
        final_goal = np.asarray(cfg.workspace.goals[sequence[-1]], dtype=float)
        hold_needed = max(1, round(cfg.episode.t_hold / cfg.impedance.dt))
        max_ticks = round(cfg.episode.t_max / cfg.impedance.dt)
        ticks_per_frame = max(1, round(1.0 / (cfg.service.frame_hz * cfg.impedance.dt)))
        frame_dt = ticks_per_frame * cfg.impedance.dt

        await self.send(
            "event",
            {
                "type": "start",
                "session": self.session_id,
                "method": self.method,
                "scenario": self.scenario,
                "goal_ids": sorted(cfg.workspace.goals),
                "goals": {g: list(p) for g, p in cfg.workspace.goals.items()},
                "goal_sequence": sequence,
                "link_lengths": list(cfg.arm.link_lengths),
                "base": list(cfg.arm.base),
                "m_th": cfg.guidance.m_th,
                "m_crit": cfg.guidance.m_crit,
                "r_grasp": cfg.episode.r_grasp,
                "frame_hz": cfg.service.frame_hz,
            },
        )

        aio_loop = asyncio.get_running_loop()
        next_t = aio_loop.time()
        hold = 0
        ticks = 0
        goal_ids = sorted(cfg.workspace.goals)
        while not self.done.is_set() and ticks < max_ticks:
            a_h = self.current_input(aio_loop.time())
            rec = None
            for _ in range(ticks_per_frame):
                rec = sim.tick(a_h)
                self.records.append(rec)
                ticks += 1
                on_final = tracker.update(rec.x) == len(sequence) - 1
                dist = float(np.hypot(rec.x[0] - final_goal[0], rec.x[1] - final_goal[1]))
                hold = hold + 1 if (on_final and dist < cfg.episode.r_grasp) else 0
            payload = frame_encode(
                sim.state,
                sim.belief,
                record_fields_to_specs(rec),
                rec.f_c,
                rec.m,
                goal_ids,
            )
            await self.send("frame", payload)
            if hold >= hold_needed:
                self.end_reason = "success"
                break
            next_t += frame_dt
            delay = next_t - aio_loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
            else:
                next_t = aio_loop.time()
        if not self.done.is_set() and ticks >= max_ticks and self.end_reason != "success":
            self.end_reason = "timeout"

    def meta(self) -> dict:
        sequence = self.cfg.goal_sequence(self.scenario)
        return {
            "kind": "meta",
            "schema": 1,
            "scenario": self.scenario,
            "method": self.method,
            "seed": 0,
            "session": self.session_id,
            "goal_ids": sorted(self.cfg.workspace.goals),
            "goal_sequence": sequence,
            "final_goal": list(self.cfg.workspace.goals[sequence[-1]]),
            "dt": self.cfg.impedance.dt,
            "config": self.cfg.to_dict(),
        }

    def persist(self) -> Optional[Path]:
        if self.log_dir is None or not self.records:
            return None
        path = Path(self.log_dir) / f"session-{self.session_id}.jsonl"
        write_log(path, self.meta(), self.records)
        return path

    def final_metrics(self) -> Optional[dict]:
        if not self.records:
            return None
        return episode_result_from_log(self.meta(), self.records).metrics_dict()


def create_app(
    cfg: SimConfig,
    log_dir: Optional[str | Path] = None,
    static_dir: Optional[str | Path] = None,
) -> FastAPI:
    app = FastAPI(title="iagf teleop service")
    log_path = Path(log_dir) if log_dir is not None else None

    @app.websocket("/session")
    async def session_endpoint(ws: WebSocket):  # noqa: ANN202
        await ws.accept()
        session = Session(cfg, ws, log_path)
        recv_task = None
        try:
            await session.handshake()
            recv_task = asyncio.create_task(session.receiver())
            await session.loop()
            if session.error is not None:
                await session.send("event", {"type": "error", "message": session.error})
            else:
                metrics = session.final_metrics()
                await session.send(
                    "event",
                    {"type": "end", "reason": session.end_reason, "metrics": metrics},
                )
                await session.send("bye", {})
        except ProtocolError as exc:
            try:
                await session.send("event", {"type": "error", "message": str(exc)})
            except Exception:
                pass
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            session.done.set()
            if recv_task is not None:
                recv_task.cancel()
            session.persist()
            try:
                await ws.close()
            except Exception:
                pass

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")
    else:

        @app.get("/")
        def index():  # noqa: ANN202
            return {"service": "iagf", "ui": "not bundled; connect a client to /session"}

    return app


def serve(
    cfg: SimConfig,
    host: str = "127.0.0.1",
    port: Optional[int] = None,
    log_dir: Optional[str | Path] = None,
    static_dir: Optional[str | Path] = None,
) -> None:
    app = create_app(cfg, log_dir=log_dir, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port if port is not None else cfg.service.port, log_level="warning")
