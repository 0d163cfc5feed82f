"""WebSocket teleoperation bridge: streams frames, accepts command messages.

Protocol: length-one JSON messages per WebSocket frame with a "type" field.
The server sends {type: topology} once per connection, then {type: frame}
after every simulation step; the client sends {type: command}. Malformed or
unknown commands are answered with {type: error} without closing the stream.
"""

from __future__ import annotations

import asyncio
import json
import logging

import numpy as np

from .errors import CommandError
from .fem import SimScene, step_dynamic
from .mesh import boundary_surface
from .pneumatics import TeleopCommand, TeleopSession, compute_angle

log = logging.getLogger(__name__)

PROTOCOL_VERSION = 1


def _topology_message(scene: SimScene, used, remap):
    return {
        "type": "topology",
        "protocol_version": PROTOCOL_VERSION,
        "vertex_count": int(len(used)),
        "triangles": remap[boundary_surface(scene.mesh).triangles].tolist(),
        "rest_positions": np.round(scene.mesh.nodes[used], 6).ravel().tolist(),
        "monitor_ids": [m.id for m in scene.monitors],
    }


def _frame_message(scene, state, used):
    angles = [
        compute_angle(*state.positions[m.node_triplet]) for m in scene.monitors
    ]
    return {
        "type": "frame",
        "time_ms": state.time,
        "positions": np.round(state.positions[used], 6).ravel().tolist(),
        "pressures": state.pressures.tolist(),
        "angles": angles,
    }


def parse_command(payload) -> TeleopCommand:
    if payload.get("type") != "command":
        raise CommandError(f"unexpected message type {payload.get('type')!r}")
    kind = payload.get("kind")
    return TeleopCommand(
        kind=kind,
        cavity=payload.get("cavity"),
        axis=payload.get("axis"),
        step=float(payload.get("step") or 0.0),
    )


async def _run_connection(websocket, scene: SimScene, max_steps: int):
    session = TeleopSession(scene)
    surf = boundary_surface(scene.mesh)
    used = np.unique(surf.triangles)
    remap = np.full(len(scene.mesh.nodes), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    await websocket.send(json.dumps(_topology_message(scene, used, remap)))
    state = scene.rest_state()
    steps = 0
    while not session.stopped and (max_steps == 0 or steps < max_steps):
        # drain pending commands without blocking the stepping loop
        while True:
            try:
                raw = await asyncio.wait_for(websocket.recv(), timeout=0.001)
            except asyncio.TimeoutError:
                break
            try:
                session.apply(parse_command(json.loads(raw)))
            except (CommandError, ValueError, KeyError) as exc:
                await websocket.send(
                    json.dumps({"type": "error", "message": str(exc)})
                )
        state.pressures = session.targets.copy()
        state = step_dynamic(scene, state)
        steps += 1
        await websocket.send(json.dumps(_frame_message(scene, state, used)))
    await websocket.close()


def serve_teleop(scene: SimScene, host="localhost", port=8337, max_steps=0):
    """Blocking single-client server; returns after the session stops."""
    import websockets

    async def main():
        done = asyncio.Event()

        async def handler(websocket):
            try:
                await _run_connection(websocket, scene, max_steps)
            except websockets.ConnectionClosed:
                log.info("teleop client disconnected")
            finally:
                done.set()

        async with websockets.serve(handler, host, port):
            log.info("teleop server on ws://%s:%d", host, port)
            await done.wait()

    asyncio.run(main())
