"""Command-line front end: lattice export, meshing, simulation, sweeps.

Exit codes: 0 success, 2 configuration/validation failure, 3 solver failure.
Every run writes a JSON result manifest recording arguments, input hashes,
and produced artifacts.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    CommandError,
    ConfigError,
    ConvergenceError,
    DivergenceError,
    FormatError,
    GeometryError,
    ParseError,
    PlacementError,
    SolverError,
    TrunksimError,
    ValidationError,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3

_CONFIG_ERRORS = (
    ConfigError,
    ValidationError,
    ParseError,
    FormatError,
    GeometryError,
    CommandError,
    PlacementError,
    FileNotFoundError,
)
_SOLVER_ERRORS = (ConvergenceError, DivergenceError, SolverError)

PROTOCOL_VERSION = 1
DEFAULT_ENDPOINT = ("localhost", 8337)


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(args, inputs, outputs):
    entries = {}
    for p in inputs:
        p = Path(p)
        if p.exists():
            entries[str(p)] = _sha256(p)
    manifest = {
        "tool": "trunksim",
        "version": __version__,
        "subcommand": args.subcommand,
        "arguments": {
            k: v for k, v in vars(args).items() if k not in ("func", "subcommand")
        },
        "input_hashes": entries,
        "outputs": [str(o) for o in outputs],
    }
    path = Path(args.manifest) if args.manifest else None
    if path is None and outputs:
        path = Path(str(outputs[0]) + ".manifest.json")
    if path is not None:
        path.write_text(json.dumps(manifest, indent=2, default=str))
    return path


def _profile_dir(args):
    if getattr(args, "profile_dir", None):
        return args.profile_dir
    return os.environ.get("TRUNKSIM_PROFILE_DIR") or None


# ------------------------------------------------------------- subcommands


def _cmd_lattice(args):
    from .lattice import TpmsField, calibrate_isovalue, extract_isosurface, Envelope
    from .surface import write_stl

    if args.cell <= 0 or args.thickness <= 0 or args.box <= 0:
        raise ConfigError("cell, thickness, and box must be positive")
    if args.dry_run:
        return []
    t = calibrate_isovalue(
        TpmsField(cell_size_L=args.cell, isovalue_t=0.0),
        target_thickness=args.thickness,
        resolution=max(args.resolution, 16),
    )
    field = TpmsField(cell_size_L=args.cell, isovalue_t=t)
    env = Envelope(kind="box", box_min=(0.0, 0.0, 0.0), box_max=(args.box,) * 3)
    surface = extract_isosurface(field, env, resolution=args.resolution)
    write_stl(surface, args.out)
    return [args.out]


def _cmd_mesh_merge(args):
    from .mesh import merge_meshes
    from .mesh_io import read_vtk, write_vtk

    parts = [read_vtk(p) for p in args.inputs]
    if args.dry_run:
        return []
    merged = merge_meshes(parts, tol=args.tol)
    write_vtk(merged, args.out)
    return [args.out]


def _cmd_homogenize(args):
    from .fem import Material
    from .homogenize import (
        CompressionProtocol,
        fit_effective_modulus,
        virtual_compression,
    )
    from .lattice import TpmsField, calibrate_isovalue
    from .voxelize import lattice_voxel_mesh

    protocol = CompressionProtocol(strain_targets=tuple(args.strains))
    material = Material(young_modulus=args.base_E, poisson_ratio=args.nu)
    if args.dry_run:
        return []
    t = calibrate_isovalue(
        TpmsField(cell_size_L=args.cell, isovalue_t=0.0), target_thickness=args.thickness
    )
    field = TpmsField(cell_size_L=args.cell, isovalue_t=t)
    side = args.cells * args.cell
    mesh = lattice_voxel_mesh(field, (0, 0, 0), (side,) * 3, args.voxels_per_cell)
    curve = virtual_compression(mesh, material, protocol)
    curve.to_csv(args.out)
    outputs = [args.out]
    result = fit_effective_modulus(curve, strain_limit=args.fit_limit)
    result_path = Path(args.out).with_suffix(".modulus.json")
    result_path.write_text(result.to_json())
    outputs.append(result_path)
    return outputs


def _load_scene(scene_arg):
    from .fem import build_scene
    from .gripper import reference_scene

    if scene_arg == "reference":
        return reference_scene(), []
    if scene_arg == "reference-with-sensors":
        return reference_scene(with_sensors=True), []
    return build_scene(scene_arg), [scene_arg]


def _cmd_simulate(args):
    from .pneumatics import load_regime, run_regime

    scene, inputs = _load_scene(args.scene)
    profile = load_regime(args.regime, _profile_dir(args))
    if args.dry_run:
        return []
    traces, series, force_log, _ = run_regime(scene, profile, log_path=args.log)
    outputs = [args.log]
    if args.frames:
        _write_frames(scene, profile, args.frames)
        outputs.append(args.frames)
    return outputs


def _write_frames(scene, profile, path):
    """Replay the regime and dump viewer frame messages as JSON lines."""
    from .mesh import boundary_surface
    from .pneumatics import compute_angle
    from .fem import step_dynamic

    surf = boundary_surface(scene.mesh)
    used = np.unique(surf.triangles)
    remap = np.full(len(scene.mesh.nodes), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    state = scene.rest_state()
    with open(path, "w") as fh:
        topo = {
            "type": "topology",
            "protocol_version": PROTOCOL_VERSION,
            "vertex_count": int(len(used)),
            "triangles": remap[surf.triangles].tolist(),
            "rest_positions": np.round(scene.mesh.nodes[used], 6).ravel().tolist(),
            "monitor_ids": [m.id for m in scene.monitors],
        }
        fh.write(json.dumps(topo) + "\n")
        total = profile.total_duration
        while state.time <= total:
            state.pressures = profile.at(state.time)
            angles = [
                compute_angle(*state.positions[m.node_triplet]) for m in scene.monitors
            ]
            frame = {
                "type": "frame",
                "time_ms": state.time,
                "positions": np.round(state.positions[used], 6).ravel().tolist(),
                "pressures": state.pressures.tolist(),
                "angles": angles,
            }
            fh.write(json.dumps(frame) + "\n")
            state = step_dynamic(scene, state)


def _cmd_optics_sweep(args):
    from .optics import WaveguideGeometry, sweep_pattern

    base = WaveguideGeometry(length=args.length, width_W=args.width)
    if args.dry_run:
        return []
    report = sweep_pattern(
        base,
        d_steps=args.d_steps,
        w_steps=args.w_steps,
        d_range=tuple(args.d_range),
        w_range=tuple(args.w_range),
        angle_grid=tuple(args.angles),
        n_rays=args.rays,
        seed=args.seed,
        jobs=args.jobs,
    )
    report.to_csv(args.out)
    summary = Path(args.out).with_suffix(".summary.json")
    summary.write_text(report.to_json())
    return [args.out, summary]


def _cmd_place_sensors(args):
    from .gripper import default_sites
    from .placement import PlacementThresholds, build_report

    scene_a, inputs_a = _load_scene(args.scene)
    scene_b = None
    if args.scene_b:
        scene_b, _ = _load_scene(args.scene_b)
    thresholds = PlacementThresholds(
        amplitude_min_deg=args.amplitude_min,
        decoupling_max_deg=args.decoupling_max,
        stiffening_max_deg=args.stiffening_max,
    )
    sites = default_sites()
    if args.dry_run:
        return []
    report = build_report(
        scene_a,
        scene_b,
        sites,
        regimes=args.regimes,
        thresholds=thresholds,
        profile_dir=_profile_dir(args),
    )
    Path(args.out).write_text(report.to_json())
    print(report.summary())
    return [args.out]


def _cmd_teleop_serve(args):
    from .teleop_server import serve_teleop

    scene, inputs = _load_scene(args.scene)
    if args.dry_run:
        return []
    serve_teleop(scene, host=args.host, port=args.port, max_steps=args.max_steps)
    return []


# ---------------------------------------------------------------- parsing


def _add_common(sp):
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--dry-run", action="store_true")
    sp.add_argument("--manifest", default=None, help="result manifest path")


def build_parser():
    p = argparse.ArgumentParser(prog="trunksim")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="subcommand", required=True)

    sp = sub.add_parser("lattice", help="export a lattice solid as STL")
    sp.add_argument("--cell", type=float, required=True, help="unit cell size (mm)")
    sp.add_argument("--thickness", type=float, required=True, help="strut thickness (mm)")
    sp.add_argument("--box", type=float, required=True, help="cubic envelope side (mm)")
    sp.add_argument("--resolution", type=int, default=32)
    sp.add_argument("--out", required=True)
    _add_common(sp)
    sp.set_defaults(func=_cmd_lattice)

    sp = sub.add_parser("mesh-merge", help="merge tagged tet mesh parts")
    sp.add_argument("inputs", nargs="+")
    sp.add_argument("--tol", type=float, default=1e-4)
    sp.add_argument("--out", required=True)
    _add_common(sp)
    sp.set_defaults(func=_cmd_mesh_merge)

    sp = sub.add_parser("homogenize", help="virtual compression of a lattice cube")
    sp.add_argument("--cell", type=float, default=12.5)
    sp.add_argument("--thickness", type=float, default=1.5)
    sp.add_argument("--cells", type=int, default=3, help="cube side in unit cells")
    sp.add_argument("--voxels-per-cell", type=int, default=6)
    sp.add_argument("--base-E", dest="base_E", type=float, default=100.0)
    sp.add_argument("--nu", type=float, default=0.3)
    sp.add_argument("--strains", type=float, nargs="+", default=[0.2, 0.4, 0.6])
    sp.add_argument("--fit-limit", type=float, default=0.4)
    sp.add_argument("--out", required=True, help="stress-strain CSV path")
    _add_common(sp)
    sp.set_defaults(func=_cmd_homogenize)

    sp = sub.add_parser("simulate", help="play a pressure regime through a scene")
    sp.add_argument("--scene", required=True, help="manifest JSON or 'reference'")
    sp.add_argument("--regime", required=True)
    sp.add_argument("--log", required=True, help="run log CSV path")
    sp.add_argument("--frames", default=None, help="viewer frame JSONL path")
    sp.add_argument("--profile-dir", default=None)
    _add_common(sp)
    sp.set_defaults(func=_cmd_simulate)

    sp = sub.add_parser("optics-sweep", help="well-pattern goodness sweep")
    sp.add_argument("--length", type=float, default=25.0)
    sp.add_argument("--width", type=float, default=1.5)
    sp.add_argument("--d-steps", type=int, default=25)
    sp.add_argument("--w-steps", type=int, default=20)
    sp.add_argument("--d-range", type=float, nargs=2, default=[0.1, 1.0])
    sp.add_argument("--w-range", type=float, nargs=2, default=[0.2, 2.0])
    sp.add_argument("--angles", type=float, nargs="+", default=[0, 10, 20, 30, 40])
    sp.add_argument("--rays", type=int, default=100_000)
    sp.add_argument("--jobs", type=int, default=1)
    sp.add_argument("--out", required=True)
    _add_common(sp)
    sp.set_defaults(func=_cmd_optics_sweep)

    sp = sub.add_parser("place-sensors", help="evaluate the placement rules")
    sp.add_argument("--scene", required=True, help="Model A manifest or 'reference'")
    sp.add_argument("--scene-b", default=None, help="Model B manifest or 'reference-with-sensors'")
    sp.add_argument("--regimes", nargs="+", default=["close2"])
    sp.add_argument("--amplitude-min", type=float, default=40.0)
    sp.add_argument("--decoupling-max", type=float, default=5.0)
    sp.add_argument("--stiffening-max", type=float, default=5.0)
    sp.add_argument("--profile-dir", default=None)
    sp.add_argument("--out", required=True)
    _add_common(sp)
    sp.set_defaults(func=_cmd_place_sensors)

    sp = sub.add_parser("teleop-serve", help="stream frames over a local WebSocket")
    sp.add_argument("--scene", default="reference")
    sp.add_argument("--host", default=DEFAULT_ENDPOINT[0])
    sp.add_argument("--port", type=int, default=DEFAULT_ENDPOINT[1])
    sp.add_argument("--max-steps", type=int, default=0, help="stop after N steps (0 = run until stop)")
    _add_common(sp)
    sp.set_defaults(func=_cmd_teleop_serve)

    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        outputs = args.func(args)
    except _SOLVER_ERRORS as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_SOLVER
    except _CONFIG_ERRORS as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    except TrunksimError as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return EXIT_CONFIG
    inputs = []
    if hasattr(args, "inputs"):
        inputs += list(args.inputs)
    if getattr(args, "scene", None) and Path(str(args.scene)).exists():
        inputs.append(args.scene)
    if not args.dry_run:
        _write_manifest(args, inputs, outputs)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
