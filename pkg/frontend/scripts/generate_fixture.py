"""Record the 600-frame replay fixture used by the viewer tests.

Runs a small cantilever scene through the simulator CLI twice over the same
pressure schedule: once for the frame stream (JSONL) and once for the run
log (CSV). Both come from the same stepping loop, so per-step values match
exactly.

Usage: python3 frontend/scripts/generate_fixture.py
"""

import json
import sys
from pathlib import Path

HERE = Path(__file__).parent
FIXTURES = HERE.parent / "test" / "fixtures"

PROFILE_HEADER = "time_ms,cav1_kPa,cav2_kPa,cav3_kPa,cav4_kPa,cav5_kPa"


def main():
    from trunksim.cli import main as cli_main
    from trunksim.mesh_io import write_vtk
    from trunksim.voxelize import box_voxel_mesh

    FIXTURES.mkdir(parents=True, exist_ok=True)
    work = FIXTURES / "scene"
    work.mkdir(exist_ok=True)

    mesh = box_voxel_mesh((0, 0, 0), (4, 1, 1), 1.0)
    write_vtk(mesh, work / "bar.vtk")
    manifest = {
        "mesh_file": "bar.vtk",
        "materials": {
            "lattice_volume": {
                "E_kPa": 1000.0,
                "nu": 0.3,
                "rayleigh_mass": 0.35,
                "rayleigh_stiffness": 0.02,
            }
        },
        "fixed_boxes": [
            {"min": [-0.1, -0.1, -0.1], "max": [0.1, 1.1, 1.1], "stiffness_N_per_mm": 50.0}
        ],
        "dirichlet_boxes": [{"min": [-0.1, -0.1, -0.1], "max": [0.1, 1.1, 1.1]}],
        "cavities": [{"id": 1, "min": [-0.1, -0.1, 0.9], "max": [4.1, 1.1, 1.1]}],
        "monitors": [{"id": 1, "anchors": [[0, 0, 1], [2, 0, 1], [4, 0, 1]]}],
        "force_roi": {"min": [-0.1, -0.1, -0.1], "max": [0.1, 1.1, 1.1]},
        "gravity": [0.0, 0.0, 0.0],
        "dt_ms": 10.0,
    }
    (work / "scene.json").write_text(json.dumps(manifest, indent=2))

    # schedule sized so the stepping loop emits exactly 600 frames at dt=10:
    # pre-hold 500 + last sample 4995 + post-hold 500 = 5995 ms -> steps 0..5990
    profiles = work / "profiles"
    profiles.mkdir(exist_ok=True)
    rows = ["0,0,0,0,0,0", "1000,8,0,0,0,0", "2500,-6,0,0,0,0", "4995,10,0,0,0,0"]
    (profiles / "close.csv").write_text(PROFILE_HEADER + "\n" + "\n".join(rows) + "\n")

    code = cli_main(
        [
            "simulate",
            "--scene", str(work / "scene.json"),
            "--regime", "close",
            "--profile-dir", str(profiles),
            "--log", str(FIXTURES / "run.csv"),
            "--frames", str(FIXTURES / "replay.jsonl"),
            "--manifest", str(work / "result.json"),
        ]
    )
    if code != 0:
        sys.exit(code)
    n_frames = sum(
        1 for line in (FIXTURES / "replay.jsonl").open() if '"frame"' in line
    )
    print(f"wrote {n_frames} frames")
    assert n_frames == 600, n_frames


if __name__ == "__main__":
    main()
