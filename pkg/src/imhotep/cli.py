"""Command line entry points: serve, render, validate.

Exit codes: 0 success, 1 data errors, 2 argument errors.  Environment
overrides: IMHOTEP_PORT and IMHOTEP_WORKERS.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .camera import StereoRig
from .dicom import assemble_series, parse_dicom_file
from .errors import ImhotepError
from .mesh import load_mesh_file
from .patient import load_patient_directory
from .render import RenderSettings, render_frame, render_view
from .scene import RoomLayout, Scene, annotations_from_json
from .service import DEFAULT_PORT, Service, ServiceConfig
from .session import SessionConfig
from .transfer import TransferFunction


def _env_int(name: str, fallback: int) -> int:
    raw = os.environ.get(name)
    if raw is None:
        return fallback
    try:
        return int(raw)
    except ValueError:
        raise SystemExit(f"environment variable {name} must be an integer, got {raw!r}")


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        width, height = int(w), int(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like 640x480, got {text!r}")
    if width < 1 or height < 1:
        raise argparse.ArgumentTypeError("image dimensions must be positive")
    return width, height


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="imhotep",
        description="Headless surgical-visualization engine",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_serve = sub.add_parser("serve", help="run the session service")
    p_serve.add_argument("--patient", help="patient directory preloaded into new sessions")
    p_serve.add_argument("--port", type=int,
                         default=_env_int("IMHOTEP_PORT", DEFAULT_PORT))
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--workers", type=int,
                         default=_env_int("IMHOTEP_WORKERS", os.cpu_count() or 1))
    p_serve.add_argument("--size", type=_parse_size, default=(640, 480),
                         help="session frame size, WxH")

    p_render = sub.add_parser("render", help="batch-render deterministic images")
    p_render.add_argument("--patient", required=True)
    p_render.add_argument("--view", default="coronal",
                          choices=("coronal", "sagittal", "transverse"))
    p_render.add_argument("--tf", help="transfer-function JSON overriding the patient's")
    p_render.add_argument("--out", required=True, help="output path prefix")
    p_render.add_argument("--stereo", action="store_true")
    p_render.add_argument("--ipd", type=float, default=64.0, help="mm")
    p_render.add_argument("--size", type=_parse_size, default=(640, 480))
    p_render.add_argument("--step", type=float, help="sampling step in mm")
    p_render.add_argument("--workers", type=int,
                          default=_env_int("IMHOTEP_WORKERS", os.cpu_count() or 1))

    p_validate = sub.add_parser("validate", help="check a patient directory")
    p_validate.add_argument("directory")
    return parser


def _cmd_render(args) -> int:
    try:
        data = load_patient_directory(args.patient)
        scene = Scene()
        scene.load_patient(data)
        if args.tf:
            scene.transfer = TransferFunction.load(args.tf)
        scene.set_view(args.view)
    except (ImhotepError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    width, height = args.size
    camera = scene.camera(width, height)
    settings = RenderSettings(step=args.step, workers=args.workers)
    snapshot = scene.render_scene()
    if args.stereo:
        rig = StereoRig(center=camera, ipd=args.ipd)
        left, right = render_frame(snapshot, rig, settings)
        left_path = f"{args.out}_left.png"
        right_path = f"{args.out}_right.png"
        left.save_png(left_path)
        right.save_png(right_path)
        print(left_path)
        print(right_path)
    else:
        fb = render_view(snapshot, camera, settings)
        out_path = f"{args.out}.png"
        fb.save_png(out_path)
        print(out_path)
    return 0


def _cmd_validate(directory: str) -> int:
    root = Path(directory)
    failures = 0

    def report(path, error=None):
        nonlocal failures
        if error is None:
            print(f"ok      {path}")
        else:
            failures += 1
            print(f"ERROR   {path}: {error}")

    if not root.is_dir():
        print(f"ERROR   {root}: not a directory")
        return 1

    manifest = root / "meshes" / "meshes.json"
    if manifest.exists():
        entries = []
        try:
            entries = json.loads(manifest.read_text(encoding="utf-8"))
            report(manifest)
        except (OSError, json.JSONDecodeError) as exc:
            report(manifest, exc)
        for entry in entries if isinstance(entries, list) else []:
            mesh_path = root / "meshes" / str(entry.get("file", "?"))
            try:
                load_mesh_file(mesh_path)
                report(mesh_path)
            except (OSError, ImhotepError, ValueError) as exc:
                report(mesh_path, exc)
    else:
        report(manifest, "missing (required)")

    dicom_dir = root / "dicom"
    if dicom_dir.is_dir():
        datasets = []
        for path in sorted(dicom_dir.iterdir()):
            try:
                with open(path, "rb") as fh:
                    ds = parse_dicom_file(fh.read())
                ds.validate_image()
                datasets.append(ds)
                report(path)
            except (OSError, ImhotepError) as exc:
                report(path, exc)
        if len(datasets) >= 2:
            try:
                assemble_series(datasets)
                report(f"{dicom_dir} (series)")
            except ImhotepError as exc:
                report(f"{dicom_dir} (series)", exc)

    for name, loader in (
        ("patient.json", lambda p: json.loads(p.read_text(encoding="utf-8"))),
        ("annotations.json",
         lambda p: annotations_from_json(json.loads(p.read_text(encoding="utf-8")))),
        ("transfer.json",
         lambda p: TransferFunction.from_json_dict(json.loads(p.read_text(encoding="utf-8")))),
    ):
        path = root / name
        if path.exists():
            try:
                loader(path)
                report(path)
            except (OSError, json.JSONDecodeError, KeyError, ValueError, ImhotepError) as exc:
                report(path, exc)

    if failures:
        print(f"{failures} problem(s) found")
        return 1
    print("patient directory is valid")
    return 0


def _cmd_serve(args) -> int:
    width, height = args.size
    config = ServiceConfig(
        host=args.host,
        port=args.port,
        patient_path=args.patient,
        session=SessionConfig(width=width, height=height, workers=args.workers),
    )
    try:
        service = Service(config)
    except ImhotepError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"serving on ws://{args.host}:{service.port}")
    try:
        service.serve_forever()
    except KeyboardInterrupt:
        service.stop()
    return 0


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.subcommand == "render":
        return _cmd_render(args)
    if args.subcommand == "validate":
        return _cmd_validate(args.directory)
    return _cmd_serve(args)


def main() -> None:
    sys.exit(run())
