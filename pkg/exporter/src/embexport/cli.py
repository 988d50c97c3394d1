"""Command-line interface: encode texts/images and write one dataset file."""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ExportError
from .job import ExportJob, run_export

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".webp"}


def _load_texts(path: str | None) -> dict[str, str]:
    """JSON object mapping id -> instruction string."""
    if path is None:
        return {}
    doc = json.loads(Path(path).read_text())
    if not isinstance(doc, dict) or not all(
            isinstance(v, str) for v in doc.values()):
        raise ExportError("texts file must be a JSON object of id -> string")
    return doc


def _collect_images(spec: str | None) -> dict[str, str]:
    """A directory (ids are file stems) or a comma-separated path list."""
    if spec is None:
        return {}
    root = Path(spec)
    if root.is_dir():
        paths = sorted(p for p in root.iterdir()
                       if p.suffix.lower() in IMAGE_SUFFIXES)
    else:
        paths = [Path(p) for p in spec.split(",") if p]
    images = {}
    for p in paths:
        if p.stem in images:
            raise ExportError(f"duplicate image id {p.stem!r}")
        images[p.stem] = str(p)
    return images


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embexport",
        description="Export text and image embeddings to a dataset file")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("export", help="run one export job")
    p.add_argument("--model", default="clip-vit-b32",
                   help="encoder id (clip-vit-b32 or hashed-projection)")
    p.add_argument("--texts", help="JSON file of id -> instruction string")
    p.add_argument("--images", help="image directory or comma-separated paths")
    p.add_argument("--out", required=True, help="output dataset path")
    p.add_argument("--normalize", action="store_true",
                   help="L2-normalize every vector before writing")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        job = ExportJob(model_id=args.model,
                        texts=_load_texts(args.texts),
                        images=_collect_images(args.images),
                        output_path=args.out,
                        normalize=args.normalize)
        summary = run_export(job)
    except (ExportError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(summary))
    return 0


if __name__ == "__main__":
    sys.exit(main())
