"""Command line front end: flags mirror the ExportJob fields."""
from __future__ import annotations

import argparse
import sys

from .exporter import ExportError, ExportJob, export


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="embed-export",
        description="Encode a sentence JSONL file into a SEB1 vector store.",
    )
    parser.add_argument("--model", required=True,
                        help="sentence-encoder checkpoint name or path")
    parser.add_argument("--input", required=True,
                        help='JSONL with {"doc","sent","text"} per line')
    parser.add_argument("--vectors-out", required=True)
    parser.add_argument("--manifest-out", required=True)
    parser.add_argument("--batch-size", type=int, default=32)
    parser.add_argument("--device", default=None,
                        help="torch device hint, e.g. cpu or cuda")
    args = parser.parse_args(argv)

    job = ExportJob(model=args.model, input_path=args.input,
                    vectors_out=args.vectors_out,
                    manifest_out=args.manifest_out,
                    batch_size=args.batch_size, device=args.device)
    try:
        rows = export(job)
    except ExportError as exc:
        print(f"embed-export: {exc}", file=sys.stderr)
        return 1
    print(f"embed-export: wrote {rows} rows -> {args.vectors_out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
