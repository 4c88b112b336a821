"""Header records stamped on every artifact the CLI writes."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from gaest import __version__


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    p = Path(path)
    if p.is_dir():
        for child in sorted(q for q in p.rglob("*") if q.is_file()):
            h.update(str(child.relative_to(p)).encode())
            h.update(child.read_bytes())
    else:
        h.update(p.read_bytes())
    return h.hexdigest()[:16]


def make_header(subcommand: str, seed: int | None, inputs: dict[str, str | Path] | None = None) -> dict:
    digests = {name: file_digest(path) for name, path in sorted((inputs or {}).items())}
    return {"tool": "gaest", "version": __version__, "subcommand": subcommand,
            "seed": seed, "inputs": digests}


def header_line(header: dict | None, comment: str = "#") -> str:
    """One-line text rendering, e.g. ``# gaest 0.1.0 evaluate seed=7 inputs=manifest:ab12..``"""
    if header is None:
        return ""
    inputs = ",".join(f"{k}:{v}" for k, v in header.get("inputs", {}).items()) or "-"
    return (f"{comment} {header['tool']} {header['version']} {header['subcommand']} "
            f"seed={header['seed']} inputs={inputs}\n")


def header_json(header: dict) -> str:
    return json.dumps(header, sort_keys=True, separators=(",", ":"))
