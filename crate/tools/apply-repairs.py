#!/usr/bin/env python3
"""Writes fixtures/repairs/<name>.sol from the corpus fixture plus its one-line fix."""
import json
import re
from pathlib import Path

root = Path(__file__).resolve().parent.parent
manifest = json.loads((root / "fixtures/repairs/repairs.json").read_text())
marker = re.compile(r"\s*// expect: \w+$")

for r in manifest["repairs"]:
    lines = (root / "fixtures/corpus" / f"{r['fixture']}.sol").read_text().split("\n")
    lines = [marker.sub("", l) for l in lines]
    i = r["line"] - 1
    if r["op"] == "replace":
        lines[i] = r["text"]
    else:
        lines.insert(i, r["text"])
    (root / "fixtures/repairs" / f"{r['fixture']}.sol").write_text("\n".join(lines))
