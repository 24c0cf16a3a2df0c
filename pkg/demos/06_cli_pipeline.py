"""The command line pipeline: probe, metrics, compare, selfcheck.

Long-running studies live behind the `multiorder` command rather than
a Python session.  A JSON config describes the run; `probe` writes a
resumable archive of interaction records; `metrics` folds an archive
into per-order CSVs; `compare` diffs two archives on the same grid.
This script drives the same entry point the installed command uses,
so every file it mentions is exactly what a shell run would produce.
"""

import json
import tempfile
from pathlib import Path

from multiorder.cli import main

root = Path(tempfile.mkdtemp(prefix="multiorder-demo-"))

# Two runs over the same grid: one game made of damped local pair
# detectors, one that pays only for the grand coalition.  Both probe
# every pair of a 9-player game exactly, keeping per-context samples
# so the disentanglement metric is available later.
configs = {}
for name, kind, params in (
    ("local", "local_pairs", {"g": 3, "damping": 0.5}),
    ("global", "full_coalition", {"n": 9, "c": 4.0}),
):
    config = {
        "game": {"source": "synthetic", "kind": kind, "params": params},
        "n": 9,
        "out_dir": str(root / name),
        "seed": 11,
        "mode": "exact",
        "metrics": ["strength", "normalized", "disentanglement", "average"],
        "retain_deltas": True,
    }
    path = root / f"{name}.json"
    path.write_text(json.dumps(config, indent=2))
    configs[name] = path

print("== probe ==")
for name, path in configs.items():
    rc = main(["probe", "--config", str(path)])
    print(f"probe {name}: exit {rc}")

# The archive directory is self-describing: a header, one CSV per
# sample, the resolved config, and a manifest of run facts.
out = root / "local"
print("\narchive layout:")
for p in sorted(out.rglob("*")):
    if p.is_file():
        print(f"  {p.relative_to(root)}")
manifest = json.loads((out / "manifest.json").read_text())
print(f"evaluator calls: {manifest['evaluator_calls']}, "
      f"cache hit rate: {manifest['cache_hit_rate']:.3f}")

# Rerunning the same config is a no-op: every sample is already in the
# archive, and the bytes on disk do not change.
print("\n== probe again (resume is a no-op) ==")
main(["probe", "--config", str(configs["local"])])

print("\n== metrics ==")
rc = main(["metrics", str(out)])
print(f"metrics: exit {rc}")
print("\nnormalized strength of the local game:")
print((out / "metrics-normalized.csv").read_text(), end="")

# compare needs both archives on the same player count and orders; it
# writes one CSV of per-order differences (first minus second).
print("\n== compare ==")
rc = main([
    "compare", str(root / "global"), str(root / "local"),
    "--metric", "avg", "--out", str(root / "delta.csv"),
])
print(f"compare: exit {rc}")
print((root / "delta.csv").read_text(), end="")

# selfcheck runs the engine's invariant suite on seeded games and is
# the fastest way to validate an installation.
print("\n== selfcheck ==")
rc = main(["selfcheck", "--sizes", "4,6"])
print(f"selfcheck: exit {rc}")

print(f"\neverything under {root}")
