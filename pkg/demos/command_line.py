"""
Driving experiments from a config file
======================================

Each experiment kind reads a JSON config, writes ``config.json`` (a snapshot
that reproduces the run), ``record.json`` and CSV tables into an output
directory. The same entry point is available as ``quditspeed <kind>`` and
``python3 -m quditspeed <kind>``.
"""

import json
import tempfile
from pathlib import Path

from quditspeed.cli import main

out = Path(tempfile.mkdtemp())
cfg = out / "cfg.json"
cfg.write_text(json.dumps({"seed": 3, "optimization": {"T": 0.9, "omega_max": 20, "M": 10, "restarts": 1,
                                                       "max_iters": 50}}))

for kind in ("bound", "protocol-report", "optimize"):
    code = main([kind, "--config", str(cfg), "--out", str(out / kind)])
    print(kind, "exit code", code, sorted(p.name for p in (out / kind).iterdir()))

print((out / "bound" / "bound.csv").read_text())
record = json.loads((out / "optimize" / "record.json").read_text())
print("optimize result:", {k: record["result"][k] for k in ("f", "loss")})

# A stored run feeds the leakage report.
leak_cfg = out / "leak.json"
leak_cfg.write_text(json.dumps({"pulses": str(out / "optimize" / "run.json")}))
code = main(["leakage-report", "--config", str(leak_cfg), "--out", str(out / "leak")])
print("leakage-report exit code", code)
