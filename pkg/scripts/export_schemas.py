"""Write every wire schema to docs/schemas/<name>.json."""

import json
import sys
from pathlib import Path

from eohazard.agents import schemas

out = Path(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "docs" / "schemas")
out.mkdir(parents=True, exist_ok=True)
for name in schemas.SCHEMAS:
    (out / f"{name}.json").write_text(json.dumps(schemas.schema(name), indent=2, sort_keys=True) + "\n")
    print(out / f"{name}.json")
