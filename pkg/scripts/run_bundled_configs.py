"""Run every bundled experiment config and print the merged table.

Writes results, tables, and timing sidecars into ./bundled-results (or
the directory given as the first argument).
"""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from amalgamlab.runner import render_report, run

CONFIG_DIR = Path(__file__).resolve().parent.parent / "src" / "amalgamlab" / "configs"


def main() -> None:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("bundled-results")
    results = []
    for config in sorted(CONFIG_DIR.glob("*.json")):
        print(f"running {config.name} ...", flush=True)
        paths = run(config, out_dir=out)
        results.append(paths["results"])
    print()
    print(render_report(results))


if __name__ == "__main__":
    main()
