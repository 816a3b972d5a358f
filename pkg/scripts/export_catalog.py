#!/usr/bin/env python3
"""Write every built-in example map as a JSON document into a directory."""
import argparse
import json
from pathlib import Path

from traintrack.catalog import EXAMPLES


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("outdir", nargs="?", default="catalog")
    args = ap.parse_args()
    out = Path(args.outdir)
    out.mkdir(parents=True, exist_ok=True)
    for name, build in sorted(EXAMPLES.items()):
        path = out / f"{name}.json"
        path.write_text(json.dumps(build().to_json(), indent=2, sort_keys=True) + "\n")
        print(path)


if __name__ == "__main__":
    main()
