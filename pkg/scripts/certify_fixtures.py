#!/usr/bin/env python3
"""
Certify Fixtures Script

Analyzes every problem file in a directory and writes one JSON summary.

Usage:
    python scripts/certify_fixtures.py
    python scripts/certify_fixtures.py --dir problems --output artifacts/verdicts.json
"""

import sys
import json
import argparse
import logging
from pathlib import Path
from datetime import datetime, timezone

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.certifier import certify
from src.errors import SplitStabilityError
from src.problem_file import load_problem


def certify_directory(directory: Path) -> dict:
    """Certify every *.json problem under directory, sorted by name."""
    results = []
    for path in sorted(directory.glob("*.json")):
        print(f"[*] Analyzing {path.name}...")
        try:
            verdict = certify(load_problem(path))
        except SplitStabilityError as e:
            print(f"[!] {path.name}: {e}")
            results.append({"problem": path.name, "error": f"{type(e).__name__}: {e}"})
            continue
        results.append({
            "problem": path.name,
            "kind": verdict.kind,
            "verdict": verdict.verdict.value,
            "condition_holds": verdict.condition_holds,
            "witness": verdict.witness,
            "intersection": verdict.trace.intersection.describe(),
        })

    return {
        "success": all("error" not in r for r in results),
        "count": len(results),
        "results": results,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }


def main():
    parser = argparse.ArgumentParser(description="Certify every problem file in a directory")
    parser.add_argument("--dir", type=str, default="problems", help="Directory of problem files")
    parser.add_argument("--output", type=str, help="Output JSON file path")
    parser.add_argument("--debug", action="store_true", help="Enable debug logging")

    args = parser.parse_args()

    logging.basicConfig(
        level=logging.DEBUG if args.debug else logging.WARNING,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    )

    result = certify_directory(Path(args.dir))
    output_json = json.dumps(result, indent=2)

    if args.output:
        Path(args.output).parent.mkdir(parents=True, exist_ok=True)
        with open(args.output, "w") as f:
            f.write(output_json)
        print(f"[OK] Results saved to {args.output}")
    else:
        print(output_json)

    sys.exit(0 if result["success"] else 2)


if __name__ == "__main__":
    main()
