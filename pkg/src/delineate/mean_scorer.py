"""Reference external scorer: mean patch value along the requested path.

Run as ``python -m delineate.mean_scorer``.  It answers the same score as
the built-in ``mean`` scorer and is handy for checking the protocol.
"""

import json
import math
import sys


def score(request: dict) -> float:
    w = request["width"]
    values = request["values"]
    vals = [values[y * w + x] for x, y in request["polyline"]]
    return min(1.0, max(0.0, math.fsum(vals) / len(vals)))


def main() -> int:
    for line in sys.stdin:
        if not line.strip():
            continue
        sys.stdout.write(json.dumps({"score": score(json.loads(line))}) + "\n")
        sys.stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
