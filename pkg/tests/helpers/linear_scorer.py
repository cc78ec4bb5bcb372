"""Scoring process for tests: c(x) = sigmoid(sum(x) - 0.5), one JSON line per request."""
import json
import math
import sys

for line in sys.stdin:
    x = json.loads(line)["x"]
    s = sum(x) - 0.5
    print(json.dumps({"p": 1.0 / (1.0 + math.exp(-s))}), flush=True)
