"""
Explaining a model that lives in another process
================================================

Any program that reads ``{"x": [...]}`` lines on stdin and answers
``{"p": ...}`` lines on stdout can be explained.  Here the scorer is a
tiny Python script written to a temporary directory; in practice it could
wrap a model in any language.
"""
import sys
import tempfile
import textwrap
from pathlib import Path

import numpy as np

from dbaexplain import Dataset, DbaParams, SubprocessClassifier, make_rng, tune_and_explain

SCORER = textwrap.dedent('''
    import json, math, sys
    for line in sys.stdin:
        x = json.loads(line)["x"]
        s = 3 * x[0] * x[0] + x[1] - 1
        print(json.dumps({"p": 1 / (1 + math.exp(-s))}), flush=True)
''')

with tempfile.TemporaryDirectory() as tmp:
    script = Path(tmp) / "scorer.py"
    script.write_text(SCORER)
    with SubprocessClassifier([sys.executable, str(script)]) as f:
        X = make_rng(0, "demo").uniform(-1.5, 1.5, size=(300, 2))
        D = Dataset(X, f.predict(X), ("a", "b"))
        x0 = np.array([0.2, 0.1])
        expl = tune_and_explain(D, x0, f, DbaParams(k=100, m=200, r_grid=(0.25, 0.5, 1.0)), seed=0)

# the boundary is the parabola b = 1 - 3 a^2, whose normal at a point is (6a, 1)
xb = expl.boundary_point
normal = np.array([6 * xb[0], 1.0])
cos = expl.coefficients @ normal / (np.linalg.norm(expl.coefficients) * np.linalg.norm(normal))
print("boundary point:", xb.round(4))
print("surrogate coefficients:", expl.coefficients.round(3))
print("cosine with the local normal of the true boundary:", round(float(cos), 4))
