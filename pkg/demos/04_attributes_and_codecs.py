"""
Attributes and label stability
==============================

DBA-Att explains in terms of attributes defined on a latent space.  With
the identity codec and one annotator per coordinate it reduces to the
tabular method.  A lossy codec can change the label of an input; such
inputs are refused rather than explained.
"""
import logging
import warnings

import numpy as np

from dbaexplain import (
    AffineCodec,
    DbaParams,
    IdentityCodec,
    LabelInstabilityError,
    build_run,
    coordinate_annotators,
    explain_att,
    label_stability,
    resolve_config,
    train_annotators,
    tune_and_explain,
)

logging.basicConfig(level=logging.ERROR)
warnings.simplefilter("ignore")

run = build_run(resolve_config({"seed": 7}))
f, D = run.classifier, run.train
x0 = run.test.points[run.select_points()[0]]
params = DbaParams(k=1000, m=500)

identity = IdentityCodec()
att = explain_att(D, x0, f, identity, coordinate_annotators(5, names=D.feature_names), params, seed=1)
tab = tune_and_explain(D, x0, f, params, seed=1)
cos = att.latent_direction @ tab.coefficients / (np.linalg.norm(att.latent_direction) * np.linalg.norm(tab.coefficients))
print("identity codec, coordinate annotators")
for name, c in zip(att.names, att.coefficients):
    print(f"  {name:>3} {c:+.3f}")
print("  cosine with the tabular explanation:", round(float(cos), 4))

# annotators trained on the binary "larger than the midpoint" attributes
trained = train_annotators(D.points, D.attributes, D.attribute_names, lam=0.1)
att = explain_att(D, x0, f, identity, trained, params, seed=1)
print("\ntrained attribute annotators")
for name, c in sorted(zip(att.names, att.coefficients), key=lambda t: -abs(t[1])):
    print(f"  {name:>9} {c:+.3f}")

# a two-component PCA codec throws information away
lossy = AffineCodec.fit(D.points, n_components=2)
print("\nlabel stability, identity:", label_stability(identity, f, run.test.points))
print("label stability, 2-component PCA:", round(label_stability(lossy, f, run.test.points), 3))
unstable = next(x for x in run.test.points if f.predict(lossy.roundtrip(x)) != f.predict(x))
try:
    explain_att(D, unstable, f, lossy, coordinate_annotators(2), params)
except LabelInstabilityError as exc:
    print("refused:", exc)
