"""
From tag attributes to simulator parameters
===========================================

Five random forests, one per stiffness group, map composition, family,
structure, density and thickness to the 20 simulator columns. When a tag
carries no density or thickness, similar fabrics in the dataset fill them in.
"""

import numpy as np

from tagphys.dataset import stratified_split
from tagphys.forest import PUBLISHED_HYPERPARAMS, fit_forest
from tagphys.params import FOREST_GROUPS
from tagphys.physmap import PredictConfig, predict_physics
from tagphys.retrieval import select_mode_cv
from tagphys.synthetic import make_t2p
from tagphys.tagparse import parse_tag

# a synthetic stand-in for measured fabrics: 300 records
ds = make_t2p(300, seed=0)
train, val, test = stratified_split(ds, seed=0)
print(len(train), len(val), len(test))

# fit the five group forests with the published settings
X = train.features()
models = {
    g: fit_forest(X, train.targets(g), PUBLISHED_HYPERPARAMS[g], seed=0, target_names=cols,
                  vocab_fingerprint=ds.vocab_fingerprint, group=g)
    for g, cols in FOREST_GROUPS.items()
}

# held-out error relative to always predicting the training mean
for g, f in models.items():
    Y = test.targets(g)
    ratio = np.abs(Y - f.predict(test.features())).mean() / np.abs(Y - train.targets(g).mean(axis=0)).mean()
    print(f"{g:<20} {ratio:.3f}")

# which aggregation of retrieved fabrics estimates density best here?
mode, report = select_mode_cv(train)
print(mode.value, report.mae)

# a tag without density or thickness
tag = parse_tag("95% Polyester, 5% Elastane", "jersey", "knit")
pred = predict_physics(tag, models, train, PredictConfig(dt_mode=mode.value))
print(pred.provenance["density_thickness"])
print(pred.params.stretch_stiffness, pred.params.bending_stiffness)
