"""Train a linear SVM on two Gaussian blobs and evade it.

For a linear model under squared Euclidean cost the cheapest evasion moves
straight towards the hyperplane, so the gradient attack can be checked
against that distance directly.
"""
import numpy as np

from wafs.classifier import TrainConfig, train
from wafs.data import Dataset, FeatureDomain, synth_two_gaussians
from wafs.evasion import L2SQ, ConstraintSet, SolverParams, min_cost_evasion

base = synth_two_gaussians(100, 2, 2.0, seed=0)
ds = Dataset(base.features, base.labels, tuple(FeatureDomain.continuous(-50, 50) for _ in range(2)))
model = train(ds, TrainConfig(C=1.0))

cons = ConstraintSet.from_domains(ds.domains)
params = SolverParams(step_size=0.05)
w_norm = np.linalg.norm(model.weights)

print(f"{'g(x)':>8} {'attack cost':>12} {'g(x)/|w|':>10}")
for x in ds.features[ds.labels == 1][:8]:
    g = float(model.decision_function(x))
    if g < 0:
        continue
    res = min_cost_evasion(model, x, L2SQ, cons, params)
    # res.cost is the squared distance the solver minimises
    print(f"{g:8.3f} {np.sqrt(res.cost):12.4f} {g / w_norm:10.4f}")
