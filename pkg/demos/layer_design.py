"""Window-probability descent for a single viewpoint, printed move by move."""

from uavsense.layered import EstimatorConfig, LayeredOptConfig, coordinate_descent
from uavsense.scene import DistortionModel

cfg = LayeredOptConfig(n_layers=3, delta_lambda=0.1, estimator=EstimatorConfig("rank", 4000, 0),
                       sent=14, erasure=0.15, symbol_size=1, rate_unit=1.0)
design = coordinate_descent(DistortionModel(0.4), 12, cfg)

print("layer symbol counts:", design.allocation.counts)
for d, lam in zip(design.trace, design.lam_history):
    print(f"E[D] = {d:.4f}   lambda = {tuple(round(x, 2) for x in lam)}")
print("P(exactly l layers):", [round(float(p), 3) for p in design.prefix_probabilities])
