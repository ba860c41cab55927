"""FCNN, multiple linear regression and nearest-generated-neighbour prediction.

Trains all three on 34 synthetic records (plus the GAN samples for the FCNN)
and scores them on the 25 held-out ones.

Run: python demos/05_yield_prediction.py   (a few seconds)
"""
from fermentor import data, predictor

samples = data.synth(59, seed=0)
train, test = predictor.split(samples, seed=0)
print(f"{len(train)} training rows, {len(test)} test rows")

mlr = predictor.fit_mlr(train)
print("MLR coefficients (intercept, C, H, S, A):", mlr.beta.round(3))

report = predictor.compare(train, test, predictor.CompareConfig(timing=False))
print()
print(report.to_text())

# with real data only, the linear model is hard to beat on 34 rows
cfg = predictor.CompareConfig(fcnn_data="real", timing=False)
print("\nFCNN on real rows only:", round(predictor.compare(train, test, cfg).mse["FCNN"], 4))
