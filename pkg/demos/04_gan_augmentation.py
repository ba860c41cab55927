"""Growing 34 fermentation records into 500 with a small GAN and an MSE filter.

Run: python demos/04_gan_augmentation.py   (a few seconds)
"""
import numpy as np

from fermentor import data, predictor
from fermentor.augment import GanConfig, augment, mse_filter

real = data.synth(34, seed=0)
scaler = predictor.fit_scaler(real)
Z = scaler.scale(real)  # the GAN works in [0, 1] per column

# the filter on its own: keep a candidate if some real row is within tau
cands = np.vstack([Z[0] + 0.1, np.full(5, 2.0)])
kept = mse_filter(cands, Z, threshold=0.15)
print("filter keeps", len(kept.samples), "of 2; matched real row", kept.matched_real, "mse", kept.mse.round(3))

cfg = GanConfig(threshold=0.15, target_count=500, seed=0)
gen = augment(Z, cfg)
print(f"\naccepted {len(gen.samples)} of {cfg.target_count}, overall acceptance {gen.acceptance_rate:.3f}")
for r in gen.round_stats:
    print(f"  round {r['round']}: drew {r['drawn']}, kept {r['kept']}, "
          f"discriminator accuracy {r['d_accuracy']:.2f}")

raw = scaler.unscale(gen.samples)
print("\n            real mean  generated mean")
for name, a, b in zip(data.COLUMNS, real.mean(axis=0), raw.mean(axis=0)):
    print(f"  {name:12s} {a:9.3f}  {b:9.3f}")
