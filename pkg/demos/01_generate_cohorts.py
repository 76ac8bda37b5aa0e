"""Generate both synthetic cohorts and look at their structure.

Run:  python3 demos/01_generate_cohorts.py
"""
import numpy as np

from pathrl.schema import load_schema
from pathrl.synth import (DegradationSpec, degrade, make_anemia_dataset,
                          make_lupus_dataset, split, write_csv)

# ---------------------------------------------------------------- anemia ----
# Seven diagnosis classes are sampled from class-conditional uniform ranges,
# three lab values are derived from identities, and an eighth class appears
# when values needed by the labeling tree are deleted.
anemia = make_anemia_dataset(n_per_class=10_000, seed=7)
print(f"anemia: {len(anemia)} records, {anemia.schema.n_features} features")
for name, count in anemia.class_counts().items():
    print(f"  {name:<40} {count}")

# hematocrit is exactly 3x hemoglobin on every record
hb = anemia.x[:, anemia.schema.index("hemoglobin")]
hct = anemia.x[:, anemia.schema.index("hematocrit")]
print("max |hct - 3*hb| =", np.abs(hct - 3 * hb).max())

# ----------------------------------------------------------------- lupus ----
# An entry-criterion feature gates the diagnosis; the label comes from a
# weighted criteria score where only the best finding per category counts.
lupus = make_lupus_dataset(n_positive_ana=50_000, n_negative_ana=20_000, seed=7)
print(f"\nlupus: {len(lupus)} records -> {lupus.class_counts()}")

# ------------------------------------------------------------- degradation --
# Training-set corruption used by the robustness experiments. Validation and
# test splits always stay clean.
parts = split(anemia, seed=11)
noisy = degrade(parts.train, DegradationSpec(kind="anemia-noise", level=0.2, seed=1))
sparse = degrade(noisy, DegradationSpec(kind="missingness", level=0.3, seed=2))
print(f"\ntrain records degraded: {len(sparse)}; "
      f"missing rate {np.isnan(sparse.x).mean():.3f}")

write_csv("anemia_cohort.csv", anemia)
print("\nwrote anemia_cohort.csv")
