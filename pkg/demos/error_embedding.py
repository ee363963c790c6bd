"""From prediction errors to the 2-D lagged embedding the detectors consume.

Run: python demos/error_embedding.py

Each error e_t pairs with its lagged neighbour as (e_t, e_t-lag). Training
errors cluster near the origin; augmentation then plants a synthetic
attack-like cloud at (2 delta, 2 delta) so the clustering detector has a
second population to find before any real attack is seen.
"""

from dataclasses import replace

import numpy as np

from cps_sentinel.errorspace import augment, embed
from cps_sentinel.forecaster import TrainConfig
from cps_sentinel.pipeline import PipelineSettings, detect_frame, fit_pipeline
from cps_sentinel.plantsim import AttackSpec, PlantConfig, inject_attacks, simulate_normal

PLANT = PlantConfig(
    stage_count=2,
    capacities=(1000.0, 1000.0),
    inflows=(8.0, 8.0),
    outflows=(8.0, 8.0),
    noise_sigma=0.1,
    seed=0,
)
ATTACK = AttackSpec(
    "MSMP",
    start=200,
    duration=60,
    targets=((0, "level"), (0, "flow"), (1, "level"), (1, "flow")),
    manipulation=("offset", -6.0),
)


def histogram(values, lo, hi, buckets=12, width=46):
    counts, edges = np.histogram(values, bins=buckets, range=(lo, hi))
    peak = max(int(counts.max()), 1)
    for count, left, right in zip(counts, edges, edges[1:]):
        bar = "#" * round(width * count / peak)
        print(f"  [{left:.3f}, {right:.3f})  {count:5d} {bar}")


def main():
    train = simulate_normal(PLANT, 3000)
    settings = PipelineSettings(dropout=0.0, learning_rate=0.01)
    budget = TrainConfig(epochs=40, batch_size=64, learning_rate=0.01,
                         early_stop_patience=10, validation_fraction=0.1)
    fitted = fit_pipeline(train, settings, budget, seed=0)
    print(f"forecaster ready: delta {fitted.train_delta:.4f}, "
          f"sigma {fitted.train_sigma:.4f}")

    test = inject_attacks(simulate_normal(replace(PLANT, seed=3), 600), [ATTACK])
    _, errors = detect_frame(fitted, test)
    labels = test.labels_at(errors.target_indices)

    embedding = embed(errors, lag=settings.lag)
    print(f"\nembedded {len(embedding)} points at lag {settings.lag}")
    attacked = embedding.points[labels[settings.lag:]]
    normal = embedding.points[~labels[settings.lag:]]
    print(f"  normal rows:  mean ({np.mean(normal[:, 0]):.4f}, {np.mean(normal[:, 1]):.4f})")
    print(f"  attack rows:  mean ({np.mean(attacked[:, 0]):.4f}, {np.mean(attacked[:, 1]):.4f})")

    augmented = augment(
        embedding,
        delta=fitted.train_delta,
        sigma_train=fitted.train_sigma,
        fraction=0.3,
        seed=9,
    )
    synth = augmented.points[augmented.synthetic_flags]
    print(f"\naugmented with {len(synth)} synthetic points around "
          f"(2 delta, 2 delta) = ({2 * fitted.train_delta:.3f}, {2 * fitted.train_delta:.3f})")

    hi = float(max(augmented.points[:, 0].max(), 0.01))
    print("\ncurrent-error axis, real points:")
    histogram(augmented.points[~augmented.synthetic_flags][:, 0], 0.0, hi)
    print("current-error axis, synthetic points:")
    histogram(synth[:, 0], 0.0, hi)
    print("\ntwo separated populations: exactly what a 2-cluster fit needs.")


if __name__ == "__main__":
    main()
