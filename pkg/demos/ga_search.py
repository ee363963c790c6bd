"""Tune the threshold multiplier with the genetic search.

Run: python demos/ga_search.py

The search space here is just beta, the factor applied to the maximum
training error. Fitness is F1 on a labeled validation trace, so each
evaluation is one cheap threshold sweep over precomputed errors; the
forecaster trains exactly once.
"""

from dataclasses import replace

from cps_sentinel.detectors import ThresholdModel, threshold_detect
from cps_sentinel.forecaster import TrainConfig
from cps_sentinel.gaopt import GaConfig, GeneSpec, evolve
from cps_sentinel.metrics import score
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
ALL_SENSORS = ((0, "level"), (0, "flow"), (1, "level"), (1, "flow"))


def offset_attacks(spans):
    return [
        AttackSpec("MSMP", start=s, duration=d, targets=ALL_SENSORS,
                   manipulation=("offset", -6.0))
        for s, d in spans
    ]


def main():
    train = simulate_normal(PLANT, 4000)
    val = inject_attacks(
        simulate_normal(replace(PLANT, seed=1), 800),
        offset_attacks([(100, 50), (300, 40), (550, 60)]),
    )
    test = inject_attacks(
        simulate_normal(replace(PLANT, seed=2), 800),
        offset_attacks([(150, 45), (420, 55), (650, 40)]),
    )

    settings = PipelineSettings(dropout=0.0, learning_rate=0.01)
    budget = TrainConfig(epochs=60, batch_size=64, learning_rate=0.01,
                         early_stop_patience=10, validation_fraction=0.1)
    fitted = fit_pipeline(train, settings, budget, seed=0)
    _, val_errors = detect_frame(fitted, val)
    val_labels = val.labels_at(val_errors.target_indices)
    print(f"forecaster ready, delta {fitted.train_delta:.4f}; searching beta in [1, 3]")

    def fitness(genome):
        model = ThresholdModel(delta=fitted.train_delta, beta=genome.beta)
        _, report = score(threshold_detect(model, val_errors), val_labels)
        return report.f1

    config = GaConfig(
        population_size=10,
        generations=8,
        tournament_size=3,
        crossover_rate=0.9,
        mutation_rate=0.3,
        elitism_count=1,
        seed=0,
    )
    result = evolve(config, fitness, domains={"beta": GeneSpec(low=1.0, high=3.0)})
    print("\n  gen   best F1   mean F1")
    for gen, (best, mean) in enumerate(zip(result.best_history, result.mean_history)):
        print(f"  {gen:3d}   {best:.4f}    {mean:.4f}")

    best_beta = result.best.genome.beta
    tuned = ThresholdModel(delta=fitted.train_delta, beta=best_beta)
    _, test_errors = detect_frame(fitted, test)
    _, report = score(threshold_detect(tuned, test_errors),
                      test.labels_at(test_errors.target_indices))
    print(f"\nbest beta {best_beta:.4f} (validation F1 {result.best.fitness:.4f})")
    print(f"held-out test: precision {report.precision:.4f}, "
          f"recall {report.recall:.4f}, F1 {report.f1:.4f}")


if __name__ == "__main__":
    main()
