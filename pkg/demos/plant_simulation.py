"""Generate plant traces and see what an injected attack changes.

Run: python demos/plant_simulation.py

A small two-stage tank plant with a bang-bang controller: the valve opens
below 40% of capacity, the pump drains above 80%. Readings carry Gaussian
noise; attacks overwrite what the sensors report, never the physics.
"""

import os
import tempfile

import numpy as np

from cps_sentinel.dataio import load_csv, save_csv
from cps_sentinel.plantsim import AttackSpec, PlantConfig, inject_attacks, simulate_normal

PLANT = PlantConfig(
    stage_count=2,
    capacities=(100.0, 100.0),
    inflows=(2.0, 2.0),
    outflows=(1.6, 1.6),
    noise_sigma=0.5,
    seed=7,
)


def print_rows(frame, rows, note):
    names = frame.schema.names
    print(f"\n{note}")
    print("  t    " + "  ".join(f"{n:>9s}" for n in names) + "  label")
    for t in rows:
        cells = "  ".join(f"{v:9.2f}" for v in frame.values[t])
        print(f"  {t:4d} {cells}  {int(frame.labels[t])}")


def main():
    frame = simulate_normal(PLANT, 400)
    print(f"simulated {len(frame)} steps, channels: {', '.join(frame.schema.names)}")

    # The tanks start half full and fill at 0.4 per step, so the first
    # high-mark crossing (valve off, pump on) lands around step 75.
    valve = frame.values[:, frame.schema.names.index("S1_VALVE")]
    flip = int(np.argmax(valve < 0.5))
    print_rows(frame, range(flip - 3, flip + 3), f"controller flips at step {flip}:")

    attack = AttackSpec(
        "SSSP",
        start=150,
        duration=30,
        targets=((0, "level"),),
        manipulation=("offset", -20.0),
    )
    attacked = inject_attacks(frame, [attack])
    level = frame.schema.names.index("S1_LEVEL")
    print("\nreported S1_LEVEL around the attack window (clean vs attacked):")
    for t in range(147, 155):
        marker = " <- attack rows" if attacked.labels[t] else ""
        print(
            f"  step {t:3d}: clean {frame.values[t, level]:7.2f}  "
            f"attacked {attacked.values[t, level]:7.2f}{marker}"
        )
    print("the physics is untouched; only the reported reading drops by 20.")

    out_dir = tempfile.mkdtemp(prefix="plantsim_demo_")
    path = os.path.join(out_dir, "attacked.csv")
    save_csv(attacked, path)
    reloaded = load_csv(path, attacked.schema)
    assert np.array_equal(reloaded.values, attacked.values)
    print(f"\nwire-format round trip OK: {path}")


if __name__ == "__main__":
    main()
