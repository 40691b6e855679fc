"""Build every acceptance artifact in validation-priority order.

Run from the repo root:  python scripts/build_all_artifacts.py
Safe to re-run; finished artifacts are skipped.
"""

import time

from slotworld.experiments import DATASETS, MODELS, ensure_dataset, ensure_model

ORDER = [
    "parser_g1_seed",
    "parser_g1",
    "dyn_g1_object",
    "parser_goal_seed",
    "parser_goal",
    "dyn_goal",
    "policy_seed0",
    "policy_seed1",
    "policy_seed2",
    "dyn_g1_scene",
    "dyn_g1_scene_continuous",
    "dyn_g1_scene_discrete",
    "dyn_g1_scene_oracle",
    "parser_g3_seed",
    "parser_g3",
    "dyn_g3_object",
    "dyn_g3_scene",
    "parser_g5_seed",
    "parser_g5",
    "dyn_g5_object",
    "dyn_g5_scene",
]


def main() -> None:
    t0 = time.time()
    for name in DATASETS:
        ensure_dataset(name)
    missing = [name for name in MODELS if name not in ORDER]
    assert not missing, f"registry entries missing from build order: {missing}"
    for name in ORDER:
        t_run = time.time()
        ensure_model(name)
        print(f"[build] {name} ready (+{(time.time() - t_run) / 60:.1f} min, total {(time.time() - t0) / 60:.1f} min)", flush=True)


if __name__ == "__main__":
    main()
