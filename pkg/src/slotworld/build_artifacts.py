"""Prebuild the standard desk-scale datasets and model checkpoints.

Usage:
    python -m slotworld.build_artifacts [--list] [--only NAME ...] [--root DIR]
"""

from __future__ import annotations

import argparse
from pathlib import Path

from .experiments import DATASETS, MODELS, build_all, ensure_dataset, ensure_model


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--list", action="store_true", help="print the registry and exit")
    parser.add_argument("--only", nargs="*", default=None, help="build only these models")
    parser.add_argument("--root", default=None, help="artifact root (default: repo ./artifacts)")
    args = parser.parse_args()

    if args.list:
        print("datasets:")
        for name, spec in DATASETS.items():
            kind = "expert" if spec.expert else "plain"
            print(f"  {name}: {spec.n_episodes} episodes, {kind}, n_shapes={spec.config.n_shapes}")
        print("models:")
        for name, spec in MODELS.items():
            base = f" (base {spec.base})" if spec.base else ""
            print(f"  {name}: {spec.stage} on {spec.data}{base}")
        return

    root = Path(args.root) if args.root else None
    if args.only:
        for name in args.only:
            if name in DATASETS:
                ensure_dataset(name, root)
            else:
                ensure_model(name, root)
    else:
        build_all(root)


if __name__ == "__main__":
    main()
