#!/usr/bin/env python3
"""Regenerate the bundled model JSON files from the in-code builders.

Run from the repository root after changing anything in
``swainval.examples``; the test suite asserts the shipped files match the
builders byte-for-byte semantics (same arrays, names and bounds).
"""
from pathlib import Path

from swainval.examples import BUILTIN_NAMES, asset_path, load_builtin
from swainval.fileio import save_model


def main() -> None:
    asset_dir = Path(asset_path(BUILTIN_NAMES[0])).parent
    asset_dir.mkdir(parents=True, exist_ok=True)
    for name in BUILTIN_NAMES:
        path = asset_path(name)
        save_model(load_builtin(name), path)
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
