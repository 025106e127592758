"""Shared fixtures: a deterministic synthetic corpus of C-like functions
whose vulnerable class uses unguarded copy calls (strcpy, strcat, gets,
sprintf) and whose safe class uses the bounded counterparts."""
from __future__ import annotations

import csv
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

UNSAFE_CALLS = [
    "strcpy({dst}, {src});",
    "strcat({dst}, {src});",
    "gets({dst});",
    'sprintf({dst}, "%s", {src});',
]
SAFE_CALLS = [
    "strncpy({dst}, {src}, sizeof({dst}) - 1);",
    "strncat({dst}, {src}, sizeof({dst}) - 1);",
    "fgets({dst}, sizeof({dst}), stdin);",
    'snprintf({dst}, sizeof({dst}), "%s", {src});',
]
DST_NAMES = ["buf", "dest", "out", "target"]
SRC_NAMES = ["src", "input", "data", "arg"]


def make_function(name: str, vulnerable: bool, rng: np.random.Generator) -> str:
    dst = DST_NAMES[rng.integers(len(DST_NAMES))]
    src = SRC_NAMES[rng.integers(len(SRC_NAMES))]
    calls = UNSAFE_CALLS if vulnerable else SAFE_CALLS
    call = calls[rng.integers(len(calls))].format(dst=dst, src=src)
    k = int(rng.integers(1, 10))
    guard = f"if ({src}[0] != 0)" if rng.integers(2) else f"if ({k} > 0)"
    return (
        f"void {name}(char *{dst}, const char *{src}) {{ "
        f"int n = {k}; {guard} {{ {call} }} return; }}"
    )


def write_split(path: Path, n_per_class: int, rng: np.random.Generator, tag: str) -> None:
    rows = []
    for k in range(n_per_class):
        rows.append((make_function(f"{tag}_vuln_{k}", True, rng), 1))
        rows.append((make_function(f"{tag}_safe_{k}", False, rng), 0))
    order = rng.permutation(len(rows))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["code", "label"])
        for j in order:
            writer.writerow(rows[j])


def generate_corpus(out_dir: Path, seed: int = 13, train_per_class: int = 100,
                    other_per_class: int = 25) -> Path:
    out_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    write_split(out_dir / "train.csv", train_per_class, rng, "t")
    write_split(out_dir / "validation.csv", other_per_class, rng, "v")
    write_split(out_dir / "test.csv", other_per_class, rng, "s")
    return out_dir


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory: pytest.TempPathFactory) -> Path:
    """200-sample train split plus 50-sample validation and test splits."""
    return generate_corpus(tmp_path_factory.mktemp("corpus"))


@pytest.fixture(scope="session")
def tiny_corpus_dir(tmp_path_factory: pytest.TempPathFactory) -> Path:
    """Small corpus for fast pipeline-shape tests."""
    return generate_corpus(
        tmp_path_factory.mktemp("tiny_corpus"), seed=5, train_per_class=8, other_per_class=4
    )
