from pathlib import Path

import numpy as np
import pytest

ADULT_LIKE_SCHEMA = (
    '[{"name": "age", "kind": "categorical"}, {"name": "sex", "kind": "categorical"},'
    '{"name": "relationship", "kind": "categorical"}, {"name": "hours-per-week", "kind": "categorical"},'
    '{"name": "income", "kind": "binary", "levels": ["<=50K", ">50K"]}]')


@pytest.fixture
def fixtures():
    return Path(__file__).parent / "fixtures"


@pytest.fixture
def adult_like(tmp_path):
    """Write a small file shaped like the adult data; returns (csv, schema)."""
    def make(n=400, seed=0):
        rng = np.random.default_rng(seed)
        age = rng.integers(17, 90, n)
        hours = np.clip((age % 50) + rng.integers(0, 30, n), 1, 99)
        sex = rng.choice(["Male", "Female"], n)
        rel = np.where(sex == "Male", rng.choice(["Husband", "Own-child"], n), rng.choice(["Wife", "Unmarried"], n))
        income = np.where((hours > 40) & (rng.random(n) < 0.6), ">50K", "<=50K")
        lines = ["age,sex,relationship,hours-per-week,income"]
        lines += [f"{a},{s},{r},{h},{i}" for a, s, r, h, i in zip(age, sex, rel, hours, income)]
        data, schema = tmp_path / f"adult_{seed}.csv", tmp_path / "adult_schema.json"
        data.write_text("\n".join(lines) + "\n")
        schema.write_text(ADULT_LIKE_SCHEMA)
        return data, schema
    return make
