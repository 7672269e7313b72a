#!/usr/bin/env python3
"""Regenerates the CSV files under data/ from scikit-learn's bundled copies.

Iris, Digits and Breast Cancer are exported verbatim. Two-moons and the
linear-regression sets are generated with fixed seeds.
"""
import csv
import pathlib

import numpy as np
from sklearn.datasets import load_breast_cancer, load_digits, load_iris, make_moons

OUT = pathlib.Path(__file__).resolve().parent.parent / "data"


def write(name, header, rows):
    with open(OUT / name, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def main():
    OUT.mkdir(exist_ok=True)

    iris = load_iris()
    names = [n.replace(" (cm)", "").replace(" ", "_") for n in iris.feature_names]
    write("iris.csv", names + ["species"],
          [[repr(float(v)) for v in x] + [iris.target_names[t]] for x, t in zip(iris.data, iris.target)])

    digits = load_digits()
    write("digits.csv", [f"pixel_{i}" for i in range(64)] + ["digit"],
          [[str(int(v)) for v in x] + [str(t)] for x, t in zip(digits.data, digits.target)])

    bc = load_breast_cancer()
    write("breast_cancer.csv", [n.replace(" ", "_") for n in bc.feature_names] + ["benign"],
          [[repr(float(v)) for v in x] + [str(t)] for x, t in zip(bc.data, bc.target)])

    X, y = make_moons(n_samples=500, noise=0.1, random_state=0)
    write("two_moons.csv", ["x1", "x2", "label"],
          [[repr(float(a)), repr(float(b)), str(t)] for (a, b), t in zip(X, y)])

    rng = np.random.default_rng(7)
    for name, m, n in [("linreg_small.csv", 100, 2), ("linreg_wide.csv", 500, 8)]:
        X = rng.uniform(0.0, 10.0, size=(m, n)).round(4)
        w = rng.uniform(-2.0, 3.0, size=n).round(3)
        y = (X @ w + 2.0 + rng.normal(0.0, 0.5, size=m)).round(4)
        write(name, [f"x{i + 1}" for i in range(n)] + ["y"],
              [[repr(float(v)) for v in row] + [repr(float(t))] for row, t in zip(X, y)])


if __name__ == "__main__":
    main()
