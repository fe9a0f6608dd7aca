#!/usr/bin/env python3
"""Regenerate tests/data/synthetic_drinks.csv.

An 89-row synthetic stand-in for the alcohol-consumption application data:
a count response (NUMALL) with seven subject-level covariates and the five
interaction columns the application models use. Values are drawn from
plausible marginal ranges; the response is Poisson with a log-linear mean in
a fixed coefficient vector. Purely synthetic; no real study data involved.
"""

import csv
import pathlib

import numpy as np

OUT = pathlib.Path(__file__).resolve().parent.parent / "tests" / "data" / "synthetic_drinks.csv"

N = 89
SEED = 1728


def main():
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(SEED)))
    negevent = np.round(rng.gamma(shape=1.4, scale=0.45, size=N), 3)
    prel = np.round(rng.uniform(0.0, 9.0, N), 2)
    age = np.round(rng.uniform(24.0, 42.0, N), 1)
    rosn = np.round(rng.uniform(2.1, 4.0, N), 2)
    state = np.round(rng.uniform(2.5, 5.0, N), 2)
    gender = (rng.random(N) < 0.5).astype(float)
    desired = np.round(rng.uniform(1.0, 8.0, N), 2)

    # standardized-ish effects keeping counts in a realistic 0..25 range
    eta = (
        -0.1
        + 0.25 * negevent
        + 0.04 * prel
        + 0.015 * (age - 33.0)
        + 0.18 * (rosn - 3.0)
        + 0.10 * (state - 3.7)
        + 0.22 * gender
        + 0.16 * desired
        - 0.05 * (rosn - 3.0) * (prel - 4.5)
        + 0.01 * (age - 33.0) * (rosn - 3.0)
        + 0.05 * (desired - 4.5) * gender
        - 0.004 * (desired - 4.5) * (age - 33.0)
        - 0.08 * (state - 3.7) * (negevent - 0.6)
    )
    numall = rng.poisson(np.exp(eta))

    header = [
        "NUMALL", "NEGEVENT", "PREL", "AGE", "ROSN", "STATE", "GENDER",
        "DESIRED", "ROSN_PREL", "AGE_ROSN", "DESIRED_GENDER", "DESIRED_AGE",
        "STATE_NEGEVENT",
    ]
    OUT.parent.mkdir(parents=True, exist_ok=True)
    with open(OUT, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(N):
            writer.writerow([
                int(numall[i]),
                negevent[i], prel[i], age[i], rosn[i], state[i],
                int(gender[i]), desired[i],
                round(rosn[i] * prel[i], 4),
                round(age[i] * rosn[i], 4),
                round(desired[i] * gender[i], 4),
                round(desired[i] * age[i], 4),
                round(state[i] * negevent[i], 4),
            ])
    print(f"wrote {OUT} ({N} rows)")


if __name__ == "__main__":
    main()
