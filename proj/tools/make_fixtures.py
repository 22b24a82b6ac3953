"""Regenerates the synthetic CSV fixtures under data/fixtures."""

from pathlib import Path

import numpy as np
import pandas as pd

OUT = Path(__file__).resolve().parent.parent / "data" / "fixtures"

DISTRICTS = {
    "Nicosia": 326980,
    "Limassol": 235056,
    "Larnaca": 143192,
    "Paphos": 88266,
    "Ammochostos": 46629,
}


def outbreak(rng):
    dates = pd.date_range("2020-03-01", "2020-05-31", freq="D")
    t = np.arange(len(dates))
    # Rise to a late-March peak, then a slower decay.
    curve = np.where(t < 27, 40 * np.exp(-((t - 27) / 9.0) ** 2), 40 * np.exp(-(t - 27) / 11.0))
    curve[:8] = 0.0
    cases = rng.poisson(curve)
    cases[8] = max(cases[8], 2)
    local = rng.binomial(cases, np.clip(0.3 + t / 60.0, 0.0, 0.95))
    recovered = np.zeros_like(cases)
    deaths = np.zeros_like(cases)
    for day, n in enumerate(cases):
        if n == 0:
            continue
        died = rng.binomial(n, 0.02)
        lags = rng.integers(12, 28, size=n - died)
        for lag in lags:
            if day + lag < len(t):
                recovered[day + lag] += 1
        for lag in rng.integers(5, 20, size=died):
            if day + lag < len(t):
                deaths[day + lag] += 1
    frame = pd.DataFrame(
        {
            "date": dates.strftime("%Y-%m-%d"),
            "cases": cases,
            "recovered": recovered,
            "deaths": deaths,
            "local": local,
        }
    )
    return frame


def by_district(rng, frame):
    pops = np.array(list(DISTRICTS.values()), dtype=float)
    split = np.array([rng.multinomial(n, pops / pops.sum()) for n in frame["cases"]])
    out = pd.DataFrame(split, columns=list(DISTRICTS))
    out.insert(0, "date", frame["date"])
    return out


def mobility():
    names = list(DISTRICTS)
    pops = np.array(list(DISTRICTS.values()), dtype=float)
    flows = np.outer(pops, pops) / pops.sum() * 0.02
    np.fill_diagonal(flows, 0.0)
    out = pd.DataFrame(np.round(flows).astype(int), columns=names)
    out.insert(0, "district", names)
    return out


def main():
    rng = np.random.default_rng(20200301)
    OUT.mkdir(parents=True, exist_ok=True)
    frame = outbreak(rng)
    frame.to_csv(OUT / "synthetic_outbreak.csv", index=False)
    by_district(rng, frame).to_csv(OUT / "synthetic_districts.csv", index=False)
    mobility().to_csv(OUT / "mobility.csv", index=False)
    pd.DataFrame({"district": list(DISTRICTS), "population": list(DISTRICTS.values())}).to_csv(
        OUT / "districts.csv", index=False
    )


if __name__ == "__main__":
    main()
