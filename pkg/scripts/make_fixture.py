"""Write the bundled WTI/RBOB fixture.

The series is synthetic: heavy-tailed daily log-returns are whitened and then
recoloured so that their sample means, standard deviations and correlation
equal the target summary statistics exactly. One negative WTI print is
inserted on 2020-04-20; loaders drop it.
"""
from __future__ import annotations

import argparse
import datetime as dt
from pathlib import Path

import numpy as np

MEANS = np.array([-0.0005, -0.0004])   # WTI, RBOB
STDS = np.array([0.0337, 0.0299])
CORR = 0.65
START = (104.0, 3.00)
NEGATIVE_DAY = dt.date(2020, 4, 20)

OUT = Path(__file__).resolve().parents[1] / "src" / "spreadpide" / "data" / "wti_rbob.csv"


def build(seed: int = 20200420):
    days = np.arange(np.datetime64("2014-06-02"), np.datetime64("2020-08-01"), dtype="datetime64[D]")
    days = [d.astype(dt.date) for d in days if np.is_busday(d)]
    days.remove(NEGATIVE_DAY)
    rng = np.random.default_rng(seed)
    n = len(days) - 1
    common = rng.standard_t(3, n)
    raw = np.column_stack([common + 0.6 * rng.standard_t(3, n), common + 0.6 * rng.standard_t(4, n)])
    raw -= raw.mean(axis=0)
    white = raw @ np.linalg.inv(np.linalg.cholesky(np.cov(raw.T, bias=True)).T)
    cov = np.diag(STDS) @ np.array([[1, CORR], [CORR, 1]]) @ np.diag(STDS)
    ret = white @ np.linalg.cholesky(cov).T + MEANS
    logp = np.vstack([np.log(START), np.log(START) + np.cumsum(ret, axis=0)])
    rows = [(d, p[0], p[1]) for d, p in zip(days, np.exp(logp))]
    k = next(i for i, r in enumerate(rows) if r[0] > NEGATIVE_DAY)
    rows.insert(k, (NEGATIVE_DAY, -37.63, 0.6849))
    return rows


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=OUT)
    ap.add_argument("--seed", type=int, default=20200420)
    a = ap.parse_args(argv)
    rows = build(a.seed)
    a.out.parent.mkdir(parents=True, exist_ok=True)
    with open(a.out, "w") as fh:
        fh.write("date,wti,rbob\n")
        for d, w, r in rows:
            fh.write(f"{d.isoformat()},{w:.8f},{r:.8f}\n")
    print(f"wrote {len(rows)} rows to {a.out}")


if __name__ == "__main__":
    main()
