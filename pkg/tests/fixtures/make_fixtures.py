"""Regenerate the collapse fixtures: ``python tests/fixtures/make_fixtures.py``."""

import sys
from pathlib import Path

import numpy as np

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parent))

from oracles import synthetic_curves  # noqa: E402
from starkmbl.ensemble import EnsembleRecord, write_results  # noqa: E402


def records(curves, eps):
    out = []
    for L, (F, y, e) in curves.items():
        for f, v, s in zip(F, y, e):
            out.append(EnsembleRecord(L, eps, float(f), float(v), float(s), 0.0, 0.0, 1, 50, 0, 0))
    return out


def main():
    # planted F_c = 1.0, nu = 0.8 at eps = 0.5, plus a second eps with F_c = 0.8
    recs = records(synthetic_curves(), 0.5) + records(synthetic_curves(F_c=0.8), 0.3)
    write_results(recs, HERE / "synthetic_sweep.csv", "synthetic-fc1.0-nu0.8")
    F = np.round(np.arange(0.25, 2.5 + 1e-9, 0.25), 6)
    flat = {L: (F, np.full(len(F), 0.45), np.zeros(len(F))) for L in (10, 12, 14)}
    write_results(records(flat, 0.5), HERE / "identical_curves.csv", "identical-curves")


if __name__ == "__main__":
    main()
