"""Reference values for the rank tests, produced with SciPy.

Writes crates/core/tests/fixtures/stats_oracle.json:
  friedman  - scipy.stats.friedmanchisquare on the matrix columns
  nemenyi   - mean-rank differences scaled by sqrt(k(k+1)/(6n)) * sqrt(2),
              upper tail of the studentized range with infinite df,
              clamped to [0.001, 0.9], unit diagonal
  wilcoxon  - scipy.stats.wilcoxon(x, y, alternative="greater")
  ptukey    - studentized range survival values
"""
import json
from pathlib import Path

import numpy as np
from scipy.stats import friedmanchisquare, rankdata, studentized_range, wilcoxon

OUT = Path(__file__).resolve().parent.parent / "crates/core/tests/fixtures/stats_oracle.json"


def nemenyi(m):
    n, k = m.shape
    ranks = np.apply_along_axis(rankdata, 1, m)
    R = ranks.mean(axis=0)
    scale = np.sqrt(k * (k + 1) / (6.0 * n))
    p = np.ones((k, k))
    for i in range(k):
        for j in range(k):
            if i != j:
                q = abs(R[i] - R[j]) / scale * np.sqrt(2.0)
                p[i, j] = min(max(studentized_range.sf(q, k, np.inf), 0.001), 0.9)
    return p


def matrices(rng):
    out = []
    for _ in range(4):
        # 10 blocks x 7 treatments with graded, well separated means.
        out.append(rng.normal(size=(10, 7)) + np.arange(7) * 0.8)
    out.append(rng.normal(size=(10, 7)))
    out.append(rng.normal(size=(10, 7)) + np.arange(7) * 0.2)
    out.append(np.round(rng.normal(size=(10, 7)) * 2 + np.arange(7) * 0.5))  # ties
    out.append(rng.normal(size=(10, 3)) + np.array([0.0, 0.0, 3.0]))  # dominant column
    out.append(rng.normal(size=(10, 3)))
    out.append(rng.normal(size=(5, 4)) + np.arange(4) * 0.5)
    out.append(np.round(rng.normal(size=(8, 5))))  # heavy ties
    out.append(rng.normal(size=(20, 5)) + np.arange(5) * 0.3)
    out.append(rng.normal(size=(2, 3)))
    out.append(rng.normal(size=(10, 8)) - np.arange(8) * 0.4)
    out.append(rng.normal(size=(10, 9)) + np.sin(np.arange(9)))
    out.append(rng.normal(size=(15, 6)) + np.arange(6) * 0.1)
    out.append(rng.normal(size=(10, 5)) * 1e-3 - 4.5)
    out.append(np.tile(np.arange(6.0), (10, 1)))  # perfectly consistent ordering
    out.append(np.tile(np.array([1.0, 2.0, 3.0, 4.0]), (6, 1)).T.copy())  # rows constant -> all tied
    out.append(np.round(rng.normal(size=(10, 7)) * 0.7))
    return out


def main():
    rng = np.random.default_rng(20232)
    fr = []
    for m in matrices(rng):
        if np.all(m == m[:, :1]):
            stat, p, degenerate = 0.0, 1.0, True
        else:
            stat, p = friedmanchisquare(*m.T)
            degenerate = False
        fr.append({
            "matrix": m.tolist(),
            "statistic": float(stat),
            "p_value": float(p),
            "degenerate": degenerate,
            "nemenyi": nemenyi(m).tolist(),
        })
    wx = []
    for n, shift, rounding in [(20, 0.5, None), (20, 0.0, None), (20, 1.5, None), (10, 0.3, None),
                               (20, 0.5, 1), (30, 0.2, 1), (60, 0.3, None), (20, -0.5, None),
                               (8, 1.0, None), (25, 0.4, 2)]:
        x = rng.normal(size=n) + shift
        y = rng.normal(size=n)
        if rounding is not None:
            x, y = np.round(x, rounding), np.round(y, rounding)
        res = wilcoxon(x, y, alternative="greater")
        wx.append({"x": x.tolist(), "y": y.tolist(), "statistic": float(res.statistic), "p_value": float(res.pvalue)})
    pt = []
    for k in [2, 3, 5, 7, 10]:
        for q in [0.1, 0.5, 1.0, 2.0, 3.0, 3.5, 4.0, 5.0, 6.0]:
            pt.append({"q": q, "k": k, "sf": float(studentized_range.sf(q, k, np.inf))})
    OUT.write_text(json.dumps({"friedman": fr, "wilcoxon": wx, "ptukey": pt}, indent=1) + "\n")


if __name__ == "__main__":
    main()
