"""Frozen expectations for test_evaluation.cpp (scipy / sklearn)."""
import numpy as np
from scipy import stats, special
from sklearn.metrics import r2_score, mean_squared_error, accuracy_score, f1_score, precision_score, recall_score

tied = [[1, 2, 2, 3], [2, 3, 4, 4, 5], [5, 6, 6]]
plain = [[2.9, 3.0, 2.5, 2.6, 3.2], [3.8, 2.7, 4.0, 2.4], [2.8, 3.4, 3.7, 2.2, 2.0]]
for name, g in (("tied", tied), ("plain", plain)):
    h, p = stats.kruskal(*g)
    print(f"kw {name}: H={h:.15g} p={p:.15g}")


def conover(groups):
    allv = np.concatenate([np.asarray(g, float) for g in groups])
    ranks = stats.rankdata(allv)
    n = len(allv)
    k = len(groups)
    sizes = [len(g) for g in groups]
    idx = np.cumsum([0] + sizes)
    rbar = [ranks[idx[i]:idx[i + 1]].mean() for i in range(k)]
    h = stats.kruskal(*groups)[0]
    s2 = (np.sum(ranks ** 2) - n * (n + 1) ** 2 / 4) / (n - 1)
    out = []
    for a in range(k):
        for b in range(a + 1, k):
            se = np.sqrt(s2 * (n - 1 - h) / (n - k) * (1 / sizes[a] + 1 / sizes[b]))
            t = (rbar[a] - rbar[b]) / se
            p = 2 * stats.t.sf(abs(t), n - k)
            out.append((a, b, t, p, min(1, p * k * (k - 1) / 2)))
    return out


for name, g in (("tied", tied), ("plain", plain)):
    for a, b, t, p, padj in conover(g):
        print(f"conover {name} {a}-{b}: t={t:.15g} p={p:.15g} padj={padj:.15g}")

x = np.array([0.12, -1.3, 0.77, 2.1, -0.45, 0.03, 1.6, -0.9, 0.4, 3.2, -2.2, 0.95])
m, s = x.mean(), x.std(ddof=1)
d = stats.kstest(x, "norm", args=(m, s)).statistic
n = len(x)
lam = (np.sqrt(n) + 0.12 + 0.11 / np.sqrt(n)) * d
print(f"ks D={d:.15g} p_asym={special.kolmogorov(lam):.15g}")

yt = np.array([3.0, -0.5, 2.0, 7.0, 4.2, 1.1])
yp = np.array([2.5, 0.0, 2.0, 8.0, 3.9, 1.4])
print(f"r2={r2_score(yt, yp):.15g} rmse={np.sqrt(mean_squared_error(yt, yp)):.15g}")
ct = np.array([0, 0, 1, 1, 0, 1, 0, 1, 1, 0])
cp = np.array([0, 1, 1, 0, 0, 1, 1, 1, 1, 0])
for pos in (0, 1):
    print(f"cls pos={pos}: acc={accuracy_score(ct, cp):.15g} p={precision_score(ct, cp, pos_label=pos):.15g} "
          f"r={recall_score(ct, cp, pos_label=pos):.15g} f1={f1_score(ct, cp, pos_label=pos):.15g}")
