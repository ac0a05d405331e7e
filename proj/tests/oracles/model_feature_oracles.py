"""Frozen expectations for test_models.cpp and test_features.cpp."""
import numpy as np
from scipy import stats
from sklearn.linear_model import LinearRegression, LogisticRegression
from sklearn.neighbors import KNeighborsRegressor
from statsmodels.stats.outliers_influence import variance_inflation_factor

rng = np.random.default_rng(7)
X = np.round(rng.normal(size=(12, 3)), 2)
y = np.round(1.5 * X[:, 0] - 2.0 * X[:, 1] + 0.5 * X[:, 2] + rng.normal(scale=0.3, size=12), 2)
c = np.array([0, 1, 0, 1, 1, 0, 1, 0, 0, 1, 1, 0])  # deliberately noisy labels
Q = np.round(rng.normal(size=(3, 3)), 2)

fmt = lambda a: ", ".join(f"{v:.17g}" for v in np.ravel(a))
print("X =", fmt(X)); print("y =", fmt(y)); print("Q =", fmt(Q))

ols = LinearRegression().fit(X, y)
print("ols coef", fmt(ols.coef_), "intercept", f"{ols.intercept_:.17g}")
print("ols pred Q", fmt(ols.predict(Q)))

lr = LogisticRegression(C=1.0, tol=1e-12, max_iter=10000).fit(X, c)
print("logreg P(1|Q)", fmt(lr.predict_proba(Q)[:, 1]))

for w in ("uniform", "distance"):
    knn = KNeighborsRegressor(n_neighbors=3, weights=w).fit(X, y)
    print(f"knn {w} pred Q", fmt(knn.predict(Q)))

Xc = np.column_stack([np.ones(12), X, X[:, 0] + 0.5 * X[:, 1] + np.round(rng.normal(scale=0.2, size=12), 2)])
print("vif extra col", fmt(Xc[:, 4]))
print("vif", fmt([variance_inflation_factor(Xc, i) for i in range(1, 5)]))
print("skew", fmt([stats.skew(X[:, j]) for j in range(3)]))
print("pearson x0,y", f"{stats.pearsonr(X[:, 0], y)[0]:.17g}")
