"""Independent brute-force reference implementations.

Everything here is written from the definitions with plain quadratic
loops, deliberately sharing no code with the package, so tests compare
two separately derived routes to the same quantity.
"""

import itertools

import numpy as np


def dist_matrix(A, B):
    return np.sqrt(((A[:, None, :] - B[None, :, :]) ** 2).sum(axis=2))


def brute_knn_train(X, k):
    """Distance to the k-th nearest neighbor, self excluded."""
    D = dist_matrix(X, X)
    np.fill_diagonal(D, np.inf)
    return np.sort(D, axis=1)[:, k - 1]


def brute_knn_predict(X_train, Q, k):
    D = dist_matrix(Q, X_train)
    return np.sort(D, axis=1)[:, k - 1]


def brute_aknn_train(X, k):
    D = dist_matrix(X, X)
    np.fill_diagonal(D, np.inf)
    return np.sort(D, axis=1)[:, :k].mean(axis=1)


def brute_aknn_predict(X_train, Q, k):
    D = dist_matrix(Q, X_train)
    return np.sort(D, axis=1)[:, :k].mean(axis=1)


def _lof_state(X, k):
    n = X.shape[0]
    D = dist_matrix(X, X)
    np.fill_diagonal(D, np.inf)
    neighbor_idx = np.argsort(D, axis=1)[:, :k]
    kdist = np.array([D[i, neighbor_idx[i, -1]] for i in range(n)])
    lrd = np.empty(n)
    for i in range(n):
        reach = [max(kdist[j], D[i, j]) for j in neighbor_idx[i]]
        lrd[i] = 1.0 / (sum(reach) / k)
    return neighbor_idx, kdist, lrd


def brute_lof_train(X, k):
    """Classic local outlier factor from the definition."""
    neighbor_idx, _, lrd = _lof_state(X, k)
    n = X.shape[0]
    scores = np.empty(n)
    for i in range(n):
        scores[i] = np.mean([lrd[j] for j in neighbor_idx[i]]) / lrd[i]
    return scores


def brute_lof_predict(X_train, Q, k):
    """LOF of queries against the training set (all points eligible)."""
    _, kdist, lrd = _lof_state(X_train, k)
    D = dist_matrix(Q, X_train)
    scores = np.empty(Q.shape[0])
    for i in range(Q.shape[0]):
        nbrs = np.argsort(D[i])[:k]
        reach = [max(kdist[j], D[i, j]) for j in nbrs]
        lrd_q = 1.0 / (sum(reach) / k)
        scores[i] = np.mean([lrd[j] for j in nbrs]) / lrd_q
    return scores


def brute_abof(X_train, Q, neighbor_idx):
    """Negated variance of distance-weighted angles over neighbor pairs."""
    scores = np.empty(Q.shape[0])
    for i in range(Q.shape[0]):
        terms = []
        for a, b in itertools.combinations(neighbor_idx[i], 2):
            va = X_train[a] - Q[i]
            vb = X_train[b] - Q[i]
            na = np.sqrt(va @ va)
            nb = np.sqrt(vb @ vb)
            if na < 1e-12 or nb < 1e-12:
                continue
            terms.append((va @ vb) / (na**2 * nb**2))
        scores[i] = -np.var(terms) if terms else 0.0
    return scores


def pair_count_auc(labels, scores):
    """ROC-AUC by exhaustive outlier/inlier pair counting."""
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=float)
    pos = np.flatnonzero(labels == 1)
    neg = np.flatnonzero(labels == 0)
    wins = 0.0
    for i in pos:
        for j in neg:
            if scores[i] > scores[j]:
                wins += 1.0
            elif scores[i] == scores[j]:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def enumerate_p_at_n(labels, scores):
    """Precision at rank n by explicit sorting on (-score, index)."""
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=float)
    n_pos = int(labels.sum())
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], i))
    return sum(labels[i] for i in order[:n_pos]) / n_pos


def spearman_rank_formula(a, b):
    """1 - 6*sum(d^2)/(n(n^2-1)); valid only for tie-free sequences."""
    a = np.asarray(a)
    b = np.asarray(b)
    n = len(a)
    ra = np.argsort(np.argsort(a))
    rb = np.argsort(np.argsort(b))
    d = ra - rb
    return 1.0 - 6.0 * float(d @ d) / (n * (n * n - 1))


def brute_schedule_optimum(loads, t):
    """Minimal sum-of-deviations objective over every t**m assignment."""
    loads = np.asarray(loads, dtype=float)
    m = loads.size
    target = loads.sum() / t
    best = None
    for assign in itertools.product(range(t), repeat=m):
        sums = [0.0] * t
        for task, worker in enumerate(assign):
            sums[worker] += loads[task]
        objective = sum(abs(s - target) for s in sums)
        if best is None or objective < best:
            best = objective
    return best


def squared_distance_ratios(X, Xp):
    """All n(n-1)/2 projected/original squared-distance ratios."""
    n = X.shape[0]
    ratios = []
    for i in range(n):
        for j in range(i + 1, n):
            orig = ((X[i] - X[j]) ** 2).sum()
            proj = ((Xp[i] - Xp[j]) ** 2).sum()
            ratios.append(proj / orig)
    return np.asarray(ratios)
