"""Slow, direct reference implementations used only by the tests."""

import math

import numpy as np


def brute_partial_loglik(time, event, x, beta, ties="efron"):
    """Partial log-likelihood by explicit loops over risk sets."""
    eta = np.asarray(x, float) @ np.asarray(beta, float)
    total = 0.0
    for t in sorted(set(time[event == 1])):
        dead = [i for i in range(len(time)) if time[i] == t and event[i] == 1]
        risk = [i for i in range(len(time)) if time[i] >= t]
        r = sum(math.exp(eta[i]) for i in risk)
        dsum = sum(math.exp(eta[i]) for i in dead)
        for l, i in enumerate(dead):
            frac = l / len(dead) if ties == "efron" else 0.0
            total += eta[i] - math.log(r - frac * dsum)
    return total


def central_gradient(f, x, h=1e-5):
    x = np.asarray(x, float)
    g = np.empty_like(x)
    for j in range(len(x)):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def central_jacobian(f, x, h=1e-5):
    x = np.asarray(x, float)
    cols = []
    for j in range(len(x)):
        e = np.zeros_like(x)
        e[j] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h))
    return np.column_stack(cols)


def pair_concordance(times, events, scores):
    """Harrell's C by enumerating unordered pairs once."""
    conc = disc = tied = comp = 0
    n = len(times)
    for i in range(n):
        for j in range(i + 1, n):
            a, b = (i, j) if times[i] < times[j] or (times[i] == times[j] and events[i]) else (j, i)
            if not events[a]:
                continue
            if times[a] == times[b] and events[b]:
                continue
            comp += 1
            if scores[a] > scores[b]:
                conc += 1
            elif scores[a] < scores[b]:
                disc += 1
            else:
                tied += 1
    return conc, disc, tied, comp


def max_rel_error(a, b, floor=1e-8):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), floor))) if a.size else 0.0
