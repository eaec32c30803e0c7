"""Slow, loop-based reference implementations used only as test oracles.

They share no code with the package: every sum is written out over nodes
and blocks with plain Python floats.
"""
import itertools
import math

import numpy as np


def _log_phi(x, a):
    if x == 1:
        return math.log(a) if a > 0 else -math.inf
    return math.log(1 - a) if a < 1 else -math.inf


def _dyads(n, mask, directed):
    for i in range(n):
        for j in range(n):
            if i == j or mask[i][j] == 0:
                continue
            if not directed and j < i:
                continue
            yield i, j


def complete_loglik(x_ind, x_org, org_of, m_ind, m_org, d_ind, d_org,
                    pi, gamma, a_ind, a_org, z_ind, z_org):
    total = 0.0
    for l in z_org:
        total += math.log(pi[l])
    for i, k in enumerate(z_ind):
        total += math.log(gamma[k][z_org[org_of[i]]])
    for i, j in _dyads(len(z_ind), m_ind, d_ind):
        total += _log_phi(x_ind[i][j], a_ind[z_ind[i]][z_ind[j]])
    for i, j in _dyads(len(z_org), m_org, d_org):
        total += _log_phi(x_org[i][j], a_org[z_org[i]][z_org[j]])
    return total


def net_args(net):
    return (net.x_ind.tolist(), net.x_org.tolist(), [int(o) for o in net.org_of],
            net.mask_ind.tolist(), net.mask_org.tolist(), net.directed_ind, net.directed_org)


def par_args(p):
    return p.pi_org.tolist(), p.gamma.tolist(), p.alpha_ind.tolist(), p.alpha_org.tolist()


def complete_loglik_net(net, params, z_ind, z_org):
    return complete_loglik(*net_args(net), *par_args(params), list(z_ind), list(z_org))


def exact_loglik(net, params):
    """log sum over every (z_ind, z_org) of the complete likelihood."""
    q_ind, q_org = len(params.gamma), len(params.gamma[0])
    terms = []
    for z_org in itertools.product(range(q_org), repeat=net.n_org):
        for z_ind in itertools.product(range(q_ind), repeat=net.n_ind):
            terms.append(complete_loglik_net(net, params, z_ind, z_org))
    top = max(terms)
    return top + math.log(sum(math.exp(t - top) for t in terms))


def bound(net, params, tau_ind, tau_org):
    """Expected complete log-likelihood under independent rows plus entropy."""
    x_ind, x_org, org_of, m_ind, m_org, d_ind, d_org = net_args(net)
    pi, gamma, a_ind, a_org = par_args(params)
    ti, to = np.asarray(tau_ind).tolist(), np.asarray(tau_org).tolist()
    total = 0.0
    for j, row in enumerate(to):
        for l, t in enumerate(row):
            total += t * math.log(pi[l])
    for i, row in enumerate(ti):
        for k, t in enumerate(row):
            for l, s in enumerate(to[org_of[i]]):
                total += t * s * math.log(gamma[k][l])
    for x, m, d, tau, a in ((x_ind, m_ind, d_ind, ti, a_ind), (x_org, m_org, d_org, to, a_org)):
        for i, j in _dyads(len(tau), m, d):
            for k, t in enumerate(tau[i]):
                for l, s in enumerate(tau[j]):
                    total += t * s * _log_phi(x[i][j], a[k][l])
    for row in ti + to:
        for t in row:
            if t > 0:
                total -= t * math.log(t)
    return total


def adjusted_rand(z1, z2):
    """ARI from pair counting over all item pairs."""
    n = len(z1)
    same1 = same2 = both = 0
    pairs = n * (n - 1) // 2
    for i in range(n):
        for j in range(i + 1, n):
            a, b = z1[i] == z1[j], z2[i] == z2[j]
            same1 += a
            same2 += b
            both += a and b
    expected = same1 * same2 / pairs
    top = (same1 + same2) / 2
    if top == expected:
        return 1.0
    return (both - expected) / (top - expected)


def auc_pairs(scores, labels):
    """Fraction of positive/negative pairs ordered correctly, ties 1/2."""
    pos = [s for s, y in zip(scores, labels) if y]
    neg = [s for s, y in zip(scores, labels) if not y]
    wins = 0.0
    for p in pos:
        for q in neg:
            wins += 1.0 if p > q else 0.5 if p == q else 0.0
    return wins / (len(pos) * len(neg))
