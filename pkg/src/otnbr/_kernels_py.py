"""Pure-Python annealing kernels; the reference for the compiled ``_kernels`` module.

Both implementations consume the same pre-drawn random numbers so a design
run is reproducible regardless of which backend is loaded.

State layout (see :class:`otnbr.distortion.CostModel`): ``M`` has one block
of rows per destination, ``(1 + ns) * k`` rows starting at ``dest_off[d]``;
the first ``k`` rows are the evidence mass, the next ``ns`` groups of ``k``
rows the codeword-weighted mass of each decoded source.
"""
import numpy as np


def _ratio(m0, ms, eps):
    out = 0.0
    ok = m0 > eps
    if np.any(ok):
        out = float(np.sum(ms[:, ok] ** 2 / m0[ok]))
    return out


def move_delta(x, u, v, M, hr, dest_off, dest_k, dest_ns, hr_identity, eps):
    """Change of the summed ratio terms when mass ``x`` moves from relay index u to v."""
    if u == v:
        return 0.0
    total = 0.0
    for d in range(len(dest_off)):
        lo, k, ns = dest_off[d], dest_k[d], dest_ns[d]
        hi = lo + (1 + ns) * k
        if hr_identity:
            cols = np.array([u, v])
            coef = np.array([-1.0, 1.0])
        else:
            coef = hr[d, v] - hr[d, u]
            cols = np.arange(coef.size)
        blk = M[lo:hi][:, cols].reshape(1 + ns, k, cols.size)
        xb = x[lo:hi].reshape(1 + ns, k)
        new = blk + xb[:, :, None] * coef
        for j in range(cols.size):
            total += _ratio(new[0, :, j], new[1:, :, j], eps) - _ratio(blk[0, :, j], blk[1:, :, j], eps)
    return total


def move_apply(x, u, v, M, hr, dest_off, dest_k, dest_ns, hr_identity):
    for d in range(len(dest_off)):
        lo, k, ns = dest_off[d], dest_k[d], dest_ns[d]
        hi = lo + (1 + ns) * k
        if hr_identity:
            M[lo:hi, u] -= x[lo:hi]
            M[lo:hi, v] += x[lo:hi]
        else:
            M[lo:hi] += np.outer(x[lo:hi], hr[d, v] - hr[d, u])


def table_sweep(table, positions, donors, uniforms, temperature, V, M, hr,
                dest_off, dest_k, dest_ns, hr_identity, eps, scale, cost,
                best_table, best_cost):
    """One in-order pass of neighbour-copy perturbations with Metropolis acceptance.

    A move that would remove the last cell carrying a relay index is skipped,
    since copying from neighbours can never bring that index back.
    ``table``, ``M`` and ``best_table`` are updated in place. Returns
    ``(cost, best_cost, accepted)``.
    """
    accepted = 0
    counts = np.bincount(table, minlength=M.shape[1])
    for n in range(len(positions)):
        c = positions[n]
        u = table[c]
        v = table[donors[n]]
        if u == v or counts[u] == 1:
            continue
        delta = -scale * move_delta(V[c], u, v, M, hr, dest_off, dest_k, dest_ns, hr_identity, eps)
        if delta < 0 or uniforms[n] < np.exp(-delta / temperature):
            move_apply(V[c], u, v, M, hr, dest_off, dest_k, dest_ns, hr_identity)
            table[c] = v
            counts[u] -= 1
            counts[v] += 1
            cost += delta
            accepted += 1
            if cost < best_cost:
                best_cost = cost
                best_table[:] = table
    return cost, best_cost, accepted


def perm_sweep(perm, n_slots, partners, uniforms, temperature, VS, M, hr,
               dest_off, dest_k, dest_ns, hr_identity, eps, scale, cost,
               best_perm, best_cost):
    """One pass of label swaps over a relay-index permutation.

    Position i of ``perm`` labels slot i when ``i < n_slots``; the remaining
    positions hold unused labels. Position i is swapped with ``partners[i]``.
    """
    accepted = 0
    for i in range(len(perm)):
        j = partners[i]
        if i >= n_slots and j >= n_slots:
            continue
        u = perm[i]
        v = perm[j]
        if i < n_slots and j < n_slots:
            x = VS[i] - VS[j]
            a, b = u, v
        elif i < n_slots:
            x = VS[i]
            a, b = u, v
        else:
            x = VS[j]
            a, b = v, u
        delta = -scale * move_delta(x, a, b, M, hr, dest_off, dest_k, dest_ns, hr_identity, eps)
        if delta < 0 or uniforms[i] < np.exp(-delta / temperature):
            move_apply(x, a, b, M, hr, dest_off, dest_k, dest_ns, hr_identity)
            perm[i], perm[j] = v, u
            cost += delta
            accepted += 1
            if cost < best_cost:
                best_cost = cost
                best_perm[:] = perm
    return cost, best_cost, accepted
