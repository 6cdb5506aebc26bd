"""Pure numpy implementations of the element kernels."""
from __future__ import annotations

import numpy as np

BACKEND = "python"


def newton_local(vals, grads, wdet, coef, convection, damp_coef, damp_exp, eps_reg):
    """Local Newton matrices and right-hand sides on every element.

    Parameters
    ----------
    vals : (nq, 4) basis values at quadrature points
    grads : (nt, nq, 4, 2) physical basis gradients
    wdet : (nt, nq) quadrature weight times Jacobian determinant
    coef : (nt, 8) local coefficients of the linearisation point, ``c * 4 + a``
    convection : bool
        Include ``w -> (w.grad)u + (u.grad)w`` and its right-hand side.
    damp_coef, damp_exp : (k,) arrays
        Damping terms ``c |u|^(s-1) u``, linearised.
    eps_reg : float
        Regularisation of ``|u|`` inside ``|u|^(s-3)`` when ``s < 3``.

    Returns
    -------
    Ke : (nt, 8, 8), rows test dofs, columns trial dofs
    Fe : (nt, 8)
    """
    nt = grads.shape[0]
    cx = coef[:, :4]
    cy = coef[:, 4:]
    ux = cx @ vals.T
    uy = cy @ vals.T
    # G[t, q, c, k] = d u_c / d x_k
    G = np.stack(
        [np.einsum("ta,tqak->tqk", cx, grads), np.einsum("ta,tqak->tqk", cy, grads)],
        axis=2,
    )
    K = np.zeros((nt, 2, 4, 2, 4))
    F = np.zeros((nt, 2, 4))
    u = np.stack([ux, uy], axis=-1)  # (nt, nq, 2)
    if convection:
        # (w.grad)u_n . v : phi_a G[d, c] phi_b
        K += np.einsum("tq,qa,qb,tqdc->tdbca", wdet, vals, vals, G)
        # (u_n.grad)w . v : delta_cd (u . grad phi_a) phi_b
        adv = np.einsum("tqk,tqak->tqa", u, grads)
        blk = np.einsum("tq,tqa,qb->tba", wdet, adv, vals)
        K[:, 0, :, 0, :] += blk
        K[:, 1, :, 1, :] += blk
        conv = np.einsum("tqk,tqdk->tqd", u, G)
        F += np.einsum("tq,tqd,qb->tdb", wdet, conv, vals)
    if len(damp_coef):
        mag2 = ux * ux + uy * uy
        mag = np.sqrt(mag2)
        s_iso = np.zeros_like(mag)
        s_dir = np.zeros_like(mag)
        s_rhs = np.zeros_like(mag)
        for c, s in zip(damp_coef, damp_exp):
            g1 = mag ** (s - 1.0)
            if s < 3.0:
                g3 = (mag2 + eps_reg * eps_reg) ** ((s - 3.0) / 2.0)
            else:
                g3 = mag ** (s - 3.0)
            s_iso += c * g1
            s_dir += c * (s - 1.0) * g3
            s_rhs += c * (s - 1.0) * g1
        mm = np.einsum("qa,qb->qba", vals, vals)
        iso = np.einsum("tq,qba->tba", wdet * s_iso, mm)
        K[:, 0, :, 0, :] += iso
        K[:, 1, :, 1, :] += iso
        K += np.einsum("tq,tqd,tqc,qba->tdbca", wdet * s_dir, u, u, mm)
        F += np.einsum("tq,tqd,qb->tdb", wdet * s_rhs, u, vals)
    return K.reshape(nt, 8, 8), F.reshape(nt, 8)


def csr_spmv(indptr, indices, data, x):
    """``y = A x`` for CSR arrays, summing each row left to right."""
    indptr = np.asarray(indptr)
    n = len(indptr) - 1
    y = np.zeros(n)
    prod = data * x[indices]
    start = indptr[:-1]
    length = np.diff(indptr)
    # k-th entry of every row at once, so each row still sums in index order
    for k in range(int(length.max(initial=0))):
        rows = np.flatnonzero(length > k)
        y[rows] += prod[start[rows] + k]
    return y
