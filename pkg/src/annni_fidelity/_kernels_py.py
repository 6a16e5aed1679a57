"""Pure numpy fallback for the compiled kernels in ``_kernels.pyx``."""
import numpy as np


def bond_sums(n_sites):
    """Return (nn, nnn): per basis index, sum of s_n s_{n+1} and s_n s_{n+2}."""
    idx = np.arange(1 << n_sites, dtype=np.int64)
    spins = [((idx >> n) & 1).astype(np.int8) * 2 - 1 for n in range(n_sites)]
    nn = np.zeros(idx.size, dtype=np.int8)
    nnn = np.zeros(idx.size, dtype=np.int8)
    for n in range(n_sites):
        nn += spins[n] * spins[(n + 1) % n_sites]
        nnn += spins[n] * spins[(n + 2) % n_sites]
    return nn, nnn


def matvec(diag, v, out, n_sites, bx):
    """out[i] = diag[i] v[i] - bx * sum_n v[i ^ (1 << n)]."""
    dim = diag.shape[0]
    if v.shape[0] != dim or out.shape[0] != dim:
        raise ValueError("length mismatch")
    s = np.zeros(dim)
    for n in range(n_sites):
        # flipping bit n swaps the two halves of every 2^(n+1) block
        s += v.reshape(-1, 2, 1 << n)[:, ::-1, :].reshape(-1)
    np.subtract(diag * v, bx * s, out=out)
    return out
