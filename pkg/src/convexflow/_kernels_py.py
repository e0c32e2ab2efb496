"""Pure-numpy fallback for the sparse convolution kernel."""
import numpy as np

_CHUNK = 1 << 22


def sparse_convolve(k1, c1, k2, c2, plan, weight, nout, zero_key, max_out):
    """Same contract as the compiled kernel; output rows sorted by key."""
    m1, m2 = len(k1), len(k2)
    if m1 == 0 or m2 == 0:
        return np.empty(0, np.int64), np.zeros((0, nout), np.complex128)
    rows = max(1, _CHUNK // max(m2, 1))
    acc_keys, acc_vals = [], []
    for start in range(0, m1, rows):
        sl = slice(start, min(m1, start + rows))
        keys = (k1[sl, None] + (k2[None, :] - zero_key)).ravel()
        uniq, inv = np.unique(keys, return_inverse=True)
        vals = np.zeros((len(uniq), nout), np.complex128)
        for (o, a, b), w in zip(plan, weight):
            prod = (w * c1[sl, a][:, None] * c2[None, :, b]).ravel()
            vals[:, o] += (np.bincount(inv, prod.real, len(uniq))
                           + 1j * np.bincount(inv, prod.imag, len(uniq)))
        acc_keys.append(uniq)
        acc_vals.append(vals)
    if len(acc_keys) == 1:
        return acc_keys[0], acc_vals[0]
    keys = np.concatenate(acc_keys)
    vals = np.concatenate(acc_vals)
    uniq, inv = np.unique(keys, return_inverse=True)
    out = np.zeros((len(uniq), nout), np.complex128)
    for o in range(nout):
        out[:, o] = (np.bincount(inv, vals[:, o].real, len(uniq))
                     + 1j * np.bincount(inv, vals[:, o].imag, len(uniq)))
    return uniq, out
