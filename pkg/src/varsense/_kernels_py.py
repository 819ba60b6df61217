"""Pure-numpy versions of the compiled kernels, used when the extension is unavailable."""

import numpy as np


def homodyne_sample_stats(m0, m1, disp_amp, phi_alpha, c00, c01, c11, phi_hd,
                          basis_offsets, disp_offsets, z):
    """Sample mean and unbiased variance of homodyne outcomes.

    Each outcome i is drawn at basis angle ``phi_hd + basis_offsets[i]`` from a
    state whose displacement phase is ``phi_alpha + disp_offsets[i]``; ``z`` are
    the standard-normal draws. Empty offset arrays mean no noise.
    """
    n = z.shape[0]
    theta = phi_hd + basis_offsets if basis_offsets.size else np.full(n, float(phi_hd))
    c, s = np.cos(theta), np.sin(theta)
    if disp_offsets.size:
        pa = phi_alpha + disp_offsets
        mx = m0 + disp_amp * np.cos(pa)
        my = m1 + disp_amp * np.sin(pa)
    else:
        mx = m0 + disp_amp * np.cos(phi_alpha)
        my = m1 + disp_amp * np.sin(phi_alpha)
    shift = np.cos(phi_hd) * (m0 + disp_amp * np.cos(phi_alpha)) \
        + np.sin(phi_hd) * (m1 + disp_amp * np.sin(phi_alpha))
    var = c * c * c00 + 2 * c * s * c01 + s * s * c11
    x = c * mx + s * my + np.sqrt(var) * z - shift
    s1 = x.sum()
    mean = s1 / n
    return shift + mean, (np.dot(x, x) - s1 * mean) / (n - 1)


def rbf_cross(a, b, lengthscale, scale):
    sq = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    np.maximum(sq, 0.0, out=sq)
    return scale * np.exp(-sq / (2.0 * lengthscale ** 2))
