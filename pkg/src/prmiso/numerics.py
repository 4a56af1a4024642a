"""
Complex linear-algebra helpers, seeded random streams and a minimum-norm
least-squares solver shared by the rest of the package.

Arrays are plain ``numpy`` arrays in double precision (``complex128`` /
``float64``). Every function accepts leading batch dimensions unless noted.
"""

import numpy as np


class ContractError(ValueError):
    """Raised when inputs violate a shape or structural contract."""


class DomainError(ValueError):
    """Raised when a scalar argument is outside its admissible range."""


class RngStream:
    """
    Seeded random stream backed by the counter-based Philox generator.

    Philox's state transition is a fixed function of (key, counter), so a
    given seed produces the same double-precision sample sequence on every
    platform numpy supports. A stream has a single owner; use :meth:`spawn`
    or :meth:`child` to hand independent streams to parallel workers.

    Parameters
    ----------
    seed : int or np.random.SeedSequence
        64-bit seed or an existing seed sequence.
    """

    def __init__(self, seed):
        if isinstance(seed, np.random.SeedSequence):
            self._ss = seed
        else:
            if int(seed) < 0:
                raise DomainError("seed must be non-negative")
            self._ss = np.random.SeedSequence(int(seed))
        self.generator = np.random.Generator(np.random.Philox(self._ss))

    @property
    def seed(self):
        return self._ss.entropy

    def spawn(self, n):
        """Return ``n`` statistically independent child streams."""
        return [RngStream(s) for s in self._ss.spawn(n)]

    def child(self, *key):
        """
        Deterministic child stream addressed by a tuple of non-negative ints.

        Unlike :meth:`spawn` this does not advance any internal state, so
        ``child(3, 1)`` always names the same stream for a given root seed.
        """
        key = tuple(int(k) for k in key)
        ss = np.random.SeedSequence(self._ss.entropy,
                                    spawn_key=tuple(self._ss.spawn_key) + key)
        return RngStream(ss)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)

    def normal(self, size=None):
        return self.generator.standard_normal(size)


def sample_complex_gaussian(rng, rows, cols, variance=1.0, batch=()):
    """
    Draw i.i.d. circularly-symmetric complex Gaussian entries.

    Real and imaginary parts are independent with variance ``variance / 2``
    each, so ``E|h|^2 = variance``.

    Parameters
    ----------
    rng : RngStream
    rows, cols : int
    variance : float
        Non-negative per-entry variance.
    batch : tuple of int, optional
        Leading batch shape.

    Returns
    -------
    np.ndarray
        Complex array of shape ``batch + (rows, cols)``.
    """
    if variance < 0:
        raise DomainError(f"variance must be >= 0, got {variance}")
    shape = tuple(batch) + (int(rows), int(cols))
    scale = np.sqrt(variance / 2.0)
    # always draw, so the stream advances identically for any variance
    re = rng.normal(shape)
    im = rng.normal(shape)
    return scale * (re + 1j * im)


def conj_transpose(a):
    """Hermitian transpose over the last two axes."""
    a = np.asarray(a)
    if a.ndim < 2:
        raise ContractError("conj_transpose needs at least a 2-D array")
    return np.conj(np.swapaxes(a, -1, -2))


def matmul(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ContractError(f"cannot multiply shapes {a.shape} and {b.shape}")
    return a @ b


def frobenius_norm(a):
    """Frobenius norm over the last two axes."""
    a = np.asarray(a)
    return np.sqrt(np.sum(np.abs(a) ** 2, axis=(-2, -1)))


def vec(a):
    """Column-stacking flatten of the last two axes (``vec`` operator)."""
    a = np.asarray(a)
    if a.ndim < 2:
        raise ContractError("vec needs at least a 2-D array")
    return np.swapaxes(a, -1, -2).reshape(a.shape[:-2] + (-1,))


def solve_min_norm_ls(A, b):
    """
    Minimum-norm least-squares solution of ``A x = b``.

    Solved through the SVD with the singular-value cutoff
    ``max(m, n) * eps * sigma_max``; the result minimises ``||A x - b||``
    and, among all minimisers, has the smallest ``||x||``.

    Parameters
    ----------
    A : np.ndarray
        Shape ``(..., m, n)``.
    b : np.ndarray
        Shape ``(..., m)`` or ``(..., m, k)``.

    Returns
    -------
    np.ndarray
        Shape ``(..., n)`` or ``(..., n, k)`` matching ``b``.
    """
    A = np.asarray(A)
    b = np.asarray(b)
    if A.ndim < 2 or A.size == 0:
        raise ContractError("A must be a nonempty matrix")
    m, n = A.shape[-2:]
    vector_rhs = b.ndim == A.ndim - 1
    if vector_rhs:
        b = b[..., None]
    if b.shape[-2] != m:
        raise ContractError(f"b has {b.shape[-2]} rows, A has {m}")

    U, s, Vh = np.linalg.svd(A, full_matrices=False)
    smax = s[..., :1]
    keep = s > max(m, n) * np.finfo(np.float64).eps * smax
    s_inv = np.where(keep, 1.0 / np.where(keep, s, 1.0), 0.0)
    x = conj_transpose(Vh) @ (s_inv[..., None] * (conj_transpose(U) @ b))
    return x[..., 0] if vector_rhs else x
