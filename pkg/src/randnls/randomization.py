"""Random multipliers ``g_n(omega)`` and the randomisation map.

Reproducibility contract
------------------------
A :class:`Seed` ``(root, stream)`` maps to
``Generator(PCG64(SeedSequence(root, spawn_key=(stream, *extra))))``. All
variates are built from ``Generator.random`` doubles so they do not depend on
numpy's distribution samplers:

* bernoulli: ``g = +1`` if ``u < 1/2`` else ``-1`` (one uniform per variate);
* complex-gaussian: two uniforms ``(u0, u1)`` per variate, interleaved, and
  ``g = sqrt(-log(1 - u0)) * exp(2 pi i u1)``. This is the polar Box-Muller
  form of ``(X1 + i X2) / sqrt(2)``, whose squared modulus is Exp(1).

Ensembles are generated in blocks; block ``b`` of stream ``s`` uses
``spawn_key=(s, b)`` so any partition of blocks over workers reproduces the
same numbers.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import BasisMismatchError

BLOCK_SIZE = 8192
_SUB_BATCH = 512
_BOOTSTRAP_STREAM = 2**31 - 1


class RandomLaw(str, enum.Enum):
    BERNOULLI = "bernoulli"
    GAUSSIAN = "complex-gaussian"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        aliases = {"gaussian": cls.GAUSSIAN, "normal": cls.GAUSSIAN}
        try:
            return aliases.get(value) or cls(value)
        except ValueError:
            raise ValueError(f"unknown law {value!r}; use bernoulli or complex-gaussian") from None


@dataclass(frozen=True)
class Seed:
    root: int
    stream: int = 0

    def __post_init__(self):
        if not 0 <= self.root < 2**64:
            raise ValueError("root seed must fit in 64 unsigned bits")
        if self.stream < 0:
            raise ValueError("stream index must be nonnegative")

    def generator(self, *extra):
        ss = np.random.SeedSequence(self.root, spawn_key=(self.stream, *extra))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, stream):
        return Seed(self.root, stream)

    def to_dict(self):
        return {"root": self.root, "stream": self.stream}


def variates(law, rng, shape):
    """Variates of ``law`` from ``rng`` following the module contract."""
    law = RandomLaw.parse(law)
    shape = tuple(np.atleast_1d(shape)) if not isinstance(shape, tuple) else shape
    if law is RandomLaw.BERNOULLI:
        u = rng.random(shape)
        return np.where(u < 0.5, 1.0, -1.0).astype(complex)
    u = rng.random(shape + (2,))
    radius = np.sqrt(-np.log1p(-u[..., 0]))
    return radius * np.exp(2j * np.pi * u[..., 1])


@dataclass(frozen=True, eq=False)
class RandomDraw:
    law: RandomLaw
    seed: Seed
    values: np.ndarray

    def __post_init__(self):
        self.values.setflags(write=False)

    def __len__(self):
        return self.values.size

    def manifest(self):
        return {"law": self.law.value, "seed": self.seed.to_dict(), "N": len(self)}


def draw(law, N, seed):
    """N independent multipliers for one realisation."""
    if N < 1:
        raise ValueError("need N >= 1")
    law = RandomLaw.parse(law)
    return RandomDraw(law, seed, variates(law, seed.generator(), (N,)))


def ensemble_block(law, N, seed, block, size=BLOCK_SIZE):
    """Block ``block`` of an ensemble, shape ``(size, N)``."""
    return variates(law, seed.generator(block), (size, N))


def ensemble(law, N, M, seed, threads=1):
    """``M x N`` multipliers, one realisation per row."""
    n_blocks = -(-M // BLOCK_SIZE)

    def work(b):
        size = min(BLOCK_SIZE, M - b * BLOCK_SIZE)
        return ensemble_block(law, N, seed, b, size)

    return np.concatenate(_ordered_map(work, range(n_blocks), threads), axis=0)


def _ordered_map(fn, items, threads):
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def randomize(f, rdraw):
    """``f^omega = sum alpha_n g_n(omega) phi_n``."""
    N = f.coefficients.size
    if len(rdraw) < N:
        raise BasisMismatchError(f"draw of length {len(rdraw)} is shorter than the field ({N})")
    return f.with_coefficients(f.coefficients * rdraw.values[:N])


@dataclass(frozen=True)
class KhinchinEstimate:
    ratio: np.ndarray
    stderr: np.ndarray
    moment: np.ndarray
    r: float
    law: RandomLaw
    M: int

    def to_dict(self):
        return {
            "r": self.r,
            "law": self.law.value,
            "M": self.M,
            "ratio": np.asarray(self.ratio).tolist(),
            "stderr": np.asarray(self.stderr).tolist(),
        }


def khinchin_ratio(c, law, r, M, seed, threads=1, n_boot=200):
    """Monte Carlo ``(E|sum c_n g_n|^r)^(1/r) / (sqrt(r) ||c||_2)``.

    ``c`` may be a single vector or a ``(K, n)`` stack; the same draws are
    shared by every row. The standard error comes from a bootstrap over the
    means of 512-draw sub-batches.
    """
    if r < 2:
        raise ValueError("moment order r must be >= 2")
    if M < 10_000:
        raise ValueError("use at least 10^4 draws")
    single = np.ndim(c) == 1
    c = np.atleast_2d(np.asarray(c, dtype=complex))
    norms = np.linalg.norm(c, axis=1)
    if np.any(norms == 0):
        raise ValueError("coefficient vectors must be nonzero")
    law = RandomLaw.parse(law)
    n = c.shape[1]
    n_blocks = -(-M // BLOCK_SIZE)

    def work(b):
        size = min(BLOCK_SIZE, M - b * BLOCK_SIZE)
        g = ensemble_block(law, n, seed, b, size)
        s = np.abs(g @ c.T) ** r
        cuts = np.arange(0, size, _SUB_BATCH)
        return np.diff(np.append(cuts, size)), np.add.reduceat(s, cuts, axis=0)

    parts = _ordered_map(work, range(n_blocks), threads)
    sizes = np.concatenate([p[0] for p in parts]).astype(float)
    sums = np.concatenate([p[1] for p in parts])
    moment = sums.sum(axis=0) / M
    scale = math.sqrt(r) * norms
    ratio = moment ** (1.0 / r) / scale

    rng = seed.generator(_BOOTSTRAP_STREAM)
    n_sub = sizes.size
    pick = rng.integers(0, n_sub, size=(n_boot, n_sub))
    boot = sums[pick].sum(axis=1) / sizes[pick].sum(axis=1)[:, None]
    stderr = np.std(boot ** (1.0 / r) / scale, axis=0, ddof=1)
    if single:
        ratio, stderr, moment = ratio[0], stderr[0], moment[0]
    return KhinchinEstimate(ratio=ratio, stderr=stderr, moment=moment, r=r, law=law, M=M)
