"""Finite-dimensional unitary models built from permutation structure.

Every representation stores one operator per generator.  Operators keep
their exact combinatorial skeleton (permutations, standard-representation
blocks, block-monomial patterns, tensor factors) so that products of
images compose exactly: a relator of the source collapses to a literal
identity operator, not to a matrix that is merely close to I.  Dense
matrices only appear when someone explicitly asks for them.

The standard representation of a permutation uses the fixed isometry V
whose j-th row is (1,...,1,-(j+1),0,...,0)/sqrt((j+1)(j+2)) with j+1
leading ones: the Gram-Schmidt basis of the all-ones complement taken in
coordinate order.  Images are V M V* for the permutation matrix M with
M[i, p(i)] = 1; applying them costs O(n) via prefix sums.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .amalgam import (
    AmalgamSpec,
    free_kernel,
    induced_presentation,
    kernel_basis_word,
    stage_group_presentation,
)
from .cosets import DEFAULT_ENUM_BUDGET, CosetTable, FiniteQuotient, todd_coxeter
from .errors import SourceMismatch
from .perms import identity_perm, perm_inverse, perm_mul
from .presentations import Presentation
from .words import GroupPolynomial, Word

_DENSE_COMPOSE_CUTOFF = 512


# --- operators -----------------------------------------------------------------


class IdentityOp:
    __slots__ = ("dim",)

    def __init__(self, dim: int):
        self.dim = dim

    def matmat(self, X):
        return np.asarray(X)

    def adjoint(self):
        return self

    def trace(self):
        return self.dim

    def dense(self):
        return np.eye(self.dim, dtype=complex)

    def is_identity(self):
        return True

    def key(self):
        return ("id", self.dim)


class PermOp:
    """Permutation matrix with M[i, p(i)] = 1, so (Mx)[i] = x[p(i)]."""

    __slots__ = ("perm", "dim")

    def __init__(self, perm: Sequence[int]):
        self.perm = tuple(perm)
        self.dim = len(self.perm)

    def matmat(self, X):
        return np.asarray(X)[list(self.perm)]

    def adjoint(self):
        return PermOp(perm_inverse(self.perm))

    def trace(self):
        return sum(1 for i, j in enumerate(self.perm) if i == j)

    def dense(self):
        out = np.zeros((self.dim, self.dim), dtype=complex)
        out[range(self.dim), list(self.perm)] = 1.0
        return out

    def is_identity(self):
        return self.perm == identity_perm(self.dim)

    def key(self):
        if self.is_identity():
            return ("id", self.dim)
        return ("perm", self.perm)


class StdPermOp:
    """Restriction of a permutation matrix to the all-ones complement,
    via the fixed isometry described in the module docstring."""

    __slots__ = ("perm", "dim", "_coef")

    def __init__(self, perm: Sequence[int]):
        self.perm = tuple(perm)
        n = len(self.perm)
        if n < 2:
            raise ValueError("standard block needs at least two points")
        self.dim = n - 1
        j = np.arange(1, n, dtype=float)
        self._coef = 1.0 / np.sqrt(j * (j + 1))

    def _lift(self, X):
        # V* X: embed coefficients back into n coordinates
        n = self.dim + 1
        C = self._coef[:, None] * X
        suffix = np.zeros((n, X.shape[1]), dtype=C.dtype)
        suffix[: n - 1] = np.cumsum(C[::-1], axis=0)[::-1]
        out = suffix.copy()
        i = np.arange(1, n)
        out[1:] -= (i * self._coef)[:, None] * X
        return out

    def _project(self, Z):
        # V Z: prefix sums against the same isometry rows
        P = np.cumsum(Z, axis=0)
        j = np.arange(self.dim)
        return self._coef[:, None] * (P[j] - (j + 1)[:, None] * Z[j + 1])

    def matmat(self, X):
        X = np.asarray(X, dtype=complex)
        return self._project(self._lift(X)[list(self.perm)])

    def adjoint(self):
        return StdPermOp(perm_inverse(self.perm))

    def trace(self):
        return sum(1 for i, j in enumerate(self.perm) if i == j) - 1

    def dense(self):
        return self.matmat(np.eye(self.dim, dtype=complex))

    def is_identity(self):
        return self.perm == identity_perm(self.dim + 1)

    def key(self):
        if self.is_identity():
            return ("id", self.dim)
        return ("std", self.perm)


class BlockMonomialOp:
    """Block matrix with one nonzero block per row: row i holds blocks[i]
    in column sigma[i]."""

    __slots__ = ("sigma", "blocks", "block_dim", "dim")

    def __init__(self, sigma: Sequence[int], blocks: Sequence):
        self.sigma = tuple(sigma)
        self.blocks = tuple(blocks)
        if len(self.sigma) != len(self.blocks) or not self.blocks:
            raise ValueError("one block per row is required")
        dims = {b.dim for b in self.blocks}
        if len(dims) != 1:
            raise ValueError("blocks must share one dimension")
        self.block_dim = dims.pop()
        self.dim = len(self.blocks) * self.block_dim

    def matmat(self, X):
        X = np.asarray(X, dtype=complex)
        cols = X.shape[1]
        X3 = X.reshape(len(self.blocks), self.block_dim, cols)
        out = np.empty_like(X3)
        for i, block in enumerate(self.blocks):
            out[i] = block.matmat(X3[self.sigma[i]])
        return out.reshape(self.dim, cols)

    def adjoint(self):
        tau = perm_inverse(self.sigma)
        return BlockMonomialOp(tau, tuple(self.blocks[t].adjoint() for t in tau))

    def trace(self):
        return sum(b.trace() for i, b in enumerate(self.blocks) if self.sigma[i] == i)

    def dense(self):
        out = np.zeros((self.dim, self.dim), dtype=complex)
        d = self.block_dim
        for i, block in enumerate(self.blocks):
            j = self.sigma[i]
            out[i * d : (i + 1) * d, j * d : (j + 1) * d] = block.dense()
        return out

    def is_identity(self):
        return self.sigma == identity_perm(len(self.blocks)) and all(
            b.is_identity() for b in self.blocks
        )

    def key(self):
        if self.is_identity():
            return ("id", self.dim)
        return ("block", self.sigma, tuple(b.key() for b in self.blocks))


class TensorOp:
    __slots__ = ("left", "right", "dim")

    def __init__(self, left, right):
        self.left = left
        self.right = right
        self.dim = left.dim * right.dim

    def matmat(self, X):
        X = np.asarray(X, dtype=complex)
        cols = []
        for c in range(X.shape[1]):
            Xm = X[:, c].reshape(self.left.dim, self.right.dim)
            Z = self.left.matmat(Xm)
            cols.append(self.right.matmat(Z.T).T.reshape(-1))
        return np.stack(cols, axis=1)

    def adjoint(self):
        return TensorOp(self.left.adjoint(), self.right.adjoint())

    def trace(self):
        return self.left.trace() * self.right.trace()

    def dense(self):
        return np.kron(self.left.dense(), self.right.dense())

    def is_identity(self):
        return self.left.is_identity() and self.right.is_identity()

    def key(self):
        if self.is_identity():
            return ("id", self.dim)
        return ("tensor", self.left.key(), self.right.key())


class DenseOp:
    __slots__ = ("mat", "dim")

    def __init__(self, mat):
        self.mat = np.asarray(mat, dtype=complex)
        if self.mat.ndim != 2 or self.mat.shape[0] != self.mat.shape[1]:
            raise ValueError("dense operator must be square")
        self.dim = self.mat.shape[0]

    def matmat(self, X):
        return self.mat @ np.asarray(X, dtype=complex)

    def adjoint(self):
        return DenseOp(self.mat.conj().T)

    def trace(self):
        return complex(np.trace(self.mat))

    def dense(self):
        return self.mat

    def is_identity(self):
        return bool(np.allclose(self.mat, np.eye(self.dim), atol=1e-12))

    def key(self):
        raise TypeError("dense operators have no exact key")


class ChainOp:
    """Lazy product, applied right to left."""

    __slots__ = ("factors", "dim")

    def __init__(self, factors):
        self.factors = tuple(factors)
        self.dim = self.factors[0].dim

    def matmat(self, X):
        out = np.asarray(X, dtype=complex)
        for f in reversed(self.factors):
            out = f.matmat(out)
        return out

    def adjoint(self):
        return ChainOp([f.adjoint() for f in reversed(self.factors)])

    def trace(self):
        if self.dim <= 4096:
            return complex(np.trace(self.dense()))
        raise NotImplementedError("trace of a large operator chain")

    def dense(self):
        out = self.factors[-1].dense()
        for f in reversed(self.factors[:-1]):
            out = f.dense() @ out
        return out

    def is_identity(self):
        return self.dim <= 4096 and bool(
            np.allclose(self.dense(), np.eye(self.dim), atol=1e-10)
        )

    def key(self):
        raise TypeError("operator chains have no exact key")


class SumOp:
    """Linear combination sum(coeff * op); the shape evaluate() returns."""

    __slots__ = ("terms", "dim")

    def __init__(self, terms, dim=None):
        self.terms = tuple((complex(c), op) for (c, op) in terms)
        if not self.terms and dim is None:
            raise ValueError("empty sum needs an explicit dimension")
        self.dim = dim if dim is not None else self.terms[0][1].dim

    def matmat(self, X):
        X = np.asarray(X, dtype=complex)
        out = np.zeros(X.shape, dtype=complex)
        for c, op in self.terms:
            out += c * op.matmat(X)
        return out

    def adjoint(self):
        return SumOp([(c.conjugate(), op.adjoint()) for (c, op) in self.terms], self.dim)

    def trace(self):
        return sum(c * op.trace() for (c, op) in self.terms)

    def dense(self):
        out = np.zeros((self.dim, self.dim), dtype=complex)
        for c, op in self.terms:
            out += c * op.dense()
        return out

    def is_identity(self):
        return bool(np.allclose(self.dense(), np.eye(self.dim), atol=1e-10))


def compose(a, b):
    """Operator of the matrix product a.b, kept structural when the types
    allow exact composition."""
    if a.dim != b.dim:
        raise ValueError("dimension mismatch in composition")
    if isinstance(a, IdentityOp):
        return b
    if isinstance(b, IdentityOp):
        return a
    if isinstance(a, PermOp) and isinstance(b, PermOp):
        return PermOp(perm_mul(a.perm, b.perm))
    if isinstance(a, StdPermOp) and isinstance(b, StdPermOp):
        return StdPermOp(perm_mul(a.perm, b.perm))
    if isinstance(a, BlockMonomialOp) and isinstance(b, BlockMonomialOp):
        if a.block_dim == b.block_dim:
            sigma = tuple(b.sigma[a.sigma[i]] for i in range(len(a.sigma)))
            blocks = tuple(
                compose(a.blocks[i], b.blocks[a.sigma[i]]) for i in range(len(a.blocks))
            )
            return BlockMonomialOp(sigma, blocks)
    if isinstance(a, TensorOp) and isinstance(b, TensorOp):
        if a.left.dim == b.left.dim and a.right.dim == b.right.dim:
            return TensorOp(compose(a.left, b.left), compose(a.right, b.right))
    if a.dim <= _DENSE_COMPOSE_CUTOFF:
        return DenseOp(a.dense() @ b.dense())
    return ChainOp([a, b])


# --- representations ------------------------------------------------------------


@dataclass(frozen=True)
class UnitaryRep:
    """One unitary operator per generator of the source group."""

    dimension: int
    generator_names: tuple[str, ...]
    images: tuple
    kind: str
    source: str
    seed: int | None = None

    def __post_init__(self):
        if len(self.generator_names) != len(self.images):
            raise ValueError("one image per generator is required")
        for op in self.images:
            if op.dim != self.dimension:
                raise ValueError("image dimension disagrees with the representation")

    @property
    def rank(self) -> int:
        return len(self.images)

    def word_image(self, w: Word):
        out: object = IdentityOp(self.dimension)
        for le in w:
            if le.gen >= self.rank:
                raise ValueError("word uses a generator outside the source alphabet")
            img = self.images[le.gen]
            img = img if le.sign == 1 else img.adjoint()
            out = compose(out, img)
        return out

    def normalized_trace(self, w: Word) -> complex:
        return complex(self.word_image(w).trace()) / self.dimension


@dataclass(frozen=True)
class ModelSchedule:
    """Grid cell of the model pipeline: stage index, free-model dimension,
    seed, and the tensor pairing sizes (defaulting to the dimension)."""

    stage: int
    dimension: int
    seed: int
    pair_m: int | None = None
    pair_k: int | None = None

    def __post_init__(self):
        if self.stage < 0 or self.dimension < 2:
            raise ValueError("stage must be nonnegative and dimension at least 2")
        for v in (self.pair_m, self.pair_k):
            if v is not None and v < 2:
                raise ValueError("pairing sizes must be at least 2")

    @property
    def m(self) -> int:
        return self.pair_m if self.pair_m is not None else self.dimension

    @property
    def k(self) -> int:
        return self.pair_k if self.pair_k is not None else self.dimension


def random_permutation_model(k: int, n: int, seed: int) -> UnitaryRep:
    """Standard-representation blocks of k independent uniform random
    permutations of n points: a (n-1)-dimensional model of the rank-k
    free group."""
    if k < 1 or n < 2:
        raise ValueError("need at least one generator and two points")
    from .rng import SplitMix64

    gen = SplitMix64(seed)
    images = tuple(StdPermOp(gen.permutation(n)) for _ in range(k))
    names = tuple(f"f{i}" for i in range(k))
    return UnitaryRep(n - 1, names, images, "perm-standard", f"free:{k}", seed)


def trivial_rep(names: Sequence[str], source: str = "trivial") -> UnitaryRep:
    return UnitaryRep(1, tuple(names), tuple(IdentityOp(1) for _ in names), "regular", source)


def regular_rep(q: FiniteQuotient) -> UnitaryRep:
    """Permutation matrices of multiplication on the element list; the
    trace of every non-identity element is zero."""
    enum = q.enumeration()
    n = len(enum.elements)
    images = []
    for g in range(q.rank):
        gi = enum.index[q.generator_images[g]]
        inv = enum.inv(gi)
        images.append(PermOp(tuple(enum.mul(inv, x) for x in range(n))))
    return UnitaryRep(n, q.generator_names, tuple(images), "regular", f"finite:{n}")


def induced_rep(
    rho: UnitaryRep,
    t: CosetTable,
    rewrite: Callable[[Word], Word] | None = None,
    names: Sequence[str] | None = None,
) -> UnitaryRep:
    """Block-monomial induction along a coset table: block row c carries
    rho at the Schreier element of (c, g) in column c.g.  rewrite maps
    ambient subgroup words into rho's alphabet (identity by default)."""
    rewrite = rewrite or (lambda w: w)
    rank = len(t.generator_actions)
    images = []
    for g in range(rank):
        sigma = t.generator_actions[g]
        blocks = tuple(
            rho.word_image(rewrite(t.schreier_word(c, g))) for c in range(t.num_cosets)
        )
        images.append(BlockMonomialOp(sigma, blocks))
    if names is None:
        names = tuple(f"g{i}" for i in range(rank))
    return UnitaryRep(
        t.num_cosets * rho.dimension,
        tuple(names),
        tuple(images),
        "induced",
        f"induced({rho.source})",
        rho.seed,
    )


def tensor_rep(r1: UnitaryRep, r2: UnitaryRep, mode: str) -> UnitaryRep:
    if mode == "same-group":
        if r1.source != r2.source or r1.rank != r2.rank:
            raise SourceMismatch("same-group tensor needs identical sources")
        images = tuple(
            TensorOp(a, b) for a, b in zip(r1.images, r2.images)
        )
        return UnitaryRep(
            r1.dimension * r2.dimension,
            r1.generator_names,
            images,
            "tensor",
            r1.source,
            r1.seed if r1.seed is not None else r2.seed,
        )
    if mode == "product-group":
        left = tuple(TensorOp(a, IdentityOp(r2.dimension)) for a in r1.images)
        right = tuple(TensorOp(IdentityOp(r1.dimension), b) for b in r2.images)
        names = tuple(f"l.{x}" for x in r1.generator_names) + tuple(
            f"r.{x}" for x in r2.generator_names
        )
        return UnitaryRep(
            r1.dimension * r2.dimension,
            names,
            left + right,
            "tensor",
            f"product({r1.source},{r2.source})",
            r1.seed if r1.seed is not None else r2.seed,
        )
    raise SourceMismatch(f"unknown tensor mode {mode!r}")


def stage_model(
    p: Presentation,
    subgens: Sequence[Word],
    spec: AmalgamSpec,
    sched: ModelSchedule,
    g_model: UnitaryRep,
) -> UnitaryRep:
    """Model of the amalgam of the presented group with subgroup x Z:

    induce a random permutation model of the free retraction kernel up to
    the whole amalgam, then tensor with the supplied model of the group.
    The result is an exact homomorphism; its image group is finite
    whenever g_model's is.
    """
    if g_model.rank != p.rank:
        raise SourceMismatch("group model rank disagrees with the presentation")
    if tuple(spec.separated_words) != tuple(subgens):
        raise SourceMismatch("spec was built for a different subgroup")
    rank, basis = free_kernel(spec, certify=False)
    rho = random_permutation_model(rank, sched.dimension, sched.seed)
    pres = induced_presentation(spec)
    table = todd_coxeter(pres, basis, max_cosets=DEFAULT_ENUM_BUDGET)
    phi = induced_rep(
        rho,
        table,
        rewrite=lambda w: kernel_basis_word(spec, w),
        names=pres.generator_names,
    )
    source = stage_group_presentation(p, tuple(subgens), spec.stable_letter)
    images = tuple(
        TensorOp(phi.images[i], g_model.images[i]) for i in range(p.rank)
    ) + (TensorOp(phi.images[p.rank], IdentityOp(g_model.dimension)),)
    return UnitaryRep(
        phi.dimension * g_model.dimension,
        source.generator_names,
        images,
        "composed",
        f"stage({spec.factor_order},{spec.subgroup_order})",
        sched.seed,
    )


def evaluate(rep: UnitaryRep, poly: GroupPolynomial) -> SumOp:
    """Sum of coefficient times word image; returns a linear operator
    (use .dense() for an explicit matrix)."""
    terms = [(c, rep.word_image(w)) for w, c in sorted(
        poly.terms.items(), key=lambda item: item[0].to_signed()
    )]
    return SumOp(terms, rep.dimension)


def image_group_closure(rep: UnitaryRep, limit: int = 10_000) -> int:
    """Close the generated image set under multiplication, tracking exact
    structural keys, and return its size.

    Operators built purely from permutation skeletons compose without
    arithmetic, so stabilization below the limit certifies the image
    group is finite; the count bounds its order from above (distinct
    skeletons may occasionally represent equal matrices).  Raises
    BudgetExceeded when the closure passes `limit` elements and
    TypeError when some image carries no exact key.
    """
    from .errors import BudgetExceeded

    gens = []
    for op in rep.images:
        gens.append(op)
        gens.append(op.adjoint())
    seen = {("id", rep.dimension): IdentityOp(rep.dimension)}
    frontier = list(seen.values())
    while frontier:
        nxt = []
        for cur in frontier:
            for g in gens:
                prod = compose(cur, g)
                k = prod.key()
                if k not in seen:
                    seen[k] = prod
                    nxt.append(prod)
                    if len(seen) > limit:
                        raise BudgetExceeded(
                            f"image group did not close within {limit} elements"
                        )
        frontier = nxt
    return len(seen)


def unitarity_defect(rep: UnitaryRep) -> float:
    """Max over generators of the Frobenius norm of U*U - I; zero without
    arithmetic for structured operators."""
    worst = 0.0
    for op in rep.images:
        if compose(op.adjoint(), op).is_identity():
            continue
        if rep.dimension > 4096:
            raise NotImplementedError("defect of a large unstructured operator")
        gram = op.adjoint().matmat(op.dense())
        worst = max(worst, float(np.linalg.norm(gram - np.eye(rep.dimension))))
    return worst


# --- serialization ---------------------------------------------------------------


def op_to_json(op) -> dict:
    if isinstance(op, IdentityOp):
        return {"identity": op.dim}
    if isinstance(op, PermOp):
        return {"perm": list(op.perm)}
    if isinstance(op, StdPermOp):
        return {"std_perm": list(op.perm)}
    if isinstance(op, BlockMonomialOp):
        return {
            "block": {
                "sigma": list(op.sigma),
                "blocks": [op_to_json(b) for b in op.blocks],
            }
        }
    if isinstance(op, TensorOp):
        return {"tensor": [op_to_json(op.left), op_to_json(op.right)]}
    return {"dense_dim": op.dim}


def rep_metadata(rep: UnitaryRep) -> dict:
    return {
        "kind": rep.kind,
        "dimension": rep.dimension,
        "seed": rep.seed,
        "source": rep.source,
        "generators": list(rep.generator_names),
        "images": [op_to_json(op) for op in rep.images],
    }


def rep_metadata_json(rep: UnitaryRep) -> str:
    return json.dumps(rep_metadata(rep), sort_keys=True, separators=(",", ":"))


def dense_matrix_bytes(mat) -> bytes:
    """Binary payload: magic 'AMLB', uint32 rows, uint32 cols (little
    endian), then row-major interleaved (re, im) float64 little endian."""
    mat = np.asarray(mat, dtype=complex)
    header = b"AMLB" + struct.pack("<II", mat.shape[0], mat.shape[1])
    inter = np.empty(mat.size * 2, dtype="<f8")
    inter[0::2] = mat.real.reshape(-1)
    inter[1::2] = mat.imag.reshape(-1)
    return header + inter.tobytes()


def dense_matrix_from_bytes(payload: bytes):
    if payload[:4] != b"AMLB":
        raise ValueError("bad matrix payload header")
    rows, cols = struct.unpack("<II", payload[4:12])
    inter = np.frombuffer(payload, dtype="<f8", offset=12)
    return (inter[0::2] + 1j * inter[1::2]).reshape(rows, cols)
