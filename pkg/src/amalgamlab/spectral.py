"""Operator norms, truncated-ball lower bounds, and matching-defect reports.

Norms come from a restarted Lanczos iteration on M*M with full
reorthogonalization inside each restart window.  The returned bracket is
[sqrt(theta), sqrt(theta + r)] for the top Ritz value theta and residual
r: the lower end is a Rayleigh quotient and rigorous, the upper end is
certified once the iteration has locked onto the top eigenvalue.  Small
problems skip all of this and take a dense SVD.

Ball bounds compress left multiplication by a polynomial onto the
finite-radius ball of the group, enumerated breadth-first over exact
normal forms.  A compression never exceeds the true norm, so the result
is a certified lower bound; when the ball stops growing the group is
finite, the compression is the whole operator, and the bound is exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product
from typing import Callable, Sequence

import numpy as np
import scipy.sparse

from .amalgam import (
    AmalgamSpec,
    amalgam_identity,
    amalgam_mul,
    reduce_stage_word,
)
from .cosets import FiniteQuotient
from .errors import BallBudgetExceeded, CoefficientBoundViolated
from .reps import SumOp, UnitaryRep, evaluate
from .rng import SplitMix64
from .words import GroupPolynomial, Letter, Word

_DENSE_NORM_CUTOFF = 256
_LANCZOS_WINDOW = 25
DEFAULT_BALL_BUDGET = 200_000

_ESTIMATE_KINDS = ("exact", "upper", "lower")
_ESTIMATE_METHODS = ("lanczos", "dense", "ball-truncation", "closed-form")


@dataclass(frozen=True)
class NormEstimate:
    """A norm value with its direction of validity.

    kind "exact" means the true norm lies within `tolerance` of `value`;
    "lower" and "upper" are one-sided.  `radius` is set for ball
    truncations, `converged` is false when an iteration returned its best
    bracket without reaching the requested width.
    """

    value: float
    kind: str
    tolerance: float
    method: str
    converged: bool = True
    radius: int | None = None

    def __post_init__(self):
        if self.kind not in _ESTIMATE_KINDS:
            raise ValueError(f"unknown estimate kind {self.kind!r}")
        if self.method not in _ESTIMATE_METHODS:
            raise ValueError(f"unknown estimate method {self.method!r}")
        if not math.isfinite(self.value):
            raise ValueError("estimate value must be finite")
        if self.tolerance < 0:
            raise ValueError("tolerance must be nonnegative")
        if self.method == "lanczos" and self.tolerance == 0:
            raise ValueError("iterative estimates carry a positive tolerance")

    def to_json_dict(self) -> dict:
        return {
            "value": self.value,
            "kind": self.kind,
            "tolerance": self.tolerance,
            "method": self.method,
            "converged": self.converged,
            "radius": self.radius,
        }


def norm_estimate_from_json(d: dict) -> NormEstimate:
    return NormEstimate(
        value=float(d["value"]),
        kind=d["kind"],
        tolerance=float(d["tolerance"]),
        method=d["method"],
        converged=bool(d.get("converged", True)),
        radius=d.get("radius"),
    )


# --- operator norm ----------------------------------------------------------------


def _seeded_start(dim: int, seed: int) -> np.ndarray:
    g = SplitMix64(seed)
    v = np.array([g.next_uint64() / 2.0**64 - 0.5 for _ in range(dim)])
    n = float(np.linalg.norm(v))
    return v / n


def op_norm(
    op,
    tol: float = 1e-6,
    max_matvecs: int | None = None,
    seed: int = 0,
) -> NormEstimate:
    """Largest singular value of a linear operator.

    Dense SVD below the cutoff; otherwise restarted Lanczos on M*M until
    the bracket described in the module docstring is narrower than tol.
    Exhausting the matvec cap returns the best bracket with converged
    False instead of raising.
    """
    dim = op.dim
    if dim == 0:
        return NormEstimate(0.0, "exact", 0.0, "dense")
    if dim <= _DENSE_NORM_CUTOFF:
        top = float(np.linalg.svd(np.asarray(op.dense()), compute_uv=False)[0])
        return NormEstimate(top, "exact", 1e-12 * max(1.0, top), "dense")

    adj = op.adjoint()

    def bmv(x: np.ndarray) -> np.ndarray:
        return adj.matmat(op.matmat(x[:, None]))[:, 0]

    cap = max_matvecs if max_matvecs is not None else int(50 * math.sqrt(dim)) + 50
    v = _seeded_start(dim, seed).astype(complex)
    used = 0
    lo, width = 0.0, math.inf
    while True:
        window = min(_LANCZOS_WINDOW, dim, max(cap - used, 2))
        Q = np.zeros((dim, window), dtype=complex)
        Q[:, 0] = v
        alphas: list[float] = []
        betas: list[float] = []
        k = 1
        for j in range(window):
            w = bmv(Q[:, j])
            used += 1
            a = float(np.vdot(Q[:, j], w).real)
            alphas.append(a)
            # full reorthogonalization, applied twice for safety
            for _ in range(2):
                w = w - Q[:, : j + 1] @ (Q[:, : j + 1].conj().T @ w)
            b = float(np.linalg.norm(w))
            k = j + 1
            if j == window - 1 or b < 1e-13 or used >= cap:
                break
            betas.append(b)
            Q[:, j + 1] = w / b
        T = np.diag(alphas[:k])
        if k > 1:
            T += np.diag(betas[: k - 1], 1) + np.diag(betas[: k - 1], -1)
        evals, evecs = np.linalg.eigh(T)
        theta = float(evals[-1])
        v = Q[:, :k] @ evecs[:, -1]
        v = v / float(np.linalg.norm(v))
        resid = float(np.linalg.norm(bmv(v) - theta * v))
        used += 1
        lo = math.sqrt(max(theta, 0.0))
        hi = math.sqrt(max(theta + resid, 0.0))
        width = max(hi - lo, 1e-15)
        if width <= tol:
            return NormEstimate(lo, "exact", width, "lanczos")
        if used >= cap:
            # the Rayleigh end is rigorous even here; the other end is not
            # certified before convergence, so the kind drops to one-sided
            return NormEstimate(lo, "lower", width, "lanczos", converged=False)


# --- ball enumeration --------------------------------------------------------------


class FreeBallSource:
    """Reduced words of a free group, keyed by signed-letter tuples."""

    def __init__(self, rank: int):
        if rank < 1:
            raise ValueError("free group needs at least one generator")
        self.rank = rank

    def identity(self):
        return ()

    def left_apply(self, key, le: Letter):
        s = (le.gen + 1) * le.sign
        if key and key[0] == -s:
            return key[1:]
        return (s,) + key


class FiniteBallSource:
    """Elements of a finite quotient, keyed by enumeration index."""

    def __init__(self, q: FiniteQuotient):
        self._enum = q.enumeration()
        self.rank = q.rank
        self._letters = {}
        for g in range(q.rank):
            e = self._enum.index[q.generator_images[g]]
            self._letters[Letter(g, 1)] = e
            self._letters[Letter(g, -1)] = self._enum.inv(e)

    def identity(self):
        return 0

    def left_apply(self, key, le: Letter):
        return self._enum.mul(self._letters[le], key)


class AmalgamBallSource:
    """Elements of a stage amalgam, keyed by their normal form.  The
    alphabet is the factor's generators followed by the stable letter."""

    def __init__(self, spec: AmalgamSpec):
        self.spec = spec
        self.rank = len(spec.left_factor.generator_names) + 1
        self._letters = {}
        for g in range(self.rank):
            for sign in (1, -1):
                le = Letter(g, sign)
                self._letters[le] = reduce_stage_word(spec, Word((le,)))

    def identity(self):
        return amalgam_identity()

    def left_apply(self, key, le: Letter):
        return amalgam_mul(self.spec, self._letters[le], key)


class FreeProductBallSource:
    """Elements of a free product of two finite quotients, keyed by their
    alternating syllable sequence ((factor, element), ...).  The alphabet
    is the first factor's generators followed by the second's."""

    def __init__(self, q1: FiniteQuotient, q2: FiniteQuotient):
        self._enums = (q1.enumeration(), q2.enumeration())
        self.rank = q1.rank + q2.rank
        self._letters = {}
        for side, q in enumerate((q1, q2)):
            enum = self._enums[side]
            for g in range(q.rank):
                e = enum.index[q.generator_images[g]]
                slot = g if side == 0 else q1.rank + g
                self._letters[Letter(slot, 1)] = (side, e)
                self._letters[Letter(slot, -1)] = (side, enum.inv(e))

    def identity(self):
        return ()

    def left_apply(self, key, le: Letter):
        side, e = self._letters[le]
        if e == 0:
            return key
        if key and key[0][0] == side:
            merged = self._enums[side].mul(e, key[0][1])
            if merged == 0:
                return key[1:]
            return ((side, merged),) + key[1:]
        return ((side, e),) + key


def _apply_word_left(source, key, w: Word):
    for le in reversed(tuple(w)):
        key = source.left_apply(key, le)
    return key


def _enumerate_ball(source, radius: int, budget: int):
    ident = source.identity()
    index = {ident: 0}
    order = [ident]
    frontier = [ident]
    saturated = False
    for _ in range(radius):
        fresh = []
        for x in frontier:
            for g in range(source.rank):
                for sign in (1, -1):
                    y = source.left_apply(x, Letter(g, sign))
                    if y not in index:
                        if len(order) >= budget:
                            raise BallBudgetExceeded(
                                f"ball exceeds the {budget}-element budget"
                            )
                        index[y] = len(order)
                        order.append(y)
                        fresh.append(y)
        if not fresh:
            saturated = True
            break
        frontier = fresh
    return index, order, saturated


class _SparseOp:
    __slots__ = ("mat", "dim")

    def __init__(self, mat):
        self.mat = mat.tocsr()
        self.dim = mat.shape[0]

    def matmat(self, X):
        return np.asarray(self.mat @ np.asarray(X))

    def adjoint(self):
        return _SparseOp(self.mat.conj().T)

    def dense(self):
        return self.mat.toarray()


def ball_lower_bound(
    source,
    poly: GroupPolynomial,
    radius: int,
    budget: int = DEFAULT_BALL_BUDGET,
    tol: float = 1e-6,
) -> NormEstimate:
    """Norm of left multiplication by the polynomial compressed to the
    radius ball.  Always a valid lower bound for the full norm; exact
    when the ball saturates the (then finite) group."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    if poly.max_support_length() > radius:
        raise ValueError("polynomial support is longer than the ball radius")
    index, order, saturated = _enumerate_ball(source, radius, budget)
    n = len(order)
    terms = sorted(poly.terms.items(), key=lambda kv: kv[0].to_signed())
    real = all(abs(c.imag) == 0 for _, c in terms)
    rows: list[int] = []
    cols: list[int] = []
    data: list = []
    for i, x in enumerate(order):
        for w, c in terms:
            j = index.get(_apply_word_left(source, x, w))
            if j is not None:
                rows.append(j)
                cols.append(i)
                data.append(c.real if real else c)
    mat = scipy.sparse.csr_matrix(
        (data, (rows, cols)), shape=(n, n), dtype=float if real else complex
    )
    est = op_norm(_SparseOp(mat), tol=tol)
    return NormEstimate(
        est.value,
        "exact" if saturated and est.converged else "lower",
        est.tolerance,
        "ball-truncation",
        converged=est.converged,
        radius=radius,
    )


# --- matching-defect reports --------------------------------------------------------


@dataclass(frozen=True)
class PolyGap:
    """Norm comparison for one polynomial: model value minus reference."""

    model: NormEstimate
    reference: NormEstimate
    gap: float
    one_sided: bool

    def to_json_dict(self) -> dict:
        return {
            "model": self.model.to_json_dict(),
            "reference": self.reference.to_json_dict(),
            "gap": self.gap,
            "one_sided": self.one_sided,
        }


@dataclass(frozen=True)
class MFReport:
    """Defect summary of a finite-dimensional model over a word set F.

    eps1: worst multiplicativity defect over F x F.
    eps2: worst normalized trace magnitude over the nontrivial part of F.
    eps3: worst norm defect against the references; gaps against a
    reference that is only a lower bound count only when negative.
    """

    eps1: float
    eps2: float
    eps3: float
    gaps: tuple[PolyGap, ...]
    test_words: int
    dimension: int
    kind: str
    seed: int | None

    def to_json_dict(self) -> dict:
        return {
            "eps1": self.eps1,
            "eps2": self.eps2,
            "eps3": self.eps3,
            "gaps": [g.to_json_dict() for g in self.gaps],
            "test_words": self.test_words,
            "dimension": self.dimension,
            "kind": self.kind,
            "seed": self.seed,
        }


def _exact_keys_equal(a, b) -> bool | None:
    try:
        return a.key() == b.key()
    except TypeError:
        return None


def _operator_distance(a, b, dim: int) -> float:
    same = _exact_keys_equal(a, b)
    if same:
        return 0.0
    if dim <= 2048:
        return float(np.linalg.norm(a.dense() - b.dense(), 2))
    diff = SumOp([(1.0, a), (-1.0, b)], dim)
    est = op_norm(diff, tol=1e-9)
    return est.value + est.tolerance


def mf_report(
    rep: UnitaryRep,
    test_words: Sequence[Word],
    polys: Sequence[GroupPolynomial] = (),
    refs: Sequence[NormEstimate] = (),
    identity_filter: Callable[[Word], bool] | None = None,
    tol: float = 1e-6,
) -> MFReport:
    """Measure how far a model is from a trace-faithful representation.

    test_words should be closed enough under products for eps1 to mean
    anything; every polynomial must have coefficients of modulus at most
    one, and refs align with polys position by position.  A model norm
    below a lower-bound reference contributes the shortfall to eps3 and
    shows up as a negative gap; it is never treated as an error, since a
    small model can sit below the limiting norm without inconsistency.
    """
    if len(polys) != len(refs):
        raise ValueError("one reference per polynomial is required")
    for poly in polys:
        if poly.max_abs_coeff() > 1 + 1e-12:
            raise CoefficientBoundViolated(
                "certification requires coefficients of modulus at most one"
            )
    trivial = identity_filter or (lambda w: w.is_identity)

    from .reps import compose

    images = {w: rep.word_image(w) for w in test_words}
    eps1 = 0.0
    for g, h in product(test_words, repeat=2):
        lhs = rep.word_image(g * h)
        rhs = compose(images[g], images[h])
        eps1 = max(eps1, _operator_distance(lhs, rhs, rep.dimension))

    eps2 = 0.0
    for w in test_words:
        if trivial(w):
            continue
        eps2 = max(eps2, abs(complex(images[w].trace())) / rep.dimension)

    gaps = []
    eps3 = 0.0
    for poly, ref in zip(polys, refs):
        model = op_norm(evaluate(rep, poly), tol=tol)
        gap = model.value - ref.value
        one_sided = ref.kind == "lower"
        # a model norm below a group lower bound is recorded, never raised:
        # small models dip below the limit norm without any inconsistency
        if ref.kind == "exact":
            eps3 = max(eps3, abs(gap))
        elif ref.kind == "lower":
            eps3 = max(eps3, max(0.0, -gap))
        else:
            eps3 = max(eps3, max(0.0, gap))
        gaps.append(PolyGap(model, ref, gap, one_sided))

    return MFReport(
        eps1=eps1,
        eps2=eps2,
        eps3=eps3,
        gaps=tuple(gaps),
        test_words=len(test_words),
        dimension=rep.dimension,
        kind=rep.kind,
        seed=rep.seed,
    )
