"""Exact extreme-ray and vertex enumeration for pointed rational cones.

Two independent routes are shipped:

* :func:`extreme_rays_dd` — incremental double description. Constraints
  are inserted one at a time into an initial simplicial cone built from
  a nonsingular row subset; surviving rays and adjacent cross-pairs are
  combined at each step. Tight sets are kept as bit masks (numpy uint64
  words) so the combinatorial adjacency test vectorizes.
* :func:`extreme_rays_bruteforce` — enumerate every (N-1)-subset of
  constraint rows with rank N-1 and keep the feasible kernel directions.
  Exponential, guarded, and used as the oracle for the first route.

All ray coordinates are integers with gcd 1 and canonical sign. The
fast path works in int64; if intermediate growth could overflow, the
engine transparently switches the coordinate arrays to Python integers
(numpy object dtype) and keeps going exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import gcd
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    InfeasiblePoint,
    InternalInconsistency,
    NonPositiveLevel,
    NotPointed,
    TooLarge,
)
from .exactla import Rational, rational_rank

# int64 stays safe as long as every combination s_p*q - s_q*p fits;
# |s| <= N * max|A| * max|coord|, so this bounds max|coord| during a step
_INT64_LIMIT = 2**62


@dataclass(frozen=True)
class HRepCone:
    """{x : A x >= 0} with integer constraint rows."""

    dim: int
    constraints: tuple[tuple[int, ...], ...]

    @staticmethod
    def from_rows(rows: Sequence[Sequence[Rational]]) -> "HRepCone":
        if not rows:
            raise ValueError("constraint matrix must be non-empty")
        dim = len(rows[0])
        out = []
        for row in rows:
            if len(row) != dim:
                raise DimensionMismatch("ragged constraint matrix")
            fr = [Fraction(x) for x in row]
            den = 1
            for x in fr:
                den = den * x.denominator // gcd(den, x.denominator)
            iv = [int(x * den) for x in fr]
            g = _vec_gcd(iv)
            if g == 0:
                raise ValueError("all-zero constraint row")
            out.append(tuple(x // g for x in iv))
        return HRepCone(dim=dim, constraints=tuple(out))


@dataclass(frozen=True, order=True)
class Ray:
    """Integer extreme direction with its tight constraint indices."""

    coords: tuple[int, ...]
    tight_set: tuple[int, ...]


@dataclass(frozen=True, order=True)
class Vertex:
    """Trace-normalized extreme point of a sliced cone."""

    coords: tuple[Fraction, ...]
    tight_set: tuple[int, ...]
    is_unit_vector: bool


def _vec_gcd(v: Iterable[int]) -> int:
    g = 0
    for x in v:
        g = gcd(g, abs(x) if isinstance(x, int) else abs(int(x)))
    return g


def _canonical_sign(coords: list[int]) -> list[int]:
    t = sum(coords)
    if t < 0 or (t == 0 and next((x for x in coords if x), 1) < 0):
        return [-x for x in coords]
    return coords


def _order_constraints(A: Sequence[Sequence[int]], mode: str, seed: int | None) -> list[int]:
    m = len(A)
    if mode == "sparse":
        return sorted(range(m), key=lambda i: (sum(1 for x in A[i] if x), i))
    if mode == "natural":
        return list(range(m))
    if mode == "seeded":
        if seed is None:
            raise ValueError("seeded constraint order requires an explicit seed")
        import random

        order = list(range(m))
        random.Random(seed).shuffle(order)
        return order
    raise ValueError(f"unknown constraint order {mode!r}")


def _initial_simplex(A: list[list[int]], order: list[int], N: int):
    """First N independent rows in insertion order, plus integer rays.

    The rays are the sign-corrected columns of the inverse of the chosen
    row block, cleared to integers: ray j is tight on every chosen row
    except row j.
    """
    basis: list[int] = []
    rows: list[list[int]] = []
    for i in order:
        if rational_rank(rows + [list(A[i])]) > len(basis):
            basis.append(i)
            rows.append(list(A[i]))
        if len(basis) == N:
            break
    if len(basis) < N:
        raise NotPointed(f"constraint matrix has rank {len(basis)} < {N}")
    aug = [[Fraction(rows[r][c]) for c in range(N)] + [Fraction(int(r == k)) for k in range(N)] for r in range(N)]
    for col in range(N):
        piv = next(r for r in range(col, N) if aug[r][col])
        aug[col], aug[piv] = aug[piv], aug[col]
        pv = aug[col][col]
        aug[col] = [x / pv for x in aug[col]]
        for r in range(N):
            if r != col and aug[r][col]:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    rays = []
    for j in range(N):
        col_v = [aug[r][N + j] for r in range(N)]
        den = 1
        for x in col_v:
            den = den * x.denominator // gcd(den, x.denominator)
        iv = [int(x * den) for x in col_v]
        g = _vec_gcd(iv)
        iv = [x // g for x in iv]
        if sum(rows[j][c] * iv[c] for c in range(N)) < 0:
            iv = [-x for x in iv]
        rays.append(iv)
    return basis, rays


class _DDState:
    """Mutable state of one double description run."""

    def __init__(self, coords: np.ndarray, masks: np.ndarray, proc_rows: list[list[int]]):
        self.coords = coords  # (R, N) int64 or object
        self.masks = masks  # (R, nwords) uint64
        self.proc_rows = proc_rows

    @property
    def wide(self) -> bool:
        return self.coords.dtype == object


def _mask_words(bits: Iterable[int], nwords: int) -> np.ndarray:
    w = [0] * nwords
    for b in bits:
        w[b // 64] |= 1 << (b % 64)
    return np.array(w, dtype=np.uint64)


def _gcd_rows(arr: np.ndarray) -> np.ndarray:
    if arr.dtype == object:
        out = []
        for row in arr:
            g = _vec_gcd(row) or 1
            out.append([int(x) // g for x in row])
        res = np.empty((len(out), arr.shape[1]), dtype=object)
        res[:] = out
        return res
    g = np.gcd.reduce(np.abs(arr), axis=1)
    g[g == 0] = 1
    return arr // g[:, None]


def extreme_rays_dd(
    cone: HRepCone,
    order: str = "sparse",
    seed: int | None = None,
    algebraic_adjacency: bool = False,
    on_progress=None,
) -> tuple[Ray, ...]:
    """All extreme rays of a pointed cone, canonical and sorted.

    Raises :class:`NotPointed` when the constraint matrix has rank < N.
    The degenerate cone {0} yields an empty tuple. ``algebraic_adjacency``
    replaces the combinatorial adjacency test with a tight-row rank test
    (slower, used to guard the combinatorial test in CI).
    """
    A = [list(r) for r in cone.constraints]
    N = cone.dim
    m = len(A)
    ins_order = _order_constraints(A, order, seed)
    basis, init_rays = _initial_simplex(A, ins_order, N)
    rest = [i for i in ins_order if i not in set(basis)]
    nwords = (m + 63) // 64

    coords = np.array(init_rays, dtype=np.int64)
    maxa = max(max(abs(x) for x in row) for row in A)
    if int(np.abs(coords).max()) ** 2 * maxa * N * 2 > _INT64_LIMIT:
        coords = coords.astype(object)
    masks = np.vstack(
        [_mask_words([k for k in range(N) if k != j], nwords) for j in range(N)]
    )
    state = _DDState(coords, masks, [A[i] for i in basis])

    for step, ci in enumerate(rest):
        _dd_insert(state, A[ci], N, step + N, maxa, algebraic_adjacency)
        if on_progress is not None:
            on_progress(step + 1, len(rest), len(state.coords))
        if len(state.coords) == 0:
            break

    # canonicalize against the original constraint indexing
    coords = state.coords
    if coords.dtype == object:
        Z = (coords @ np.array(A, dtype=object).T) == 0
    else:
        Z = (coords @ np.array(A, dtype=np.int64).T) == 0
    out = []
    for row, zrow in zip(coords, Z):
        iv = _canonical_sign([int(x) for x in row])
        tight = tuple(int(i) for i in np.nonzero(zrow)[0])
        out.append(Ray(coords=tuple(iv), tight_set=tight))
    out.sort()
    return tuple(out)


def _dot_rows(coords: np.ndarray, a: list[int]) -> np.ndarray:
    av = np.array(a, dtype=coords.dtype if coords.dtype != object else object)
    return coords @ av


def _dd_insert(state: _DDState, a: list[int], N: int, bit: int, maxa: int, algebraic: bool):
    coords, masks = state.coords, state.masks
    if not state.wide:
        peak = int(np.abs(coords).max(initial=0))
        if peak * peak * maxa * N * 2 > _INT64_LIMIT:
            coords = coords.astype(object)
            state.coords = coords
    s = _dot_rows(coords, a)
    s_int = s if coords.dtype == object else s.astype(np.int64)
    pos_idx = np.nonzero(s_int > 0)[0]
    zer_idx = np.nonzero(s_int == 0)[0]
    neg_idx = np.nonzero(s_int < 0)[0]
    bitw, bitb = bit // 64, bit % 64
    bitval = np.uint64(1 << bitb)
    if len(neg_idx) == 0:
        masks[zer_idx, bitw] |= bitval
        state.proc_rows.append(a)
        return

    pairs: list[tuple[int, int]] = []
    need = N - 2
    if len(pos_idx) <= len(neg_idx):
        outer_idx, inner_idx = pos_idx, neg_idx
    else:
        outer_idx, inner_idx = neg_idx, pos_idx
    Minner = masks[inner_idx]
    outer_is_pos = len(pos_idx) <= len(neg_idx)
    for p in outer_idx:
        T = masks[p][None, :] & Minner
        cnt = np.bitwise_count(T).sum(axis=1)
        qsel = np.nonzero(cnt >= need)[0]
        if len(qsel) == 0:
            continue
        if algebraic:
            for qi_local in qsel:
                q = inner_idx[qi_local]
                rows_T = [state.proc_rows[k] for k in _bits_of(T[qi_local])]
                if not rows_T or rational_rank(rows_T) != need:
                    continue
                pairs.append((int(p), int(q)) if outer_is_pos else (int(q), int(p)))
            continue
        # any third ray containing tp & tq shares >= need tight
        # constraints with p, so the containment scan only needs those
        cnt_all = np.bitwise_count(masks & masks[p][None, :]).sum(axis=1)
        sub = masks[np.nonzero(cnt_all >= need)[0]]
        step = max(1, (1 << 22) // max(1, len(sub)))
        for lo in range(0, len(qsel), step):
            Tq = T[qsel[lo : lo + step]]
            contains = ((sub[None, :, :] & Tq[:, None, :]) == Tq[:, None, :]).all(axis=2)
            # p and q always contain tp & tq, so adjacency means no third
            adj = contains.sum(axis=1) == 2
            for qi_local in qsel[lo : lo + step][adj]:
                q = inner_idx[qi_local]
                pairs.append((int(p), int(q)) if outer_is_pos else (int(q), int(p)))

    keep = np.concatenate([pos_idx, zer_idx])
    kept_masks = masks[keep].copy()
    kept_masks[len(pos_idx):, bitw] |= bitval
    if pairs:
        newc, new_masks, went_wide = _combine_pairs(state, pairs, s, a, N, maxa, bit)
        if went_wide and coords.dtype != object:
            coords = coords.astype(object)
        state.coords = np.vstack([coords[keep], newc.astype(coords.dtype if not went_wide else object, copy=False)])
        state.masks = np.vstack([kept_masks, new_masks])
    else:
        state.coords = coords[keep]
        state.masks = kept_masks
    state.proc_rows.append(a)


def _combine_pairs(
    state: _DDState,
    pairs: list[tuple[int, int]],
    s: np.ndarray,
    a: list[int],
    N: int,
    maxa: int,
    bit: int,
):
    """New rays sp*q - sq*p for adjacent pairs, with exact tight masks.

    Tight masks are recomputed against every processed constraint, so
    accidental zeros picked up by the combination are never missed.
    Returns (coords, masks, went_wide).
    """
    coords = state.coords
    p_arr = np.array([p for p, _ in pairs])
    q_arr = np.array([q for _, q in pairs])
    if coords.dtype == object:
        sp = s[p_arr]
        sq = s[q_arr]
        W = sp[:, None] * coords[q_arr] - sq[:, None] * coords[p_arr]
        W = _gcd_rows(W)
        went_wide = True
    else:
        sp = s[p_arr].astype(np.int64)
        sq = s[q_arr].astype(np.int64)
        W = sp[:, None] * coords[q_arr] - sq[:, None] * coords[p_arr]
        W = _gcd_rows(W)
        peak = int(np.abs(W).max(initial=0))
        went_wide = peak * peak * maxa * N * 2 > _INT64_LIMIT
        if went_wide:
            W = W.astype(object)

    proc = state.proc_rows + [a]
    nwords = state.masks.shape[1]
    n_new = len(pairs)
    new_masks = np.zeros((n_new, nwords), dtype=np.uint64)
    At = np.array(proc, dtype=np.int64).T
    chunk = 1 << 16
    for lo in range(0, n_new, chunk):
        hi = min(lo + chunk, n_new)
        if W.dtype == object:
            Z = (W[lo:hi] @ At.astype(object)) == 0
        else:
            Z = (W[lo:hi] @ At) == 0
        for k in range(len(proc)):
            col = Z[:, k]
            new_masks[lo:hi, k // 64] |= col.astype(np.uint64) << np.uint64(k % 64)
    return W, new_masks, went_wide


def _bits_of(words: np.ndarray) -> list[int]:
    out = []
    for wi, w in enumerate(words):
        w = int(w)
        base = wi * 64
        while w:
            b = w & -w
            out.append(base + b.bit_length() - 1)
            w ^= b
    return out


def extreme_rays_bruteforce(cone: HRepCone, guard: int = 12) -> tuple[Ray, ...]:
    """Oracle route: kernel directions of all rank-(N-1) row subsets."""
    N = cone.dim
    if N > guard:
        raise TooLarge(f"brute force guarded at dimension {guard}, got {N}")
    A = [list(r) for r in cone.constraints]
    m = len(A)
    if rational_rank(A) < N:
        raise NotPointed(f"constraint matrix has rank < {N}")
    found: dict[tuple[int, ...], Ray] = {}
    for sub in combinations(range(m), N - 1):
        rows = [A[i] for i in sub]
        kern = _kernel_direction(rows, N)
        if kern is None:
            continue
        sv = [sum(A[i][c] * kern[c] for c in range(N)) for i in range(m)]
        if all(x >= 0 for x in sv):
            pass
        elif all(x <= 0 for x in sv):
            kern = [-x for x in kern]
            sv = [-x for x in sv]
        else:
            continue
        iv = tuple(_canonical_sign(kern))
        if iv not in found:
            tight = tuple(i for i in range(m) if sv[i] == 0)
            found[iv] = Ray(coords=iv, tight_set=tight)
    return tuple(sorted(found.values()))


def _kernel_direction(rows: list[list[int]], N: int) -> list[int] | None:
    """Integer spanning vector of a one-dimensional kernel, else None."""
    M = [[Fraction(x) for x in row] for row in rows]
    piv_cols: list[int] = []
    r = 0
    for c in range(N):
        pr = next((k for k in range(r, len(M)) if M[k][c]), None)
        if pr is None:
            continue
        M[r], M[pr] = M[pr], M[r]
        pv = M[r][c]
        M[r] = [x / pv for x in M[r]]
        for k in range(len(M)):
            if k != r and M[k][c]:
                f = M[k][c]
                M[k] = [x - f * y for x, y in zip(M[k], M[r])]
        piv_cols.append(c)
        r += 1
    free = [c for c in range(N) if c not in piv_cols]
    if len(free) != 1:
        return None
    fc = free[0]
    vec = [Fraction(0)] * N
    vec[fc] = Fraction(1)
    for i, c in enumerate(piv_cols):
        vec[c] = -M[i][fc]
    den = 1
    for x in vec:
        den = den * x.denominator // gcd(den, x.denominator)
    iv = [int(x * den) for x in vec]
    g = _vec_gcd(iv)
    return [x // g for x in iv]


_CERT_PRIME = (1 << 31) - 1


def _modular_rank(rows: Sequence[Sequence[int]], p: int = _CERT_PRIME) -> int:
    """Rank over GF(p); never exceeds the exact rank, so full modular
    rank is a sound certificate of full exact rank."""
    M = np.array([[int(x) % p for x in row] for row in rows], dtype=np.int64)
    m, ncols = M.shape
    rank = 0
    for c in range(ncols):
        piv = next((r for r in range(rank, m) if M[r, c]), None)
        if piv is None:
            continue
        M[[rank, piv]] = M[[piv, rank]]
        inv = pow(int(M[rank, c]), p - 2, p)
        M[rank, c:] = (M[rank, c:] * inv) % p
        f = M[rank + 1 :, c].copy()
        M[rank + 1 :, c:] = (M[rank + 1 :, c:] - f[:, None] * M[rank, c:][None, :]) % p
        rank += 1
        if rank == m:
            break
    return rank


def _full_rank_check(tight_rows: list[list[int]], N: int) -> bool:
    """True iff the integer rows have rank N (modular fast path,
    exact fallback when the modular rank falls short)."""
    if len(tight_rows) < N:
        return False
    if _modular_rank(tight_rows) == N:
        return True
    return rational_rank(tight_rows) == N


def certify_vertex(
    rows: Sequence[Sequence[Rational]],
    rhs: Sequence[Rational],
    p: Sequence[Rational],
) -> bool:
    """Tight-row rank test for extremality of a feasible point."""
    N = len(p)
    tight = []
    for row, k in zip(rows, rhs):
        val = sum(Fraction(a) * Fraction(x) for a, x in zip(row, p))
        if val < Fraction(k):
            raise InfeasiblePoint(f"point violates constraint {list(row)} >= {k}")
        if val == Fraction(k):
            tight.append(list(row))
    return bool(tight) and rational_rank(tight) == N


def slice_to_vertices(
    rays: Sequence[Ray],
    level_functional: Sequence[Rational],
    level: Rational = 1,
) -> tuple[Vertex, ...]:
    """Scale each ray so the functional hits the level exactly."""
    level = Fraction(level)
    out = []
    for ray in rays:
        val = sum(Fraction(f) * x for f, x in zip(level_functional, ray.coords))
        if val <= 0:
            raise NonPositiveLevel(
                f"ray {ray.coords} has functional value {val}; cone is not "
                "strictly cut by the slicing hyperplane"
            )
        scale = level / val
        coords = tuple(scale * x for x in ray.coords)
        nonzero = [x for x in coords if x]
        is_unit = len(nonzero) == 1 and nonzero[0] == level
        out.append(Vertex(coords=coords, tight_set=ray.tight_set, is_unit_vector=is_unit))
    return tuple(sorted(out))
