"""Minimal-rank pipeline over the sliced prolongation cone.

For diagonal coefficient vectors the problem reduces to: enumerate the
vertices of {x : Jx >= 0, trace(x) = 1}, drop the unit coordinate
vectors (exactly the vertices that are already sums of squares), and
minimize the support size of Jx over the rest. Candidate checking for
full Hermitian matrices is also provided; there the extreme points form
a spectrahedron and are not finitely enumerable, so only user-supplied
candidates are tested.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Sequence

import numpy as np

from . import cache as _cache
from .cones import (
    HRepCone,
    Ray,
    Vertex,
    _full_rank_check,
    certify_vertex,
    extreme_rays_dd,
    slice_to_vertices,
)
from .errors import InfeasiblePoint, InternalInconsistency, NotSOS
from .exactla import HermMatrix, herm_rank, psd_check
from .prolongation import (
    ProlongationMatrix,
    SignVector,
    build_jnd,
    prolong_hermitian,
    trace_of_vector,
)


@dataclass(frozen=True)
class MinRankReport:
    n: int
    d: int
    value: int | None
    witnesses: tuple[Vertex, ...]
    vertex_count_delta2: int
    excluded_unit_vertices: int
    conjecture_bound: int
    bound_satisfied: bool | None  # None when value is None (vacuous)

    def to_obj(self) -> dict:
        from .serialize import format_rational

        return {
            "n": self.n,
            "d": self.d,
            "value": self.value,
            "witnesses": [[format_rational(x) for x in w.coords] for w in self.witnesses],
            "vertex_count": self.vertex_count_delta2,
            "conjecture_bound": self.conjecture_bound,
            "checks": {
                "bound_satisfied": self.bound_satisfied,
                "at_least_n": None if self.value is None else self.value >= self.n,
                "excluded_unit_vertices": self.excluded_unit_vertices,
            },
        }


@dataclass(frozen=True)
class HermCandidateReport:
    a_is_sos: bool
    prolong_is_sos: bool
    prolong_rank: int
    trace_a: Fraction
    trace_prolong: Fraction
    qualifies: bool

    def to_obj(self) -> dict:
        from .serialize import format_rational

        return {
            "a_is_sos": self.a_is_sos,
            "prolong_is_sos": self.prolong_is_sos,
            "prolong_rank": self.prolong_rank,
            "trace_a": format_rational(self.trace_a),
            "trace_prolong": format_rational(self.trace_prolong),
            "qualifies": self.qualifies,
        }


def conjecture_bound(n: int) -> int:
    """Conjectured lower bound for the prolonged rank at dimension n."""
    if n < 2:
        raise ValueError("bound is defined for n >= 2")
    k0 = 0
    while (k0 + 1) * (k0 + 2) // 2 < n:
        k0 += 1
    return n * (k0 + 1) - (k0 + 1) * k0 // 2 - 1


def diag_rank_of_prolongation(J: ProlongationMatrix, v: Sequence) -> int:
    """Support size of Jv; the rank of the prolonged diagonal polynomial."""
    out = J.apply(v)
    if any(x < 0 for x in out):
        raise NotSOS("prolonged vector has a negative coefficient")
    return sum(1 for x in out if x > 0)


def delta1_extreme_points(n: int, d: int) -> tuple[Vertex, ...]:
    """Unit coordinate vectors: the vertices of the probability simplex."""
    N = comb(n + d - 1, d)
    out = []
    for j in range(N):
        coords = tuple(Fraction(int(i == j)) for i in range(N))
        out.append(Vertex(coords=coords, tight_set=(), is_unit_vector=True))
    return tuple(sorted(out))


def _rays_for(
    n: int,
    d: int,
    signs: SignVector | None,
    dd_order: str,
    seed: int | None,
    verify: bool,
    cache_dir,
    on_progress,
) -> tuple[ProlongationMatrix, tuple[Ray, ...]]:
    J = build_jnd(n, d, signs, verify=verify)
    rays = None
    if cache_dir is not None:
        rays = _cache.load_rays(cache_dir, n, d, J.signs)
    if rays is None:
        rays = _cache.load_bundled_rays(n, d, J.signs)
    if rays is None:
        cone = HRepCone.from_rows(J.dense())
        rays = extreme_rays_dd(cone, order=dd_order, seed=seed, on_progress=on_progress)
        if cache_dir is not None:
            _cache.store_rays(cache_dir, n, d, J.signs, rays)
    return J, rays


def delta2_vertices(
    n: int,
    d: int,
    signs: SignVector | None = None,
    dd_order: str = "sparse",
    seed: int | None = None,
    verify: bool = True,
    cache_dir=None,
    workers: int = 1,
    on_progress=None,
) -> tuple[ProlongationMatrix, tuple[Vertex, ...]]:
    """Vertices of the trace-1 slice of {x : Jx >= 0}."""
    J, rays = _rays_for(n, d, signs, dd_order, seed, verify, cache_dir, on_progress)
    functional = [1] * J.cols
    vertices = slice_to_vertices(rays, functional, 1)
    if verify:
        _certify_all(J, vertices, workers)
    return J, vertices


def _ray_supports(J: ProlongationMatrix, rays: Sequence[Ray]) -> np.ndarray:
    """Support size of J*r per ray, vectorized on the integer coordinates.

    Positive scaling preserves the support, so this equals the support of
    the prolongation of the corresponding trace-1 vertex.
    """
    coords = np.array([r.coords for r in rays], dtype=object)
    peak = max((max(abs(int(x)) for x in r.coords) for r in rays), default=0)
    Jd = np.array(J.dense(), dtype=object).T
    if peak * J.n * 2 < 2**62:
        coords = coords.astype(np.int64)
        Jd = Jd.astype(np.int64)
    out = coords @ Jd
    if bool((np.asarray(out) < 0).any()):
        raise NotSOS("a cone ray prolongs to a vector with a negative coefficient")
    return (np.asarray(out) > 0).sum(axis=1)


def _certify_all(J: ProlongationMatrix, vertices: Sequence[Vertex], workers: int):
    """Feasibility plus tight-row rank certificate for every vertex.

    Equivalent to running :func:`certify_vertex` against the system
    {trace = 1, Jx >= 0} per vertex, but batched: coordinates are scaled
    to integers once, feasibility is one exact matrix product, and the
    rank test takes the modular fast path with an exact fallback.
    """
    from math import gcd

    if not vertices:
        return
    N = J.cols
    A = J.dense()
    ints: list[list[int]] = []
    for v in vertices:
        den = 1
        for x in v.coords:
            den = den * x.denominator // gcd(den, x.denominator)
        iv = [int(x * den) for x in v.coords]
        if sum(iv) != den:
            raise InfeasiblePoint(f"vertex {v.coords} has trace != 1")
        ints.append(iv)
    X = np.array(ints, dtype=object)
    peak = max(max(abs(x) for x in row) for row in ints)
    An = np.array(A, dtype=object).T
    if peak * J.n * 2 < 2**62:
        X = X.astype(np.int64)
        An = An.astype(np.int64)
    S = np.asarray(X @ An)
    if bool((S < 0).any()):
        raise InfeasiblePoint("an emitted vertex violates a cone constraint")
    trace_row = [1] * N

    def check(i: int) -> bool:
        tight = [trace_row] + [A[k] for k in np.nonzero(S[i] == 0)[0]]
        return _full_rank_check(tight, N)

    idx = range(len(vertices))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(check, idx))
    else:
        results = [check(i) for i in idx]
    bad = sum(1 for ok in results if not ok)
    if bad:
        raise InternalInconsistency(
            f"{bad} emitted vertices fail the tight-rank certificate"
        )


def min_rank_diag(
    n: int,
    d: int,
    signs: SignVector | None = None,
    dd_order: str = "sparse",
    seed: int | None = None,
    verify: bool = True,
    cache_dir=None,
    workers: int = 1,
    on_progress=None,
) -> MinRankReport:
    """Minimum support of Jx over non-unit vertices of the sliced cone."""
    if n < 2 or d < 1:
        raise ValueError("need n >= 2 and d >= 1")
    J, rays = _rays_for(n, d, signs, dd_order, seed, verify, cache_dir, on_progress)
    is_unit = [sum(1 for x in r.coords if x) == 1 for r in rays]
    candidates = [r for r, u in zip(rays, is_unit) if not u]
    bound = conjecture_bound(n)
    functional = [1] * J.cols
    if not candidates:
        vertices = slice_to_vertices(rays, functional, 1)
        if verify:
            _certify_all(J, vertices, workers)
        return MinRankReport(
            n=n,
            d=d,
            value=None,
            witnesses=(),
            vertex_count_delta2=len(rays),
            excluded_unit_vertices=len(rays),
            conjecture_bound=bound,
            bound_satisfied=None,
        )
    supports = _ray_supports(J, candidates)
    best = int(supports.min())
    witnesses = slice_to_vertices(
        [r for r, s in zip(candidates, supports) if s == best], functional, 1
    )
    if verify:
        vertices = slice_to_vertices(rays, functional, 1)
        _certify_all(J, vertices, workers)
        for w in witnesses:
            if diag_rank_of_prolongation(J, list(w.coords)) != best:
                raise InternalInconsistency("witness support disagrees between routes")
    else:
        _certify_all(J, witnesses, workers)
    return MinRankReport(
        n=n,
        d=d,
        value=best,
        witnesses=witnesses,
        vertex_count_delta2=len(rays),
        excluded_unit_vertices=len(rays) - len(candidates),
        conjecture_bound=bound,
        bound_satisfied=best >= bound,
    )


def check_candidate_hermitian(n: int, d: int, H: HermMatrix) -> HermCandidateReport:
    """Membership and rank report for one Hermitian coefficient matrix."""
    expected = comb(n + d - 1, d)
    if H.size != expected:
        from .errors import DimensionMismatch

        raise DimensionMismatch(f"matrix size {H.size}, expected {expected} for n={n}, d={d}")
    a_sos = psd_check(H)
    JH = prolong_hermitian(n, d, H)
    p_sos = psd_check(JH)
    return HermCandidateReport(
        a_is_sos=a_sos,
        prolong_is_sos=p_sos,
        prolong_rank=herm_rank(JH),
        trace_a=H.trace(),
        trace_prolong=JH.trace(),
        qualifies=(not a_sos) and p_sos,
    )


@dataclass(frozen=True)
class TableRow:
    n: int
    d: int
    value: int | None
    witness_count: int
    status: str  # "ok" | "timeout" | "error: ..."
    elapsed_ms: int


def compute_table_row(
    n: int, d: int, dd_order: str = "sparse", seed: int | None = None,
    verify: bool = True, cache_dir=None,
) -> TableRow:
    t0 = time.monotonic()
    report = min_rank_diag(
        n, d, dd_order=dd_order, seed=seed, verify=verify, cache_dir=cache_dir
    )
    elapsed = int((time.monotonic() - t0) * 1000)
    return TableRow(
        n=n, d=d, value=report.value, witness_count=len(report.witnesses),
        status="ok", elapsed_ms=elapsed,
    )


def reproduce_table(
    pairs: Sequence[tuple[int, int]],
    time_limit_s: int | None = None,
    workers: int = 1,
    dd_order: str = "sparse",
    seed: int | None = None,
    verify: bool = True,
    cache_dir=None,
) -> list[TableRow]:
    """One row per pair; rows that exceed the time limit report "timeout".

    Rows run in separate processes when a time limit is set (so a stuck
    row can be terminated) or when more than one worker is requested.
    Results always come back in input order.
    """
    if time_limit_s is None and workers <= 1:
        out = []
        for n, d in pairs:
            try:
                out.append(compute_table_row(n, d, dd_order, seed, verify, cache_dir))
            except Exception as exc:  # per-row isolation
                out.append(TableRow(n, d, None, 0, f"error: {exc}", 0))
        return out
    return _run_rows_in_processes(pairs, time_limit_s, workers, dd_order, seed, verify, cache_dir)


def _row_worker(args, conn):
    n, d, dd_order, seed, verify, cache_dir = args
    try:
        row = compute_table_row(n, d, dd_order, seed, verify, cache_dir)
        conn.send(row)
    except Exception as exc:
        conn.send(TableRow(n, d, None, 0, f"error: {exc}", 0))
    finally:
        conn.close()


def _run_rows_in_processes(pairs, time_limit_s, workers, dd_order, seed, verify, cache_dir):
    import multiprocessing as mp

    ctx = mp.get_context("fork")
    pending = list(enumerate(pairs))
    running: list[tuple[int, object, object, float]] = []
    results: dict[int, TableRow] = {}
    while pending or running:
        while pending and len(running) < max(1, workers):
            idx, (n, d) = pending.pop(0)
            parent, child = ctx.Pipe(duplex=False)
            proc = ctx.Process(
                target=_row_worker,
                args=((n, d, dd_order, seed, verify, cache_dir), child),
            )
            proc.start()
            child.close()
            running.append((idx, proc, parent, time.monotonic()))
        still = []
        for idx, proc, parent, start in running:
            n, d = pairs[idx]
            if parent.poll(0.05):
                results[idx] = parent.recv()
                proc.join()
            elif time_limit_s is not None and time.monotonic() - start > time_limit_s:
                proc.terminate()
                proc.join()
                results[idx] = TableRow(n, d, None, 0, "timeout", int(time_limit_s * 1000))
            elif not proc.is_alive():
                results[idx] = TableRow(n, d, None, 0, "error: worker died", 0)
            else:
                still.append((idx, proc, parent, start))
        running = still
    return [results[i] for i in range(len(pairs))]


def pattern_checks(rows: Sequence[TableRow]) -> list[tuple[str, bool]]:
    """Cross-row consistency checks on computed table rows."""
    computed = [r for r in rows if r.status == "ok" and r.value is not None]
    bound_ok = all(r.value >= conjecture_bound(r.n) for r in computed)
    at_least_n = all(r.value >= r.n for r in computed)
    by_n: dict[int, list[TableRow]] = {}
    for r in computed:
        by_n.setdefault(r.n, []).append(r)
    monotone = True
    for group in by_n.values():
        group.sort(key=lambda r: r.d)
        for a, b in zip(group, group[1:]):
            if b.value > a.value:
                monotone = False
    closed_form = all(
        r.value == comb(r.n + 1, 2) - 1 for r in computed if r.n >= 5
    )
    return [
        ("value_at_least_conjecture_bound", bound_ok),
        ("value_at_least_n", at_least_n),
        ("non_increasing_in_degree", monotone),
        ("closed_form_for_n_ge_5", closed_form),
    ]
