"""Multi-view rewriting by intersection.

Two routes recover answer probabilities from several view extensions:

* product rewritings over pairwise condition-independent views, where the
  answer probability is the product of the views' probabilities divided by
  the node's appearance probability (read off a view that contains the
  query's bare main branch);

* the general route, which decomposes each view into pairwise independent
  probability factors (d-views), writes one log-linear equation per view
  over these factors, and recovers the query's probability exactly when its
  own factor combination lies in the row span of the system.  Solving works
  on exact rational exponent vectors, never on numeric logarithms.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from .cindep import cindep, cindep_gate
from .model import format_prob
from .pattern import (
    CHILD,
    DESC,
    IntersectionPattern,
    PatternError,
    TreePattern,
    compensate,
    contains,
    equiv_tp_cap,
    equivalent,
    interleavings,
    mb_only,
    minimize,
    simplify_cap,
    slice_pattern,
    strip_out_predicates,
    structure,
    to_query,
)
from .probeval import ProbAnswer
from .rewrite_tp import TpPlan, exec_tp_plan, make_tp_plan
from .views import ViewDef, ViewExtension, compensated_view


class RewriteError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# d-view decomposition (Steps 1-4)
# ---------------------------------------------------------------------------


@dataclass
class Decomposition:
    dviews: list[Union[TreePattern, IntersectionPattern]]
    per_view: list[frozenset[int]]
    for_query: frozenset[int]


def _keep_predicates_of(pattern: TreePattern, keep: set[int]) -> TreePattern:
    """Copy of the pattern with predicates only on the selected mb nodes."""
    copy, memo = pattern.copy_with_map()
    mb_new = {id(memo[id(n)]) for n in pattern.mb()}
    keep_new = {id(memo[id(n)]) for n in pattern.mb() if id(n) in keep}
    for node in list(copy.nodes()):
        if id(node) not in mb_new:
            continue
        if id(node) in keep_new:
            continue
        node.edges = [(ax, c) for ax, c in node.edges if id(c) in mb_new]
    return copy


DQuery = Union[TreePattern, IntersectionPattern]


def _dq_members(w: DQuery) -> list[TreePattern]:
    return w.members if isinstance(w, IntersectionPattern) else [w]


def _dq_merge(a: DQuery, b: DQuery) -> DQuery:
    joined = IntersectionPattern(_dq_members(a) + _dq_members(b))
    reduced = simplify_cap(joined)
    return reduced if reduced is not None else joined


def _dq_dependent(a: DQuery, b: DQuery) -> bool:
    """Conservative dependence between factor bundles: any cross-member pair
    that is not condition-independent makes the bundles dependent."""
    return any(
        not cindep(x, y).independent
        for x in _dq_members(a)
        for y in _dq_members(b)
    )


def _dq_class_key(w: DQuery):
    """Canonical identity of a factor: the maximal antichain of its
    interleavings.  Equivalent intersections share this antichain even when
    they are not reducible to a single tree pattern."""
    inters = interleavings(w) if isinstance(w, IntersectionPattern) else [minimize(w)]
    maximal = [
        x for x in inters
        if not any(y is not x and contains(x, y) for y in inters)
    ]
    return frozenset(x.canonical_key() for x in maximal)


def decompose_one(pattern: TreePattern, q_mb: TreePattern) -> list[DQuery]:
    """Steps 1-3 for one view: per-node isolates for the first and last
    tokens, one bulk query for the middle, dependent pairs merged, then each
    intersected with the query's main branch."""
    st = structure(pattern)
    first = st.token_nodes[0]
    last = st.token_nodes[-1] if len(st.token_nodes) > 1 else []
    mb_nodes = pattern.mb()
    queries: list[DQuery] = []
    for node in first + last:
        queries.append(_keep_predicates_of(pattern, {id(node)}))
    middle = {
        id(n) for n in mb_nodes
        if not any(n is m for m in first) and not any(n is m for m in last)
    }
    queries.append(_keep_predicates_of(pattern, middle))
    # Step 2: merge pairs that are not condition-independent, to a fixpoint
    changed = True
    while changed:
        changed = False
        for i, j in itertools.combinations(range(len(queries)), 2):
            if not _dq_dependent(queries[i], queries[j]):
                continue
            merged = _dq_merge(queries[i], queries[j])
            queries = [qq for t, qq in enumerate(queries) if t not in (i, j)]
            queries.append(merged)
            changed = True
            break
    # Step 3: intersect with the query's linear main branch
    return [_dq_merge(w, q_mb) for w in queries]


def decompose_views(q: TreePattern, patterns: list[TreePattern]) -> Decomposition:
    q_mb = mb_only(q)
    classes: list[DQuery] = []
    keys: dict = {}

    def class_of(w: DQuery) -> int:
        key = _dq_class_key(w)
        if key not in keys:
            classes.append(w)
            keys[key] = len(classes) - 1
        return keys[key]

    per_view = []
    for pattern in patterns:
        per_view.append(frozenset(class_of(w) for w in decompose_one(pattern, q_mb)))
    for_query = frozenset(class_of(w) for w in decompose_one(q, q_mb))
    return Decomposition(dviews=classes, per_view=per_view, for_query=for_query)


# ---------------------------------------------------------------------------
# The exponent system S(q, V)
# ---------------------------------------------------------------------------


@dataclass
class ExponentSystem:
    rows: list[frozenset[int]]  # d-view indices per view; y is implicit in every row
    target: frozenset[int]
    nvars: int
    solution: Optional[list[Fraction]] = None

    def row_vector(self, row: frozenset[int]) -> list[Fraction]:
        vec = [Fraction(1) if j in row else Fraction(0) for j in range(self.nvars)]
        vec.append(Fraction(1))  # the appearance column y
        return vec


def _solve_exact(columns: list[list[Fraction]], rhs: list[Fraction]) -> Optional[list[Fraction]]:
    """Solve M c = rhs over the rationals; None when inconsistent.  Free
    variables are set to zero."""
    nrows = len(columns)
    ncols = len(columns[0]) if nrows else 0
    aug = [columns[i][:] + [rhs[i]] for i in range(nrows)]
    pivots: list[tuple[int, int]] = []
    r = 0
    for c in range(ncols):
        pivot_row = next((i for i in range(r, nrows) if aug[i][c] != 0), None)
        if pivot_row is None:
            continue
        aug[r], aug[pivot_row] = aug[pivot_row], aug[r]
        pv = aug[r][c]
        aug[r] = [x / pv for x in aug[r]]
        for i in range(nrows):
            if i != r and aug[i][c] != 0:
                f = aug[i][c]
                aug[i] = [a - f * b for a, b in zip(aug[i], aug[r])]
        pivots.append((r, c))
        r += 1
        if r == nrows:
            break
    for i in range(nrows):
        if all(x == 0 for x in aug[i][:ncols]) and aug[i][ncols] != 0:
            return None
    solution = [Fraction(0)] * ncols
    for row, col in pivots:
        solution[col] = aug[row][ncols]
    return solution


def build_system(q: TreePattern, dec: Decomposition) -> ExponentSystem:
    sys = ExponentSystem(
        rows=list(dec.per_view), target=dec.for_query, nvars=len(dec.dviews)
    )
    sys.solution = solve_system(sys)
    return sys


def solve_system(sys: ExponentSystem) -> Optional[list[Fraction]]:
    """Rational coefficients combining the view rows into the target row,
    or None when the target is outside the row span."""
    if not sys.rows:
        return None
    matrix = [sys.row_vector(row) for row in sys.rows]
    # transpose: one equation per variable column
    columns = [[matrix[i][c] for i in range(len(matrix))] for c in range(sys.nvars + 1)]
    target_vec = sys.row_vector(sys.target)
    return _solve_exact(columns, target_vec)


# ---------------------------------------------------------------------------
# Plans
# ---------------------------------------------------------------------------


@dataclass
class ProductMode:
    # name of the view whose extension supplies appearance probabilities
    # (the base view for compensated members); None only for single-member plans
    appearance_view: Optional[str]


@dataclass
class SystemMode:
    coefficients: list[Fraction]


@dataclass
class CapPlan:
    members: list[ViewDef]
    mode: Union[ProductMode, SystemMode]

    def to_json(self) -> dict:
        members = [
            {
                "view": m.extension_source().name,
                "compensation": to_query(m.compensation) if m.compensation else None,
            }
            for m in self.members
        ]
        if isinstance(self.mode, ProductMode):
            mode = {"product": {"appearance_view": self.mode.appearance_view}}
        else:
            mode = {"system": {"coefficients": [format_prob(c) for c in self.mode.coefficients]}}
        return {"kind": "cap", "members": members, "mode": mode}


@dataclass
class CapOutcome:
    status: str  # found | no-canonical | unsolvable | unknown
    plan: Optional[CapPlan] = None
    system: Optional[ExponentSystem] = None
    decomposition: Optional[Decomposition] = None

    @property
    def found(self) -> bool:
        return self.status == "found"


def _appearance_candidate(q: TreePattern, member: ViewDef) -> bool:
    """Whether this member's extension supplies appearance probabilities:
    the query's bare main branch must be contained in the view whose
    extension we read (the base view for compensated members)."""
    return contains(mb_only(q), member.extension_source().pattern)


def find_product_rewriting(
    q: TreePattern, V: list[ViewDef], subset_cap: int = 12
) -> Optional[CapPlan]:
    """Smallest subset of pairwise condition-independent views whose
    intersection rewrites the query; None when there is none.  Exhaustive
    subset search by increasing size (the selection problem is hard)."""
    indep: dict[tuple[int, int], bool] = {}

    def pair_ok(i: int, j: int) -> bool:
        key = (min(i, j), max(i, j))
        if key not in indep:
            indep[key] = cindep(V[key[0]].pattern, V[key[1]].pattern).independent
        return indep[key]

    for size in range(1, min(len(V), subset_cap) + 1):
        for combo in itertools.combinations(range(len(V)), size):
            if not all(pair_ok(i, j) for i, j in itertools.combinations(combo, 2)):
                continue
            appearance = None
            if size >= 2:
                appearance = next(
                    (
                        V[i].extension_source().name
                        for i in combo
                        if _appearance_candidate(q, V[i])
                    ),
                    None,
                )
                if appearance is None:
                    continue
            members = [V[i] for i in combo]
            Q = IntersectionPattern([m.pattern for m in members])
            if not equiv_tp_cap(q, Q):
                continue
            return CapPlan(members=members, mode=ProductMode(appearance))
    return None


def appearance_from_views(
    q: TreePattern, V: list[ViewDef], extensions: dict[str, ViewExtension]
) -> Optional[dict[str, Fraction]]:
    """Per-node appearance probabilities read from a view containing the
    query's main branch; None when no view qualifies."""
    for v in V:
        if _appearance_candidate(q, v):
            ext = extensions[v.extension_source().name]
            return ext.beta_by_orig()
    return None


# ---------------------------------------------------------------------------
# Full procedure with compensated views
# ---------------------------------------------------------------------------


def tprewrite_cap(q: TreePattern, V: list[ViewDef]) -> CapOutcome:
    """The canonical-plan procedure: expand the views with all prefix
    compensations, test the canonical intersection for equivalence with the
    query, then solve the exponent system over the members whose
    probabilities are recoverable from their base extensions."""
    q_depth = len(q.mb())
    prefixes = {a: slice_pattern(q, a) for a in range(1, q_depth + 1)}
    canonical: list[ViewDef] = []
    capable: list[ViewDef] = []

    def admit(pool: list[ViewDef], member: ViewDef):
        if not contains(q, member.pattern):
            return
        if any(equivalent(member.pattern, m.pattern) for m in pool):
            return
        pool.append(member)

    for v in V:
        admit(canonical, v)
        admit(capable, v)
        st = structure(v.pattern)
        v_prime = strip_out_predicates(v.pattern)
        for a in range(1, q_depth + 1):
            if not contains(prefixes[a].prefix, v.pattern):
                continue
            suffix = prefixes[a].suffix
            try:
                candidate = compensated_view("%s@%d" % (v.name, a), v, suffix)
            except PatternError:
                continue
            admit(canonical, candidate)
            q_dprime = compensate(mb_only(prefixes[a].prefix), suffix)
            if not cindep_gate(v_prime, q_dprime).independent:
                continue
            restricted = (
                DESC not in v.pattern.mb_axes() or DESC not in suffix.mb_axes()
            )
            if not restricted:
                offenders = [
                    node
                    for node in st.last_token_nodes[: max(0, st.u - 1)]
                    if v.pattern.predicates_of(node)
                ]
                if offenders:
                    continue
            admit(capable, candidate)

    if not canonical:
        return CapOutcome("no-canonical")
    # members containing another member are redundant in the intersection
    minimal = [
        m for m in canonical
        if not any(
            other is not m and contains(other.pattern, m.pattern) for other in canonical
        )
    ]
    Q = IntersectionPattern([m.pattern for m in minimal])
    if not equiv_tp_cap(q, Q):
        return CapOutcome("no-canonical")
    if not capable:
        return CapOutcome("unsolvable")
    dec = decompose_views(q, [m.pattern for m in capable])
    sys = build_system(q, dec)
    if sys.solution is not None:
        plan = CapPlan(members=capable, mode=SystemMode(sys.solution))
        return CapOutcome("found", plan=plan, system=sys, decomposition=dec)
    if all(ax == CHILD for ax in q.mb_axes()):
        # with a /-only main branch an unsolvable system leaves existence open
        return CapOutcome("unknown", system=sys, decomposition=dec)
    return CapOutcome("unsolvable", system=sys, decomposition=dec)


# ---------------------------------------------------------------------------
# Execution over extensions
# ---------------------------------------------------------------------------


def _int_nth_root(value: int, n: int) -> int:
    """Exact integer n-th root; raises when the root is not integral."""
    if value < 0:
        raise RewriteError("negative base under an even-denominator exponent")
    if value in (0, 1) or n == 1:
        return value
    lo, hi = 0, 1
    while hi ** n < value:
        hi *= 2
    while lo < hi:
        mid = (lo + hi) // 2
        if mid ** n < value:
            lo = mid + 1
        else:
            hi = mid
    if lo ** n != value:
        raise RewriteError("combination produced an irrational value")
    return lo


def _pow_product(values: list[Fraction], exponents: list[Fraction]) -> Fraction:
    """Exact product of rational powers of rationals (result must be rational)."""
    denom = 1
    for e in exponents:
        denom = denom * e.denominator // math.gcd(denom, e.denominator)
    acc = Fraction(1)
    for value, e in zip(values, exponents):
        power = int(e * denom)
        if power == 0:
            continue
        if value == 0:
            if power < 0:
                raise RewriteError("zero probability with a negative exponent")
            return Fraction(0)
        acc *= value ** power
    num = _int_nth_root(acc.numerator, denom)
    den = _int_nth_root(acc.denominator, denom)
    return Fraction(num, den)


def member_values(
    member: ViewDef, extensions: dict[str, ViewExtension], event_cap: int = 12
) -> ProbAnswer:
    """Per-node probability of the (possibly compensated) member, computed
    from its base view's extension only."""
    source = member.extension_source()
    if source.name not in extensions:
        raise RewriteError("missing extension for view %r" % source.name)
    ext = extensions[source.name]
    if member.compensation is None:
        return ext.beta_by_orig()
    plan: TpPlan = make_tp_plan(source, member.compensation)
    return exec_tp_plan(plan, ext, event_cap=event_cap)


def exec_plan(
    plan: Union[CapPlan, TpPlan],
    extensions: dict[str, ViewExtension],
    event_cap: int = 12,
) -> ProbAnswer:
    """Evaluate a rewrite plan against materialized extensions only."""
    if isinstance(plan, TpPlan):
        if plan.view not in extensions:
            raise RewriteError("missing extension for view %r" % plan.view)
        return exec_tp_plan(plan, extensions[plan.view], event_cap=event_cap)
    values = [member_values(m, extensions, event_cap) for m in plan.members]
    support = set(values[0])
    for val in values[1:]:
        support &= set(val)
    result: ProbAnswer = {}
    if isinstance(plan.mode, ProductMode):
        appearance: Optional[dict[str, Fraction]] = None
        if plan.mode.appearance_view is not None:
            appearance = extensions[plan.mode.appearance_view].beta_by_orig()
        m_count = len(plan.members)
        for n in sorted(support):
            product = Fraction(1)
            for val in values:
                product *= val[n]
            if m_count > 1:
                assert appearance is not None
                product /= appearance[n] ** (m_count - 1)
            if product > 0:
                result[n] = product
        return result
    coeffs = plan.mode.coefficients
    for n in sorted(support):
        value = _pow_product([val[n] for val in values], coeffs)
        if value > 0:
            result[n] = value
    return result
