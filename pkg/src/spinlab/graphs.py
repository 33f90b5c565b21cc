"""Random bipartite regular multigraphs and exact desk-scale computations.

The sampling model unions Delta independent uniform perfect matchings
between the two sides. The gadget variant keeps r extra vertices per side
at degree Delta - 1: those draw Delta - 1 matchings on n + r vertices, and
a final n-matching joins the degree-Delta vertices of the two sides
directly.

Everything downstream is exact enumeration: partition functions (rational
when the interaction matrix is), footprint tables, the first and second
moment formulas, cycle counts, and the small-subgraph-conditioning
constants. No sampling-based estimation happens here.
"""

import itertools
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import recursion, util
from .errors import (BudgetExceededError, DomainError, InfeasibleError,
                     RegimeError, StructureError)
from .models import rational_entries

ENUMERATION_BUDGET = 10**8


# ----------------------------------------------------------------------
# the graph model
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class BipartiteRegularGraph:
    """Union of matchings between a plus side and a minus side.

    Side layout: indices 0..n-1 are U (degree Delta), n..n+r-1 are W
    (degree Delta - 1). Global vertex ids place the whole plus side before
    the whole minus side. `matchings` holds Delta tuples; with r > 0 the
    last one is the n-matching on U only.
    """
    n: int
    r: int
    delta: int
    matchings: tuple

    def __post_init__(self):
        if not self.n > self.r >= 0:
            raise DomainError("need n > r >= 0")
        if self.delta < 1:
            raise DomainError("need Delta >= 1")
        if len(self.matchings) != self.delta:
            raise StructureError(f"expected {self.delta} matchings")
        side = self.n + self.r
        for k, m in enumerate(self.matchings):
            dom = self.n if (self.r > 0 and k == self.delta - 1) else side
            if sorted(m) != list(range(dom)):
                raise StructureError(f"matching {k} is not a bijection on {dom}")
        object.__setattr__(self, "matchings",
                           tuple(tuple(int(i) for i in m) for m in self.matchings))

    @property
    def side(self):
        return self.n + self.r

    @property
    def num_vertices(self):
        return 2 * self.side

    def minus(self, local):
        """Global id of a minus-side local index."""
        return self.side + local

    @property
    def w_plus(self):
        return range(self.n, self.side)

    @property
    def w_minus(self):
        return range(self.side + self.n, 2 * self.side)

    def edges(self):
        """Edge list with multiplicity, endpoints as global vertex ids."""
        out = []
        for k, m in enumerate(self.matchings):
            for i, j in enumerate(m):
                out.append((i, self.minus(j)))
        return out

    def degrees(self):
        deg = [0] * self.num_vertices
        for u, v in self.edges():
            deg[u] += 1
            deg[v] += 1
        return deg


def sample_graph(n, r, delta, seed):
    """Draw from the matching-union model, reproducibly in the seed.

    All randomness flows through one counter-based generator, so draws do
    not depend on thread count.
    """
    if seed is None:
        raise DomainError("a seed is mandatory for sampling")
    rng = np.random.Generator(np.random.Philox(seed))
    side = n + r
    matchings = [rng.permutation(side) for _ in range(delta - 1 if r else delta)]
    if r:
        matchings.append(rng.permutation(n))
    return BipartiteRegularGraph(n=n, r=r, delta=delta,
                                 matchings=tuple(tuple(m) for m in matchings))


def all_graphs(n, delta):
    """Every matching-union graph on n + n vertices, one per (n!)^Delta tuple.

    Exhaustive oracle for the moment formulas; keep n and Delta tiny.
    """
    perms = list(itertools.permutations(range(n)))
    for combo in itertools.product(perms, repeat=delta):
        yield BipartiteRegularGraph(n=n, r=0, delta=delta, matchings=combo)


def write_graph(graph, path):
    with open(path, "w") as fh:
        fh.write(f"{graph.n} {graph.r} {graph.delta}\n")
        for m in graph.matchings:
            fh.write(" ".join(str(i) for i in m) + "\n")


def read_graph(path):
    with open(path) as fh:
        n, r, delta = (int(t) for t in fh.readline().split())
        matchings = tuple(tuple(int(t) for t in fh.readline().split())
                          for _ in range(delta))
    return BipartiteRegularGraph(n=n, r=r, delta=delta, matchings=matchings)


# ----------------------------------------------------------------------
# exact partition functions
# ----------------------------------------------------------------------

def _check_budget(graph, q):
    if q ** graph.num_vertices > ENUMERATION_BUDGET:
        raise BudgetExceededError(
            f"{q}^{graph.num_vertices} configurations exceed the budget")


def _integer_matrix(frac):
    """Common-denominator integer form of a rational matrix."""
    den = math.lcm(*[f.denominator for row in frac for f in row])
    num = [[int(f * den) for f in row] for row in frac]
    return num, den


def exact_partition(graph, model):
    """Z = sum over configurations of the product of edge weights.

    Exact Fraction when the interaction matrix is rational, else a
    compensated double sum. Configurations are enumerated mixed-radix
    little-endian in the global vertex index.
    """
    q = model.q
    _check_budget(graph, q)
    edges = graph.edges()
    frac = rational_entries(model)
    if frac is not None:
        num, den = _integer_matrix(frac)
        total = sum(util.ordered_map(
            lambda s: _partition_slice(edges, graph.num_vertices, q, num, s),
            range(q), util.worker_count()))
        return Fraction(total, den ** len(edges))
    return _float_partition(graph, model)


def _partition_slice(edges, nv, q, num, first_spin):
    """Integer-weight sum over configurations with a fixed vertex-0 spin."""
    total = 0
    for rest in itertools.product(range(q), repeat=nv - 1):
        spins = (first_spin,) + rest
        w = 1
        for u, v in edges:
            w *= num[spins[u]][spins[v]]
            if not w:
                break
        total += w
    return total


def _float_partition(graph, model, chunk=1 << 16):
    q = model.q
    B = model.B
    edges = graph.edges()
    nconf = q ** graph.num_vertices
    radix = q ** np.arange(graph.num_vertices, dtype=np.int64)
    sums = []
    for start in range(0, nconf, chunk):
        ks = np.arange(start, min(start + chunk, nconf), dtype=np.int64)
        spins = (ks[:, None] // radix) % q
        w = np.ones(len(ks))
        for u, v in edges:
            w *= B[spins[:, u], spins[:, v]]
        sums.append(float(w.sum()))
    return math.fsum(sums)


# ----------------------------------------------------------------------
# footprints and conditioned partition functions
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Footprint:
    """Per-side empirical spin frequencies of the degree-Delta vertices."""
    alpha: tuple
    beta: tuple

    def __post_init__(self):
        def to_frac(v):
            # floats are user convenience; snap them to short rationals
            if isinstance(v, float):
                return Fraction(v).limit_denominator(10**9)
            return Fraction(v)

        object.__setattr__(self, "alpha", tuple(to_frac(a) for a in self.alpha))
        object.__setattr__(self, "beta", tuple(to_frac(b) for b in self.beta))
        for side in (self.alpha, self.beta):
            if sum(side) != 1 or any(not 0 <= v <= 1 for v in side):
                raise DomainError("footprint sides must be distributions")


def _bucket_tables(graph, model):
    """Weight per (U+ counts, U- counts, W assignment), exact when possible.

    The gritty core shared by the footprint table, the conditioned
    partition functions, and the gadget checks.
    """
    q = model.q
    _check_budget(graph, q)
    edges = graph.edges()
    frac = rational_entries(model)
    rational = frac is not None
    if rational:
        num, den = _integer_matrix(frac)
        scale = Fraction(1, den ** len(edges))
        lookup = num
    else:
        lookup = model.B.tolist()
    nv = graph.num_vertices
    n, side = graph.n, graph.side

    def spin_slice(first_spin):
        buckets = defaultdict(int if rational else float)
        for rest in itertools.product(range(q), repeat=nv - 1):
            spins = (first_spin,) + rest
            w = 1
            for u, v in edges:
                w *= lookup[spins[u]][spins[v]]
                if not w:
                    break
            if not w:
                continue
            aplus = [0] * q
            aminus = [0] * q
            for u in range(n):
                aplus[spins[u]] += 1
            for u in range(side, side + n):
                aminus[spins[u]] += 1
            eta = spins[n:side] + spins[side + n:]
            buckets[(tuple(aplus), tuple(aminus), eta)] += w
        return buckets

    merged = defaultdict(int if rational else float)
    for buckets in util.ordered_map(spin_slice, range(q), util.worker_count()):
        for key, w in buckets.items():
            merged[key] += w
    if rational:
        return {key: w * scale for key, w in merged.items()}
    return dict(merged)


def partition_by_footprint(graph, model):
    """Table footprint -> Z^{alpha,beta}; sums to exact_partition."""
    n = graph.n
    table = defaultdict(lambda: 0)
    for (aplus, aminus, _eta), w in _bucket_tables(graph, model).items():
        fp = Footprint(alpha=tuple(Fraction(c, n) for c in aplus),
                       beta=tuple(Fraction(c, n) for c in aminus))
        table[fp] += w
    return dict(table)


def phase_of_configuration(footprint, phase_list):
    """Index of the closest phase to a footprint, ties to the smaller index."""
    if not phase_list:
        raise DomainError("empty phase list")
    fa, fb = ((footprint.alpha, footprint.beta)
              if isinstance(footprint, Footprint) else footprint)
    a = np.array([float(v) for v in fa])
    b = np.array([float(v) for v in fb])
    best, best_d = 0, None
    for idx, (pa, pb) in enumerate(phase_list):
        d = float(np.sum((a - np.asarray(pa)) ** 2)
                  + np.sum((b - np.asarray(pb)) ** 2))
        if best_d is None or d < best_d:
            best, best_d = idx, d
    return best


@dataclass(frozen=True)
class ConditionedPartition:
    Z: object
    per_phase: tuple                # Z^p by phase index
    per_phase_eta: tuple            # dict eta -> Z^p(eta) by phase index


def conditioned_partition(graph, model, phases):
    """Split Z by assigned phase, and further by the W-vertex assignment.

    `phases` is a list of (alpha, beta) pairs. Both splits are exact
    partitions of the total: sum_p Z^p = Z and sum_eta Z^p(eta) = Z^p.
    """
    n = graph.n
    per_eta = [defaultdict(lambda: 0) for _ in phases]
    for (aplus, aminus, eta), w in _bucket_tables(graph, model).items():
        fp = Footprint(alpha=tuple(Fraction(c, n) for c in aplus),
                       beta=tuple(Fraction(c, n) for c in aminus))
        per_eta[phase_of_configuration(fp, phases)][eta] += w
    per_phase = tuple(sum(d.values()) for d in per_eta)
    return ConditionedPartition(Z=sum(per_phase), per_phase=per_phase,
                                per_phase_eta=tuple(dict(d) for d in per_eta))


def nu_product(fixpoint, eta):
    """Product measure of a W assignment under a phase's fixpoint.

    eta = (spins on W+, spins on W-); R drives the plus side, C the minus
    side, each rescaled to sum 1.
    """
    eta_plus, eta_minus = eta
    rhat = fixpoint.R / fixpoint.R.sum()
    chat = fixpoint.C / fixpoint.C.sum()
    p = 1.0
    for s in eta_plus:
        p *= rhat[s]
    for s in eta_minus:
        p *= chat[s]
    return float(p)


def gadget_check(graph, model=None, fixpoints=None):
    """Screen a sampled gadget against the structural and mass criteria.

    Structural items (simplicity; no W-W edge, no vertex with two W
    neighbors) are always evaluated. The enumerative items (phase masses
    near uniform; conditional W marginals near the product measure nu)
    need r > 0, a model with phase fixpoints, and the enumeration budget.
    """
    edges = graph.edges()
    mult = Counter(edges)
    w_set = set(graph.w_plus) | set(graph.w_minus)
    simple = max(mult.values()) == 1 if mult else True
    no_cross = not any(u in w_set and v in w_set for u, v in edges)
    w_neighbors = Counter()
    for u, v in edges:
        if v in w_set:
            w_neighbors[u] += 1
        if u in w_set:
            w_neighbors[v] += 1
    no_double = not w_neighbors or max(w_neighbors.values()) <= 1
    report = {
        "simple": simple,
        "no_w_cross_edge": no_cross,
        "no_double_w_neighbor": no_double,
    }
    if graph.r == 0:
        report["note"] = "r = 0: no W vertices, enumerative items skipped"
        return report
    if model is None or not fixpoints:
        report["note"] = "structural screening only: no phases supplied"
        return report
    phases = [recursion.phase_marginals(model, fp) for fp in fixpoints]
    cond = conditioned_partition(graph, model, phases)
    total = cond.Z
    r = graph.r
    masses = [float(zp / total) if total else 0.0 for zp in cond.per_phase]
    report["phase_mass"] = masses
    report["max_mass_deviation"] = max(abs(m - 1 / len(phases)) for m in masses)
    worst = 0.0
    for p, (zp, table) in enumerate(zip(cond.per_phase, cond.per_phase_eta)):
        if not zp:
            continue
        for eta, w in table.items():
            nu = nu_product(fixpoints[p], (eta[:r], eta[r:]))
            ratio = float(w / zp) / nu
            worst = max(worst, abs(ratio - 1.0))
    report["max_nu_deviation"] = worst
    return report


# ----------------------------------------------------------------------
# exact moment formulas
# ----------------------------------------------------------------------

def _multinomial(total, parts):
    out = math.factorial(total)
    for p in parts:
        out //= math.factorial(p)
    return out


def _compositions(total, bounds):
    """Nonnegative integer tuples summing to `total`, entrywise <= bounds."""
    if len(bounds) == 1:
        if total <= bounds[0]:
            yield (total,)
        return
    for first in range(min(total, bounds[0]) + 1):
        for rest in _compositions(total - first, bounds[1:]):
            yield (first,) + rest


def enumerate_tables(row_sums, col_sums):
    """All nonnegative integer matrices with the given margins."""
    if sum(row_sums) != sum(col_sums):
        return
    if not row_sums:
        yield ()
        return
    for row in _compositions(row_sums[0], col_sums):
        remaining = tuple(c - x for c, x in zip(col_sums, row))
        for rest in enumerate_tables(row_sums[1:], remaining):
            yield (row,) + rest


def _round_footprint(weights, n):
    w = np.asarray(weights, dtype=float)
    if np.any(w < -1e-12) or abs(w.sum() - 1.0) > 1e-9:
        raise InfeasibleError("footprint must be a probability vector")
    return tuple(util.largest_remainder_round(np.maximum(w, 0.0), n))


def _matching_moment(Bfrac, row_counts, col_counts):
    """E over a uniform perfect matching of the product of edge weights.

    Sum over edge-type tables m (margins = the two count vectors) of
    P(m) prod B^m with P(m) = prod a_i! prod b_j! / (prod m_ij! n!).
    """
    n = sum(row_counts)
    base = Fraction(math.prod(math.factorial(a) for a in row_counts)
                    * math.prod(math.factorial(b) for b in col_counts),
                    math.factorial(n))
    total = Fraction(0)
    for table in enumerate_tables(row_counts, col_counts):
        weight = Fraction(1)
        denom = 1
        for i, row in enumerate(table):
            for j, m in enumerate(row):
                if m:
                    weight *= Bfrac[i][j] ** m
                    denom *= math.factorial(m)
                if not weight:
                    break
            if not weight:
                break
        if weight:
            total += base * weight / denom
    return total


def _require_rational(model):
    frac = rational_entries(model)
    if frac is None:
        raise DomainError("exact moment formulas need a rational matrix")
    return frac


def expected_Z_formula(model, delta, n, alpha, beta):
    """E[Z^{alpha,beta}] over the union of Delta uniform matchings, exactly.

    The footprint is rounded to counts by largest remainder first; the
    matchings are independent, so the per-matching table sum enters at
    power Delta.
    """
    if n > 12:
        raise BudgetExceededError("first-moment formula capped at n = 12")
    frac = _require_rational(model)
    a = _round_footprint(alpha, n)
    b = _round_footprint(beta, n)
    s = _matching_moment(frac, a, b)
    return _multinomial(n, a) * _multinomial(n, b) * s ** delta


def expected_Z2_formula(model, delta, n, alpha, beta):
    """E[(Z^{alpha,beta})^2], exactly: the first moment of the paired model.

    Pairs of configurations are grouped by their overlap tables g (plus
    side, margins (a, a)) and h (minus side, margins (b, b)); each group
    contributes through the tensor-squared interaction matrix.
    """
    if n > 6:
        raise BudgetExceededError("second-moment formula capped at n = 6")
    frac = _require_rational(model)
    q = model.q
    a = _round_footprint(alpha, n)
    b = _round_footprint(beta, n)
    BB = [[frac[p // q][pp // q] * frac[p % q][pp % q]
           for pp in range(q * q)] for p in range(q * q)]
    total = Fraction(0)
    for g in enumerate_tables(a, a):
        vg = tuple(x for row in g for x in row)
        mg = _multinomial(n, vg)
        for h in enumerate_tables(b, b):
            vh = tuple(x for row in h for x in row)
            s = _matching_moment(BB, vg, vh)
            if s:
                total += mg * _multinomial(n, vh) * s ** delta
    return total


# ----------------------------------------------------------------------
# cycle counts and small subgraph conditioning
# ----------------------------------------------------------------------

def two_cycle_pairs(graph):
    """X_2 as unordered pairs of parallel edges, straight from multiplicities."""
    mult = Counter(graph.edges())
    return sum(m * (m - 1) // 2 for m in mult.values())


def cycle_counts(graph, max_len):
    """Simple-cycle counts X_i for even i <= max_len, at the edge level.

    Parallel edges are distinct, so a pair of them is a 2-cycle. Each
    cycle is found once per direction from its minimal vertex; the raw
    tally is halved.
    """
    if max_len > 12:
        raise DomainError("cycle counting capped at length 12")
    adj = defaultdict(list)
    for eid, (u, v) in enumerate(graph.edges()):
        adj[u].append((v, eid))
        adj[v].append((u, eid))
    counts = {i: 0 for i in range(2, max_len + 1, 2)}

    def walk(s, cur, length, visited, first_eid):
        for nbr, eid in adj[cur]:
            if nbr == s:
                closed = length + 1
                if closed % 2 == 0 and not (closed == 2 and eid == first_eid):
                    counts[closed] += 1
            elif nbr > s and nbr not in visited and length + 1 < max_len:
                visited.add(nbr)
                walk(s, nbr, length + 1, visited, first_eid)
                visited.remove(nbr)

    for s in range(graph.num_vertices):
        for nbr, eid in adj[s]:
            if nbr > s:
                walk(s, nbr, 1, {nbr}, eid)
    return {i: c // 2 for i, c in counts.items()}


@dataclass(frozen=True)
class SSCReport:
    lambdas: tuple
    mu: dict
    delta: dict
    partial_sum: float
    C: float


def ssc_constants(model, delta_deg, fixpoint, i_max=400):
    """Cycle-fluctuation constants of an attractive dominant fixpoint.

    lambda_i are the non-unit singular values of the normalized edge
    marginal; mu_i is the limiting mean count of i-cycles; delta_i their
    weight shifts. The limit ratio C obeys ln C = sum mu_i delta_i^2,
    which converges exactly when the fixpoint is attractive.
    """
    alpha, beta = recursion.phase_marginals(model, fixpoint)
    if np.any(alpha <= 0) or np.any(beta <= 0):
        raise StructureError("fixpoint marginals must be strictly positive")
    J = recursion.edge_marginal(model, fixpoint) / np.sqrt(np.outer(alpha, beta))
    svals = np.sort(np.linalg.svd(J, compute_uv=False))[::-1]
    if abs(svals[0] - 1.0) > 1e-6:
        raise StructureError("leading singular value is not 1: not a fixpoint")
    lambdas = tuple(float(v) for v in svals[1:])
    d = delta_deg - 1
    if lambdas and max(lambdas) * d >= 1.0:
        raise RegimeError("fixpoint is not attractive: the constants diverge")
    mu = {i: (d ** i + d) / i for i in range(2, i_max + 1, 2)}
    dl = {i: float(sum(l ** i for l in lambdas)) for i in range(2, i_max + 1, 2)}
    partial = math.fsum(mu[i] * dl[i] ** 2 for i in mu)
    logC = 0.0
    for li in lambdas:
        for lj in lambdas:
            x2 = (li * lj) ** 2
            logC += -0.5 * math.log1p(-d * d * x2) - 0.5 * d * math.log1p(-x2)
    return SSCReport(lambdas=lambdas, mu=mu, delta=dl,
                     partial_sum=partial, C=math.exp(logC))


def ssc_w(graph, report, m):
    """W statistic prod over even lengths i <= 2m of (1+d_i)^{X_i} e^{-mu_i d_i}."""
    counts = cycle_counts(graph, 2 * m)
    w = 1.0
    for i in range(2, 2 * m + 1, 2):
        w *= (1.0 + report.delta[i]) ** counts[i] \
            * math.exp(-report.mu[i] * report.delta[i])
    return w
