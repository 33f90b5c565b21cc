"""Phase labeling, the agreement gadgets, and the Max-Cut reduction.

The phase labeling problem assigns an ordered phase to every vertex of a
multigraph whose edges are tagged parallel or symmetric; a parallel edge
with endpoint phases (x1, y1), (x2, y2) earns ln(x1' B x2) + ln(y1' B y2),
a symmetric edge earns the same plus the value with the second phase
flipped. Gadget J1 makes two distinguished vertices prefer equal unordered
phases; J2 stacks copies of J1 with one parallel edge so that equal phase
with opposite spin wins. Replacing the edges of a cubic graph by J2 turns
MaxCut into MaxLwt affinely, and the gadget graphs of the sampling model
realize the whole instance as a Delta-regular simple triangle-free graph.
"""

import itertools
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import graphs
from .errors import (BudgetExceededError, DomainError, InfeasibleError,
                     StructureError)
from .models import classify_signature, perron_decompose
from .moments import NEG_INF, is_neg_inf
from .util import largest_remainder_round

LABELING_BUDGET = 10**8
DIOPHANTINE_CAP = 10**4
COINCIDENCE_TOL = 1e-9


# ----------------------------------------------------------------------
# phases and edge weights
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseSet:
    """Ordered phases closed under the spin flip (x, y) -> (y, x).

    `flip[i]` is the index of phase i's partner; `reps` picks one ordered
    phase per unordered pair, and `pair_of[i]` maps a phase to its
    unordered index.
    """
    phases: tuple
    flip: tuple
    reps: tuple
    pair_of: tuple

    def __len__(self):
        return len(self.phases)


def phase_set(phase_list, tol=1e-9):
    phases = tuple((np.asarray(x, dtype=float), np.asarray(y, dtype=float))
                   for x, y in phase_list)
    for x, y in phases:
        for side in (x, y):
            if side.min() < -tol or abs(side.sum() - 1.0) > 1e-7:
                raise DomainError("phase components must lie in the simplex")
        if np.max(np.abs(x - y)) <= tol:
            raise DomainError("phases must have distinct sides (alpha != beta)")
    flip = []
    for x, y in phases:
        partner = [j for j, (xx, yy) in enumerate(phases)
                   if np.max(np.abs(xx - y)) <= tol
                   and np.max(np.abs(yy - x)) <= tol]
        if len(partner) != 1:
            raise StructureError("phase list is not closed under the spin flip")
        flip.append(partner[0])
    reps = tuple(i for i, j in enumerate(flip) if i < j)
    pair_of = [0] * len(phases)
    for k, i in enumerate(reps):
        pair_of[i] = pair_of[flip[i]] = k
    return PhaseSet(phases=phases, flip=tuple(flip), reps=reps,
                    pair_of=tuple(pair_of))


def _log_pairing(x1, x2, B):
    v = float(x1 @ B @ x2)
    return math.log(v) if v > 0 else NEG_INF


def weight_parallel(phase1, phase2, model):
    """w_p = ln(x1' B x2) + ln(y1' B y2); -inf when a pairing is forbidden."""
    a = _log_pairing(phase1[0], phase2[0], model.B)
    b = _log_pairing(phase1[1], phase2[1], model.B)
    if is_neg_inf(a) or is_neg_inf(b):
        return NEG_INF
    return a + b


def weight_symmetric(phase1, phase2, model):
    """w_s = w_p(p1, p2) + w_p(p1, flip(p2)); flip-invariant in both slots."""
    a = weight_parallel(phase1, phase2, model)
    b = weight_parallel(phase1, (phase2[1], phase2[0]), model)
    if is_neg_inf(a) or is_neg_inf(b):
        return NEG_INF
    return a + b


def weight_tables(pset, model):
    """Dense w_p and w_s lookup tables over phase indices."""
    k = len(pset)
    wp = [[weight_parallel(pset.phases[i], pset.phases[j], model)
           for j in range(k)] for i in range(k)]
    ws = [[weight_symmetric(pset.phases[i], pset.phases[j], model)
           for j in range(k)] for i in range(k)]
    return wp, ws


def crk_margin(pset, model):
    """Strict slack of w_p(p+, p-) over w_p(p+, p+), per unordered phase.

    Returns (epsilon2, gaps); epsilon2 is half the smallest gap so the
    strict inequalities downstream keep a real margin.
    """
    gaps = []
    for i in pset.reps:
        same = weight_parallel(pset.phases[i], pset.phases[i], model)
        opp = weight_parallel(pset.phases[i], pset.phases[pset.flip[i]], model)
        if is_neg_inf(opp):
            raise DomainError("opposite-spin pairing is forbidden: no margin")
        gap = opp - same if not is_neg_inf(same) else math.inf
        if gap <= 0:
            raise StructureError("phase pair violates the antiferromagnetic gap")
        gaps.append(gap)
    finite = [g for g in gaps if not math.isinf(g)]
    eps2 = min(finite) / 2 if finite else math.inf
    return eps2, gaps


# ----------------------------------------------------------------------
# instances and brute-force optimization
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class PhaseLabelingInstance:
    """Multigraph with parallel/symmetric tagged edges (loops allowed)."""
    num_vertices: int
    edges: tuple                 # (u, v, "parallel" | "symmetric")
    phase_set: PhaseSet
    model: object

    def __post_init__(self):
        for u, v, kind in self.edges:
            if not (0 <= u < self.num_vertices and 0 <= v < self.num_vertices):
                raise DomainError("edge endpoint out of range")
            if kind not in ("parallel", "symmetric"):
                raise DomainError(f"unknown edge kind {kind!r}")

    def degree(self, v):
        """Terminal-count degree 2 d_s + d_p + 4 l_s + 2 l_p."""
        d = 0
        for a, b, kind in self.edges:
            if a == b == v:
                d += 4 if kind == "symmetric" else 2
            elif v in (a, b):
                d += 2 if kind == "symmetric" else 1
        return d


def labeling_weight(instance, labeling, tables=None):
    wp, ws = tables if tables is not None else weight_tables(
        instance.phase_set, instance.model)
    total = 0.0
    for u, v, kind in instance.edges:
        w = (wp if kind == "parallel" else ws)[labeling[u]][labeling[v]]
        if is_neg_inf(w):
            return NEG_INF
        total += w
    return total


def max_lwt_bruteforce(instance):
    """Exhaustive MaxLwt; returns (value, labeling), labeling None if all -inf."""
    k = len(instance.phase_set)
    if k ** instance.num_vertices > LABELING_BUDGET:
        raise BudgetExceededError("labeling space exceeds the budget")
    tables = weight_tables(instance.phase_set, instance.model)
    best, best_lab = NEG_INF, None
    for lab in itertools.product(range(k), repeat=instance.num_vertices):
        w = labeling_weight(instance, lab, tables)
        if not is_neg_inf(w) and (best_lab is None or w > best):
            best, best_lab = w, lab
    return best, best_lab


def maxcut_bruteforce(num_vertices, edges):
    if num_vertices > 26:
        raise BudgetExceededError("MaxCut brute force capped at 26 vertices")
    best = 0
    for mask in range(1 << (num_vertices - 1)):
        cut = sum(1 for u, v in edges
                  if ((mask >> u) & 1) != ((mask >> v) & 1))
        best = max(best, cut)
    return best


# ----------------------------------------------------------------------
# negative definiteness of the pairing matrix
# ----------------------------------------------------------------------

def _phase_vectors(pset):
    """z list: the representative x's then their y's, all distinct."""
    xs = [pset.phases[i][0] for i in pset.reps]
    ys = [pset.phases[i][1] for i in pset.reps]
    return xs + ys


def _pairing_matrix(zs, model):
    u = perron_decompose(model).u
    m = len(zs)
    for i in range(m):
        for j in range(i + 1, m):
            if np.max(np.abs(zs[i] - zs[j])) <= COINCIDENCE_TOL:
                raise StructureError("coincident phase vectors")
    A = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            inner = float(zs[i] @ model.B @ zs[j])
            if inner <= 0 or zs[i] @ u <= 0:
                raise DomainError("zero pairing inside the phase family")
            A[i, j] = math.log(inner) - math.log(float(zs[i] @ u)) \
                - math.log(float(zs[j] @ u))
    return A


def negdef_certificate(pset, model):
    """Eigenvalue report of the normalized log-pairing matrix.

    For an antiferromagnetic model this matrix over distinct simplex
    vectors is negative definite; the certificate demands max eigenvalue
    below -1e-10.
    """
    if not classify_signature(model).antiferromagnetic:
        raise DomainError("certificate applies to antiferromagnetic models")
    A = _pairing_matrix(_phase_vectors(pset), model)
    eig = np.sort(np.linalg.eigvalsh(A))[::-1]
    return {
        "eigenvalues": [float(v) for v in eig],
        "max_eigenvalue": float(eig[0]),
        "passes": bool(eig[0] < -1e-10),
    }


# ----------------------------------------------------------------------
# gadget J1
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class GadgetJ1:
    instance: PhaseLabelingInstance
    u: int
    v: int
    z: int
    counts: tuple                # intended copies per unordered phase
    x_star: tuple                # QP optimum over unordered phases
    dio_error: float             # max_i |x*_i - counts_i / z|
    epsilon1: float
    certified: bool
    margin_bound: float
    same_max: float
    diff_max: float


def _simplex_qp(Aq):
    """Unique argmax of x' A x on the simplex, A strictly concave there.

    Enumerates supports; on each face the bordered KKT system is
    nonsingular (the quadratic is strictly concave on the sum-one slice),
    and the best feasible stationary point is the global optimum.
    """
    k = Aq.shape[0]
    best, best_x = None, None
    for mask in range(1, 1 << k):
        idx = [i for i in range(k) if mask >> i & 1]
        m = len(idx)
        kkt = np.zeros((m + 1, m + 1))
        kkt[:m, :m] = 2.0 * Aq[np.ix_(idx, idx)]
        kkt[:m, m] = -1.0
        kkt[m, :m] = 1.0
        rhs = np.zeros(m + 1)
        rhs[m] = 1.0
        sol = np.linalg.solve(kkt, rhs)
        x_sub = sol[:m]
        if np.any(x_sub < -1e-12):
            continue
        x = np.zeros(k)
        x[idx] = np.maximum(x_sub, 0.0)
        x /= x.sum()
        val = float(x @ Aq @ x)
        if best is None or val > best + 1e-15:
            best, best_x = val, x
    if best_x is None:
        raise StructureError("simplex program found no feasible candidate")
    return best_x, best


def _diophantine(x_star, cap):
    """Best z <= cap approximating x* by counts/z; near-ties favor small z."""
    best_z, best_counts, best_err = None, None, None
    for z in range(1, cap + 1):
        counts = largest_remainder_round(x_star, z)
        err = max(abs(x - c / z) for x, c in zip(x_star, counts))
        if best_err is None or err < best_err - 1e-12:
            best_z, best_counts, best_err = z, counts, err
    return best_z, tuple(best_counts), best_err


def _overlay_edges(z):
    """J1 edge multiset: two complete loop-decorated graphs sharing the b's.

    Vertices: 0 = u, 1 = v, 2..z = shared slots. Each copy contributes a
    self-loop per vertex and two edges per pair; only the copy's own
    distinguished vertex participates in it.
    """
    edges = []
    shared = list(range(2, z + 1))
    for distinguished in (0, 1):
        verts = shared + [distinguished]
        for w in verts:
            edges.append((w, w, "symmetric"))
        for a, b in itertools.combinations(verts, 2):
            edges.append((a, b, "symmetric"))
            edges.append((a, b, "symmetric"))
    return tuple(edges)


def _constrained_maxima(instance, u, v):
    """Max Lwt over labelings with equal / different unordered phases at u, v."""
    pset = instance.phase_set
    k = len(pset)
    tables = weight_tables(pset, instance.model)
    same, diff = NEG_INF, NEG_INF
    for lab in itertools.product(range(k), repeat=instance.num_vertices):
        w = labeling_weight(instance, lab, tables)
        if is_neg_inf(w):
            continue
        if pset.pair_of[lab[u]] == pset.pair_of[lab[v]]:
            same = max(same, w)
        else:
            diff = max(diff, w)
    return same, diff


def build_J1(pset, model):
    """Agreement gadget: two overlaid complete multigraphs sharing z-1 slots.

    The slot multiplicities come from the simplex quadratic program over
    the folded pairing matrix, rationalized by exhaustive Diophantine
    search. Certification compares the best same-unordered-phase labeling
    against the best differing one; past the enumeration budget the
    proof's margin bound stands in, flagged uncertified.
    """
    cert = negdef_certificate(pset, model)
    if not cert["passes"]:
        raise DomainError("pairing matrix is not certified negative definite")
    Qp = len(pset.reps)
    zs = _phase_vectors(pset)
    Ahat = _pairing_matrix(zs, model)
    Afold = (Ahat[:Qp, :Qp] + Ahat[Qp:, :Qp]
             + Ahat[:Qp, Qp:] + Ahat[Qp:, Qp:])
    u_vec = perron_decompose(model).u
    a_shift = np.array([2 * math.log(float(zs[i] @ u_vec))
                        + 2 * math.log(float(zs[i + Qp] @ u_vec))
                        for i in range(Qp)])
    Aq = Afold + a_shift[:, None] + a_shift[None, :]
    x_star, _ = _simplex_qp(Aq)

    neg_eigs = np.sort(np.linalg.eigvalsh(-Afold))
    lam2, lam1 = float(neg_eigs[0]), float(neg_eigs[-1])
    proof_cap = (4 * Qp * lam1 / lam2) ** Qp if lam2 > 0 else math.inf
    cap = DIOPHANTINE_CAP if not math.isfinite(proof_cap) \
        else min(math.ceil(proof_cap), DIOPHANTINE_CAP)
    z, counts, err = _diophantine(x_star, cap)

    instance = PhaseLabelingInstance(
        num_vertices=z + 1, edges=_overlay_edges(z),
        phase_set=pset, model=model)
    margin = lam2 / 2 - 2 * lam1 * z * z * err * err
    if len(pset) ** (z + 1) <= LABELING_BUDGET:
        same, diff = _constrained_maxima(instance, 0, 1)
        eps1 = same - diff if not is_neg_inf(diff) else math.inf
        certified = eps1 > 0
    else:
        same = diff = NEG_INF
        eps1 = margin
        certified = False
    return GadgetJ1(instance=instance, u=0, v=1, z=z, counts=counts,
                    x_star=tuple(float(x) for x in x_star), dio_error=err,
                    epsilon1=eps1, certified=certified, margin_bound=margin,
                    same_max=same, diff_max=diff)


# ----------------------------------------------------------------------
# gadget J2
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class GadgetJ2:
    instance: PhaseLabelingInstance
    j1: GadgetJ1
    t: int
    phase: int                   # preferred unordered phase (rep index)
    A1: float
    A2: float
    epsilon2: float
    epsilon3: float
    certified: bool
    cond: tuple                  # per-copy J1 maxima given (label u, label v)
    wp: tuple                    # parallel weight table


def _j1_conditional_table(j1):
    """T[a][b]: best J1 labeling with the distinguished labels pinned."""
    inst = j1.instance
    pset = inst.phase_set
    k = len(pset)
    interior = [w for w in range(inst.num_vertices) if w not in (j1.u, j1.v)]
    if k ** len(interior) * k * k > LABELING_BUDGET:
        raise BudgetExceededError("conditional table exceeds the budget")
    tables = weight_tables(pset, inst.model)
    T = [[NEG_INF] * k for _ in range(k)]
    lab = [0] * inst.num_vertices
    for a in range(k):
        for b in range(k):
            lab[j1.u], lab[j1.v] = a, b
            best = NEG_INF
            for fill in itertools.product(range(k), repeat=len(interior)):
                for w, f in zip(interior, fill):
                    lab[w] = f
                val = labeling_weight(inst, lab, tables)
                if not is_neg_inf(val) and (is_neg_inf(best) or val > best):
                    best = val
            T[a][b] = best
    return T


def _j2_instance(j1, t, pset, model):
    """t J1 copies merged at u, v, plus the one parallel edge."""
    edges = [(0, 1, "parallel")]
    z1 = j1.instance.num_vertices - 2
    for copy in range(t):
        shift = copy * z1

        def remap(w):
            return w if w < 2 else w + shift

        for a, b, kind in j1.instance.edges:
            edges.append((remap(a), remap(b), kind))
    return PhaseLabelingInstance(num_vertices=2 + t * z1, edges=tuple(edges),
                                 phase_set=pset, model=model)


def j2_weight_table(j2):
    """Lwt of J2 given the distinguished labels: t T[a][b] + w_p(a, b)."""
    k = len(j2.instance.phase_set)
    out = [[NEG_INF] * k for _ in range(k)]
    for a in range(k):
        for b in range(k):
            base = j2.cond[a][b]
            wpab = j2.wp[a][b]
            if is_neg_inf(base) or is_neg_inf(wpab):
                continue
            out[a][b] = j2.t * base + wpab
    return out


def build_J2(j1, pset, model):
    """Disagreement gadget built from t J1 copies and one parallel edge.

    t is sized so the J1 stack dominates any parallel-weight variation;
    the preferred phase maximizes the opposite-spin value, breaking ties
    by the equal-spin value. Certification checks both inequalities that
    the downstream reduction consumes.
    """
    if not j1.certified and (is_neg_inf(j1.epsilon1) or j1.epsilon1 <= 0):
        raise DomainError("cannot size J2 without a positive J1 margin")
    wp, _ = weight_tables(pset, model)
    finite = [w for row in wp for w in row if not is_neg_inf(w)]
    if not finite:
        raise DomainError("every parallel pairing is forbidden")
    spread = max(finite) - min(finite)
    t = 0 if math.isinf(j1.epsilon1) else 3 * math.ceil(spread / j1.epsilon1)
    T = _j1_conditional_table(j1) if t else \
        [[0.0] * len(pset) for _ in range(len(pset))]
    instance = _j2_instance(j1, t, pset, model)

    def j2w(a, b):
        if is_neg_inf(T[a][b]) or is_neg_inf(wp[a][b]):
            return NEG_INF
        return t * T[a][b] + wp[a][b]

    best_p, best_a1, best_a2 = None, NEG_INF, NEG_INF
    for rep_idx, i in enumerate(pset.reps):
        a1 = j2w(i, pset.flip[i])
        a2 = j2w(i, i)
        if best_p is None or a1 > best_a1 + 1e-12 \
                or (abs(a1 - best_a1) <= 1e-12 and a2 > best_a2):
            best_p, best_a1, best_a2 = rep_idx, a1, a2
    eps2, _gaps = crk_margin(pset, model)
    eps3 = min(eps2, spread) if spread > 0 else eps2
    diff_best = NEG_INF
    k = len(pset)
    for a in range(k):
        for b in range(k):
            if pset.pair_of[a] != pset.pair_of[b]:
                diff_best = max(diff_best, j2w(a, b))
    cert = (not is_neg_inf(best_a1)
            and best_a1 > best_a2 + eps3
            and (is_neg_inf(diff_best) or best_a2 > eps3 + diff_best))
    return GadgetJ2(instance=instance, j1=j1, t=t, phase=best_p,
                    A1=best_a1, A2=best_a2, epsilon2=eps2, epsilon3=eps3,
                    certified=bool(cert and j1.certified),
                    cond=tuple(tuple(row) for row in T),
                    wp=tuple(tuple(row) for row in wp))


# ----------------------------------------------------------------------
# the Max-Cut reduction
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class ReductionResult:
    instance: PhaseLabelingInstance
    j2: GadgetJ2
    D3: int
    maxcut: int
    predicted: float
    coefficients: dict
    num_h_vertices: int
    h_edges: tuple


def _pendant_count(j2):
    """D3 = 4 + 3 ceil(max_r l1(r)/l2(r)) over phases beating the preferred
    equal-spin value; zero when none does."""
    table = j2_weight_table(j2)
    pset = j2.instance.phase_set
    ratios = []
    for kidx, i in enumerate(pset.reps):
        if kidx == j2.phase:
            continue
        l1 = table[i][i] - j2.A2
        if is_neg_inf(table[i][i]) or l1 <= 0:
            continue
        l2 = j2.A1 - table[i][pset.flip[i]]
        if l2 <= 0:
            raise StructureError("preferred phase fails the strict optimum")
        ratios.append(l1 / l2)
    return 4 + 3 * math.ceil(max(ratios)) if ratios else 0


def reduce_maxcut(num_vertices, edges, j2):
    """Expand a cubic graph edgewise into J2 gadgets, with pendant anchors.

    Returns the expanded instance together with the affine prediction
    MaxLwt = (A1 - A2) MaxCut(H) + A2 |E| + A1 D3 |V|.
    """
    deg = Counter()
    seen = set()
    for u, v in edges:
        if u == v or not (0 <= u < num_vertices and 0 <= v < num_vertices):
            raise DomainError("H must be simple and loop-free")
        key = (min(u, v), max(u, v))
        if key in seen:
            raise DomainError("H must be simple")
        seen.add(key)
        deg[u] += 1
        deg[v] += 1
    if any(deg[v] != 3 for v in range(num_vertices)):
        raise DomainError("H must be cubic")

    D3 = _pendant_count(j2)
    pset = j2.instance.phase_set
    model = j2.instance.model
    gadget_edges = j2.instance.edges
    interior = j2.instance.num_vertices - 2

    expanded = []
    next_free = num_vertices + D3 * num_vertices

    def splice(a, b):
        nonlocal next_free
        base = next_free
        next_free += interior
        for x, y, kind in gadget_edges:
            xx = a if x == 0 else b if x == 1 else base + x - 2
            yy = a if y == 0 else b if y == 1 else base + y - 2
            expanded.append((xx, yy, kind))

    for u, v in edges:
        splice(u, v)
    for w in range(num_vertices):
        for i in range(D3):
            splice(w, num_vertices + w * D3 + i)
    instance = PhaseLabelingInstance(num_vertices=next_free,
                                     edges=tuple(expanded),
                                     phase_set=pset, model=model)
    mc = maxcut_bruteforce(num_vertices, edges)
    predicted = ((j2.A1 - j2.A2) * mc + j2.A2 * len(edges)
                 + j2.A1 * D3 * num_vertices)
    return ReductionResult(instance=instance, j2=j2, D3=D3, maxcut=mc,
                           predicted=predicted,
                           coefficients={"cut": j2.A1 - j2.A2,
                                         "edge": j2.A2,
                                         "vertex": j2.A1 * D3},
                           num_h_vertices=num_vertices,
                           h_edges=tuple(edges))


def dp_max_lwt(result, seed=0, restarts=64):
    """MaxLwt of the expanded instance via per-gadget conditional tables.

    Given the labels of the original vertices each gadget optimizes
    independently, and each pendant folds to its best column. Exact
    enumeration within budget; otherwise seeded local search, flagged.
    """
    table = j2_weight_table(result.j2)
    pset = result.j2.instance.phase_set
    k = len(pset)
    nv = result.num_h_vertices
    folded = [max((w for w in row if not is_neg_inf(w)), default=NEG_INF)
              for row in table]

    def value(lab):
        total = 0.0
        for u, v in result.h_edges:
            w = table[lab[u]][lab[v]]
            if is_neg_inf(w):
                return NEG_INF
            total += w
        for u in range(nv):
            if is_neg_inf(folded[lab[u]]):
                return NEG_INF
            total += result.D3 * folded[lab[u]]
        return total

    if k ** nv <= LABELING_BUDGET:
        best = max(value(lab)
                   for lab in itertools.product(range(k), repeat=nv))
        return {"value": best, "exact": True}
    rng = np.random.default_rng(seed)
    best = NEG_INF
    for _ in range(restarts):
        lab = list(rng.integers(0, k, size=nv))
        improved = True
        while improved:
            improved = False
            for u in range(nv):
                start = lab[u]
                best_c, best_v = start, value(lab)
                for c in range(k):
                    if c == start:
                        continue
                    lab[u] = c
                    cand = value(lab)
                    if cand > best_v:
                        best_c, best_v = c, cand
                lab[u] = best_c
                improved = improved or best_c != start
        best = max(best, value(lab))
    return {"value": best, "exact": False}


# ----------------------------------------------------------------------
# wiring the final Delta-regular graph
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class HFGraph:
    num_vertices: int
    delta: int
    edges: tuple
    offsets: tuple               # global base id per instance vertex
    gadgets: tuple               # one sampled gadget per instance vertex


# Acceptance of a sampled gadget (simple + W-separation) has probability
# roughly exp(-3) further thinned by the W-collision events, about 2% at
# n ~ 25, so the attempt cap must be generous; the expected cost stays at
# a few dozen draws.
MAX_SCREEN_ATTEMPTS = 2000


def _screened_gadget(n, r, delta, seed, vidx):
    for attempt in range(MAX_SCREEN_ATTEMPTS):
        g = graphs.sample_graph(n, r, delta, seed=[seed, vidx, attempt])
        rep = graphs.gadget_check(g)
        if rep["simple"] and rep["no_w_cross_edge"] and rep["no_double_w_neighbor"]:
            return g
    raise StructureError("no structurally clean gadget found; increase n")


def build_HF(instance, n, k, delta, seed):
    """Realize a phase labeling instance as a Delta-regular simple graph.

    Every instance vertex becomes a screened bipartite gadget whose W
    terminals (degree Delta - 1) absorb exactly one new edge each;
    parallel edges keep signs aligned, symmetric edges add both
    alignments, and loops consume terminals of their own gadget. The new
    edges form a perfect matching on all W vertices.
    """
    degrees = [instance.degree(v) for v in range(instance.num_vertices)]
    if degrees and k * max(degrees) >= n:
        raise DomainError("need k * max degree < n")
    gadgets, offsets = [], []
    base = 0
    for vidx, d in enumerate(degrees):
        g = _screened_gadget(n, k * d, delta, seed, vidx)
        gadgets.append(g)
        offsets.append(base)
        base += g.num_vertices

    edges = []
    for off, g in zip(offsets, gadgets):
        for u, v in g.edges():
            edges.append((off + u, off + v))

    cursor_plus = [0] * instance.num_vertices
    cursor_minus = [0] * instance.num_vertices

    def take(vidx, sign, count):
        cursor = cursor_plus if sign > 0 else cursor_minus
        g = gadgets[vidx]
        ids = list(g.w_plus if sign > 0 else g.w_minus)
        if cursor[vidx] + count > len(ids):
            raise InfeasibleError(f"W terminals exhausted at vertex {vidx}")
        out = [offsets[vidx] + ids[cursor[vidx] + i] for i in range(count)]
        cursor[vidx] += count
        return out

    for u, v, kind in instance.edges:
        if u != v:
            if kind == "parallel":
                edges += zip(take(u, +1, k), take(v, +1, k))
                edges += zip(take(u, -1, k), take(v, -1, k))
            else:
                edges += zip(take(u, +1, k), take(v, +1, k))
                edges += zip(take(u, -1, k), take(v, -1, k))
                edges += zip(take(u, +1, k), take(v, -1, k))
                edges += zip(take(u, -1, k), take(v, +1, k))
        else:
            if kind == "parallel":
                plus = take(u, +1, 2 * k)
                minus = take(u, -1, 2 * k)
                edges += zip(plus[:k], plus[k:])
                edges += zip(minus[:k], minus[k:])
            else:
                edges += zip(take(u, +1, 2 * k), take(u, -1, 2 * k))
                plus = take(u, +1, 2 * k)
                minus = take(u, -1, 2 * k)
                edges += zip(plus[:k], plus[k:])
                edges += zip(minus[:k], minus[k:])

    hf = HFGraph(num_vertices=base, delta=delta,
                 edges=tuple((int(a), int(b)) for a, b in edges),
                 offsets=tuple(offsets), gadgets=tuple(gadgets))
    report = check_hf(hf)
    if not all(report.values()):
        raise StructureError(f"wiring produced a defective graph: {report}")
    return hf


def check_hf(hf):
    """Structural verdicts: regularity, simplicity, no triangles."""
    deg = Counter()
    pairs = Counter()
    adj = [set() for _ in range(hf.num_vertices)]
    ok_loopfree = True
    for u, v in hf.edges:
        deg[u] += 1
        deg[v] += 1
        if u == v:
            ok_loopfree = False
            continue
        pairs[(min(u, v), max(u, v))] += 1
        adj[u].add(v)
        adj[v].add(u)
    regular = all(deg[v] == hf.delta for v in range(hf.num_vertices))
    simple = ok_loopfree and (not pairs or max(pairs.values()) == 1)
    triangle_free = True
    for u, v in pairs:
        if adj[u] & adj[v]:
            triangle_free = False
            break
    return {"regular": regular, "simple": simple,
            "triangle_free": triangle_free}
