"""Phase diagram of the antiferromagnetic Potts and colorings models.

Below the threshold B_c = (Delta - q)/Delta (and for even q) the dominant
phases correspond to subsets T of [q] of size q/2: the tree-recursion
fixpoint puts R proportional to x^d on T and 1 elsewhere, with C mirrored,
where x > 1 is the unique root of

    x = (B + q' - 1 + q' x^d) / (q' + (B + q' - 1) x^d),   q' = q/2, d = Delta-1.

Above the threshold the uniform fixpoint is the only one. Odd q is open.
"""

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import moments, recursion
from .errors import DomainError, RegimeError, StructureError
from .models import potts_model

BISECTION_TOL = 1e-13


@dataclass(frozen=True)
class Phase:
    alpha: np.ndarray
    beta: np.ndarray
    psi1: float
    attractive: bool
    subset: tuple | None
    fixpoint: recursion.Fixpoint


@dataclass(frozen=True)
class PottsPhaseDiagram:
    q: int
    delta: int
    B: float
    threshold: float
    regime: str                 # "uniqueness" | "semi_translation_nonuniqueness"
    phases: list


@dataclass(frozen=True)
class FixpointType:
    multiplicities: tuple       # (q1, q2, q3), descending
    t: int


def potts_threshold(q, delta):
    """Semi-translation uniqueness threshold (Delta - q)/Delta.

    Negative values (q > Delta) simply mean uniqueness for every B >= 0.
    """
    if q < 2 or delta < 3:
        raise DomainError("need q >= 2 and Delta >= 3")
    return (delta - q) / delta


def _half_half_poly(x, qp, B, d):
    """Signed fixpoint equation; the root x > 1 is the half-half marker."""
    return x * (qp + (B + qp - 1) * x ** d) - (B + qp - 1 + qp * x ** d)


def _solve_scalar(qp, delta, B):
    d = delta - 1
    lo = 1.0 + 1e-9
    hi = 10.0 + 2 * qp + delta
    if _half_half_poly(lo, qp, B, d) >= 0:
        raise RegimeError(
            f"B = {B} is not below the threshold; no half-half root x > 1")
    if _half_half_poly(hi, qp, B, d) <= 0:
        raise RegimeError("bisection bracket failed to capture the root")
    while hi - lo > BISECTION_TOL:
        mid = 0.5 * (lo + hi)
        if _half_half_poly(mid, qp, B, d) < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def half_half_fixpoint(q, delta, B, x, subset=None):
    """The fixpoint induced by the scalar root x for a chosen subset T."""
    d = delta - 1
    if subset is None:
        subset = tuple(range(q // 2))
    model = potts_model(q, B)
    R = np.ones(q)
    C = np.ones(q)
    R[list(subset)] = x ** d
    C[[i for i in range(q) if i not in subset]] = x ** d
    fp = recursion.find_fixpoint(model, delta, init=(R, C), max_iter=10**4)
    if not fp.certified:
        raise StructureError("constructed half-half point failed to certify")
    return fp


def solve_half_half(q, delta, B):
    """Root x > 1 of the half-half equation plus the fixpoint it induces.

    Only stated for even q >= 4 and 0 <= B below the threshold.
    """
    if q % 2 or q < 4:
        raise DomainError("half-half fixpoints need even q >= 4")
    if not 0 <= B:
        raise DomainError("B must be nonnegative")
    if B >= potts_threshold(q, delta):
        raise RegimeError(
            f"B = {B} >= threshold {potts_threshold(q, delta)}: uniqueness regime")
    x = _solve_scalar(q / 2, delta, B)
    return x, half_half_fixpoint(q, delta, B, x)


def dominant_phases(q, delta, B):
    """All C(q, q/2) dominant phases below the threshold (even q only)."""
    if q % 2:
        raise RegimeError(
            "dominant phases for odd q are open in the underlying theory; "
            "refusing to guess")
    x, _ = solve_half_half(q, delta, B)
    model = potts_model(q, B)
    phases = []
    for subset in itertools.combinations(range(q), q // 2):
        fp = half_half_fixpoint(q, delta, B, x, subset=subset)
        alpha, beta = recursion.fixpoint_to_phase(fp)
        rep = recursion.jacobian_report(model, fp, delta)
        val = moments.psi1(model, delta, alpha, beta)
        phases.append(Phase(alpha=alpha, beta=beta, psi1=val,
                            attractive=rep.attractive, subset=subset,
                            fixpoint=fp))
    return PottsPhaseDiagram(q=q, delta=delta, B=B,
                             threshold=potts_threshold(q, delta),
                             regime="semi_translation_nonuniqueness",
                             phases=phases)


def uniform_diagram(q, delta, B):
    """The uniqueness-regime diagram: a single uniform phase."""
    model = potts_model(q, B)
    fp = recursion.find_fixpoint(model, delta)
    alpha, beta = recursion.fixpoint_to_phase(fp)
    rep = recursion.jacobian_report(model, fp, delta)
    val = moments.psi1(model, delta, alpha, beta)
    phase = Phase(alpha=alpha, beta=beta, psi1=val,
                  attractive=rep.attractive, subset=None, fixpoint=fp)
    return PottsPhaseDiagram(q=q, delta=delta, B=B,
                             threshold=potts_threshold(q, delta),
                             regime="uniqueness", phases=[phase])


def potts_diagram(q, delta, B):
    """Dispatch on the regime; the main entry point for the CLI."""
    if B >= potts_threshold(q, delta):
        return uniform_diagram(q, delta, B)
    return dominant_phases(q, delta, B)


def ising_phases(delta, B):
    """Dominant (alpha, beta) pair for q = 2 below the threshold.

    Same scalar equation with q' = 1; kept separate because the classified
    Potts phase diagram starts at q = 4.
    """
    if B >= potts_threshold(2, delta):
        raise RegimeError("q=2 uniqueness regime: no paired phases")
    x = _solve_scalar(1, delta, B)
    model = potts_model(2, B)
    d = delta - 1
    fp = recursion.find_fixpoint(model, delta,
                                 init=(np.array([x ** d, 1.0]),
                                       np.array([1.0, x ** d])),
                                 max_iter=10**4)
    if not fp.certified:
        raise StructureError("Ising fixpoint failed to certify")
    alpha, beta = recursion.fixpoint_to_phase(fp)
    return x, fp, [(alpha, beta), (beta, alpha)]


# ----------------------------------------------------------------------
# stability in closed form
# ----------------------------------------------------------------------

def translation_invariant_radius(q, B):
    """Restricted radius (1 - B)/(B + q - 1) of the uniform fixpoint."""
    return (1.0 - B) / (B + q - 1.0)


def lambda1_half_half(q, delta, B, x):
    """Closed-form restricted radius of a half-half fixpoint.

    Returns a dict with lambda1, the attractiveness verdict
    lambda1 < 1/(Delta-1), and the full 2q stability spectrum with the
    multiplicity pattern (+-1 once, +-lambda1 with multiplicity q-2,
    +-(B+q-1)lambda1^2 once).
    """
    d = delta - 1
    qp = q / 2
    lam1 = (1.0 - B) * x ** (d / 2) / np.sqrt(
        (qp + (B + qp - 1) * x ** d) * (B + qp - 1 + qp * x ** d))
    third = (B + q - 1) * lam1 ** 2
    spectrum = []
    for val, mult in ((1.0, 1), (lam1, q - 2), (third, 1)):
        spectrum += [val] * mult + [-val] * mult
    spectrum.sort(reverse=True)
    return {
        "lambda1": float(lam1),
        "attractive": lam1 * d < 1.0,
        "spectrum": spectrum,
    }


def lambda1_colorings_form(x, delta):
    """Equivalent B = 0 reduction: x^((d-1)/2) (x-1)/(x^d - 1)."""
    d = delta - 1
    return x ** ((d - 1) / 2) * (x - 1) / (x ** d - 1)


def classify_fixpoint_type(fp, tol=1e-8):
    """Support-type (q1, q2, q3) of a certified Potts fixpoint.

    R values (and C values) are clustered at relative tolerance `tol`; any
    Potts fixpoint has at most 3 clusters and matching cluster counts on
    the two sides, anything else signals a non-converged input.
    """
    def clusters(v):
        vals = np.sort(np.asarray(v, dtype=float))[::-1]
        groups = [[vals[0]]]
        for a in vals[1:]:
            if abs(groups[-1][-1] - a) <= tol * max(abs(a), abs(groups[-1][-1])):
                groups[-1].append(a)
            else:
                groups.append([a])
        return groups

    gR = clusters(fp.R)
    gC = clusters(fp.C)
    if len(gR) != len(gC):
        raise StructureError(f"side support counts differ: {len(gR)} vs {len(gC)}")
    if len(gR) > 3:
        raise StructureError(f"{len(gR)} clusters: not a certified Potts fixpoint")
    mult = sorted((len(g) for g in gR), reverse=True)
    mult += [0] * (3 - len(mult))
    return FixpointType(multiplicities=tuple(mult), t=len(gR))


# ----------------------------------------------------------------------
# the clustered relaxation
# ----------------------------------------------------------------------

def _phibar_value(q_act, B, R, C):
    return (np.dot(q_act, R) * np.dot(q_act, C)
            + (B - 1.0) * np.dot(q_act, R * C))


def phi_bar(q_triple, delta, B, n_starts=128, seed=0, full_report=False):
    """Clustered upper bound on Psi1 for a support-size triple.

    Maximizes F = (sum q_i R_i)(sum q_j C_j) + (B-1) sum q_i R_i C_i over
    R, C >= 0 with sum q_i R_i^p <= 1 and sum q_i C_i^p <= 1 (p = Delta/
    (Delta-1)), and returns (d+1) ln Fmax. Scale-freeness makes the p-ball
    constraints active at any maximizer with positive value.
    """
    q_triple = np.asarray(q_triple, dtype=float)
    if q_triple.shape != (3,) or np.any(q_triple < -1e-12):
        raise DomainError("q_triple must be 3 nonnegative reals")
    if B >= 1:
        raise DomainError("the relaxation is stated for B < 1")
    act = np.where(q_triple > 0)[0]
    if act.size == 0:
        raise DomainError("empty support")
    q_act = q_triple[act]
    k = act.size
    d = delta - 1
    p = delta / d

    def objective(z):
        R, C = z[:k], z[k:]
        return -_phibar_value(q_act, B, R, C)

    def gradient(z):
        R, C = z[:k], z[k:]
        gR = q_act * np.dot(q_act, C) + (B - 1.0) * q_act * C
        gC = q_act * np.dot(q_act, R) + (B - 1.0) * q_act * R
        return -np.concatenate([gR, gC])

    cons = [
        {"type": "ineq",
         "fun": lambda z: 1.0 - np.dot(q_act, z[:k] ** p),
         "jac": lambda z: np.concatenate([-p * q_act * z[:k] ** (p - 1),
                                          np.zeros(k)])},
        {"type": "ineq",
         "fun": lambda z: 1.0 - np.dot(q_act, z[k:] ** p),
         "jac": lambda z: np.concatenate([np.zeros(k),
                                          -p * q_act * z[k:] ** (p - 1)])},
    ]
    bounds = [(0.0, None)] * (2 * k)

    rng = np.random.default_rng(seed)

    def sample_side():
        s = rng.dirichlet(np.ones(k))
        return (s / q_act) ** (1 / p)

    starts = [np.concatenate([np.full(k, (1.0 / q_act.sum()) ** (1 / p))] * 2)]
    # boundary-seeded starts: maxima of bad triples sit on the boundary
    for i in range(k):
        for side in (0, 1):
            z = np.concatenate([sample_side(), sample_side()])
            z[side * k + i] = 0.0
            starts.append(z)
    while len(starts) < n_starts:
        starts.append(np.concatenate([sample_side(), sample_side()]))

    best = None
    for z0 in starts:
        res = minimize(objective, z0, jac=gradient, bounds=bounds,
                       constraints=cons, method="SLSQP",
                       options={"maxiter": 400, "ftol": 1e-14})
        z = np.maximum(res.x, 0.0)
        val = _phibar_value(q_act, B, z[:k], z[k:])
        if best is None or val > best[0]:
            best = (val, z)
    fmax, z = best
    if fmax <= 0:
        raise DomainError("positivity region is empty for this triple")
    value = (d + 1) * float(np.log(fmax))
    if not full_report:
        return value
    R = np.zeros(3)
    C = np.zeros(3)
    R[act], C[act] = z[:k], z[k:]
    return {"value": value, "R": R, "C": C,
            "dq": _phibar_derivatives(q_triple, B, d, R, C)}


def _phibar_derivatives(q_triple, B, d, R, C):
    """Partial derivatives of the clustered exponent in q, for diagnostics."""
    sR = np.dot(q_triple, R)
    sC = np.dot(q_triple, C)
    sRC = np.dot(q_triple, R * C)
    denom = sR * sC + (B - 1.0) * sRC
    num = R * sC + C * sR + (d - 1.0) * (1.0 - B) * R * C
    return (num / denom).tolist()
