"""Tree recursions for semi-translation-invariant measures.

The coupled fixpoint equations iterated here are

    Rhat_i  proportional to  (sum_j B_ij C_j)^(Delta-1)
    Chat_j  proportional to  (sum_i B_ij R_i)^(Delta-1)

with the scale fixed by sum_ij B_ij R_i C_j = 1. Under that normalization
alpha_i = R_i (B C)_i and beta_j = C_j (B R)_j are simplex points and the
pair (alpha, beta) is the phase of the fixpoint.
"""

from dataclasses import dataclass

import numpy as np

from .errors import CollapseError, StructureError
from .models import SpinModel
from .util import rel_change

GOKSO_TOL = 1e-12          # normalization residual allowed on a Fixpoint
PAIR_EIGEN_TOL = 1e-6      # how far the removed pair may sit from +-1


@dataclass(frozen=True)
class Fixpoint:
    R: np.ndarray
    C: np.ndarray
    residual: float
    delta: int
    certified: bool = False

    def to_json(self):
        return {
            "R": self.R.tolist(),
            "C": self.C.tolist(),
            "residual": self.residual,
            "certified": self.certified,
        }


@dataclass(frozen=True)
class JacobianReport:
    spectrum: np.ndarray        # 2q values, sorted descending
    restricted_radius: float
    attractive: bool


def _normalize_pair(B, R, C):
    """Scale (R, C) onto the sum_ij B_ij R_i C_j = 1 manifold.

    Each vector is first scaled to unit sum (so the split of scale between
    R and C is canonical), then both take a common sqrt factor. Raises
    CollapseError when all the interaction mass sits on hard zeros.
    """
    R = np.asarray(R, dtype=float)
    C = np.asarray(C, dtype=float)
    sR, sC = R.sum(), C.sum()
    if sR <= 0 or sC <= 0:
        raise CollapseError("message vector collapsed to zero")
    R = R / sR
    C = C / sC
    g = float(R @ B @ C)
    if g <= 0:
        raise CollapseError("sum_ij B_ij R_i C_j = 0 (all mass on hard constraints)")
    s = 1.0 / np.sqrt(g)
    return R * s, C * s


def bp_step(model, delta, R, C):
    """One simultaneous update of the tree recursions, renormalized."""
    B = model.B
    R = np.asarray(R, dtype=float)
    C = np.asarray(C, dtype=float)
    if np.any(R < 0) or np.any(C < 0):
        raise ValueError("messages must be nonnegative")
    d = delta - 1
    Rn = np.power(B @ C, d)
    Cn = np.power(B @ R, d)
    return _normalize_pair(B, Rn, Cn)


def find_fixpoint(model, delta, init=None, tol=1e-12, max_iter=10**5,
                  damping=0.5):
    """Iterate bp_step to a fixpoint.

    The residual is measured on the undamped map (max relative change of a
    full bp_step), so a certified Fixpoint really satisfies the recursion
    to `tol`. Damping blends old and new iterates geometrically where both
    are positive and linearly otherwise, which tames the period-2
    oscillation typical of antiferromagnetic recursions.
    """
    B = model.B
    q = model.q
    if init is None:
        R = np.full(q, 1.0 / q)
        C = np.full(q, 1.0 / q)
    else:
        R, C = init
    R, C = _normalize_pair(B, R, C)

    residual = np.inf
    for _ in range(max_iter):
        Rn, Cn = bp_step(model, delta, R, C)
        residual = max(rel_change(R, Rn), rel_change(C, Cn))
        if residual <= tol:
            return Fixpoint(R=Rn, C=Cn, residual=residual, delta=delta,
                            certified=True)
        both = (R > 0) & (Rn > 0)
        Rd = np.where(both, np.exp(damping * np.log(np.where(both, R, 1.0))
                                   + (1 - damping) * np.log(np.where(both, Rn, 1.0))),
                      damping * R + (1 - damping) * Rn)
        both = (C > 0) & (Cn > 0)
        Cd = np.where(both, np.exp(damping * np.log(np.where(both, C, 1.0))
                                   + (1 - damping) * np.log(np.where(both, Cn, 1.0))),
                      damping * C + (1 - damping) * Cn)
        R, C = _normalize_pair(B, Rd, Cd)
    return Fixpoint(R=R, C=C, residual=residual, delta=delta, certified=False)


def random_starts(q, n_starts, seed):
    """Seeded Dirichlet(1) starting pairs for multistart searches."""
    rng = np.random.default_rng(seed)
    return [(rng.dirichlet(np.ones(q)), rng.dirichlet(np.ones(q)))
            for _ in range(n_starts)]


def find_fixpoints_multistart(model, delta, n_starts=50, seed=0, tol=1e-12,
                              max_iter=10**5, damping=0.5):
    """Multistart search; certified fixpoints deduplicated up to symmetry."""
    found = []
    for init in random_starts(model.q, n_starts, seed):
        try:
            fp = find_fixpoint(model, delta, init=init, tol=tol,
                               max_iter=max_iter, damping=damping)
        except CollapseError:
            continue
        if fp.certified:
            found.append(fp)
    return dedup_fixpoints(found)


def _canonical_rc(fp):
    R = fp.R / fp.R.sum()
    C = fp.C / fp.C.sum()
    return R, C


def dedup_fixpoints(fixpoints, tol=1e-8):
    """Deduplicate up to canonical scaling and the (R,C) <-> (C,R) swap."""
    kept = []
    for fp in fixpoints:
        R, C = _canonical_rc(fp)
        dup = False
        for other in kept:
            Ro, Co = _canonical_rc(other)
            same = max(np.max(np.abs(R - Ro)), np.max(np.abs(C - Co)))
            swap = max(np.max(np.abs(R - Co)), np.max(np.abs(C - Ro)))
            if min(same, swap) <= tol:
                dup = True
                break
        if not dup:
            kept.append(fp)
    return kept


def fixpoint_to_phase(fp):
    """Phase (alpha, beta) of a certified fixpoint.

    alpha_i = R_i^(Delta/(Delta-1)) / sum_k R_k^(Delta/(Delta-1)), and the
    same power normalization for beta from C.
    """
    e = fp.delta / (fp.delta - 1)
    a = np.power(fp.R, e)
    b = np.power(fp.C, e)
    return a / a.sum(), b / b.sum()


def phase_marginals(model, fp):
    """(alpha, beta) as interaction marginals: alpha_i = R_i (B C)_i."""
    alpha = fp.R * (model.B @ fp.C)
    beta = fp.C * (model.B @ fp.R)
    return alpha, beta


def edge_marginal(model, fp):
    """x_ij = B_ij R_i C_j; sums to 1 under the gokso normalization."""
    return model.B * np.outer(fp.R, fp.C)


def stability_matrix(model, fp):
    """The symmetric 2q x 2q bipartite-block linearization at a fixpoint.

    Off-diagonal blocks A and A^T with A_ij = B_ij R_i C_j / sqrt(alpha_i
    beta_j). Needs all alpha, beta positive.
    """
    alpha, beta = phase_marginals(model, fp)
    if np.any(alpha <= 0) or np.any(beta <= 0):
        raise StructureError("stability matrix needs strictly positive marginals")
    A = edge_marginal(model, fp) / np.sqrt(np.outer(alpha, beta))
    q = model.q
    L = np.zeros((2 * q, 2 * q))
    L[:q, q:] = A
    L[q:, :q] = A.T
    return L


def jacobian_report(model, fp, delta=None):
    """Spectrum of the stability map and the attractiveness verdict.

    The full spectrum always contains +1 and -1 (scaling directions); those
    two are removed and the fixpoint is attractive iff (Delta-1) times the
    radius of the rest is below 1. If the removed pair is further than
    PAIR_EIGEN_TOL from +-1 the input was not a fixpoint.
    """
    if delta is None:
        delta = fp.delta
    L = stability_matrix(model, fp)
    spec = np.linalg.eigvalsh(L)[::-1]
    i_pos = int(np.argmin(np.abs(spec - 1.0)))
    i_neg = int(np.argmin(np.abs(spec + 1.0)))
    if i_pos == i_neg:
        raise StructureError("could not separate the +1/-1 scaling pair")
    off = max(abs(spec[i_pos] - 1.0), abs(spec[i_neg] + 1.0))
    if off > PAIR_EIGEN_TOL:
        raise StructureError(
            f"scaling eigenvalues off +-1 by {off:.2e}: not a fixpoint")
    rest = np.delete(spec, [i_pos, i_neg])
    radius = float(np.max(np.abs(rest))) if rest.size else 0.0
    return JacobianReport(spectrum=spec,
                          restricted_radius=radius,
                          attractive=(delta - 1) * radius < 1.0)
