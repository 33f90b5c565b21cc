"""First and second moment exponents, Phi, and induced matrix norms.

The first-moment exponent of a phase (alpha, beta) is

    Psi1 = (Delta - 1) * f1(alpha, beta) + Delta * g1(x*)

with f1 = sum alpha ln alpha + sum beta ln beta, g1 = sum x ln B - x ln x,
and x* the entropy-optimal coupling with marginals (alpha, beta). Its
variational twin is Phi(r, c) = Delta * [ln(r^T B c) - ln|r|_p - ln|c|_p]
at p = Delta/(Delta-1); both are maximized at Delta * ln |B|_{p->Delta}.

Minus infinity (infeasible phase) is returned as the NEG_INF sentinel and is
never fed into arithmetic; callers must test for it first.
"""

from dataclasses import dataclass

import numpy as np
import networkx as nx

from .errors import ConvergenceError, DomainError, InfeasibleError
from .models import SpinModel
from .util import ordered_map, xlogx

NEG_INF = float("-inf")     # explicit sentinel; test with `is_neg_inf`


def is_neg_inf(x):
    return x == NEG_INF


def _as_matrix(model):
    return model.B if isinstance(model, SpinModel) else np.asarray(model, float)


# ----------------------------------------------------------------------
# optimal coupling (iterative proportional scaling)
# ----------------------------------------------------------------------

def marginals_feasible(model, alpha, beta, slack=1e-9):
    """Max-flow feasibility of (alpha, beta) on the support of B."""
    B = _as_matrix(model)
    q = B.shape[0]
    G = nx.DiGraph()
    for i in range(q):
        if alpha[i] > 0:
            G.add_edge("s", ("r", i), capacity=float(alpha[i]))
        if beta[i] > 0:
            G.add_edge(("c", i), "t", capacity=float(beta[i]))
    for i in range(q):
        for j in range(q):
            if B[i, j] > 0:
                G.add_edge(("r", i), ("c", j), capacity=2.0)
    if "s" not in G or "t" not in G:
        return False
    value, _ = nx.maximum_flow(G, "s", "t")
    return value >= float(np.sum(alpha)) - slack


@dataclass(frozen=True)
class EdgeMarginal:
    x: np.ndarray
    R: np.ndarray
    C: np.ndarray


def optimal_x(model, alpha, beta, tol=1e-12, max_iter=10**5):
    """Entropy-optimal coupling x_ij = B_ij R_i C_j with given marginals.

    Alternating scaling updates R_i <- alpha_i / (B C)_i and
    C_j <- beta_j / (B R)_j until row/column sums match to `tol`.
    Zero marginals force zero scalings; infeasible marginals are rejected
    up front by a max-flow check on the support graph.
    """
    B = _as_matrix(model)
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if np.any(alpha < 0) or np.any(beta < 0):
        raise DomainError("marginals must be nonnegative")
    if abs(alpha.sum() - 1) > 1e-9 or abs(beta.sum() - 1) > 1e-9:
        raise DomainError("marginals must sum to one")
    if not marginals_feasible(B, alpha, beta):
        raise InfeasibleError("support of B cannot carry these marginals")

    C = np.where(beta > 0, 1.0, 0.0)
    R = np.zeros_like(alpha)
    err = np.inf
    for _ in range(max_iter):
        sR = B @ C
        R = np.divide(alpha, sR, out=np.zeros_like(alpha), where=sR > 0)
        sC = B.T @ R
        C = np.divide(beta, sC, out=np.zeros_like(beta), where=sC > 0)
        x = B * np.outer(R, C)
        err = max(np.max(np.abs(x.sum(axis=1) - alpha)),
                  np.max(np.abs(x.sum(axis=0) - beta)))
        if err <= tol:
            return EdgeMarginal(x=x, R=R, C=C)
    raise ConvergenceError(
        f"proportional scaling stalled at residual {err:.3e}")


# ----------------------------------------------------------------------
# exponents
# ----------------------------------------------------------------------

def f1(alpha, beta):
    return float(np.sum(xlogx(alpha)) + np.sum(xlogx(beta)))


def g1(model, x):
    """sum x ln B - sum x ln x over the support (0 ln 0 = 0)."""
    B = _as_matrix(model)
    x = np.asarray(x, dtype=float)
    pos = x > 0
    if np.any(pos & (B <= 0)):
        raise DomainError("coupling places mass outside the support")
    return float(np.sum(x[pos] * np.log(B[pos])) - np.sum(xlogx(x)))


def psi1(model, delta, alpha, beta):
    """First-moment exponent; NEG_INF when (alpha, beta) is infeasible."""
    try:
        em = optimal_x(model, alpha, beta)
    except InfeasibleError:
        return NEG_INF
    return (delta - 1) * f1(alpha, beta) + delta * g1(model, em.x)


def psi1_hessian_attractive(model, delta, alpha, beta, step=1e-5,
                            margin=1e-6):
    """Finite-difference test that (alpha, beta) is a local max of Psi1.

    Central second differences along the sum-preserving chart
    (e_i - e_q per side) give the constrained Hessian; the verdict is its
    negative definiteness with an eigenvalue margin. Needs an interior
    point with some room to move.
    """
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    q = len(alpha)
    if min(alpha.min(), beta.min()) <= 2 * step:
        raise DomainError("point too close to the simplex boundary")
    dim = 2 * (q - 1)

    def at(coords):
        a = alpha.copy()
        b = beta.copy()
        for i in range(q - 1):
            a[i] += coords[i]
            a[q - 1] -= coords[i]
            b[i] += coords[q - 1 + i]
            b[q - 1] -= coords[q - 1 + i]
        val = psi1(model, delta, a, b)
        if is_neg_inf(val):
            raise DomainError("perturbed phase left the feasible region")
        return val

    base = at(np.zeros(dim))
    H = np.zeros((dim, dim))
    for i in range(dim):
        ei = np.zeros(dim)
        ei[i] = step
        H[i, i] = (at(ei) - 2 * base + at(-ei)) / step ** 2
    for i in range(dim):
        for j in range(i + 1, dim):
            ei = np.zeros(dim)
            ei[i] = step
            ej = np.zeros(dim)
            ej[j] = step
            H[i, j] = H[j, i] = (at(ei + ej) - at(ei - ej)
                                 - at(-ei + ej) + at(-ei - ej)) \
                / (4 * step ** 2)
    eig = np.sort(np.linalg.eigvalsh(0.5 * (H + H.T)))[::-1]
    return {
        "max_eigenvalue": float(eig[0]),
        "local_max": bool(eig[0] < -margin),
    }


def phi(model, delta, R, C):
    """Phi(r, c) = Delta [ln(r^T B c) - ln |r|_p - ln |c|_p]."""
    B = _as_matrix(model)
    R = np.asarray(R, dtype=float)
    C = np.asarray(C, dtype=float)
    p = delta / (delta - 1)
    quad = float(R @ B @ C)
    if quad <= 0:
        raise DomainError("r^T B c must be positive")
    return delta * (np.log(quad)
                    - np.log(np.sum(R ** p)) / p
                    - np.log(np.sum(C ** p)) / p)


# ----------------------------------------------------------------------
# induced norm |B|_{p -> Delta} by nonlinear power iteration
# ----------------------------------------------------------------------

def _norm_objective(B, delta, r, c):
    p = delta / (delta - 1)
    quad = float(r @ B @ c)
    if quad <= 0:
        return 0.0
    return quad / (np.sum(r ** p) ** (1 / p) * np.sum(c ** p) ** (1 / p))


def _power_iterate(B, delta, c0, iters=2000, tol=1e-15):
    """Alternate the tree-recursion map from a single start.

    Each sweep is r <- (B c)^(Delta-1), c <- (B^T r)^(Delta-1), with p-norm
    rescaling; the Rayleigh quotient r^T B c / (|r|_p |c|_p) is monotone in
    exact arithmetic and its limit is a critical value of Phi/Delta.
    """
    d = delta - 1
    p = delta / d
    c = np.maximum(np.asarray(c0, dtype=float), 0.0)
    c = c / np.sum(c ** p) ** (1 / p)
    r = np.ones_like(c)
    best = 0.0
    for _ in range(iters):
        r = np.power(B @ c, d)
        nr = np.sum(r ** p) ** (1 / p)
        if nr == 0:
            break
        r /= nr
        c_new = np.power(B.T @ r, d)
        nc = np.sum(c_new ** p) ** (1 / p)
        if nc == 0:
            break
        c_new /= nc
        val = _norm_objective(B, delta, r, c_new)
        moved = np.max(np.abs(c_new - c))
        c = c_new
        if val > best:
            best = val
        if moved <= tol:
            break
    return best, r, c


def induced_norm(matrix, delta, n_starts=64, seed=0, return_vector=False):
    """|B|_{p -> Delta} with p = Delta/(Delta-1), by multistart iteration.

    The uniform start is always included; the rest are seeded Dirichlet
    draws. Ties in the achieved value break toward the lexicographically
    smallest maximizer.
    """
    B = _as_matrix(matrix)
    if delta < 3:
        raise DomainError("induced norm defined for Delta >= 3")
    q = B.shape[1]
    rng = np.random.default_rng(seed)
    starts = [np.full(q, 1.0 / q)]
    starts += [rng.dirichlet(np.ones(q)) for _ in range(n_starts)]
    results = ordered_map(lambda c0: _power_iterate(B, delta, c0), starts)
    best_val, best_c = 0.0, None
    for val, _, c in results:
        if best_c is None or val > best_val + 1e-15:
            best_val, best_c = val, c
        elif val >= best_val - 1e-15 and tuple(c) < tuple(best_c):
            best_val, best_c = max(best_val, val), c
    if return_vector:
        return best_val, best_c
    return best_val


def max_psi1(model, delta):
    """max over phases of Psi1 = Delta * ln |B|_{p->Delta}."""
    return delta * float(np.log(induced_norm(model, delta)))


def verify_tensor_identity(model, delta, n_starts=64, seed=0):
    """Check |B (x) B|_{p->Delta} against |B|^2 on the Kronecker square."""
    B = _as_matrix(model)
    norm = induced_norm(B, delta, n_starts=n_starts, seed=seed)
    tensor = induced_norm(np.kron(B, B), delta, n_starts=n_starts, seed=seed)
    return {
        "norm": norm,
        "tensor_norm": tensor,
        "ratio_deviation": abs(tensor - norm ** 2) / norm ** 2,
    }


# ----------------------------------------------------------------------
# second moment at a dominant phase
# ----------------------------------------------------------------------

def dominant_overlap(alpha, beta):
    """Product overlap gamma = alpha (x) alpha, delta = beta (x) beta."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    return np.kron(alpha, alpha), np.kron(beta, beta)


def psi2_at_dominant(model, delta, alpha, beta):
    """Psi1 of the paired-spin model at the product overlap.

    Returns (value, deviation from 2*psi1). The paired-spin interaction is
    the Kronecker square of B, used directly as a matrix so reducible
    squares (which occur for hard-constraint models) are still accepted.
    """
    B = _as_matrix(model)
    gamma, delt = dominant_overlap(alpha, beta)
    value = psi1(np.kron(B, B), delta, gamma, delt)
    base = psi1(B, delta, alpha, beta)
    if is_neg_inf(value) or is_neg_inf(base):
        if is_neg_inf(value) and is_neg_inf(base):
            return NEG_INF, 0.0
        raise DomainError("overlap feasibility disagrees with the base phase")
    return value, abs(value - 2.0 * base)
