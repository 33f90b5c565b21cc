"""Interaction matrices for multi-spin systems.

A model is a symmetric nonnegative q x q matrix B with connected support.
The key classification: B is antiferromagnetic when its Perron eigenvalue is
positive and simple and every other eigenvalue is strictly negative, which
in particular makes B regular. Such a B splits as B = u u^T - P^T P with
u > 0, the decomposition used by the gadget certificates.
"""

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import ModelError

# eigenvalues closer to zero than this fail the regularity requirement
EIGEN_ZERO_TOL = 1e-12


@dataclass(frozen=True)
class SpinModel:
    q: int
    B: np.ndarray
    kind: str = "generic"
    param: float | None = None
    support_mask: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        B = np.array(self.B, dtype=float)
        if B.shape != (self.q, self.q):
            raise ModelError(f"B must be {self.q}x{self.q}, got {B.shape}")
        if not np.array_equal(B, B.T):
            raise ModelError("B must be exactly symmetric")
        if np.any(B < 0):
            raise ModelError("B must be entrywise nonnegative")
        mask = B > 0
        if not mask.any(axis=1).all():
            raise ModelError("every spin needs at least one positive entry")
        if not _support_connected(mask):
            raise ModelError("support of B must be connected (irreducible)")
        B.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "support_mask", mask)

    def to_json(self):
        d = {"q": self.q, "B": self.B.tolist(), "kind": self.kind}
        if self.param is not None:
            d["param"] = self.param
        return d


def _support_connected(mask):
    """BFS over the off-diagonal support; self-loops do not help connectivity."""
    q = mask.shape[0]
    seen = {0}
    frontier = [0]
    while frontier:
        i = frontier.pop()
        for j in range(q):
            if j != i and mask[i, j] and j not in seen:
                seen.add(j)
                frontier.append(j)
    return len(seen) == q if q > 1 else True


def potts_model(q, b):
    """Potts interaction: off-diagonal 1, diagonal b in [0, 1)."""
    if q < 2:
        raise ModelError("Potts needs q >= 2")
    if not (0 <= b):
        raise ModelError("Potts parameter must be nonnegative")
    B = np.full((q, q), 1.0)
    np.fill_diagonal(B, float(b))
    kind = "colorings" if b == 0 else "potts"
    return SpinModel(q=q, B=B, kind=kind, param=float(b))


def colorings_model(q):
    """Proper q-colorings: the Potts model at b = 0."""
    return potts_model(q, 0.0)


def model_from_json(data):
    """Build a SpinModel from a dict or a JSON string.

    Accepted shapes: {"q", "B", "kind", "param"?}; for kind potts/colorings
    the matrix may be omitted and is rebuilt from q and param.
    """
    if isinstance(data, str):
        data = json.loads(data)
    kind = data.get("kind", "generic")
    if "B" not in data:
        if kind == "colorings":
            return colorings_model(int(data["q"]))
        if kind == "potts":
            return potts_model(int(data["q"]), float(data.get("param", 0.0)))
        raise ModelError("generic models must carry an explicit B matrix")
    B = np.array(data["B"], dtype=float)
    return SpinModel(q=int(data["q"]), B=B, kind=kind, param=data.get("param"))


# ----------------------------------------------------------------------
# classification
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Classification:
    label: str                # "antiferromagnetic" | "ferro_or_mixed"
    eigenvalues: np.ndarray   # sorted descending

    @property
    def antiferromagnetic(self):
        return self.label == "antiferromagnetic"


def classify_signature(model):
    """Eigenvalue signature classification.

    Antiferromagnetic means: top eigenvalue positive and simple, all the
    rest strictly negative. Any eigenvalue within EIGEN_ZERO_TOL of zero is
    rejected as degenerate (B has to be regular). Accepts a SpinModel or a
    bare symmetric matrix (classification itself needs no irreducibility).
    """
    B = model.B if isinstance(model, SpinModel) else np.asarray(model, float)
    eigs = np.linalg.eigvalsh(B)[::-1]
    if np.any(np.abs(eigs) < EIGEN_ZERO_TOL):
        raise ModelError("near-zero eigenvalue: matrix is not regular "
                         f"within {EIGEN_ZERO_TOL:g}")
    q = B.shape[0]
    anti = (
        q >= 2
        and eigs[0] > 0
        and eigs[0] > eigs[1] + EIGEN_ZERO_TOL
        and np.all(eigs[1:] < 0)
    )
    label = "antiferromagnetic" if anti else "ferro_or_mixed"
    return Classification(label=label, eigenvalues=eigs)


def is_ergodic(model):
    """True iff the support graph carries an odd closed walk.

    For a symmetric support the only possible period is 2, so this reduces
    to a 2-coloring test with self-loops counting as odd cycles.
    """
    mask = model.support_mask
    if bool(np.any(np.diag(mask))):
        return True
    # BFS 2-coloring; an edge inside a color class closes an odd walk
    color = {0: 0}
    queue = [0]
    while queue:
        i = queue.pop()
        for j in range(model.q):
            if not mask[i, j]:
                continue
            if j not in color:
                color[j] = 1 - color[i]
                queue.append(j)
            elif color[j] == color[i]:
                return True
    return False


@dataclass(frozen=True)
class PerronDecomposition:
    u: np.ndarray
    P: np.ndarray


def perron_decompose(model):
    """Split an antiferromagnetic B as u u^T - P^T P.

    u = sqrt(lambda_1) * v_1 with v_1 the positive unit Perron vector; the
    rows of P are sqrt(-lambda_i) * v_i^T over the remaining (negative)
    eigenpairs, padded with a zero row so P stays q x q.
    """
    B = model.B if isinstance(model, SpinModel) else np.asarray(model, float)
    cls = classify_signature(B)
    if not cls.antiferromagnetic:
        raise ModelError("perron_decompose requires an antiferromagnetic model")
    lam, vec = np.linalg.eigh(B)         # ascending
    v1 = vec[:, -1]
    if v1.sum() < 0:
        v1 = -v1
    if np.any(v1 <= 0):
        raise ModelError("Perron vector not strictly positive")
    u = np.sqrt(lam[-1]) * v1
    neg = np.sqrt(np.maximum(-lam, 0.0))
    P = neg[:, None] * vec.T             # last row is exactly zero
    return PerronDecomposition(u=u, P=P)


def reconstruct(decomp):
    """Inverse of perron_decompose: u u^T - P^T P."""
    return np.outer(decomp.u, decomp.u) - decomp.P.T @ decomp.P


def rational_entries(model, max_den=10**6):
    """B as exact Fractions when every entry admits a small denominator.

    Returns a q x q list of Fractions, or None when some entry does not
    round-trip exactly through a denominator <= max_den.
    """
    out = []
    for row in model.B:
        frow = []
        for x in row:
            fr = Fraction(float(x)).limit_denominator(max_den)
            if float(fr) != float(x):
                return None
            frow.append(fr)
        out.append(frow)
    return out
