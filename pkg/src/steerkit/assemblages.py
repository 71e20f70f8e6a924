"""Bipartite states and the assemblages Alice's (lossy) measurements prepare.

States live on C^d (x) C^d with Alice first. Assemblage members are stored as
an array ``members[x, a]`` of Bob's unnormalized conditional states; a
no-click row, when present, is the last outcome index.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import matcore
from .measurements import MeasurementSet
from .steering import DeterministicStrategy, SteeringFunctional

CONSISTENCY_TOL = 1e-9


@dataclass(frozen=True)
class BipartiteState:
    """Either a pure ket of length d*d or a d*d density matrix."""

    dim: int
    ket: np.ndarray | None = None
    density: np.ndarray | None = None
    filter: np.ndarray | None = None  # local filter D with ket = (D x 1)|phi+>

    def __post_init__(self):
        if (self.ket is None) == (self.density is None):
            raise ValueError("give exactly one of ket or density")
        size = self.dim * self.dim
        if self.ket is not None:
            k = matcore.ket(self.ket)
            if k.size != size or not matcore.is_normalized(k):
                raise ValueError("pure state must be a unit ket on C^d (x) C^d")
        else:
            rho = matcore.as_matrix(self.density)
            if rho.shape != (size, size):
                raise ValueError(f"density matrix must be {size}x{size}")
            if abs(np.trace(rho) - 1) > 1e-10 or not matcore.is_psd(rho):
                raise ValueError("density matrix must be PSD with unit trace")

    def rho(self) -> np.ndarray:
        if self.density is not None:
            return np.asarray(self.density, dtype=complex)
        return matcore.projector(self.ket)

    def reduced_bob(self) -> np.ndarray:
        return matcore.partial_trace_A(self.rho(), self.dim, self.dim)


@dataclass(frozen=True)
class Assemblage:
    """``members`` has shape (n, d, d, d) without a no-click row or
    (n, d+1, d, d) with one."""

    members: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.members, dtype=complex)
        if m.ndim != 4 or m.shape[2] != m.shape[3] or m.shape[1] not in (m.shape[2], m.shape[2] + 1):
            raise ValueError(f"bad assemblage shape {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "members", m)

    @property
    def n(self) -> int:
        return self.members.shape[0]

    @property
    def dim(self) -> int:
        return self.members.shape[2]

    @property
    def has_no_click(self) -> bool:
        return self.members.shape[1] == self.dim + 1

    @property
    def reduced_state(self) -> np.ndarray:
        return self.members[0].sum(axis=0)

    def probabilities(self) -> np.ndarray:
        """P(a|x) = tr(sigma_{a|x}), shape (n, outcomes)."""
        return np.einsum("xaii->xa", self.members).real

    def consistency_error(self) -> float:
        sums = self.members.sum(axis=1)
        return max(matcore.op_norm_hermitian(s - sums[0]) for s in sums)

    def validate(self, tol: float = CONSISTENCY_TOL) -> "Assemblage":
        if self.consistency_error() > tol:
            raise ValueError("assemblage is signalling: sum_a sigma_{a|x} depends on x")
        if abs(np.trace(self.reduced_state).real - 1) > tol:
            raise ValueError("reduced state does not have unit trace")
        for x, a in np.ndindex(self.members.shape[:2]):
            if not matcore.is_psd(self.members[x, a], tol):
                raise ValueError(f"member ({x}, {a}) is not PSD")
        return self


def max_entangled(d: int) -> BipartiteState:
    if d < 2:
        raise ValueError("dimension must be at least 2")
    v = np.zeros(d * d, dtype=complex)
    v[:: d + 1] = 1 / np.sqrt(d)
    return BipartiteState(dim=d, ket=v, filter=np.eye(d, dtype=complex))


def isotropic(d: int, w: float) -> BipartiteState:
    if not 0.0 <= w <= 1.0:
        raise ValueError(f"w must lie in [0, 1], got {w}")
    phi = max_entangled(d).rho()
    rho = w * phi + (1 - w) * np.eye(d * d) / d**2
    return BipartiteState(dim=d, density=rho)


def schmidt_state(lambdas) -> BipartiteState:
    """``sum_i sqrt(l_i)|ii>`` together with the filter ``D = diag(sqrt(d l_i))``."""
    lam = np.asarray(lambdas, dtype=float)
    if lam.ndim != 1 or lam.size < 2:
        raise ValueError("need at least two Schmidt coefficients")
    if np.any(lam <= 0):
        raise ValueError("Schmidt coefficients must all be positive (full Schmidt rank)")
    if abs(lam.sum() - 1) > 1e-12:
        raise ValueError(f"Schmidt coefficients sum to {lam.sum()}, not 1")
    d = lam.size
    v = np.zeros(d * d, dtype=complex)
    v[:: d + 1] = np.sqrt(lam)
    return BipartiteState(dim=d, ket=v, filter=np.diag(np.sqrt(d * lam)).astype(complex))


def assemble(state: BipartiteState, mset: MeasurementSet) -> Assemblage:
    """sigma_{a|x} = tr_A((Pi_{a|x} (x) 1) rho); no no-click row."""
    d = state.dim
    if mset.dim != d:
        raise ValueError(f"state dimension {d} does not match measurements {mset.dim}")
    # tr_A((P x 1) rho)_{jk} = sum_{i,i'} P_{i'i} rho_{(i j),(i' k)}
    rho = state.rho().reshape(d, d, d, d)
    members = np.einsum("xaqi,ijqk->xajk", mset.projectors, rho)
    return Assemblage(members).validate()


def apply_loss(assemblage: Assemblage, eta: float) -> Assemblage:
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    if assemblage.has_no_click:
        raise ValueError("assemblage already carries a no-click row")
    n, d = assemblage.n, assemblage.dim
    sigma_r = assemblage.reduced_state
    no_click = np.broadcast_to((1 - eta) * sigma_r, (n, 1, d, d))
    return Assemblage(np.concatenate([eta * assemblage.members, no_click], axis=1))


def noisy_lossy_assemblage(d: int, mset: MeasurementSet, eta: float, w: float) -> Assemblage:
    """Closed form for lossy measurements on the isotropic state.

    Clicks are ``eta*w*Pi^T/d + eta*(1-w)/d^2 * 1``; the no-click member is
    ``(1-eta) 1/d``.
    """
    if not 0.0 <= eta <= 1.0 or not 0.0 <= w <= 1.0:
        raise ValueError("eta and w must lie in [0, 1]")
    if mset.dim != d:
        raise ValueError(f"measurements act on dimension {mset.dim}, not {d}")
    eye = np.eye(d)
    clicks = eta * w * np.swapaxes(mset.projectors, -1, -2) / d + (eta / d) * (1 - w) * eye / d
    no_click = np.broadcast_to((1 - eta) * eye / d, (mset.n, 1, d, d))
    return Assemblage(np.concatenate([clicks, no_click], axis=1))


def lhs_assemblage(weights, strategies, hidden_states, d: int | None = None) -> Assemblage:
    """sigma_{a|x} = sum_s p_s [s_x = a] rho_s, always with a no-click row."""
    p = np.asarray(weights, dtype=float)
    if p.ndim != 1 or np.any(p < 0) or abs(p.sum() - 1) > 1e-12:
        raise ValueError("weights must be a probability distribution")
    if not (len(p) == len(strategies) == len(hidden_states)):
        raise ValueError("weights, strategies and hidden states must match in length")
    rhos = [matcore.as_matrix(r) for r in hidden_states]
    d = d or rhos[0].shape[0]
    n = len(strategies[0].outcomes)
    for r in rhos:
        if r.shape != (d, d) or abs(np.trace(r) - 1) > 1e-10 or not matcore.is_psd(r):
            raise ValueError("hidden states must be valid density matrices")
    members = np.zeros((n, d + 1, d, d), dtype=complex)
    for pi, s, r in zip(p, strategies, rhos):
        if len(s.outcomes) != n:
            raise ValueError("strategies differ in length")
        for x, a in enumerate(s.outcomes):
            members[x, d if a is None else a] += pi * r
    return Assemblage(members)


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = rank or d
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_lhs_assemblage(n: int, d: int, rng: np.random.Generator, terms: int = 4) -> Assemblage:
    strategies = [
        DeterministicStrategy(tuple(None if a == d else int(a) for a in rng.integers(0, d + 1, size=n)))
        for _ in range(terms)
    ]
    weights = rng.dirichlet(np.ones(terms))
    hidden = [random_density(d, rng, rank=int(rng.integers(1, d + 1))) for _ in range(terms)]
    return lhs_assemblage(weights, strategies, hidden, d)


def filtered_functional(mset: MeasurementSet, lambdas) -> SteeringFunctional:
    """Functional matched to a Schmidt state with coefficients ``lambdas``.

    Click directions are the normalized ``(D Pi D)^T``; alpha is their
    maximal cross-setting overlap.
    """
    filt = schmidt_state(lambdas).filter
    if mset.dim != filt.shape[0]:
        raise ValueError("Schmidt coefficients and measurements differ in dimension")
    filtered = np.swapaxes(filt @ mset.projectors @ filt, -1, -2)
    weights = np.einsum("xaii->xa", filtered).real
    primed = filtered / weights[..., None, None]
    f = SteeringFunctional(click=primed, alpha=0.0)
    return SteeringFunctional(click=primed, alpha=f.cos_theta)


# --- files -----------------------------------------------------------------

def dumps_assemblage(a: Assemblage) -> str:
    import json

    def mat(m):
        return [[[float(z.real), float(z.imag)] for z in row] for row in m]

    doc = {
        "dim": a.dim,
        "n": a.n,
        "outcomes": a.members.shape[1],
        "members": [[mat(m) for m in row] for row in a.members],
    }
    return json.dumps(doc, indent=1) + "\n"


def save_assemblage(a: Assemblage, path) -> None:
    Path(path).write_text(dumps_assemblage(a))


def load_assemblage(path) -> Assemblage:
    import json

    doc = json.loads(Path(path).read_text())
    arr = np.asarray(doc["members"], dtype=float)
    return Assemblage(arr[..., 0] + 1j * arr[..., 1])
