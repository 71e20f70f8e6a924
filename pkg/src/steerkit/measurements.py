"""Alice's measurement sets: orthonormal bases, MUBs, lossy POVMs and the
parent POVM that makes them jointly measurable at efficiency 1/n.

Outcome ordering is fixed everywhere: click outcomes ``0..d-1`` in
basis-vector order, then the no-click outcome last.

Note on counting the parent POVM: strings with exactly one non-no-click
slot number ``n*d`` out of ``(d+1)**n``. That is what the construction
below produces; other counts quoted for it elsewhere do not follow from
its definition.
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import matcore

ORTHO_TOL = 1e-9
LOAD_TOL = 1e-8


class TrivialInequalityWarning(UserWarning):
    """Two settings share an outcome direction (cos(theta) = 1)."""


def is_prime(d: int) -> bool:
    if d < 2:
        return False
    return all(d % p for p in range(2, int(d**0.5) + 1))


@dataclass(frozen=True)
class Basis:
    """Orthonormal basis; ``vectors[a]`` is the ket for outcome ``a``."""

    vectors: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vectors, dtype=complex)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"basis must be d kets of length d, got {v.shape}")
        v.setflags(write=False)
        object.__setattr__(self, "vectors", v)

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    @property
    def projectors(self) -> np.ndarray:
        return np.einsum("ai,aj->aij", self.vectors, self.vectors.conj())

    def orthonormality_error(self) -> float:
        gram = self.vectors.conj() @ self.vectors.T
        return float(np.max(np.abs(gram - np.eye(self.dim))))

    def is_orthonormal(self, tol: float = ORTHO_TOL) -> bool:
        return self.orthonormality_error() <= tol


@dataclass(frozen=True)
class MeasurementSet:
    bases: tuple[Basis, ...]

    def __post_init__(self):
        bases = tuple(b if isinstance(b, Basis) else Basis(b) for b in self.bases)
        if not bases:
            raise ValueError("a measurement set needs at least one basis")
        dims = {b.dim for b in bases}
        if len(dims) != 1:
            raise ValueError(f"bases have mixed dimensions {sorted(dims)}")
        object.__setattr__(self, "bases", bases)

    @property
    def dim(self) -> int:
        return self.bases[0].dim

    @property
    def n(self) -> int:
        return len(self.bases)

    @property
    def projectors(self) -> np.ndarray:
        """Array of shape (n, d, d, d): ``projectors[x, a]`` is Pi_{a|x}."""
        return np.stack([b.projectors for b in self.bases])

    def subset(self, indices) -> "MeasurementSet":
        return MeasurementSet(tuple(self.bases[i] for i in indices))


@dataclass(frozen=True)
class LossyPovm:
    eta: float
    base: MeasurementSet
    elements: np.ndarray  # (n, d+1, d, d), no-click last

    def completeness_error(self) -> float:
        d = self.base.dim
        return float(np.max(np.abs(self.elements.sum(axis=1) - np.eye(d))))

    def is_valid(self, tol: float = 1e-10) -> bool:
        psd = all(matcore.is_psd(m) for m in self.elements.reshape(-1, *self.elements.shape[2:]))
        return psd and self.completeness_error() <= tol


@dataclass(frozen=True)
class ParentPovm:
    """Parent POVM over outcome strings of length n.

    Strings are tuples over ``0..d-1`` and ``None`` (no-click). Only the
    nonzero elements are stored; every other string maps to the zero matrix.
    """

    dim: int
    n: int
    elements: dict

    @property
    def num_outcomes(self) -> int:
        return (self.dim + 1) ** self.n

    def element(self, s) -> np.ndarray:
        s = tuple(s)
        if len(s) != self.n:
            raise ValueError(f"outcome string must have length {self.n}")
        return self.elements.get(s, np.zeros((self.dim, self.dim), dtype=complex))

    def total(self) -> np.ndarray:
        return sum(self.elements.values(), np.zeros((self.dim, self.dim), complex))

    def completeness_error(self) -> float:
        return float(np.max(np.abs(self.total() - np.eye(self.dim))))

    def is_valid(self, tol: float = 1e-10) -> bool:
        psd = all(matcore.is_psd(m) for m in self.elements.values())
        return psd and self.completeness_error() <= tol


def computational_basis(d: int) -> Basis:
    return Basis(np.eye(d, dtype=complex))


def mub_prime(d: int) -> MeasurementSet:
    """The d+1 mutually unbiased bases in prime dimension d.

    d = 2 gives the Pauli Z, X, Y eigenbases in that order. For odd primes
    the non-computational bases have amplitudes ``w**(b*k*k + a*k)/sqrt(d)``
    with ``w = exp(2 pi i/d)``.
    """
    if not is_prime(d):
        raise ValueError(f"mub_prime needs a prime dimension, got {d}")
    if d == 2:
        s = 1 / np.sqrt(2)
        z = np.eye(2, dtype=complex)
        x = np.array([[s, s], [s, -s]], dtype=complex)
        y = np.array([[s, 1j * s], [s, -1j * s]], dtype=complex)
        return MeasurementSet((Basis(z), Basis(x), Basis(y)))
    k = np.arange(d)
    a = k[:, None]
    bases = [computational_basis(d)]
    for b in range(d):
        phase = (b * k * k + a * k) % d
        bases.append(Basis(np.exp(2j * np.pi * phase / d) / np.sqrt(d)))
    return MeasurementSet(tuple(bases))


def _cross_overlaps(mset: MeasurementSet) -> np.ndarray:
    """|<e_a|x|e_a'|x'>| for every x < x' pair, flattened."""
    out = [
        np.abs(bx.vectors.conj() @ by.vectors.T).ravel()
        for bx, by in itertools.combinations(mset.bases, 2)
    ]
    return np.concatenate(out) if out else np.empty(0)


def verify_mub(mset: MeasurementSet, tol: float = 1e-9) -> bool:
    if not all(b.is_orthonormal(max(tol, ORTHO_TOL)) for b in mset.bases):
        return False
    overlaps = _cross_overlaps(mset)
    return bool(np.all(np.abs(overlaps**2 - 1.0 / mset.dim) <= tol))


def max_overlap(mset: MeasurementSet) -> float:
    """cos(theta): the largest |<e_a|x|e_a'|x'>| between different settings."""
    if mset.n < 2:
        raise ValueError("max_overlap needs at least two measurements")
    return float(min(1.0, _cross_overlaps(mset).max()))


def drop_degenerate(mset: MeasurementSet, tol: float = 1e-9) -> MeasurementSet:
    """Greedily discard settings sharing a direction with an earlier kept one."""
    kept: list[Basis] = []
    for b in mset.bases:
        shares = any(
            np.abs(k.vectors.conj() @ b.vectors.T).max() >= 1 - tol for k in kept
        )
        if not shares:
            kept.append(b)
    return MeasurementSet(tuple(kept))


def warn_if_trivial(cos_theta: float, tol: float = 1e-9) -> bool:
    if cos_theta >= 1 - tol:
        warnings.warn(
            "trivial inequality (cosθ = 1): two settings share an outcome direction",
            TrivialInequalityWarning,
            stacklevel=3,
        )
        return True
    return False


def lossy_povm(mset: MeasurementSet, eta: float) -> LossyPovm:
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    d = mset.dim
    clicks = eta * mset.projectors
    no_click = np.broadcast_to((1 - eta) * np.eye(d), (mset.n, 1, d, d))
    elements = np.concatenate([clicks, no_click], axis=1)
    return LossyPovm(eta=eta, base=mset, elements=elements)


def parent_povm(mset: MeasurementSet) -> ParentPovm:
    """Parent POVM for the lossy set at eta = 1/n.

    The nonzero elements are the strings with a single click: slot x reads
    outcome a, every other slot reads no-click, and the element is
    ``Pi_{a|x} / n``.
    """
    n, d = mset.n, mset.dim
    proj = mset.projectors
    elements = {}
    for x in range(n):
        for a in range(d):
            s = [None] * n
            s[x] = a
            elements[tuple(s)] = proj[x, a] / n
    return ParentPovm(dim=d, n=n, elements=elements)


def marginalize(parent: ParentPovm, x: int) -> list[np.ndarray]:
    """Coarse-grain the parent over every slot except ``x``.

    Returned order: clicks ``0..d-1`` then no-click.
    """
    if not 0 <= x < parent.n:
        raise IndexError(f"setting {x} out of range for n = {parent.n}")
    d = parent.dim
    out = [np.zeros((d, d), dtype=complex) for _ in range(d + 1)]
    for s, m in parent.elements.items():
        slot = d if s[x] is None else s[x]
        out[slot] = out[slot] + m
    return out


def random_basis(d: int, seed: int) -> Basis:
    """Haar-like random basis from a seeded complex Gaussian matrix."""
    if d < 1:
        raise ValueError("dimension must be positive")
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(z)
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    return Basis(q.T)


def random_set(d: int, n: int, seed: int) -> MeasurementSet:
    rng = np.random.default_rng(seed)
    seeds = rng.integers(0, 2**63 - 1, size=n)
    return MeasurementSet(tuple(random_basis(d, int(s)) for s in seeds))


# --- basis-set files -------------------------------------------------------

def _fmt_complex(z: complex) -> str:
    return f"[{format(z.real, '.17e')}, {format(z.imag, '.17e')}]"


def dumps_bases(mset: MeasurementSet) -> str:
    lines = ["{", f'  "dim": {mset.dim},', f'  "n": {mset.n},', '  "bases": [']
    for i, b in enumerate(mset.bases):
        lines.append("    [")
        for j, v in enumerate(b.vectors):
            vec = ", ".join(_fmt_complex(z) for z in v)
            lines.append(f"      [{vec}]" + ("," if j < b.dim - 1 else ""))
        lines.append("    ]" + ("," if i < mset.n - 1 else ""))
    lines += ["  ]", "}"]
    return "\n".join(lines) + "\n"


def save_bases(mset: MeasurementSet, path) -> None:
    Path(path).write_text(dumps_bases(mset))


def parse_bases(doc: dict) -> MeasurementSet:
    try:
        d, n, raw = int(doc["dim"]), int(doc["n"]), doc["bases"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"basis file is missing dim/n/bases: {exc}") from exc
    if len(raw) != n:
        raise ValueError(f"declared n = {n} but found {len(raw)} bases")
    bases = []
    for x, vecs in enumerate(raw):
        arr = np.asarray(vecs, dtype=float)
        if arr.shape != (d, d, 2):
            raise ValueError(
                f"basis {x} has shape {arr.shape}, expected ({d}, {d}, 2)"
            )
        vectors = arr[..., 0] + 1j * arr[..., 1]
        for a, v in enumerate(vectors):
            norm = np.vdot(v, v).real
            if abs(norm - 1) > LOAD_TOL:
                raise ValueError(
                    f"basis {x}, vector {a} is not normalized (<v|v> = {norm:.12g})"
                )
        gram = vectors.conj() @ vectors.T
        for a, b in itertools.combinations(range(d), 2):
            if abs(gram[a, b]) > LOAD_TOL:
                raise ValueError(
                    f"basis {x}: vectors {a} and {b} are not orthogonal "
                    f"(|<v_a|v_b>| = {abs(gram[a, b]):.3g})"
                )
        bases.append(Basis(vectors))
    return MeasurementSet(tuple(bases))


def load_bases(path) -> MeasurementSet:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"cannot parse basis file {path}: {exc}") from exc
    return parse_bases(doc)
