"""Dense complex operator algebra over composite spin/boson Hilbert spaces.

Conventions fixed package-wide:

- spin bases are ordered by descending magnetic quantum number (|m=+s> first),
- boson (Fock) bases are ordered by ascending occupation number,
- a composite space enumerates its basis row-major over the factor list, so
  the first factor varies slowest (same ordering as chained ``numpy.kron``).

These orderings are global so that emitted matrices are reproducible
bit-for-bit. Everything here is value-semantic: instances are immutable
after construction, every operation is a pure function, and values can be
copied or sent between concurrent workers freely.

Storage is dense only; the spaces in scope stay well below ~10^3 dimensions,
where sparse machinery would cost more than it saves.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from math import prod

import numpy as np

from .errors import DomainError

__all__ = [
    "Factor",
    "HilbertSpace",
    "Operator",
    "DensityMatrix",
    "spin_factor",
    "boson_factor",
    "spin_operators",
    "boson_operators",
    "identity",
    "zero",
    "embed",
    "tensor_product",
    "commutator",
    "partial_trace",
    "expectation",
    "basis_vector",
]


@dataclass(frozen=True)
class Factor:
    """One tensor factor: ``kind`` is ``"spin"`` or ``"boson"``, ``dim`` its dimension."""

    kind: str
    dim: int

    def __post_init__(self):
        if self.kind not in ("spin", "boson"):
            raise DomainError(f"unknown factor kind {self.kind!r}")
        if self.kind == "spin" and self.dim < 1:
            raise DomainError(f"spin factor dimension must be >= 1, got {self.dim}")
        if self.kind == "boson" and self.dim < 2:
            raise DomainError(f"boson factor dimension must be >= 2, got {self.dim}")


def spin_factor(s: float) -> Factor:
    """Factor for a spin-``s`` degree of freedom (dimension 2s+1)."""
    return Factor("spin", _spin_dim(s))


def boson_factor(cutoff: int) -> Factor:
    """Factor for a bosonic mode truncated at Fock occupation ``cutoff``."""
    if int(cutoff) != cutoff or cutoff < 1:
        raise DomainError(f"Fock cutoff must be a positive integer, got {cutoff}")
    return Factor("boson", int(cutoff) + 1)


def _spin_dim(s: float) -> int:
    two_s = 2.0 * s
    if abs(two_s - round(two_s)) > 1e-12 or round(two_s) < 0:
        raise DomainError(f"spin quantum number must be a non-negative half-integer, got {s}")
    return int(round(two_s)) + 1


@dataclass(frozen=True)
class HilbertSpace:
    """An ordered list of spin/boson factors; total dimension is their product."""

    factors: tuple[Factor, ...]

    def __post_init__(self):
        if not self.factors:
            raise DomainError("a Hilbert space needs at least one factor")
        object.__setattr__(self, "factors", tuple(self.factors))

    @property
    def dim(self) -> int:
        return prod(f.dim for f in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(f.dim for f in self.factors)

    def __len__(self) -> int:
        return len(self.factors)

    def subspace(self, indices) -> "HilbertSpace":
        return HilbertSpace(tuple(self.factors[i] for i in indices))

    def __repr__(self):  # pragma: no cover - cosmetic
        parts = ",".join(f"{f.kind}{f.dim}" for f in self.factors)
        return f"HilbertSpace[{parts}]"


def _as_matrix(elements, dim: int) -> np.ndarray:
    m = np.array(elements, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DomainError(f"operator elements must form a square matrix, got shape {m.shape}")
    if m.shape[0] != dim:
        raise DomainError(f"matrix dimension {m.shape[0]} does not match space dimension {dim}")
    m.setflags(write=False)
    return m


@dataclass(frozen=True, eq=False, repr=False)
class Operator:
    """A dense complex matrix tagged with the space it acts on.

    Hamiltonian-valued operators carry angular-frequency units (rad/s);
    ladder and jump structure operators are dimensionless.
    """

    space: HilbertSpace
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _as_matrix(self.matrix, self.space.dim))

    def dag(self) -> "Operator":
        return Operator(self.space, self.matrix.conj().T)

    def is_hermitian(self, rtol: float = 1e-12) -> bool:
        scale = np.max(np.abs(self.matrix))
        if scale == 0.0:
            return True
        return np.max(np.abs(self.matrix - self.matrix.conj().T)) <= rtol * scale

    def _check_same_space(self, other: "Operator"):
        if self.space != other.space:
            raise DomainError("operators act on different spaces")

    def __add__(self, other: "Operator") -> "Operator":
        self._check_same_space(other)
        return Operator(self.space, self.matrix + other.matrix)

    def __sub__(self, other: "Operator") -> "Operator":
        self._check_same_space(other)
        return Operator(self.space, self.matrix - other.matrix)

    def __neg__(self) -> "Operator":
        return Operator(self.space, -self.matrix)

    def __mul__(self, scalar) -> "Operator":
        return Operator(self.space, self.matrix * complex(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "Operator":
        return Operator(self.space, self.matrix / complex(scalar))

    def __matmul__(self, other: "Operator") -> "Operator":
        self._check_same_space(other)
        return Operator(self.space, self.matrix @ other.matrix)

    def __repr__(self):  # pragma: no cover - cosmetic
        h = "hermitian" if self.is_hermitian() else "non-hermitian"
        return f"Operator(dim={self.space.dim}, {h})"


@dataclass(frozen=True, eq=False, repr=False)
class DensityMatrix:
    """A density matrix over a composite space.

    Construction only checks shape; physical invariants (unit trace,
    hermiticity, positivity) are asserted by :meth:`validate`, which callers
    use at evolution boundaries. Trace-decaying states produced by
    non-trace-preserving evolutions are represented with the same type and
    simply skip the trace check.
    """

    space: HilbertSpace
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _as_matrix(self.matrix, self.space.dim))

    @classmethod
    def from_pure(cls, space: HilbertSpace, vector: np.ndarray) -> "DensityMatrix":
        v = np.asarray(vector, dtype=complex).reshape(-1)
        if v.size != space.dim:
            raise DomainError(f"state vector length {v.size} does not match space dimension {space.dim}")
        return cls(space, np.outer(v, v.conj()))

    @classmethod
    def maximally_mixed(cls, space: HilbertSpace) -> "DensityMatrix":
        d = space.dim
        return cls(space, np.eye(d, dtype=complex) / d)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.matrix + self.matrix.conj().T)
        return float(np.linalg.eigvalsh(herm)[0])

    def validate(self, trace_tol: float = 1e-9, herm_tol: float = 1e-10,
                 eig_tol: float = 1e-8, check_trace: bool = True) -> "DensityMatrix":
        if check_trace and abs(self.trace() - 1.0) > trace_tol:
            raise DomainError(f"density matrix trace {self.trace():.3e} deviates from 1 beyond {trace_tol}")
        dev = float(np.max(np.abs(self.matrix - self.matrix.conj().T)))
        if dev > herm_tol:
            raise DomainError(f"density matrix hermiticity deviation {dev:.3e} exceeds {herm_tol}")
        lo = self.min_eigenvalue()
        if lo < -eig_tol:
            raise DomainError(f"density matrix minimum eigenvalue {lo:.3e} below -{eig_tol}")
        return self

    def __repr__(self):  # pragma: no cover - cosmetic
        return f"DensityMatrix(dim={self.space.dim}, trace={self.trace().real:.6f})"


def spin_operators(s: float) -> tuple[Operator, Operator, Operator]:
    """Raising, lowering and z operators for spin ``s`` in the descending-m basis.

    Satisfies [S_z, S_+-] = +-S_+- and S_+ S_- - S_- S_+ = 2 S_z exactly.
    """
    dim = _spin_dim(s)
    space = HilbertSpace((Factor("spin", dim),))
    m = s - np.arange(dim)  # descending: +s, s-1, ..., -s
    sz = np.diag(m.astype(complex))
    sp = np.zeros((dim, dim), dtype=complex)
    for col in range(1, dim):
        mm = m[col]
        sp[col - 1, col] = np.sqrt(s * (s + 1) - mm * (mm + 1))
    return (Operator(space, sp), Operator(space, sp.conj().T), Operator(space, sz))


def boson_operators(cutoff: int) -> tuple[Operator, Operator]:
    """Annihilation and creation operators truncated at Fock occupation ``cutoff``.

    a|n> = sqrt(n)|n-1>. The truncated pair does not satisfy [a, a^dag] = 1 on
    the top Fock state; that artifact is inherent to the cutoff and is handled
    downstream by cutoff-doubling convergence checks, not papered over here.
    """
    if int(cutoff) != cutoff or cutoff < 1:
        raise DomainError(f"Fock cutoff must be a positive integer, got {cutoff}")
    dim = int(cutoff) + 1
    space = HilbertSpace((Factor("boson", dim),))
    a = np.zeros((dim, dim), dtype=complex)
    for n in range(1, dim):
        a[n - 1, n] = np.sqrt(n)
    return (Operator(space, a), Operator(space, a.conj().T))


def identity(space: HilbertSpace) -> Operator:
    return Operator(space, np.eye(space.dim, dtype=complex))


def zero(space: HilbertSpace) -> Operator:
    return Operator(space, np.zeros((space.dim, space.dim), dtype=complex))


def embed(op: Operator, site: int, space: HilbertSpace) -> Operator:
    """Place ``op`` on factor ``site`` of ``space``, identity elsewhere."""
    if not (0 <= site < len(space.factors)):
        raise DomainError(f"site {site} out of range for {len(space.factors)} factors")
    target = space.factors[site]
    if op.space.dim != target.dim:
        raise DomainError(
            f"operator dimension {op.space.dim} does not match factor {site} dimension {target.dim}")
    out = np.ones((1, 1), dtype=complex)
    for i, f in enumerate(space.factors):
        out = np.kron(out, op.matrix if i == site else np.eye(f.dim, dtype=complex))
    return Operator(space, out)


def tensor_product(*ops: Operator) -> Operator:
    """Kronecker product of operators; factor lists concatenate in order."""
    if not ops:
        raise DomainError("tensor_product needs at least one operator")
    factors: tuple[Factor, ...] = ()
    out = np.ones((1, 1), dtype=complex)
    for op in ops:
        factors = factors + op.space.factors
        out = np.kron(out, op.matrix)
    return Operator(HilbertSpace(factors), out)


def commutator(a: Operator, b: Operator) -> Operator:
    return a @ b - b @ a


def partial_trace(rho: DensityMatrix, keep) -> DensityMatrix:
    """Trace out every factor not listed in ``keep`` (kept factors keep their order)."""
    n = len(rho.space.factors)
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise DomainError("keep set must be non-empty")
    if keep[0] < 0 or keep[-1] >= n:
        raise DomainError(f"keep indices {keep} out of range for {n} factors")
    dims = rho.space.dims
    tensor = rho.matrix.reshape(dims + dims)
    sym = string.ascii_lowercase + string.ascii_uppercase
    if 2 * n > len(sym):
        raise DomainError("too many factors for partial trace")
    keep_set = set(keep)
    row = [sym[i] for i in range(n)]
    col = [sym[n + i] if i in keep_set else sym[i] for i in range(n)]
    out = "".join(row[i] for i in keep) + "".join(sym[n + i] for i in keep)
    reduced = np.einsum("".join(row) + "".join(col) + "->" + out, tensor)
    sub = rho.space.subspace(keep)
    return DensityMatrix(sub, reduced.reshape(sub.dim, sub.dim))


def expectation(op: Operator, rho: DensityMatrix) -> complex:
    """tr(op . rho); real to ~1e-10 when ``op`` is Hermitian and ``rho`` physical."""
    if op.space != rho.space:
        raise DomainError("operator and state act on different spaces")
    return complex(np.einsum("ij,ji->", op.matrix, rho.matrix))


def basis_vector(space: HilbertSpace, occupations) -> np.ndarray:
    """Computational basis vector from per-factor indices.

    Spin factors index from the highest m downward (0 = |m=+s>); boson factors
    index by occupation number.
    """
    occ = tuple(int(i) for i in occupations)
    if len(occ) != len(space.factors):
        raise DomainError(f"expected {len(space.factors)} occupation indices, got {len(occ)}")
    for i, (f, k) in enumerate(zip(space.factors, occ)):
        if not (0 <= k < f.dim):
            raise DomainError(f"occupation {k} out of range for factor {i} (dim {f.dim})")
    idx = int(np.ravel_multi_index(occ, space.dims))
    v = np.zeros(space.dim, dtype=complex)
    v[idx] = 1.0
    return v
