"""Finite-dimensional truncated Fock-space linear algebra.

State vectors, density matrices and mode operators on tensor products of
truncated bosonic modes.  Everything is dense complex numpy; the spaces used
in this package stay small (total dimension well below 10^4), so sparsity
would only add complexity.

Index convention, fixed globally: flat indices are row-major over the mode
occupations with mode 0 (site A) as the slowest index.  This matches
``numpy.reshape`` / ``numpy.kron`` with the first factor on the left.
"""

from dataclasses import dataclass
from math import prod

import numpy as np
import scipy.linalg

NORM_TOL = 1e-12
HERM_TOL = 1e-12
TRACE_TOL = 1e-12
EIG_TOL = 1e-10
UNITARY_TOL = 1e-10


class DimensionError(ValueError):
    """Raised for invalid or inconsistent mode dimensions."""


@dataclass(frozen=True)
class ModeDims:
    """Per-mode truncation dimensions of a tensor-product Fock space.

    ``dims[k]`` is the number of retained levels of mode k (levels
    ``0 .. dims[k]-1``).  Mode 0 is the slowest (leftmost) index in the
    row-major flattening.
    """

    dims: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if len(self.dims) == 0:
            raise DimensionError("at least one mode is required")
        if any(d < 1 for d in self.dims):
            raise DimensionError(f"mode dimensions must be >= 1, got {self.dims}")

    @property
    def n_modes(self) -> int:
        return len(self.dims)

    @property
    def total(self) -> int:
        return prod(self.dims)

    def index(self, occupations) -> int:
        """Flat index of the basis state with the given occupations."""
        occ = tuple(occupations)
        if len(occ) != self.n_modes:
            raise DimensionError(f"expected {self.n_modes} occupations, got {len(occ)}")
        if any(not 0 <= n < d for n, d in zip(occ, self.dims)):
            raise DimensionError(f"occupations {occ} out of range for dims {self.dims}")
        return int(np.ravel_multi_index(occ, self.dims))

    def occupations(self, flat: int) -> tuple[int, ...]:
        """Occupation tuple of the basis state with the given flat index."""
        if not 0 <= flat < self.total:
            raise DimensionError(f"flat index {flat} out of range for dims {self.dims}")
        return tuple(int(n) for n in np.unravel_index(flat, self.dims))

    def total_number(self) -> np.ndarray:
        """Total excitation number of every basis state, as an int array."""
        grids = np.indices(self.dims).reshape(self.n_modes, -1)
        return grids.sum(axis=0)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=complex)
    arr.flags.writeable = False
    return arr


def as_mode_dims(dims) -> ModeDims:
    if isinstance(dims, ModeDims):
        return dims
    if isinstance(dims, int):
        return ModeDims((dims,))
    return ModeDims(tuple(dims))


@dataclass(frozen=True)
class FockVector:
    """Pure state on a truncated tensor space, flat complex amplitudes.

    Constructed vectors are unit norm to within 1e-12 unless the caller
    explicitly flags a non-normalized intermediate with ``normalized=False``.
    The amplitude array is made read-only; all operations return new values.
    """

    dims: ModeDims
    amps: np.ndarray
    normalized: bool = True

    def __post_init__(self):
        object.__setattr__(self, "dims", as_mode_dims(self.dims))
        amps = _freeze(np.asarray(self.amps).ravel())
        if amps.shape != (self.dims.total,):
            raise DimensionError(
                f"amplitude length {amps.shape[0]} != total dimension {self.dims.total}"
            )
        object.__setattr__(self, "amps", amps)
        if self.normalized:
            nrm = np.linalg.norm(amps)
            if abs(nrm - 1.0) > NORM_TOL:
                raise ValueError(
                    f"state norm {nrm!r} deviates from 1 by more than {NORM_TOL}; "
                    "pass normalized=False for intermediates"
                )

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def normalize(self) -> "FockVector":
        """Unit-norm copy.  Raises on (numerically) vanishing norm."""
        nrm = self.norm()
        if nrm <= 1e-14:
            raise ValueError("cannot normalize a vector with vanishing norm")
        return FockVector(self.dims, self.amps / nrm)

    def overlap(self, other: "FockVector") -> complex:
        """Inner product <self|other>."""
        if self.dims != other.dims:
            raise DimensionError("overlap requires matching dims")
        return complex(np.vdot(self.amps, other.amps))

    def to_density(self) -> "DensityMatrix":
        vec = self if self.normalized else self.normalize()
        return DensityMatrix(vec.dims, np.outer(vec.amps, vec.amps.conj()))

    def amplitude(self, occupations) -> complex:
        return complex(self.amps[self.dims.index(occupations)])


@dataclass(frozen=True)
class DensityMatrix:
    """Mixed state on a truncated tensor space.

    Validated on construction: Hermitian to 1e-12, unit trace to 1e-12 and
    eigenvalues >= -1e-10.  ``subnormalized=True`` relaxes the trace check to
    trace <= 1 (used for trajectories with an explicit loss term).
    """

    dims: ModeDims
    mat: np.ndarray
    subnormalized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "dims", as_mode_dims(self.dims))
        mat = _freeze(np.asarray(self.mat))
        d = self.dims.total
        if mat.shape != (d, d):
            raise DimensionError(f"matrix shape {mat.shape} != ({d}, {d})")
        object.__setattr__(self, "mat", mat)
        if np.max(np.abs(mat - mat.conj().T)) > HERM_TOL:
            raise ValueError("density matrix is not Hermitian to 1e-12")
        tr = np.trace(mat).real
        if self.subnormalized:
            if tr > 1.0 + TRACE_TOL or tr < -TRACE_TOL:
                raise ValueError(f"subnormalized trace {tr} outside [0, 1]")
        elif abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"trace {tr} deviates from 1 by more than {TRACE_TOL}")
        if np.min(scipy.linalg.eigvalsh(mat)) < -EIG_TOL:
            raise ValueError("density matrix has an eigenvalue below -1e-10")

    def trace(self) -> float:
        return float(np.trace(self.mat).real)


@dataclass(frozen=True)
class ModeOperator:
    """Dense operator on a truncated tensor space.

    The ``hermitian`` / ``unitary`` flags are promises verified at
    construction time, not hints.
    """

    dims: ModeDims
    mat: np.ndarray
    hermitian: bool = False
    unitary: bool = False

    def __post_init__(self):
        object.__setattr__(self, "dims", as_mode_dims(self.dims))
        mat = _freeze(np.asarray(self.mat))
        d = self.dims.total
        if mat.shape != (d, d):
            raise DimensionError(f"matrix shape {mat.shape} != ({d}, {d})")
        object.__setattr__(self, "mat", mat)
        if self.hermitian and np.max(np.abs(mat - mat.conj().T)) > HERM_TOL:
            raise ValueError("operator flagged hermitian is not")
        if self.unitary:
            defect = np.max(np.abs(mat.conj().T @ mat - np.eye(d)))
            if defect > UNITARY_TOL:
                raise ValueError(f"operator flagged unitary has defect {defect:.3e}")

    def dag(self) -> "ModeOperator":
        return ModeOperator(self.dims, self.mat.conj().T,
                            hermitian=self.hermitian, unitary=self.unitary)

    def __matmul__(self, other: "ModeOperator") -> "ModeOperator":
        if not isinstance(other, ModeOperator):
            return NotImplemented
        if self.dims != other.dims:
            raise DimensionError("operator product requires matching dims")
        return ModeOperator(self.dims, self.mat @ other.mat)

    def apply(self, state: FockVector) -> FockVector:
        """Apply to a state; the result is flagged non-normalized."""
        if self.dims != state.dims:
            raise DimensionError("operator and state dims differ")
        return FockVector(self.dims, self.mat @ state.amps, normalized=False)

    def expectation(self, state: FockVector) -> complex:
        return complex(np.vdot(state.amps, self.mat @ state.amps))


def annihilation(dim: int) -> ModeOperator:
    """Single-mode lowering operator, <n-1|a|n> = sqrt(n)."""
    if dim < 2:
        raise DimensionError(f"annihilation needs dim >= 2, got {dim}")
    mat = np.zeros((dim, dim), dtype=complex)
    ns = np.arange(1, dim)
    mat[ns - 1, ns] = np.sqrt(ns)
    return ModeOperator(ModeDims((dim,)), mat)


def creation(dim: int) -> ModeOperator:
    return annihilation(dim).dag()


def number_operator(dim: int) -> ModeOperator:
    if dim < 1:
        raise DimensionError(f"number operator needs dim >= 1, got {dim}")
    return ModeOperator(ModeDims((dim,)), np.diag(np.arange(dim)).astype(complex),
                        hermitian=True)


def identity(dims) -> ModeOperator:
    md = as_mode_dims(dims)
    return ModeOperator(md, np.eye(md.total, dtype=complex), hermitian=True, unitary=True)


def displacement(alpha: complex, dim: int) -> ModeOperator:
    """Truncated displacement operator exp(alpha a^dag - alpha* a).

    Only approximately displaces on a truncated space; accurate while the
    displaced state keeps negligible weight near the cutoff.
    """
    a = annihilation(dim).mat
    gen = alpha * a.conj().T - np.conj(alpha) * a
    return ModeOperator(ModeDims((dim,)), scipy.linalg.expm(gen), unitary=True)


def basis_state(dims, occupations) -> FockVector:
    """Product basis state |n_0 n_1 ...> on the given dims."""
    md = as_mode_dims(dims)
    amps = np.zeros(md.total, dtype=complex)
    amps[md.index(occupations)] = 1.0
    return FockVector(md, amps)


def total_number_operator(dims) -> ModeOperator:
    md = as_mode_dims(dims)
    return ModeOperator(md, np.diag(md.total_number()).astype(complex), hermitian=True)


def tensor(x, y):
    """Kronecker product with x as the slower (left) factor.

    Both operands must be FockVector, or both ModeOperator; dims concatenate.
    """
    joined = ModeDims(x.dims.dims + y.dims.dims)
    if isinstance(x, FockVector) and isinstance(y, FockVector):
        return FockVector(joined, np.kron(x.amps, y.amps),
                          normalized=x.normalized and y.normalized)
    if isinstance(x, ModeOperator) and isinstance(y, ModeOperator):
        return ModeOperator(joined, np.kron(x.mat, y.mat),
                            hermitian=x.hermitian and y.hermitian,
                            unitary=x.unitary and y.unitary)
    raise TypeError(f"tensor requires two FockVector or two ModeOperator, "
                    f"got {type(x).__name__} and {type(y).__name__}")


def embed(op: ModeOperator, dims, mode: int) -> ModeOperator:
    """Lift a single-mode operator to the full tensor space at mode index."""
    md = as_mode_dims(dims)
    if op.dims.n_modes != 1:
        raise DimensionError("embed expects a single-mode operator")
    if not 0 <= mode < md.n_modes:
        raise DimensionError(f"mode index {mode} out of range")
    if op.dims.dims[0] != md.dims[mode]:
        raise DimensionError("operator dimension does not match the target mode")
    mat = np.eye(1, dtype=complex)
    for k, d in enumerate(md.dims):
        mat = np.kron(mat, op.mat if k == mode else np.eye(d, dtype=complex))
    return ModeOperator(md, mat, hermitian=op.hermitian, unitary=op.unitary)


def partial_trace(rho: DensityMatrix, keep) -> DensityMatrix:
    """Reduced density matrix over the kept modes (in their original order)."""
    keep = sorted(set(int(k) for k in keep))
    m = rho.dims.n_modes
    if not keep:
        raise ValueError("keep set must be nonempty")
    if any(not 0 <= k < m for k in keep):
        raise DimensionError(f"keep modes {keep} out of range for {m} modes")
    dims = rho.dims.dims
    tens = rho.mat.reshape(dims + dims)
    # einsum: traced modes share a letter between bra and ket axes
    letters = "abcdefghijklmnopqrstuvwxyz"
    bra = list(letters[:m])
    ket = [letters[m + k] if k in keep else bra[k] for k in range(m)]
    out = "".join(bra[k] for k in keep) + "".join(ket[k] for k in keep)
    reduced = np.einsum("".join(bra) + "".join(ket) + "->" + out, tens)
    kept_dims = ModeDims(tuple(dims[k] for k in keep))
    d = kept_dims.total
    return DensityMatrix(kept_dims, reduced.reshape(d, d),
                         subnormalized=rho.subnormalized)


def purity(rho: DensityMatrix) -> float:
    """Tr rho^2, in [1/d, 1] up to round-off."""
    return float(np.sum(np.abs(rho.mat) ** 2))
