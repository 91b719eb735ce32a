"""Dense operator algebra on small tensor-product spin spaces.

Operators and density matrices are plain complex ``numpy`` arrays. The factor
structure of the Hilbert space is carried separately by :class:`SpinSystem`.

All frequencies are ordinary frequencies in MHz and times are in microseconds;
the factor 2*pi converting to angular frequency is applied only inside
:func:`expm_step`.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import prod
from typing import Iterable

import numpy as np

TWO_PI = 2.0 * np.pi

ROLES = ("nv", "nuclear", "nuclear-full", "p1", "host-14n")

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


@dataclass(frozen=True)
class Subsystem:
    label: str
    dim: int
    role: str

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError(f"subsystem {self.label!r}: dim must be >= 2, got {self.dim}")
        if self.role not in ROLES:
            raise ValueError(f"subsystem {self.label!r}: unknown role {self.role!r}")


@dataclass(frozen=True)
class SpinSystem:
    """Ordered list of subsystems defining a tensor-product space."""

    subsystems: tuple[Subsystem, ...]

    def __init__(self, subsystems: Iterable[Subsystem | tuple]):
        subs = tuple(s if isinstance(s, Subsystem) else Subsystem(*s) for s in subsystems)
        if not subs:
            raise ValueError("a spin system needs at least one subsystem")
        labels = [s.label for s in subs]
        if len(set(labels)) != len(labels):
            raise ValueError(f"subsystem labels must be unique: {labels}")
        object.__setattr__(self, "subsystems", subs)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(s.dim for s in self.subsystems)

    @property
    def dim(self) -> int:
        return prod(self.dims)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.subsystems)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise KeyError(f"no subsystem labelled {label!r} in {self.labels}") from None

    def __getitem__(self, label: str) -> Subsystem:
        return self.subsystems[self.index(label)]

    def with_role(self, role: str) -> list[Subsystem]:
        return [s for s in self.subsystems if s.role == role]

    @property
    def nv(self) -> Subsystem:
        """The unique NV subsystem; raises if there is not exactly one."""
        found = self.with_role("nv")
        if len(found) != 1:
            raise ValueError(f"expected exactly one NV subsystem, found {len(found)}")
        return found[0]


def spin_operators(s: float | Fraction) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(Sx, Sy, Sz)`` for spin quantum number ``s`` in {1/2, 1, 3/2}.

    The basis is ordered ``m = s, s-1, ..., -s``.
    """
    two_s = Fraction(s) * 2
    if two_s.denominator != 1 or two_s not in (1, 2, 3):
        raise ValueError(f"unsupported spin quantum number {s!r}; expected 1/2, 1 or 3/2")
    s = float(Fraction(s))
    m = s - np.arange(int(two_s) + 1)
    # <m+1|S+|m> = sqrt(s(s+1) - m(m+1))
    splus = np.diag(np.sqrt(s * (s + 1) - m[1:] * (m[1:] + 1)), k=1).astype(complex)
    sx = (splus + splus.conj().T) / 2
    sy = (splus - splus.conj().T) / 2j
    sz = np.diag(m).astype(complex)
    return sx, sy, sz


def embed(op: np.ndarray, system: SpinSystem, site: str) -> np.ndarray:
    """Lift a single-site operator onto the full space of ``system``."""
    i = system.index(site)
    op = np.asarray(op)
    if op.shape != (system.dims[i], system.dims[i]):
        raise ValueError(
            f"operator shape {op.shape} does not match subsystem {site!r} of dim {system.dims[i]}"
        )
    out = np.ones((1, 1), dtype=complex)
    for j, d in enumerate(system.dims):
        out = np.kron(out, op if j == i else np.eye(d))
    return out


def embed_many(ops: dict[str, np.ndarray], system: SpinSystem) -> np.ndarray:
    """Tensor product of per-site operators, identity on sites not given."""
    for label in ops:
        system.index(label)
    out = np.ones((1, 1), dtype=complex)
    for sub in system.subsystems:
        out = np.kron(out, ops.get(sub.label, np.eye(sub.dim)))
    return out


def partial_trace(rho: np.ndarray, system: SpinSystem, keep: Iterable[str]) -> np.ndarray:
    """Reduced density matrix on the subsystems in ``keep`` (in system order)."""
    keep = set(keep)
    if not keep:
        raise ValueError("keep must name at least one subsystem")
    for label in keep:
        system.index(label)
    dims = system.dims
    n = len(dims)
    kept = [i for i, lab in enumerate(system.labels) if lab in keep]
    t = np.asarray(rho).reshape(dims + dims)
    # einsum subscripts: traced factors share an index between row and column
    row = list(range(n))
    col = [i + n if i in kept else i for i in range(n)]
    out_idx = kept + [i + n for i in kept]
    reduced = np.einsum(t, row + col, out_idx)
    dk = prod(dims[i] for i in kept)
    return reduced.reshape(dk, dk)


def product_state(factors: dict[str, np.ndarray], system: SpinSystem) -> np.ndarray:
    """Tensor product of per-site density matrices; missing sites are maximally mixed."""
    ops = {}
    for sub in system.subsystems:
        ops[sub.label] = factors.get(sub.label, np.eye(sub.dim) / sub.dim)
    return embed_many(ops, system)


def is_hermitian(m: np.ndarray, rtol: float = 1e-12) -> bool:
    m = np.asarray(m)
    scale = max(np.max(np.abs(m)), 1.0) if m.size else 1.0
    return bool(np.max(np.abs(m - np.conj(np.swapaxes(m, -1, -2))), initial=0.0) <= rtol * scale)


def check_density(rho: np.ndarray, trace_tol=1e-9, herm_tol=1e-10, eig_floor=-1e-8) -> np.ndarray:
    """Validate a density matrix and return it; raise ``ValueError`` if invalid."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got shape {rho.shape}")
    tr = np.trace(rho)
    if abs(tr - 1) > trace_tol:
        raise ValueError(f"trace {tr} differs from 1 by more than {trace_tol}")
    if np.max(np.abs(rho - rho.conj().T)) > herm_tol:
        raise ValueError("density matrix is not Hermitian")
    lo = np.linalg.eigvalsh((rho + rho.conj().T) / 2)[0]
    if lo < eig_floor:
        raise ValueError(f"density matrix has negative eigenvalue {lo}")
    return rho


def purity(rho: np.ndarray) -> float:
    return float(np.real(np.einsum("ij,ji->", rho, rho)))


def expm_step(H: np.ndarray, dt: float) -> np.ndarray:
    """Propagator ``exp(-i 2 pi H dt)`` for Hermitian ``H`` in MHz and ``dt`` in us.

    ``H`` may carry leading batch dimensions. The exponential is taken through
    the Hermitian eigendecomposition, so the result is unitary to rounding.
    """
    H = np.asarray(H)
    if not is_hermitian(H):
        raise ValueError("expm_step requires a Hermitian operator")
    w, v = np.linalg.eigh(H)
    phases = np.exp(-1j * TWO_PI * dt * w)
    return (v * phases[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a

