"""Chain representations, single-excitation Hamiltonians and spectral tools.

A nearest-neighbour hopping chain restricted to the single-excitation sector
is a real symmetric tridiagonal (Jacobi) matrix: the couplings sit on the
off-diagonal and the on-site fields on the diagonal (a constant energy
offset is dropped).  All values here are immutable after construction and
safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from . import jsonio
from .errors import NotMirrorSymmetricError, ReducibleChainError

DEFAULT_REL_TOL = 1e-12

__all__ = [
    "ChainSpec",
    "JacobiMatrix",
    "RegionPartition",
    "SpectralDecomposition",
    "build_hamiltonian",
    "mirror_symmetric",
    "fold_symmetric",
    "eigendecompose",
    "char_poly_eval",
    "char_poly_coeffs",
    "make_pst_chain",
    "pst_transfer_time",
    "uniform_chain",
    "load_chain",
    "save_chain",
]


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class ChainSpec:
    """Couplings and on-site fields defining a chain of ``N`` sites.

    Couplings are stored in the positive gauge: flipping the sign of any
    coupling is a similarity transform that leaves every |amplitude| and
    every transfer fidelity unchanged, so signs are normalised away on
    construction.  A zero coupling would split the chain in two and is
    rejected.
    """

    couplings: np.ndarray
    fields: np.ndarray

    def __post_init__(self):
        couplings = np.asarray(self.couplings, dtype=np.float64).reshape(-1)
        fields = np.asarray(self.fields, dtype=np.float64).reshape(-1)
        if fields.size != couplings.size + 1:
            raise ValueError(
                f"need len(fields) == len(couplings) + 1, got {fields.size} and {couplings.size}"
            )
        if not (np.all(np.isfinite(couplings)) and np.all(np.isfinite(fields))):
            raise ValueError("couplings and fields must be finite")
        if np.any(couplings == 0.0):
            raise ReducibleChainError("zero coupling: chain is reducible")
        object.__setattr__(self, "couplings", _readonly(np.abs(couplings)))
        object.__setattr__(self, "fields", _readonly(fields))

    @property
    def n_sites(self) -> int:
        return self.fields.size

    def reversed(self) -> "ChainSpec":
        return ChainSpec(self.couplings[::-1], self.fields[::-1])


@dataclass(frozen=True, eq=False)
class JacobiMatrix:
    """Real symmetric tridiagonal matrix (diagonal + off-diagonal bands)."""

    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        diag = np.atleast_1d(np.asarray(self.diag, dtype=np.float64))
        offdiag = np.asarray(self.offdiag, dtype=np.float64).reshape(-1)
        if offdiag.size != diag.size - 1:
            raise ValueError("need len(offdiag) == len(diag) - 1")
        object.__setattr__(self, "diag", _readonly(diag))
        object.__setattr__(self, "offdiag", _readonly(offdiag))

    @property
    def size(self) -> int:
        return self.diag.size

    def to_dense(self) -> np.ndarray:
        m = np.diag(self.diag)
        n = self.size
        idx = np.arange(n - 1)
        m[idx, idx + 1] = self.offdiag
        m[idx + 1, idx] = self.offdiag
        return m

    def is_persymmetric(self, rel_tol: float = DEFAULT_REL_TOL) -> bool:
        scale = max(
            np.max(np.abs(self.diag), initial=0.0),
            np.max(np.abs(self.offdiag), initial=0.0),
            1e-300,
        )
        return np.allclose(
            self.diag, self.diag[::-1], rtol=rel_tol, atol=rel_tol * scale
        ) and np.allclose(
            self.offdiag, self.offdiag[::-1], rtol=rel_tol, atol=rel_tol * scale
        )


@dataclass(frozen=True, eq=False)
class RegionPartition:
    """Contiguous input / bulk / output site regions of a chain.

    The input region is the prefix of ``n_in`` sites, the output region the
    suffix of ``n_out`` sites; the output must be the mirror image of the
    input under site reversal, so ``n_in == n_out`` is required.  Sites are
    numbered from 1 in reports; index arrays below are 0-based.
    """

    n_sites: int
    n_in: int
    n_out: int

    def __post_init__(self):
        if self.n_in < 1 or self.n_out < 1:
            raise ValueError("input and output regions must be non-empty")
        if self.n_in != self.n_out:
            raise ValueError("output region must mirror the input region")
        if self.n_in + self.n_out > self.n_sites:
            raise ValueError("regions overlap: n_in + n_out exceeds the chain length")

    @property
    def input_sites(self) -> np.ndarray:
        return np.arange(self.n_in)

    @property
    def output_sites(self) -> np.ndarray:
        return np.arange(self.n_sites - self.n_out, self.n_sites)

    @property
    def bulk_sites(self) -> np.ndarray:
        return np.arange(self.n_in, self.n_sites - self.n_out)


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenvalues in strictly decreasing order with orthonormal vectors.

    ``symmetry_labels[k]`` is ``'+'`` when the first and last entries of
    eigenvector ``k`` share their sign (mirror-symmetric chains only; for
    those the labels alternate ``+,-,+,...`` from the top eigenvalue).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    symmetry_labels: tuple[str, ...] | None = None

    @property
    def size(self) -> int:
        return self.eigenvalues.size

    def sector_indices(self, label: str) -> np.ndarray:
        if self.symmetry_labels is None:
            raise NotMirrorSymmetricError("decomposition carries no symmetry labels")
        return np.array([i for i, s in enumerate(self.symmetry_labels) if s == label])


def build_hamiltonian(spec: ChainSpec) -> JacobiMatrix:
    """Single-excitation Hamiltonian block of a chain.

    The off-diagonal entries are the couplings and the diagonal entries the
    fields; the constant energy offset of the fully-polarised state is
    dropped (it contributes only a global phase).
    """
    if np.any(spec.couplings == 0.0):
        raise ReducibleChainError("zero coupling: chain is reducible")
    return JacobiMatrix(diag=spec.fields, offdiag=spec.couplings)


def mirror_symmetric(spec: ChainSpec, rel_tol: float = DEFAULT_REL_TOL) -> bool:
    """True when the chain is invariant under site reversal, within tolerance."""
    scale = max(
        np.max(np.abs(spec.couplings), initial=0.0),
        np.max(np.abs(spec.fields), initial=0.0),
        1e-300,
    )
    atol = rel_tol * scale
    return np.allclose(
        spec.couplings, spec.couplings[::-1], rtol=rel_tol, atol=atol
    ) and np.allclose(spec.fields, spec.fields[::-1], rtol=rel_tol, atol=atol)


def fold_symmetric(
    spec: ChainSpec, rel_tol: float = DEFAULT_REL_TOL
) -> tuple[JacobiMatrix, JacobiMatrix]:
    """Split a mirror-symmetric chain into its even/odd reflection blocks.

    Returns ``(plus, minus)``.  For an even number of sites both blocks are
    the half chain with the innermost diagonal entry shifted by +/- the
    central coupling.  For an odd number of sites the plus block keeps the
    middle site with its adjacent coupling scaled by sqrt(2) and the minus
    block drops it.  Block site 1 is the outer end of the chain, so the
    penultimate characteristic polynomial from :func:`char_poly_eval`
    removes the junction-adjacent site.

    The sorted union of the two block spectra equals the full spectrum.
    """
    if not mirror_symmetric(spec, rel_tol):
        raise NotMirrorSymmetricError("fold requires a mirror-symmetric chain")
    n = spec.n_sites
    if n < 2:
        raise ValueError("folding needs at least two sites")
    if n % 2 == 0:
        m = n // 2
        mid = spec.couplings[m - 1]
        diag_plus = spec.fields[:m].copy()
        diag_minus = spec.fields[:m].copy()
        diag_plus[m - 1] += mid
        diag_minus[m - 1] -= mid
        off = spec.couplings[: m - 1]
        return JacobiMatrix(diag_plus, off), JacobiMatrix(diag_minus, off)
    m = n // 2
    off_plus = spec.couplings[:m].copy()
    off_plus[m - 1] *= math.sqrt(2.0)
    plus = JacobiMatrix(spec.fields[: m + 1], off_plus)
    minus = JacobiMatrix(spec.fields[:m], spec.couplings[: m - 1])
    return plus, minus


def eigendecompose(m: JacobiMatrix, rel_tol: float = DEFAULT_REL_TOL) -> SpectralDecomposition:
    """Diagonalise a Jacobi matrix with a tridiagonal eigensolver.

    Eigenvalues are returned in strictly decreasing order and each
    eigenvector is normalised with a positive first entry (nonzero for any
    irreducible Jacobi matrix).  Symmetry labels are attached when the
    matrix is persymmetric.
    """
    if m.size == 1:
        vals = np.array([m.diag[0]])
        vecs = np.array([[1.0]])
    else:
        vals, vecs = eigh_tridiagonal(m.diag, m.offdiag)
        vals = vals[::-1].copy()
        vecs = vecs[:, ::-1].copy()
    signs = np.where(vecs[0] < 0.0, -1.0, 1.0)
    vecs = vecs * signs
    labels = None
    if m.is_persymmetric(rel_tol):
        labels = tuple("+" if v > 0.0 else "-" for v in vecs[-1])
    return SpectralDecomposition(
        eigenvalues=_readonly(vals),
        eigenvectors=_readonly(vecs),
        symmetry_labels=labels,
    )


def _char_poly_scaled(
    diag: np.ndarray, offdiag: np.ndarray, x: float
) -> tuple[float, float, int]:
    """Three-term recurrence for ``det(x - M)`` with overflow rescaling.

    Runs from the far end of the matrix towards site 1, so the penultimate
    value is the minor with the *first* row and column removed (the
    junction-adjacent site).  Returns ``(q, p, e)`` with
    ``Q = q * 2**e`` and ``P = p * 2**e`` sharing one tracked exponent.
    """
    n = diag.size
    b2 = offdiag * offdiag
    q = x - diag[n - 1]
    p = 1.0
    e = 0
    for k in range(n - 2, -1, -1):
        q, p = (x - diag[k]) * q - b2[k] * p, q
        mag = max(abs(q), abs(p))
        if mag > 2.0**500:
            q = math.ldexp(q, -500)
            p = math.ldexp(p, -500)
            e += 500
        elif 0.0 < mag < 2.0**-500:
            q = math.ldexp(q, 500)
            p = math.ldexp(p, 500)
            e -= 500
    return q, p, e


def char_poly_eval(m: JacobiMatrix, x: float) -> tuple[float, float]:
    """Evaluate ``(Q, P)`` at ``x``.

    ``Q = det(x - M)`` and ``P`` is the same determinant with the first row
    and column removed.  Overflow inside the recurrence is guarded by
    rescaling with a tracked exponent; values beyond double range come back
    as inf with matching sign.
    """
    q, p, e = _char_poly_scaled(m.diag, m.offdiag, float(x))
    return math.ldexp(q, e) if abs(q) > 0 else 0.0, math.ldexp(p, e) if abs(p) > 0 else 0.0


def char_poly_coeffs(m: JacobiMatrix) -> tuple[np.ndarray, np.ndarray]:
    """Monomial coefficients (ascending) of ``Q`` and ``P``.

    Same orientation as :func:`char_poly_eval`: ``P`` removes the first row
    and column.  The recurrence is accumulated in extended precision and
    rounded once at the end, so each coefficient is correct to the last
    place; the coefficients-to-chain mapping is ill-conditioned enough that
    double accumulation would cost the reconstruction round-trip a digit or
    two.  Intended for moderate sizes; large designs keep polynomials in
    evaluated or root form instead.
    """
    import mpmath

    n = m.size
    with mpmath.workdps(40 + 2 * n):
        q = [-mpmath.mpf(float(m.diag[n - 1])), mpmath.mpf(1)]
        p = [mpmath.mpf(1)]
        for k in range(n - 2, -1, -1):
            a = mpmath.mpf(float(m.diag[k]))
            b2 = mpmath.mpf(float(m.offdiag[k])) ** 2
            nxt = [mpmath.mpf(0)] * (len(q) + 1)
            for i, c in enumerate(q):
                nxt[i] -= a * c
                nxt[i + 1] += c
            for i, c in enumerate(p):
                nxt[i] -= b2 * c
            p, q = q, nxt
        return (
            np.array([float(c) for c in q]),
            np.array([float(c) for c in p]),
        )


def make_pst_chain(n_sites: int, scale: float = 1.0) -> ChainSpec:
    """Engineered chain with couplings ``scale*sqrt(n(N-n))``.

    Its spectrum is the equally spaced ladder ``scale*(N-1-2k)`` and an
    excitation on site 1 refocuses perfectly on site N after
    ``pi/(2*scale)``.
    """
    if n_sites < 2:
        raise ValueError("need at least two sites")
    if scale <= 0:
        raise ValueError("scale must be positive")
    n = np.arange(1, n_sites)
    return ChainSpec(scale * np.sqrt(n * (n_sites - n)), np.zeros(n_sites))


def pst_transfer_time(scale: float = 1.0) -> float:
    """Refocusing time of :func:`make_pst_chain` for the given scale."""
    return math.pi / (2.0 * scale)


def uniform_chain(n_sites: int, coupling: float = 1.0) -> ChainSpec:
    """Uniformly coupled, field-free chain."""
    if n_sites < 2:
        raise ValueError("need at least two sites")
    return ChainSpec(np.full(n_sites - 1, coupling), np.zeros(n_sites))


def load_chain(path: str) -> ChainSpec:
    """Read a chain from a JSON file ``{"couplings": [...], "fields": [...]}``."""
    doc = jsonio.read_json(path)
    from .errors import InputError

    if not isinstance(doc, dict) or "couplings" not in doc or "fields" not in doc:
        raise InputError(f"{path}: expected an object with 'couplings' and 'fields'")
    try:
        return ChainSpec(
            np.asarray(doc["couplings"], dtype=np.float64),
            np.asarray(doc["fields"], dtype=np.float64),
        )
    except (ValueError, TypeError) as exc:
        raise InputError(f"{path}: {exc}") from exc


def save_chain(spec: ChainSpec, path: str, comment: str | None = None) -> None:
    """Write a chain to JSON; decimal output round-trips doubles exactly."""
    doc: dict = {
        "couplings": [float(j) for j in spec.couplings],
        "fields": [float(b) for b in spec.fields],
    }
    if comment is not None:
        doc["comment"] = comment
    jsonio.write_json(path, doc)
