"""Boundary-extension design for a fixed mirror-symmetric central chain.

Given a central chain and a set of target eigenvalues (each tagged with a
reflection sector), we look for an extension of ``M`` sites per side plus a
junction coupling ``J`` such that every target appears in the assembled
spectrum.  Writing ``Q_A, P_A`` for the characteristic polynomial of the
extension block and of the block with its junction-adjacent site removed
(and ``Q_B, P_B`` for the same objects on the folded central block), a
target ``x`` with sector ``s`` imposes

    Q_A(x) * Q_B^s(x) = J^2 * P_A(x) * P_B^s(x),

which is linear in the polynomial coefficients.  The solver assembles those
constraints as a homogeneous system in a rescaled variable, extracts the
coefficient vector from the smallest singular direction, and reconstructs
the extension chain from the resulting rational function.  Double precision
is used first; if the conditioning diagnostic or the verification fails,
the whole pipeline is re-run in extended precision (mpmath).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np
from numpy.polynomial import chebyshev as npcheb
from numpy.polynomial import polynomial as nppoly

from . import jsonio
from .chains import (
    ChainSpec,
    JacobiMatrix,
    build_hamiltonian,
    char_poly_eval,
    eigendecompose,
    fold_symmetric,
    mirror_symmetric,
    _char_poly_scaled,
)
from .errors import (
    DegenerateSystemError,
    IllPosedTargetError,
    InfeasibleExtensionError,
    InputError,
    VerificationError,
)

DEFAULT_RESIDUAL_TOL = 1e-8
DEFAULT_COND_THRESHOLD = 1e12
DEFAULT_DPS = 50

__all__ = [
    "RationalFunction",
    "TargetValue",
    "ExtensionProblem",
    "ExtensionSolution",
    "TargetResidual",
    "target_values",
    "fieldfree_reduce",
    "fieldfree_lift",
    "interpolate_rational",
    "reconstruct_chain",
    "pst_target_spectrum",
    "solve_extension",
    "load_problem",
]


# ---------------------------------------------------------------------------
# value objects
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class RationalFunction:
    """Polynomial pair ``numerator / denominator`` with ascending coefficients.

    ``basis`` is ``"power"`` (coefficients of x**k) or ``"chebyshev"``
    (coefficients of T_k(x / scale)).  Producers normalise the denominator
    to be monic as a polynomial in x; in the solved extension problems the
    numerator's leading coefficient then carries ``J**2``.
    """

    numerator: np.ndarray
    denominator: np.ndarray
    basis: str = "power"
    scale: float = 1.0

    def __post_init__(self):
        num = np.asarray(self.numerator, dtype=np.float64).reshape(-1)
        den = np.asarray(self.denominator, dtype=np.float64).reshape(-1)
        if num.size == 0 or den.size == 0:
            raise ValueError("numerator and denominator must be non-empty")
        if self.basis not in ("power", "chebyshev"):
            raise ValueError(f"unknown basis {self.basis!r}")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        for a in (num, den):
            a.flags.writeable = False
        object.__setattr__(self, "numerator", num)
        object.__setattr__(self, "denominator", den)

    @property
    def deg_num(self) -> int:
        return self.numerator.size - 1

    @property
    def deg_den(self) -> int:
        return self.denominator.size - 1

    def _eval(self, coeffs: np.ndarray, x):
        if self.basis == "power":
            return nppoly.polyval(x, coeffs)
        return npcheb.chebval(np.asarray(x) / self.scale, coeffs)

    def numerator_at(self, x):
        return self._eval(self.numerator, x)

    def denominator_at(self, x):
        return self._eval(self.denominator, x)

    def __call__(self, x):
        return self.numerator_at(x) / self.denominator_at(x)


@dataclass(frozen=True, eq=False)
class TargetValue:
    """Required value of the junction rational function at one node.

    ``value is None`` marks a pole of the central-block data: the product
    constraint stays well posed there and degenerates to a root condition on
    the denominator polynomial.
    """

    node: float
    value: float | None

    @property
    def is_pole(self) -> bool:
        return self.value is None


@dataclass(frozen=True)
class TargetResidual:
    """Independent post-solve residuals for one target eigenvalue."""

    target: float
    sector: str
    constraint_residual: float
    spectral_residual: float
    matched_eigenvalue: float


@dataclass(frozen=True, eq=False)
class ExtensionProblem:
    """Fixed central chain plus the eigenvalues the extension must pin.

    ``junction is None`` solves for the junction coupling as well (one more
    unknown, one more target); a float fixes it.  In field-free mode the
    spectrum comes in +/- pairs with opposite sectors and ``targets`` lists
    only the positive members.
    """

    central: ChainSpec
    extension_size: int
    junction: float | None = None
    targets: tuple[tuple[float, str], ...] = ()
    field_free: bool = True

    def __post_init__(self):
        targets = tuple((float(v), str(s)) for v, s in self.targets)
        object.__setattr__(self, "targets", targets)
        m = self.extension_size
        if m < 1:
            raise ValueError("extension_size must be at least 1")
        if not mirror_symmetric(self.central):
            raise ValueError("central chain must be mirror-symmetric")
        if self.junction is not None and not self.junction > 0:
            raise ValueError("a known junction coupling must be positive")
        for _, s in targets:
            if s not in ("+", "-"):
                raise ValueError(f"sector must be '+' or '-', got {s!r}")
        nodes = np.array([v for v, _ in targets])
        if nodes.size > 1:
            span = max(np.ptp(nodes), 1e-300)
            if np.min(np.diff(np.sort(nodes))) <= 1e-12 * span:
                raise ValueError("targets must be distinct")
        if self.field_free:
            if np.any(nodes <= 0):
                raise ValueError(
                    "field-free targets come in +/- pairs; list only the positive members"
                )
            want = {m} if self.junction is None else {m - 1, m}
        else:
            want = {2 * m} if self.junction is None else {2 * m - 1}
        if len(targets) not in want:
            raise ValueError(
                f"expected {sorted(want)} targets for this mode, got {len(targets)}"
            )


@dataclass(frozen=True, eq=False)
class ExtensionSolution:
    """Solved extension: the fragment, junction coupling and assembled chain.

    The extension fragment is ordered junction-first (site 1 touches the
    central region).  ``achieved_targets`` holds the independently evaluated
    product-constraint residual and the spectral residual per target.
    """

    extension: ChainSpec
    junction: float
    assembled: ChainSpec
    achieved_targets: tuple[TargetResidual, ...]
    conditioning: float
    precision: str

    @property
    def max_spectral_residual(self) -> float:
        return max((t.spectral_residual for t in self.achieved_targets), default=0.0)

    @property
    def max_constraint_residual(self) -> float:
        return max((t.constraint_residual for t in self.achieved_targets), default=0.0)


# ---------------------------------------------------------------------------
# target data from the folded central chain
# ---------------------------------------------------------------------------


def _folded_block(central: ChainSpec, sector: str) -> JacobiMatrix:
    plus, minus = fold_symmetric(central)
    return plus if sector == "+" else minus


def target_values(
    central: ChainSpec,
    targets,
    rel_tol: float = 1e-9,
) -> list[TargetValue]:
    """Evaluate the central-block data ``Q_B/P_B`` at each target.

    ``targets`` is a sequence of ``(eigenvalue, sector)`` pairs.  A target
    sitting on a root of ``P_B`` (detected by proximity to an eigenvalue of
    the block with its junction site removed) is returned as a pole marker;
    a target that is simultaneously an eigenvalue of the block itself is
    rejected as ill posed, because the product constraint then holds for
    every extension.
    """
    plus, minus = fold_symmetric(central)
    cache: dict[str, tuple[JacobiMatrix, np.ndarray, np.ndarray]] = {}
    for sector, block in (("+", plus), ("-", minus)):
        block_eigs = eigendecompose(block).eigenvalues
        if block.size > 1:
            sub = JacobiMatrix(block.diag[1:], block.offdiag[1:])
            sub_eigs = eigendecompose(sub).eigenvalues
        else:
            sub_eigs = np.zeros(0)
        cache[sector] = (block, block_eigs, sub_eigs)

    out = []
    for value, sector in targets:
        lam = float(value)
        block, block_eigs, sub_eigs = cache[sector]
        spread = max(np.ptp(block_eigs), np.max(np.abs(block_eigs), initial=0.0), 1.0)
        d_block = np.min(np.abs(block_eigs - lam))
        d_sub = np.min(np.abs(sub_eigs - lam)) if sub_eigs.size else math.inf
        if d_sub <= rel_tol * spread:
            if d_block <= rel_tol * spread:
                raise IllPosedTargetError(
                    f"target {lam} is an eigenvalue of the folded block and of its"
                    " junction-deleted submatrix; the constraint is vacuous"
                )
            out.append(TargetValue(lam, None))
            continue
        q, p, _ = _char_poly_scaled(block.diag, block.offdiag, lam)
        out.append(TargetValue(lam, q / p))
    return out


def fieldfree_reduce(nodes, values) -> tuple[np.ndarray, np.ndarray]:
    """Map odd-function data ``f(x_i) = f_i`` to ``g(x_i^2) = f_i / x_i``."""
    nodes = np.asarray(nodes, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if np.any(nodes == 0):
        raise ValueError("cannot reduce at node zero")
    return nodes * nodes, values / nodes


def fieldfree_lift(g: RationalFunction) -> RationalFunction:
    """Lift ``g = p/q`` to the odd rational ``f(x) = x p(x^2) / q(x^2)``."""
    if g.basis != "power" or g.scale != 1.0:
        raise ValueError("lift is defined for unscaled power-basis functions")
    num = np.zeros(2 * g.numerator.size)
    num[1::2] = g.numerator
    den = np.zeros(2 * g.denominator.size - 1)
    den[::2] = g.denominator
    return RationalFunction(num, den)


def pst_target_spectrum(extension_size: int, delta: float) -> list[tuple[float, str]]:
    """Half-integer eigenvalue ladder pinned by a transfer-time design.

    Returns ``delta * (M - 2k - 1/2)`` for ``k = 0..M-1`` in the symmetric
    sector and ``delta * (M - 2k - 3/2)`` in the antisymmetric sector.  The
    union is symmetric about zero with spacing ``delta``, which makes every
    pinned eigenvalue satisfy the perfect-transfer phase condition at time
    ``pi / delta``.
    """
    m = extension_size
    if m < 1:
        raise ValueError("extension_size must be at least 1")
    if not delta > 0:
        raise ValueError("delta must be positive")
    sym = [(delta * (m - 2 * k - 0.5), "+") for k in range(m)]
    asym = [(delta * (m - 2 * k - 1.5), "-") for k in range(m)]
    return sym + asym


# ---------------------------------------------------------------------------
# rational interpolation (double-precision path)
# ---------------------------------------------------------------------------


def _as_target_values(data) -> list[TargetValue]:
    out = []
    for item in data:
        if isinstance(item, TargetValue):
            out.append(item)
        else:
            node, value = item
            out.append(TargetValue(float(node), None if value is None else float(value)))
    return out


def _coeff_indices(degree: int, field_free: bool) -> np.ndarray:
    idx = np.arange(degree + 1)
    if field_free:
        idx = idx[idx % 2 == degree % 2]
    return idx


def _basis_columns(u: float, indices: np.ndarray, degree: int, basis: str) -> np.ndarray:
    if basis == "power":
        return np.power(u, indices.astype(float))
    vals = npcheb.chebvander(u, degree)
    return np.asarray(vals).reshape(-1)[indices]


def _lead_factor(degree: int, basis: str, scale: float) -> float:
    # d/d(stored coefficient) of the x**degree monomial coefficient
    if basis == "power":
        return scale ** -degree
    cheb_lead = 2.0 ** max(degree - 1, 0)
    return cheb_lead * scale ** -degree


@dataclass(frozen=True)
class _InterpDiagnostics:
    conditioning: float
    precision: str


def _build_rows(
    data: list[TargetValue],
    den_idx: np.ndarray,
    num_idx: np.ndarray,
    deg_num: int,
    deg_den: int,
    basis: str,
    scale: float,
    junction: float | None,
) -> np.ndarray:
    rows = []
    for tv in data:
        u = tv.node / scale
        den_cols = _basis_columns(u, den_idx, deg_den, basis)
        num_cols = _basis_columns(u, num_idx, deg_num, basis)
        if tv.is_pole:
            row = np.concatenate([den_cols, np.zeros_like(num_cols)])
        else:
            row = np.concatenate([tv.value * den_cols, -num_cols])
        rows.append(row)
    if junction is not None:
        row = np.zeros(den_idx.size + num_idx.size)
        row[den_idx.size + num_idx.size - 1] = _lead_factor(deg_num, basis, scale)
        row[den_idx.size - 1] = -(junction**2) * _lead_factor(deg_den, basis, scale)
        rows.append(row)
    a = np.array(rows)
    norms = np.linalg.norm(a, axis=1)
    if np.any(norms == 0):
        raise DegenerateSystemError("constraint row is identically zero")
    return a / norms[:, None]


def _solution_from_vector(
    vec: np.ndarray,
    den_idx: np.ndarray,
    num_idx: np.ndarray,
    deg_num: int,
    deg_den: int,
    basis: str,
    scale: float,
) -> RationalFunction:
    den = np.zeros(deg_den + 1)
    num = np.zeros(deg_num + 1)
    den[den_idx] = vec[: den_idx.size]
    num[num_idx] = vec[den_idx.size :]
    lead = den[deg_den] * _lead_factor(deg_den, basis, scale)
    if abs(lead) < 1e-13 * np.linalg.norm(vec):
        raise DegenerateSystemError(
            "denominator does not reach its declared degree; constraints are degenerate"
        )
    den /= lead
    num /= lead
    if basis == "power":
        # coefficients were solved in u = x / scale; unscale term by term
        powers = scale ** -np.arange(deg_den + 1.0)
        den = den * powers
        num = num * powers[: deg_num + 1]
        return RationalFunction(num, den)
    return RationalFunction(num, den, basis="chebyshev", scale=scale)


def _check_residuals(
    rf: RationalFunction, data: list[TargetValue], residual_tol: float
) -> float:
    nodes = np.array([tv.node for tv in data])
    den_vals = rf.denominator_at(nodes)
    num_vals = rf.numerator_at(nodes)
    den_scale = np.max(np.abs(den_vals), initial=1e-300)
    worst = 0.0
    for i, tv in enumerate(data):
        if tv.is_pole:
            res = abs(den_vals[i]) / den_scale
        else:
            lhs = den_vals[i] * tv.value
            res = abs(lhs - num_vals[i]) / max(abs(lhs), abs(num_vals[i]), 1e-300)
            if abs(den_vals[i]) <= 1e-13 * den_scale and res > residual_tol:
                raise DegenerateSystemError(
                    f"unattainable point at node {tv.node}: denominator vanishes "
                    "while a finite value is required"
                )
        worst = max(worst, res)
    if worst > residual_tol:
        raise DegenerateSystemError(
            f"interpolation residual {worst:.3e} exceeds tolerance {residual_tol:.1e}"
        )
    return worst


def _interpolate_double(
    data: list[TargetValue],
    deg_num: int,
    deg_den: int,
    junction: float | None,
    field_free: bool,
    basis: str,
    scale: float,
) -> tuple[RationalFunction, float]:
    den_idx = _coeff_indices(deg_den, field_free)
    num_idx = _coeff_indices(deg_num, field_free)
    a = _build_rows(data, den_idx, num_idx, deg_num, deg_den, basis, scale, junction)
    n_rows, n_unk = a.shape
    if n_rows < n_unk - 1:
        raise DegenerateSystemError(
            f"underdetermined system: {n_rows} constraints for {n_unk} coefficients"
        )
    _, sv, vh = np.linalg.svd(a)
    vec = vh[-1]
    if n_rows >= n_unk:
        cond = sv[0] / max(sv[-2], 1e-300) if n_unk >= 2 else 1.0
    else:
        cond = sv[0] / max(sv[-1], 1e-300)
    rf = _solution_from_vector(vec, den_idx, num_idx, deg_num, deg_den, basis, scale)
    return rf, cond


def interpolate_rational(
    data,
    deg_num: int,
    deg_den: int,
    *,
    junction: float | None = None,
    field_free: bool = False,
    basis: str = "power",
    precision: str = "auto",
    scale: float | None = None,
    cond_threshold: float = DEFAULT_COND_THRESHOLD,
    residual_tol: float = DEFAULT_RESIDUAL_TOL,
    dps: int = DEFAULT_DPS,
) -> RationalFunction:
    """Fit ``num/den`` of the given degrees through the data.

    ``data`` is a sequence of ``(node, value)`` pairs or :class:`TargetValue`
    items; a ``None`` value marks a pole, which consumes the constraint as a
    root of the denominator.  With ``junction`` set, the numerator's leading
    coefficient is tied to ``junction**2`` times the (monic) denominator's,
    which removes one unknown.  ``field_free`` restricts both polynomials to
    the parities of a zero-diagonal chain.

    Constraints are assembled as a homogeneous linear system in the variable
    ``x / scale`` (``scale`` defaults to the largest node) and solved through
    the smallest singular direction.  When the conditioning diagnostic
    exceeds ``cond_threshold`` or the residual check fails, the system is
    re-solved in extended precision before giving up.
    """
    rf, _ = _interpolate_core(
        _as_target_values(data),
        deg_num,
        deg_den,
        junction=junction,
        field_free=field_free,
        basis=basis,
        precision=precision,
        scale=scale,
        cond_threshold=cond_threshold,
        residual_tol=residual_tol,
        dps=dps,
    )
    return rf


def _interpolate_core(
    data: list[TargetValue],
    deg_num: int,
    deg_den: int,
    *,
    junction: float | None,
    field_free: bool,
    basis: str,
    precision: str,
    scale: float | None,
    cond_threshold: float,
    residual_tol: float,
    dps: int,
    mp_values: list | None = None,
) -> tuple[RationalFunction, _InterpDiagnostics]:
    if deg_den < 1:
        raise ValueError("denominator degree must be at least 1")
    if junction is not None and deg_num != deg_den - 1:
        raise ValueError("a junction constraint needs deg_num == deg_den - 1")
    if field_free and (deg_num + deg_den) % 2 == 0:
        raise ValueError("field-free polynomials must have opposite parity")
    if not data and junction is None:
        raise DegenerateSystemError("no constraints supplied")
    s = scale if scale is not None else max((abs(tv.node) for tv in data), default=1.0)
    if not s > 0:
        raise ValueError("scale must be positive")

    if precision in ("auto", "double"):
        rf, cond = _interpolate_double(
            data, deg_num, deg_den, junction, field_free, basis, s
        )
        escalate = precision == "auto" and cond > cond_threshold
        if not escalate:
            try:
                _check_residuals(rf, data, residual_tol)
                return rf, _InterpDiagnostics(cond, "double")
            except DegenerateSystemError as exc:
                if precision == "double":
                    raise DegenerateSystemError(str(exc), conditioning=cond) from exc
    else:
        cond = math.inf

    rf_mp, _ = _interpolate_mp(
        data, deg_num, deg_den, junction, field_free, s, dps, mp_values
    )
    rf = rf_mp.to_double()
    if deg_den <= 16:
        # at larger degrees the double monomial form cannot be *evaluated*
        # reliably even though each coefficient is faithful; the residuals
        # were already verified on the extended-precision representation
        _check_residuals(rf, data, max(residual_tol, 1e-10))
    return rf, _InterpDiagnostics(cond, "extended")


# ---------------------------------------------------------------------------
# extended-precision machinery
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class _MpRational:
    """Extension polynomials with exact mpmath coefficients in u = x/scale."""

    num_u: list
    den_u: list
    scale: float

    def to_double(self) -> RationalFunction:
        s = mpmath.mpf(self.scale)
        den = np.array(
            [float(c / s**j) for j, c in enumerate(self.den_u)], dtype=np.float64
        )
        num = np.array(
            [float(c / s**j) for j, c in enumerate(self.num_u)], dtype=np.float64
        )
        return RationalFunction(num, den)


def _mp_polyval_asc(coeffs: list, x):
    acc = mpmath.mpf(0)
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def _mp_char_poly(diag: np.ndarray, offdiag: np.ndarray, x) -> tuple:
    """(Q, P) of a Jacobi matrix at x in mpmath, junction-first orientation."""
    n = diag.size
    q = x - mpmath.mpf(float(diag[n - 1]))
    p = mpmath.mpf(1)
    for k in range(n - 2, -1, -1):
        b2 = mpmath.mpf(float(offdiag[k])) ** 2
        q, p = (x - mpmath.mpf(float(diag[k]))) * q - b2 * p, q
    return q, p


def _mp_fold(central: ChainSpec) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    plus, minus = fold_symmetric(central)
    return {"+": (plus.diag, plus.offdiag), "-": (minus.diag, minus.offdiag)}


def _mp_target_values(
    central: ChainSpec, targets, data: list[TargetValue]
) -> list:
    """Recompute non-pole data values in extended precision."""
    blocks = _mp_fold(central)
    out = []
    for (value, sector), tv in zip(targets, data):
        if tv.is_pole:
            out.append(None)
            continue
        diag, offdiag = blocks[sector]
        q, p = _mp_char_poly(diag, offdiag, mpmath.mpf(float(value)))
        out.append(q / p)
    return out


def _interpolate_mp(
    data: list[TargetValue],
    deg_num: int,
    deg_den: int,
    junction: float | None,
    field_free: bool,
    scale: float,
    dps: int,
    mp_values: list | None,
) -> tuple[_MpRational, float]:
    den_idx = [int(j) for j in _coeff_indices(deg_den, field_free)]
    num_idx = [int(j) for j in _coeff_indices(deg_num, field_free)]
    n_unk = len(den_idx) + len(num_idx)
    lead_pos = len(den_idx) - 1  # monic normalisation on the denominator lead
    with mpmath.workdps(dps):
        s = mpmath.mpf(scale)
        monic_lead = s ** deg_den
        rows = []
        rhs = []
        for i, tv in enumerate(data):
            u = mpmath.mpf(float(tv.node)) / s
            if tv.is_pole:
                f = None
            elif mp_values is not None and mp_values[i] is not None:
                f = mp_values[i]
            else:
                f = mpmath.mpf(float(tv.value))
            den_cols = [u**j for j in den_idx]
            num_cols = [u**j for j in num_idx]
            if f is None:
                row = den_cols + [mpmath.mpf(0)] * len(num_cols)
            else:
                row = [f * c for c in den_cols] + [-c for c in num_cols]
            rows.append(row)
        if junction is not None:
            j2 = mpmath.mpf(float(junction)) ** 2
            row = [mpmath.mpf(0)] * n_unk
            row[n_unk - 1] = s ** -deg_num
            row[lead_pos] = -j2 * s ** -deg_den
            rows.append(row)
        if len(rows) < n_unk - 1:
            raise DegenerateSystemError(
                f"underdetermined system: {len(rows)} constraints for {n_unk} coefficients"
            )
        # move the monic column to the right-hand side and solve least squares
        a = mpmath.matrix(len(rows), n_unk - 1)
        b = mpmath.matrix(len(rows), 1)
        for i, row in enumerate(rows):
            rmax = max(abs(c) for c in row)
            if rmax == 0:
                raise DegenerateSystemError("constraint row is identically zero")
            cols = [c / rmax for j, c in enumerate(row) if j != lead_pos]
            for j, c in enumerate(cols):
                a[i, j] = c
            b[i] = -(row[lead_pos] / rmax) * monic_lead
        try:
            x, _ = mpmath.qr_solve(a, b)
        except (ZeroDivisionError, ValueError) as exc:
            raise DegenerateSystemError(f"extended-precision solve failed: {exc}") from exc
        vec = [x[j] for j in range(n_unk - 1)]
        vec.insert(lead_pos, monic_lead)
        den_u = [mpmath.mpf(0)] * (deg_den + 1)
        num_u = [mpmath.mpf(0)] * (deg_num + 1)
        for j, c in zip(den_idx, vec[: len(den_idx)]):
            den_u[j] = c
        for j, c in zip(num_idx, vec[len(den_idx) :]):
            num_u[j] = c
        # residuals of the defining equations, in extended precision
        worst = mpmath.mpf(0)
        for i, tv in enumerate(data):
            u = mpmath.mpf(float(tv.node)) / s
            q = _mp_polyval_asc(den_u, u)
            p = _mp_polyval_asc(num_u, u)
            if tv.is_pole:
                denom_scale = max(abs(_mp_polyval_asc(den_u, mpmath.mpf(float(t.node)) / s))
                                  for t in data)
                res = abs(q) / denom_scale
            else:
                f = mp_values[i] if (mp_values is not None and mp_values[i] is not None) \
                    else mpmath.mpf(float(tv.value))
                lhs = q * f
                res = abs(lhs - p) / max(abs(lhs), abs(p), mpmath.mpf("1e-300"))
            worst = max(worst, res)
        if worst > mpmath.mpf(10) ** (-dps // 2):
            raise DegenerateSystemError(
                f"extended-precision residual {mpmath.nstr(worst, 3)} indicates an"
                " inconsistent or rank-deficient system"
            )
        return _MpRational(num_u, den_u, scale), float(worst)


def _mp_measure(
    rf_mp: _MpRational, field_free: bool, dps: int
) -> tuple[list, list]:
    """Roots of the denominator and partial-fraction residues, in mpmath."""
    with mpmath.workdps(dps):
        den = rf_mp.den_u
        deg = len(den) - 1
        lead = den[-1]
        tol = mpmath.mpf(10) ** (-dps // 2)
        if field_free:
            if deg % 2 == 0:
                even = [den[2 * k] / lead for k in range((deg // 2) + 1)]
                y_coeffs = list(reversed(even))
                y_roots = mpmath.polyroots(y_coeffs, maxsteps=200, extraprec=2 * dps)
                u_roots = []
                for y in y_roots:
                    if abs(mpmath.im(y)) > tol * max(abs(y), 1) or mpmath.re(y) <= 0:
                        raise InfeasibleExtensionError(
                            "denominator roots are not real and distinct: no chain"
                            " realises these targets"
                        )
                    r = mpmath.sqrt(mpmath.re(y))
                    u_roots.extend([r, -r])
            else:
                odd = [den[2 * k + 1] / lead for k in range((deg + 1) // 2)]
                y_coeffs = list(reversed(odd))
                y_roots = (
                    mpmath.polyroots(y_coeffs, maxsteps=200, extraprec=2 * dps)
                    if len(y_coeffs) > 1
                    else []
                )
                u_roots = [mpmath.mpf(0)]
                for y in y_roots:
                    if abs(mpmath.im(y)) > tol * max(abs(y), 1) or mpmath.re(y) <= 0:
                        raise InfeasibleExtensionError(
                            "denominator roots are not real and distinct: no chain"
                            " realises these targets"
                        )
                    r = mpmath.sqrt(mpmath.re(y))
                    u_roots.extend([r, -r])
        else:
            coeffs = list(reversed([c / lead for c in den]))
            roots = mpmath.polyroots(coeffs, maxsteps=200, extraprec=2 * dps)
            u_roots = []
            span = max(max(abs(r) for r in roots), mpmath.mpf(1))
            for r in roots:
                if abs(mpmath.im(r)) > tol * span:
                    raise InfeasibleExtensionError(
                        "denominator roots are not real: no chain realises these targets"
                    )
                u_roots.append(mpmath.re(r))
        u_roots.sort()
        span = max(max(abs(r) for r in u_roots), mpmath.mpf(1))
        for r1, r2 in zip(u_roots, u_roots[1:]):
            if r2 - r1 <= tol * span:
                raise InfeasibleExtensionError(
                    "denominator roots are not simple: no chain realises these targets"
                )
        s = mpmath.mpf(rf_mp.scale)
        x_roots = [r * s for r in u_roots]
        weights = []
        for k, u in enumerate(u_roots):
            # denominator is monic in x, so its derivative at a root is the
            # plain product of root differences (in x units)
            prod = mpmath.mpf(1)
            for j, v in enumerate(u_roots):
                if j != k:
                    prod *= (u - v) * s
            weights.append(_mp_polyval_asc(rf_mp.num_u, u) / prod)
        return x_roots, weights


def _mp_lanczos(nodes: list, weights: list, dps: int) -> tuple[list, list]:
    """Jacobi matrix of the discrete measure sum w_k delta(nodes_k)."""
    with mpmath.workdps(dps):
        m = len(nodes)
        total = mpmath.fsum(weights)
        v = [mpmath.sqrt(w / total) for w in weights]
        basis = [v]
        alphas = []
        betas = []
        prev = None
        beta_prev = mpmath.mpf(0)
        cur = v
        for k in range(m):
            dv = [nodes[i] * cur[i] for i in range(m)]
            alpha = mpmath.fsum(dv[i] * cur[i] for i in range(m))
            alphas.append(alpha)
            if k == m - 1:
                break
            r = [dv[i] - alpha * cur[i] for i in range(m)]
            if prev is not None:
                r = [r[i] - beta_prev * prev[i] for i in range(m)]
            for _ in range(2):  # full reorthogonalisation, twice
                for q in basis:
                    c = mpmath.fsum(r[i] * q[i] for i in range(m))
                    r = [r[i] - c * q[i] for i in range(m)]
            beta = mpmath.sqrt(mpmath.fsum(x * x for x in r))
            if beta <= mpmath.mpf(10) ** (-dps + 10):
                raise InfeasibleExtensionError(
                    "reconstruction broke down: measure has effectively fewer support points"
                )
            nxt = [x / beta for x in r]
            basis.append(nxt)
            betas.append(beta)
            prev, cur, beta_prev = cur, nxt, beta
        return alphas, betas


# ---------------------------------------------------------------------------
# reconstruction from the rational function
# ---------------------------------------------------------------------------


def _jacobi_from_measure(nodes: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    m = nodes.size
    v = np.sqrt(weights / np.sum(weights))
    basis = [v]
    alphas = np.zeros(m)
    betas = np.zeros(max(m - 1, 0))
    prev = None
    beta_prev = 0.0
    cur = v
    scale = np.max(np.abs(nodes), initial=1.0)
    for k in range(m):
        dv = nodes * cur
        alphas[k] = cur @ dv
        if k == m - 1:
            break
        r = dv - alphas[k] * cur
        if prev is not None:
            r = r - beta_prev * prev
        for _ in range(2):
            for q in basis:
                r = r - (q @ r) * q
        beta = np.linalg.norm(r)
        if beta <= 1e4 * np.finfo(float).eps * scale:
            raise InfeasibleExtensionError(
                "reconstruction broke down: measure has effectively fewer support points"
            )
        betas[k] = beta
        nxt = r / beta
        basis.append(nxt)
        prev, cur, beta_prev = cur, nxt, beta
    return alphas, betas


def _roots_double(rf: RationalFunction) -> np.ndarray:
    if rf.basis == "chebyshev":
        roots = npcheb.chebroots(rf.denominator) * rf.scale
    else:
        roots = nppoly.polyroots(rf.denominator)
    span = np.max(np.abs(roots), initial=1.0)
    if np.max(np.abs(np.imag(roots)), initial=0.0) > 1e-8 * span:
        raise InfeasibleExtensionError(
            "denominator roots are not real: no chain realises these targets"
        )
    roots = np.sort(np.real(roots))
    if roots.size > 1 and np.min(np.diff(roots)) <= 1e-10 * span:
        raise InfeasibleExtensionError(
            "denominator roots are not simple: no chain realises these targets"
        )
    return roots


def _check_junction(total: float, junction: float | None) -> float:
    if total <= 0:
        raise InfeasibleExtensionError(
            "partial-fraction weights are not positive: no chain realises these targets"
        )
    if junction is None:
        return math.sqrt(total)
    j_value = float(junction)
    if abs(total - j_value**2) > 1e-6 * max(j_value**2, 1e-300):
        raise InfeasibleExtensionError(
            f"residue sum {total:.6e} is inconsistent with the fixed junction"
            f" coupling squared {j_value**2:.6e}"
        )
    return j_value


def _reconstruct_double(
    f: RationalFunction, junction: float | None
) -> tuple[np.ndarray, np.ndarray, float]:
    roots = _roots_double(f)
    m = roots.size
    if m != f.deg_den:
        raise InfeasibleExtensionError("denominator degree collapsed at its roots")
    # residues of num/den with a monic denominator: num(mu_k) / prod(mu_k - mu_j)
    resid = np.empty(m)
    for k in range(m):
        diff = roots[k] - np.delete(roots, k)
        resid[k] = f.numerator_at(roots[k]) / np.prod(diff)
    if np.any(resid <= 0):
        raise InfeasibleExtensionError(
            "partial-fraction weights are not positive: no chain realises these targets"
        )
    total = float(np.sum(resid))
    j_value = _check_junction(total, junction)
    fields, couplings = _jacobi_from_measure(roots, resid / total)
    return couplings, fields, j_value


def _reconstruct_extended(
    f: RationalFunction, junction: float | None, dps: int
) -> tuple[np.ndarray, np.ndarray, float]:
    rf_mp = _MpRational(
        [mpmath.mpf(float(c)) for c in f.numerator],
        [mpmath.mpf(float(c)) for c in f.denominator],
        1.0,
    )
    roots, weights = _mp_measure(rf_mp, False, dps)
    with mpmath.workdps(dps):
        if any(w <= 0 for w in weights):
            raise InfeasibleExtensionError(
                "partial-fraction weights are not positive: no chain realises these targets"
            )
        total = float(mpmath.fsum(weights))
    j_value = _check_junction(total, junction)
    alphas, betas = _mp_lanczos(roots, weights, dps)
    fields = np.array([float(a) for a in alphas])
    couplings = np.array([float(b) for b in betas])
    return couplings, fields, j_value


def reconstruct_chain(
    f: RationalFunction,
    *,
    junction: float | None = None,
    dps: int = 40,
) -> tuple[np.ndarray, np.ndarray, float]:
    """Recover the extension chain encoded by ``f = J^2 P / Q``.

    Expands the rational function into its partial fractions: the
    denominator roots are the extension block's eigenvalues and the residues
    are ``J^2`` times its junction-site spectral weights.  Running the
    orthogonal-polynomial (Stieltjes) recurrence on that discrete measure
    rebuilds the tridiagonal matrix, which is exactly the continued-fraction
    expansion of ``Q/P`` evaluated stably.  Couplings take the positive
    gauge.

    Root extraction and the recurrence run in extended precision for
    power-basis input: the coefficients-to-chain map amplifies last-place
    root perturbations by several orders, which double root-finding cannot
    afford (Chebyshev input goes through the colleague matrix, which is
    stable as is).  Returns ``(couplings, fields, junction)``, site 1 at
    the junction.  Non-real or repeated roots, or non-positive residues,
    mean no valid chain exists and raise
    :class:`InfeasibleExtensionError`.
    """
    if f.deg_num != f.deg_den - 1:
        raise ValueError("need deg_num == deg_den - 1 for a chain reconstruction")
    if f.basis == "chebyshev":
        return _reconstruct_double(f, junction)
    return _reconstruct_extended(f, junction, dps)


# ---------------------------------------------------------------------------
# orchestration
# ---------------------------------------------------------------------------


def _assemble(central: ChainSpec, ext_fields: np.ndarray, ext_couplings: np.ndarray, j: float) -> ChainSpec:
    couplings = np.concatenate(
        [ext_couplings[::-1], [j], central.couplings, [j], ext_couplings]
    )
    fields = np.concatenate([ext_fields[::-1], central.fields, ext_fields])
    return ChainSpec(couplings, fields)


def _constraint_residual(
    ext: JacobiMatrix, block: JacobiMatrix, j: float, lam: float
) -> float:
    qa, pa, _ = _char_poly_scaled(ext.diag, ext.offdiag, lam)
    qb, pb, _ = _char_poly_scaled(block.diag, block.offdiag, lam)
    t1 = qa * qb
    t2 = (j * j) * pa * pb
    scale = (abs(qa) + j * j * abs(pa)) * (abs(qb) + abs(pb))
    return abs(t1 - t2) / max(scale, 1e-300)


def _verify_solution(
    problem: ExtensionProblem,
    ext_fields: np.ndarray,
    ext_couplings: np.ndarray,
    j: float,
    spectral_tol: float,
) -> tuple[ChainSpec, tuple[TargetResidual, ...]]:
    assembled = _assemble(problem.central, ext_fields, ext_couplings, j)
    dec = eigendecompose(build_hamiltonian(assembled))
    if dec.symmetry_labels is None:
        raise VerificationError("assembled chain lost mirror symmetry")
    labels = np.array(dec.symmetry_labels)
    ext_matrix = JacobiMatrix(ext_fields, ext_couplings)
    plus, minus = fold_symmetric(problem.central)
    blocks = {"+": plus, "-": minus}

    expanded: list[tuple[float, str]] = list(problem.targets)
    if problem.field_free:
        expanded += [(-v, "-" if s == "+" else "+") for v, s in problem.targets]

    records = []
    for lam, sector in expanded:
        sector_eigs = dec.eigenvalues[labels == sector]
        if sector_eigs.size == 0:
            raise VerificationError(f"no eigenvalues in sector {sector}")
        k = int(np.argmin(np.abs(sector_eigs - lam)))
        spectral = float(abs(sector_eigs[k] - lam))
        constraint = _constraint_residual(ext_matrix, blocks[sector], j, lam)
        records.append(
            TargetResidual(lam, sector, constraint, spectral, float(sector_eigs[k]))
        )
    worst = max((r.spectral_residual for r in records), default=0.0)
    if worst > spectral_tol:
        raise VerificationError(
            f"assembled spectrum misses a target by {worst:.3e}"
            f" (tolerance {spectral_tol:.1e})"
        )
    return assembled, tuple(records)


def _solve_double(
    problem: ExtensionProblem,
    data: list[TargetValue],
    basis: str,
    cond_threshold: float,
    residual_tol: float,
) -> tuple[np.ndarray, np.ndarray, float, float]:
    m = problem.extension_size
    rf, cond = _interpolate_double(
        data,
        m - 1,
        m,
        problem.junction,
        problem.field_free,
        basis,
        max(abs(tv.node) for tv in data) if data else 1.0,
    )
    if cond > cond_threshold:
        raise DegenerateSystemError("conditioning beyond threshold", conditioning=cond)
    _check_residuals(rf, data, residual_tol)
    couplings, fields, j = reconstruct_chain(rf, junction=problem.junction)
    return fields, couplings, j, cond


def _solve_extended(
    problem: ExtensionProblem,
    data: list[TargetValue],
    dps: int,
) -> tuple[np.ndarray, np.ndarray, float]:
    m = problem.extension_size
    mp_values = _mp_target_values(problem.central, problem.targets, data)
    scale = max(abs(tv.node) for tv in data) if data else 1.0
    rf_mp, _ = _interpolate_mp(
        data, m - 1, m, problem.junction, problem.field_free, scale, dps, mp_values
    )
    roots, weights = _mp_measure(rf_mp, problem.field_free, dps)
    with mpmath.workdps(dps):
        total = mpmath.fsum(weights)
        if total <= 0 or any(w <= 0 for w in weights):
            raise InfeasibleExtensionError(
                "partial-fraction weights are not positive: no chain realises these targets"
            )
        if problem.junction is None:
            j = float(mpmath.sqrt(total))
        else:
            j = float(problem.junction)
            if abs(total - mpmath.mpf(j) ** 2) > 1e-6 * max(j * j, 1e-300):
                raise InfeasibleExtensionError(
                    "residue sum is inconsistent with the fixed junction coupling"
                )
    alphas, betas = _mp_lanczos(roots, weights, dps)
    fields = np.array([float(a) for a in alphas])
    couplings = np.array([float(b) for b in betas])
    return fields, couplings, j


def solve_extension(
    problem: ExtensionProblem,
    *,
    spectral_tol: float | None = None,
    residual_tol: float = DEFAULT_RESIDUAL_TOL,
    basis: str = "power",
    precision: str = "auto",
    cond_threshold: float = DEFAULT_COND_THRESHOLD,
    dps: int = DEFAULT_DPS,
) -> ExtensionSolution:
    """Design the symmetric extension that pins the requested eigenvalues.

    Runs the full pipeline: fold the central chain, evaluate the constraint
    data at each target, fit the junction rational function, reconstruct the
    extension chain and assemble ``reversed extension + junction + central +
    junction + extension``.  The assembled spectrum is then verified
    independently: every target must appear in its declared symmetry sector
    within ``spectral_tol`` (default ``1e-8 * max |target|``).

    ``precision="auto"`` solves in double precision first and transparently
    re-runs the pipeline in extended precision when the conditioning
    diagnostic exceeds ``cond_threshold`` or verification fails.
    """
    data = target_values(problem.central, problem.targets)
    if spectral_tol is None:
        spectral_tol = 1e-8 * max((abs(v) for v, _ in problem.targets), default=1.0)

    attempts: list[str]
    if precision == "auto":
        attempts = ["double", "extended"]
    elif precision in ("double", "extended"):
        attempts = [precision]
    else:
        raise ValueError(f"unknown precision {precision!r}")

    last_error: Exception | None = None
    cond = math.inf
    for attempt in attempts:
        try:
            if attempt == "double":
                fields, couplings, j, cond = _solve_double(
                    problem, data, basis, cond_threshold, residual_tol
                )
            else:
                fields, couplings, j = _solve_extended(problem, data, dps)
            assembled, records = _verify_solution(
                problem, fields, couplings, j, spectral_tol
            )
            ext = ChainSpec(couplings, fields) if couplings.size else ChainSpec(
                np.zeros(0), fields
            )
            return ExtensionSolution(
                extension=ext,
                junction=j,
                assembled=assembled,
                achieved_targets=records,
                conditioning=cond,
                precision=attempt,
            )
        except (DegenerateSystemError, InfeasibleExtensionError, VerificationError) as exc:
            last_error = exc
            continue
    assert last_error is not None
    raise last_error


# ---------------------------------------------------------------------------
# problem files
# ---------------------------------------------------------------------------


def load_problem(path: str) -> tuple[ExtensionProblem, float | None]:
    """Read an extension problem from JSON.

    Schema: ``{"central": {"couplings": [...], "fields": [...]}, "M": int,
    "junction": {"mode": "known"|"unknown", "value"?: float},
    "delta"?: float, "targets"?: [[value, "+"|"-"], ...],
    "field_free": bool}``.  When ``targets`` is omitted, ``delta`` generates
    the half-integer ladder (positive members only in field-free mode);
    that generation is defined for the unknown-junction mode.
    """
    doc = jsonio.read_json(path)
    if not isinstance(doc, dict):
        raise InputError(f"{path}: expected a JSON object")
    try:
        central_doc = doc["central"]
        central = ChainSpec(
            np.asarray(central_doc["couplings"], dtype=np.float64),
            np.asarray(central_doc["fields"], dtype=np.float64),
        )
        m = int(doc["M"])
        junction_doc = doc.get("junction", {"mode": "unknown"})
        mode = junction_doc.get("mode", "unknown")
        if mode == "known":
            junction = float(junction_doc["value"])
        elif mode == "unknown":
            junction = None
        else:
            raise InputError(f"{path}: junction mode must be 'known' or 'unknown'")
        field_free = bool(doc.get("field_free", True))
        delta = float(doc["delta"]) if "delta" in doc else None
        if "targets" in doc:
            targets = tuple((float(v), str(s)) for v, s in doc["targets"])
        elif delta is not None:
            if junction is not None:
                raise InputError(
                    f"{path}: generated ladder targets need the unknown-junction mode;"
                    " list targets explicitly instead"
                )
            ladder = pst_target_spectrum(m, delta)
            targets = tuple((v, s) for v, s in ladder if not field_free or v > 0)
        else:
            raise InputError(f"{path}: need either 'targets' or 'delta'")
        problem = ExtensionProblem(
            central=central,
            extension_size=m,
            junction=junction,
            targets=targets,
            field_free=field_free,
        )
        return problem, delta
    except InputError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: {exc}") from exc
