"""Small dense semidefinite programs with primal/dual certificates.

Standard form handled here: block-diagonal Hermitian matrix variables
``X_1, ..., X_B``, a linear objective ``sum_b <O_b, X_b>`` (trace inner
product), real equality constraints ``sum_b <A_{c,b}, X_b> = rhs_c``, optional
PSD-offset constraints ``G_0 + sum_b c_b X_b >= 0`` (compiled into slack
blocks), and ``X_b >= 0``.

The internal solver is an infeasible-start primal-dual path-following method
with Nesterov-Todd scaling and a Mehrotra predictor-corrector, specialized to
dense blocks of modest size (dimensions here never exceed ~20).  Equality
rows are orthonormalized through an SVD before iterating; inconsistent rows
yield an exact Farkas witness, and a lazy phase-1 feasibility solve certifies
PSD-infeasibility when the main iteration stalls.  Problems whose data are
entirely real are solved over real symmetric blocks (a real optimal solution
always exists in that case); complex Hermitian data keep complex blocks.

An adapter seam (``solve(..., backend="cvxpy")``) can delegate to cvxpy for
cross-checks when that package is installed; the internal backend never
imports it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg

from qgamble.quantum import hermitian_deviation, hermitize

GAP_TOL_DEFAULT = 1e-9
RESIDUAL_TOL_DEFAULT = 1e-9
MAX_ITERATIONS_DEFAULT = 200

_HERM_ATOL = 1e-12

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_MAX_ITERATIONS = "max_iterations"


class SolverError(RuntimeError):
    """A solve failed to produce the requested certificate."""


def _freeze(values: np.ndarray) -> np.ndarray:
    out = np.array(values)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class EqualityConstraint:
    """sum_b <coefficients[b], X_b> = rhs (trace inner product, real rhs)."""

    coefficients: tuple          # tuple of (block_index, matrix)
    rhs: float

    def __init__(self, coefficients: Mapping[int, np.ndarray], rhs: float):
        items = tuple(sorted((int(b), _freeze(np.asarray(m))) for b, m in coefficients.items()))
        object.__setattr__(self, "coefficients", items)
        object.__setattr__(self, "rhs", float(rhs))


@dataclass(frozen=True, eq=False)
class PsdOffsetConstraint:
    """constant + sum_b coefficients[b] * X_b must be PSD."""

    constant: np.ndarray
    coefficients: tuple          # tuple of (block_index, real scalar)

    def __init__(self, constant: np.ndarray, coefficients: Mapping[int, float]):
        object.__setattr__(self, "constant", _freeze(np.asarray(constant)))
        items = tuple(sorted((int(b), float(c)) for b, c in coefficients.items()))
        object.__setattr__(self, "coefficients", items)


@dataclass(frozen=True, eq=False)
class SdpProblem:
    block_dims: tuple
    objective: tuple             # one Hermitian matrix per block
    equalities: tuple            # EqualityConstraint, ...
    psd_offsets: tuple           # PsdOffsetConstraint, ...
    sense: str                   # "maximize" | "minimize"


@dataclass(frozen=True)
class IterationStat:
    """One recorded interior-point iterate (user sign convention)."""

    primal_objective: float
    dual_objective: float
    mu: float
    primal_residual: float
    dual_residual: float
    weak_duality_slack: float    # |<r_p, y>| + |sum <R_d, X>|: exact correction term


@dataclass(frozen=True, eq=False)
class SdpSolution:
    status: str
    primal_value: float
    dual_value: float
    gap: float
    block_values: tuple
    slack_values: tuple
    dual_vector: np.ndarray          # one multiplier per user equality constraint
    dual_certificate: tuple          # per block: sum_c y_c A_{c,b} over all constraints
    dual_offsets: tuple              # per PSD-offset constraint: its PSD dual multiplier
    primal_residual: float
    dual_residual: float
    iterations: int
    history: tuple
    infeasibility_witness: np.ndarray | None = None


def hermitian_basis(dim: int, real: bool = False) -> list:
    """Orthonormal basis of the (real-)Hermitian matrices of size `dim`.

    Complex field: dim^2 elements (diagonal, symmetric, antisymmetric-imag).
    Real field: dim*(dim+1)/2 elements (diagonal, symmetric).
    """
    basis = []
    dtype = float if real else complex
    for i in range(dim):
        m = np.zeros((dim, dim), dtype=dtype)
        m[i, i] = 1.0
        basis.append(m)
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    for i in range(dim):
        for j in range(i + 1, dim):
            m = np.zeros((dim, dim), dtype=dtype)
            m[i, j] = inv_sqrt2
            m[j, i] = inv_sqrt2
            basis.append(m)
    if not real:
        for i in range(dim):
            for j in range(i + 1, dim):
                m = np.zeros((dim, dim), dtype=complex)
                m[i, j] = 1j * inv_sqrt2
                m[j, i] = -1j * inv_sqrt2
                basis.append(m)
    return basis


def assemble(
    blocks: Sequence[tuple],
    equalities: Sequence[tuple] = (),
    offsets: Sequence[tuple] = (),
    sense: str = "maximize",
) -> SdpProblem:
    """Validate and build an SdpProblem.

    `blocks`: (dimension, objective matrix) pairs.
    `equalities`: ({block index: coefficient matrix}, rhs) pairs.
    `offsets`: (constant matrix, {block index: scalar}) pairs.
    """
    if sense not in ("maximize", "minimize"):
        raise ValueError(f"sense must be maximize or minimize, got {sense!r}.")
    if len(blocks) == 0:
        raise ValueError("problem needs at least one block.")
    dims = []
    objective = []
    for k, (dim, obj) in enumerate(blocks):
        dim = int(dim)
        if dim < 1:
            raise ValueError(f"block {k} dimension must be >= 1.")
        m = np.asarray(obj)
        if m.shape != (dim, dim):
            raise ValueError(f"block {k} objective has shape {m.shape}, expected {(dim, dim)}.")
        dev = hermitian_deviation(m)
        if dev > _HERM_ATOL:
            raise ValueError(f"block {k} objective deviates from Hermitian by {dev:.3e}.")
        dims.append(dim)
        objective.append(_freeze(m))
    eqs = []
    for c, (coeffs, rhs) in enumerate(equalities):
        rhs = float(rhs)
        if not np.isfinite(rhs):
            raise ValueError(f"equality {c} has non-finite rhs.")
        checked = {}
        for b, m in dict(coeffs).items():
            b = int(b)
            if not 0 <= b < len(dims):
                raise ValueError(f"equality {c} references unknown block {b}.")
            m = np.asarray(m)
            if m.shape != (dims[b], dims[b]):
                raise ValueError(
                    f"equality {c} coefficient for block {b} has shape {m.shape}, "
                    f"expected {(dims[b], dims[b])}."
                )
            dev = hermitian_deviation(m)
            if dev > _HERM_ATOL:
                raise ValueError(f"equality {c} coefficient deviates from Hermitian by {dev:.3e}.")
            checked[b] = m
        if not checked:
            raise ValueError(f"equality {c} has no coefficients.")
        eqs.append(EqualityConstraint(checked, rhs))
    offs = []
    for j, (constant, coeffs) in enumerate(offsets):
        g0 = np.asarray(constant)
        if g0.ndim != 2 or g0.shape[0] != g0.shape[1]:
            raise ValueError(f"offset {j} constant must be square.")
        dev = hermitian_deviation(g0)
        if dev > _HERM_ATOL:
            raise ValueError(f"offset {j} constant deviates from Hermitian by {dev:.3e}.")
        checked = {}
        for b, c in dict(coeffs).items():
            b = int(b)
            if not 0 <= b < len(dims):
                raise ValueError(f"offset {j} references unknown block {b}.")
            if dims[b] != g0.shape[0]:
                raise ValueError(f"offset {j} mixes dimensions {dims[b]} and {g0.shape[0]}.")
            checked[b] = float(c)
        if not checked:
            raise ValueError(f"offset {j} involves no blocks.")
        offs.append(PsdOffsetConstraint(g0, checked))
    if not eqs and not offs:
        # only bounded objectives are allowed without constraints
        for k, m in enumerate(objective):
            eigs = np.linalg.eigvalsh(hermitize(np.asarray(m, dtype=complex)))
            if sense == "maximize" and eigs[-1] > _HERM_ATOL:
                raise ValueError("unconstrained problem with unbounded objective.")
            if sense == "minimize" and eigs[0] < -_HERM_ATOL:
                raise ValueError("unconstrained problem with unbounded objective.")
    return SdpProblem(tuple(dims), tuple(objective), tuple(eqs), tuple(offs), sense)


# ---------------------------------------------------------------------------
# compilation helpers


def _problem_is_real(problem: SdpProblem) -> bool:
    mats = list(problem.objective)
    for eq in problem.equalities:
        mats.extend(m for _, m in eq.coefficients)
    for off in problem.psd_offsets:
        mats.append(off.constant)
    return all(np.isrealobj(m) or not np.any(np.abs(np.imag(m)) > 0) for m in mats)


def _svec_len(dim: int, real: bool) -> int:
    return dim * (dim + 1) // 2 if real else dim * dim


def _svec(matrix: np.ndarray, real: bool) -> np.ndarray:
    """Real vectorization preserving the trace inner product."""
    d = matrix.shape[0]
    iu = np.triu_indices(d, k=1)
    parts = [np.real(np.diagonal(matrix)), np.sqrt(2.0) * np.real(matrix[iu])]
    if not real:
        parts.append(np.sqrt(2.0) * np.imag(matrix[iu]))
    return np.concatenate(parts)


def _unsvec(vec: np.ndarray, dim: int, real: bool) -> np.ndarray:
    d = dim
    iu = np.triu_indices(d, k=1)
    n_off = iu[0].size
    out = np.zeros((d, d), dtype=float if real else complex)
    out[np.arange(d), np.arange(d)] = vec[:d]
    upper = vec[d : d + n_off] / np.sqrt(2.0)
    if not real:
        upper = upper + 1j * vec[d + n_off : d + 2 * n_off] / np.sqrt(2.0)
    out[iu] = upper
    out[(iu[1], iu[0])] = np.conj(upper)
    return out


@dataclass
class _Compiled:
    dims: list                 # all block dims (user + slack)
    n_user_blocks: int
    objective: list            # internal minimization objective per block
    constraints: list          # per block: (m, d, d) stacked coefficient arrays
    rhs: np.ndarray
    n_user_eqs: int
    real: bool
    sign: float                # +1 minimize, -1 maximize (internal = sign * user)
    offset_eq_slices: list     # per offset: slice into constraint rows


def _compile(problem: SdpProblem) -> _Compiled:
    real = _problem_is_real(problem)
    dtype = float if real else complex
    sign = -1.0 if problem.sense == "maximize" else 1.0
    dims = list(problem.block_dims)
    slack_dims = [off.constant.shape[0] for off in problem.psd_offsets]
    all_dims = dims + slack_dims
    objective = [sign * np.asarray(m, dtype=dtype) for m in problem.objective]
    objective += [np.zeros((d, d), dtype=dtype) for d in slack_dims]

    rows = []  # list of (dict block->matrix, rhs)
    for eq in problem.equalities:
        rows.append(({b: np.asarray(m, dtype=dtype) for b, m in eq.coefficients}, eq.rhs))
    offset_eq_slices = []
    for j, off in enumerate(problem.psd_offsets):
        k = off.constant.shape[0]
        start = len(rows)
        basis = hermitian_basis(k, real=real)
        for basis_elem in basis:
            coeffs = {len(dims) + j: np.asarray(basis_elem, dtype=dtype)}
            for b, c in off.coefficients:
                coeffs[b] = coeffs.get(b, 0) + (-c) * np.asarray(basis_elem, dtype=dtype)
            rhs = float(np.real(np.trace(basis_elem.conj().T @ np.asarray(off.constant, dtype=dtype))))
            rows.append((coeffs, rhs))
        offset_eq_slices.append(slice(start, len(rows)))

    m_total = len(rows)
    constraints = [np.zeros((m_total, d, d), dtype=dtype) for d in all_dims]
    rhs = np.zeros(m_total)
    for c, (coeffs, r) in enumerate(rows):
        rhs[c] = r
        for b, mat in coeffs.items():
            constraints[b][c] = mat
    return _Compiled(
        dims=all_dims,
        n_user_blocks=len(dims),
        objective=objective,
        constraints=constraints,
        rhs=rhs,
        n_user_eqs=len(problem.equalities),
        real=real,
        sign=sign,
        offset_eq_slices=offset_eq_slices,
    )


# ---------------------------------------------------------------------------
# interior-point core


def _apply_a(constraints: list, mats: list) -> np.ndarray:
    out = 0.0
    for ab, x in zip(constraints, mats):
        out = out + np.real(np.einsum("mij,ij->m", ab.conj(), x))
    return np.asarray(out)


def _apply_at(constraints: list, y: np.ndarray) -> list:
    return [np.tensordot(y, ab, axes=(0, 0)) for ab in constraints]


def _nt_scaling(x: np.ndarray, s: np.ndarray) -> np.ndarray:
    """W with W S W = X (both arguments Hermitian positive definite)."""
    lx, qx = np.linalg.eigh(hermitize(x))
    lx = np.clip(lx, 1e-300, None)
    rx = (qx * np.sqrt(lx)) @ qx.conj().T
    inner = hermitize(rx @ s @ rx)
    lm, qm = np.linalg.eigh(inner)
    lm = np.clip(lm, 1e-300, None)
    inner_inv_sqrt = (qm * (lm**-0.5)) @ qm.conj().T
    return hermitize(rx @ inner_inv_sqrt @ rx)


def _max_step(x: np.ndarray, dx: np.ndarray) -> float:
    """Largest t with x + t*dx PSD (x Hermitian positive definite)."""
    try:
        chol = np.linalg.cholesky(hermitize(x))
        inv = scipy.linalg.solve_triangular(chol, np.eye(x.shape[0], dtype=x.dtype), lower=True)
        mid = inv @ dx @ inv.conj().T
    except np.linalg.LinAlgError:
        lx, qx = np.linalg.eigh(hermitize(x))
        lx = np.clip(lx, 1e-300, None)
        inv_sqrt = (qx * (lx**-0.5)) @ qx.conj().T
        mid = inv_sqrt @ dx @ inv_sqrt
    lam_min = float(np.linalg.eigvalsh(hermitize(mid))[0])
    if lam_min >= -1e-14:
        return np.inf
    return -1.0 / lam_min


@dataclass
class _IpmResult:
    converged: bool
    x: list
    s: list
    y: np.ndarray
    iterations: int
    history: list
    pinf: float
    dinf: float
    gap: float


def _ipm(
    dims: list,
    objective: list,
    constraints: list,
    rhs: np.ndarray,
    gap_tol: float,
    res_tol: float,
    max_iter: int,
    sign: float,
) -> _IpmResult:
    n_total = sum(dims)
    m = rhs.size
    dtype = objective[0].dtype
    norm_b = max(1.0, float(np.linalg.norm(rhs)))
    norm_c = max(1.0, max(float(np.linalg.norm(c)) for c in objective))
    eta_p = max(1.0, norm_b)
    eta_d = max(1.0, norm_c)
    x = [eta_p * np.eye(d, dtype=dtype) for d in dims]
    s = [eta_d * np.eye(d, dtype=dtype) for d in dims]
    y = np.zeros(m)

    history: list = []
    best = None  # (merit, x, s, y, pinf, dinf, gap, it)
    merits: list = []

    def flat(mats_m):
        return [mm.reshape(m, -1) for mm in mats_m]

    a_flat = [ab.reshape(m, -1) for ab in constraints]

    for it in range(max_iter):
        r_p = rhs - _apply_a(constraints, x)
        at_y = _apply_at(constraints, y)
        r_d = [c - aty - sk for c, aty, sk in zip(objective, at_y, s)]
        mu = sum(float(np.real(np.vdot(xk, sk))) for xk, sk in zip(x, s)) / n_total
        pobj = sum(float(np.real(np.vdot(c, xk))) for c, xk in zip(objective, x))
        dobj = float(rhs @ y)
        gap = abs(pobj - dobj)
        pinf = float(np.linalg.norm(r_p)) / norm_b
        dinf = np.sqrt(sum(float(np.linalg.norm(rd) ** 2) for rd in r_d)) / norm_c
        wd_slack = abs(float(r_p @ y)) + abs(
            sum(float(np.real(np.vdot(rd, xk))) for rd, xk in zip(r_d, x))
        )
        history.append(
            IterationStat(
                primal_objective=sign * pobj,
                dual_objective=sign * dobj,
                mu=mu,
                primal_residual=pinf,
                dual_residual=dinf,
                weak_duality_slack=wd_slack,
            )
        )
        merit = max(gap, pinf * norm_b, dinf * norm_c)
        merits.append(merit)
        if best is None or merit < best[0]:
            best = (merit, [xk.copy() for xk in x], [sk.copy() for sk in s], y.copy(), pinf, dinf, gap, it)
        if gap <= gap_tol and pinf * norm_b <= res_tol * norm_b and dinf <= res_tol:
            return _IpmResult(True, x, s, y, it + 1, history, pinf, dinf, gap)
        if len(merits) > 14 and merits[-1] > 0.97 * merits[-15] and merits[-1] > 1e-4:
            break  # stalled
        if not np.isfinite(merit) or merit > 1e14:
            break  # diverging

        w = [_nt_scaling(xk, sk) for xk, sk in zip(x, s)]
        # Schur complement M[c,c'] = sum_b <A_cb, W_b A_c'b W_b>
        schur = np.zeros((m, m))
        waw_flat = []
        for ab, abf, wk in zip(constraints, a_flat, w):
            waw = np.einsum("ij,mjk,kl->mil", wk, ab, wk, optimize=True)
            waw_flat.append(waw.reshape(m, -1))
            schur += np.real(abf.conj() @ waw_flat[-1].T)
        schur = (schur + schur.T) / 2
        try:
            factor = scipy.linalg.cho_factor(schur, check_finite=False)

            def solve_schur(v):
                out = scipy.linalg.cho_solve(factor, v, check_finite=False)
                out += scipy.linalg.cho_solve(factor, v - schur @ out, check_finite=False)
                return out

        except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
            lam, q = np.linalg.eigh(schur)
            lam_clip = np.clip(lam, max(1e-15 * max(lam[-1], 1e-30), 1e-300), None)

            def solve_schur(v):
                return q @ ((q.T @ v) / lam_clip)

        s_inv = []
        for sk in s:
            ls, qs = np.linalg.eigh(hermitize(sk))
            ls = np.clip(ls, 1e-300, None)
            s_inv.append((qs * (1.0 / ls)) @ qs.conj().T)

        def newton(r_c):
            u = [rc - wk @ rdk @ wk for rc, wk, rdk in zip(r_c, w, r_d)]
            rhs_vec = r_p - _apply_a(constraints, u)
            dy = solve_schur(rhs_vec)
            at_dy = _apply_at(constraints, dy)
            ds = [rdk - atd for rdk, atd in zip(r_d, at_dy)]
            dx = [hermitize(uk + wk @ atd @ wk) for uk, wk, atd in zip(u, w, at_dy)]
            return dy, dx, ds

        # predictor
        r_c_aff = [-xk for xk in x]
        dy_a, dx_a, ds_a = newton(r_c_aff)
        ap = min([_max_step(xk, dxk) for xk, dxk in zip(x, dx_a)] + [1.0])
        ad = min([_max_step(sk, dsk) for sk, dsk in zip(s, ds_a)] + [1.0])
        mu_aff = (
            sum(
                float(np.real(np.vdot(xk + ap * dxk, sk + ad * dsk)))
                for xk, dxk, sk, dsk in zip(x, dx_a, s, ds_a)
            )
            / n_total
        )
        mu_aff = max(mu_aff, 0.0)
        sigma = min(1.0, (mu_aff / mu) ** 3) if mu > 0 else 0.1

        # corrector with a second-order term
        r_c = [
            hermitize(sigma * mu * si - xk - dxk @ dsk @ si)
            for si, xk, dxk, dsk in zip(s_inv, x, dx_a, ds_a)
        ]
        dy, dx, ds = newton(r_c)
        step_p = min([_max_step(xk, dxk) for xk, dxk in zip(x, dx)] + [np.inf])
        step_d = min([_max_step(sk, dsk) for sk, dsk in zip(s, ds)] + [np.inf])
        ap = min(1.0, 0.99 * step_p)
        ad = min(1.0, 0.99 * step_d)
        if ap <= 1e-10 and ad <= 1e-10:
            break
        x = [hermitize(xk + ap * dxk) for xk, dxk in zip(x, dx)]
        s = [hermitize(sk + ad * dsk) for sk, dsk in zip(s, ds)]
        y = y + ad * dy

    merit, bx, bs, by, pinf, dinf, gap, _ = best
    return _IpmResult(False, bx, bs, by, len(history), history, pinf, dinf, gap)


def _phase1(dims: list, constraints: list, rhs: np.ndarray, max_iter: int):
    """Feasibility check: min t s.t. A(X) + t*(b - A(I)) = b, X >= 0, t >= 0.

    Works on the row-reduced system.  Returns (feasible, witness-or-None);
    the witness y satisfies A^T(y) <= 0 (approximately) with b.y > 0.
    """
    dtype = constraints[0].dtype
    m = rhs.size
    p1_dims = dims + [1]
    objective = [np.zeros((d, d), dtype=dtype) for d in dims] + [np.ones((1, 1), dtype=dtype)]
    gap_vec = rhs - _apply_a(constraints, [np.eye(d, dtype=dtype) for d in dims])
    p1_constraints = [ab for ab in constraints] + [gap_vec.reshape(m, 1, 1).astype(dtype)]
    result = _ipm(p1_dims, objective, p1_constraints, rhs, 1e-9, 1e-9, max_iter, 1.0)
    t_star = float(np.real(result.x[-1][0, 0]))
    if result.converged and t_star <= 1e-7:
        return True, None
    if float(rhs @ result.y) > 1e-8:
        return False, result.y
    return True, None


def solve(
    problem: SdpProblem,
    gap_tolerance: float = GAP_TOL_DEFAULT,
    residual_tolerance: float = RESIDUAL_TOL_DEFAULT,
    max_iterations: int = MAX_ITERATIONS_DEFAULT,
    backend: str = "internal",
) -> SdpSolution:
    """Solve the problem to the requested duality gap and residual tolerances."""
    if not 0 < gap_tolerance <= 1e-2:
        raise ValueError(f"gap_tolerance must be in (0, 1e-2], got {gap_tolerance}.")
    if not 0 < residual_tolerance <= 1e-2:
        raise ValueError(f"residual_tolerance must be in (0, 1e-2], got {residual_tolerance}.")
    if backend == "cvxpy":
        return _solve_cvxpy(problem, gap_tolerance, residual_tolerance)
    if backend != "internal":
        raise ValueError(f"unknown backend {backend!r}.")

    compiled = _compile(problem)
    m = compiled.rhs.size
    if m == 0:
        # bounded unconstrained problem (validated at assembly): optimum 0 at X=0
        zero_blocks = tuple(np.zeros((d, d), dtype=complex) for d in problem.block_dims)
        return SdpSolution(
            status=STATUS_OPTIMAL,
            primal_value=0.0,
            dual_value=0.0,
            gap=0.0,
            block_values=zero_blocks,
            slack_values=(),
            dual_vector=np.zeros(0),
            dual_certificate=tuple(np.zeros((d, d), dtype=complex) for d in problem.block_dims),
            dual_offsets=(),
            primal_residual=0.0,
            dual_residual=0.0,
            iterations=0,
            history=(),
        )

    # orthonormalize equality rows; detect inconsistent systems exactly
    svec_lens = [_svec_len(d, compiled.real) for d in compiled.dims]
    n_svec = sum(svec_lens)
    a_mat = np.zeros((m, n_svec))
    col = 0
    for ab, ln in zip(compiled.constraints, svec_lens):
        for c in range(m):
            a_mat[c, col : col + ln] = _svec(ab[c], compiled.real)
        col += ln
    u, sv, vt = np.linalg.svd(a_mat, full_matrices=False)
    rank_tol = max(a_mat.shape) * np.finfo(float).eps * (sv[0] if sv.size else 0.0)
    r = int(np.sum(sv > max(rank_tol, 1e-13)))
    b_proj = u[:, :r] @ (u[:, :r].T @ compiled.rhs) if r else np.zeros(m)
    b_perp = compiled.rhs - b_proj
    if float(np.linalg.norm(b_perp)) > 1e-9 * (1.0 + float(np.linalg.norm(compiled.rhs))):
        witness = b_perp / np.linalg.norm(b_perp)
        return _infeasible_solution(problem, compiled, witness)
    if r == 0:
        # constraints are vacuous (all-zero rows with zero rhs)
        if any(
            np.linalg.eigvalsh(hermitize(np.asarray(om, dtype=complex)))[0] < -_HERM_ATOL
            for om in compiled.objective
        ):
            raise SolverError("problem is effectively unconstrained and unbounded.")
        zero_blocks = tuple(np.zeros((d, d), dtype=complex) for d in problem.block_dims)
        return SdpSolution(
            status=STATUS_OPTIMAL,
            primal_value=0.0,
            dual_value=0.0,
            gap=0.0,
            block_values=zero_blocks,
            slack_values=tuple(
                np.asarray(off.constant, dtype=complex) for off in problem.psd_offsets
            ),
            dual_vector=np.zeros(compiled.n_user_eqs),
            dual_certificate=tuple(np.zeros((d, d), dtype=complex) for d in problem.block_dims),
            dual_offsets=tuple(
                np.zeros(off.constant.shape, dtype=complex) for off in problem.psd_offsets
            ),
            primal_residual=0.0,
            dual_residual=0.0,
            iterations=0,
            history=(),
        )

    dtype = compiled.objective[0].dtype
    reduced_constraints = []
    col = 0
    for dim, ln in zip(compiled.dims, svec_lens):
        rows = vt[:r, col : col + ln]
        stack = np.zeros((r, dim, dim), dtype=dtype)
        for c in range(r):
            stack[c] = _unsvec(rows[c], dim, compiled.real)
        reduced_constraints.append(stack)
        col += ln
    b_reduced = (u[:, :r].T @ compiled.rhs) / sv[:r] if r else np.zeros(0)

    result = _ipm(
        compiled.dims,
        compiled.objective,
        reduced_constraints,
        b_reduced,
        gap_tolerance,
        residual_tolerance,
        max_iterations,
        compiled.sign,
    )

    if not result.converged and result.pinf > 10 * residual_tolerance:
        feasible, witness_reduced = _phase1(compiled.dims, reduced_constraints, b_reduced, max_iterations)
        if not feasible and witness_reduced is not None:
            witness = u[:, :r] @ (witness_reduced / sv[:r])
            return _infeasible_solution(problem, compiled, witness)

    # map reduced dual multipliers back to original constraint rows
    y_full = u[:, :r] @ (result.y / sv[:r]) if r else np.zeros(m)
    return _finalize(problem, compiled, result, y_full, gap_tolerance, residual_tolerance)


def _infeasible_solution(problem: SdpProblem, compiled: _Compiled, witness: np.ndarray) -> SdpSolution:
    zero_blocks = tuple(np.zeros((d, d), dtype=complex) for d in problem.block_dims)
    n_user = compiled.n_user_eqs
    return SdpSolution(
        status=STATUS_INFEASIBLE,
        primal_value=np.nan,
        dual_value=np.nan,
        gap=np.nan,
        block_values=zero_blocks,
        slack_values=(),
        dual_vector=np.asarray(witness[:n_user]),
        dual_certificate=tuple(np.zeros((d, d), dtype=complex) for d in problem.block_dims),
        dual_offsets=(),
        primal_residual=np.nan,
        dual_residual=np.nan,
        iterations=0,
        history=(),
        infeasibility_witness=np.asarray(witness),
    )


def _finalize(
    problem: SdpProblem,
    compiled: _Compiled,
    result: _IpmResult,
    y_full: np.ndarray,
    gap_tolerance: float,
    residual_tolerance: float,
) -> SdpSolution:
    sign = compiled.sign
    nb = compiled.n_user_blocks
    x = result.x
    # user-sign duals: internal min has S = C - A^T(y); for maximize flip y
    y_user = -y_full if sign < 0 else y_full

    pobj_user = sum(
        float(np.real(np.vdot(np.asarray(o, dtype=x[k].dtype), x[k])))
        for k, o in enumerate(problem.objective)
    )
    dobj_user = float(compiled.rhs @ y_user)

    at_y = _apply_at(compiled.constraints, y_user)
    certificates = tuple(hermitize(at_y[k]) for k in range(nb))
    dual_offsets = []
    for j, off in enumerate(problem.psd_offsets):
        sl = compiled.offset_eq_slices[j]
        block_idx = nb + j
        contrib = np.tensordot(y_user[sl], compiled.constraints[block_idx][sl], axes=(0, 0))
        dual_offsets.append(hermitize(contrib))

    r_p = compiled.rhs - _apply_a(compiled.constraints, x)
    pres = float(np.linalg.norm(r_p))
    # dual residual on the internal form, reported in Frobenius norm
    at_y_int = _apply_at(compiled.constraints, -y_user if sign < 0 else y_user)
    dres = 0.0
    for c, aty, sk in zip(compiled.objective, at_y_int, result.s):
        dres += float(np.linalg.norm(c - aty - sk) ** 2)
    dres = np.sqrt(dres)
    gap = abs(pobj_user - dobj_user)

    converged = (
        result.converged
        and gap <= gap_tolerance * max(1.0, abs(pobj_user), abs(dobj_user))
        and pres <= residual_tolerance * max(1.0, float(np.linalg.norm(compiled.rhs)))
    )
    status = STATUS_OPTIMAL if converged else STATUS_MAX_ITERATIONS
    return SdpSolution(
        status=status,
        primal_value=pobj_user,
        dual_value=dobj_user,
        gap=gap,
        block_values=tuple(x[k] for k in range(nb)),
        slack_values=tuple(x[nb + j] for j in range(len(problem.psd_offsets))),
        dual_vector=np.asarray(y_user[: compiled.n_user_eqs]),
        dual_certificate=certificates,
        dual_offsets=tuple(dual_offsets),
        primal_residual=pres,
        dual_residual=dres,
        iterations=result.iterations,
        history=tuple(result.history),
    )


# ---------------------------------------------------------------------------
# optional external backend and debug dump


def _solve_cvxpy(problem: SdpProblem, gap_tolerance: float, residual_tolerance: float) -> SdpSolution:
    try:
        import cvxpy as cp
    except ImportError as exc:  # pragma: no cover
        raise SolverError("cvxpy backend requested but cvxpy is not installed.") from exc

    real = _problem_is_real(problem)
    variables = []
    for d in problem.block_dims:
        variables.append(cp.Variable((d, d), symmetric=True) if real else cp.Variable((d, d), hermitian=True))
    constraints = [v >> 0 for v in variables]
    for eq in problem.equalities:
        expr = 0
        for b, mcoef in eq.coefficients:
            expr = expr + cp.real(cp.trace(np.asarray(mcoef).conj().T @ variables[b]))
        constraints.append(expr == eq.rhs)
    for off in problem.psd_offsets:
        expr = np.asarray(off.constant)
        for b, c in off.coefficients:
            expr = expr + c * variables[b]
        constraints.append(expr >> 0)
    objective = 0
    for b, o in enumerate(problem.objective):
        objective = objective + cp.real(cp.trace(np.asarray(o).conj().T @ variables[b]))
    sense = cp.Maximize(objective) if problem.sense == "maximize" else cp.Minimize(objective)
    cp_problem = cp.Problem(sense, constraints)
    value = cp_problem.solve()
    if cp_problem.status in ("infeasible", "infeasible_inaccurate"):
        return _infeasible_solution(problem, _compile(problem), np.zeros(max(1, len(problem.equalities))))
    if cp_problem.status not in ("optimal", "optimal_inaccurate"):
        raise SolverError(f"cvxpy backend returned status {cp_problem.status}.")
    block_values = tuple(np.asarray(v.value, dtype=complex) for v in variables)
    duals = np.array([float(np.real(constraints[len(variables) + c].dual_value)) for c in range(len(problem.equalities))])
    return SdpSolution(
        status=STATUS_OPTIMAL,
        primal_value=float(value),
        dual_value=float(value),
        gap=0.0,
        block_values=block_values,
        slack_values=(),
        dual_vector=duals,
        dual_certificate=tuple(np.zeros((d, d), dtype=complex) for d in problem.block_dims),
        dual_offsets=(),
        primal_residual=0.0,
        dual_residual=0.0,
        iterations=0,
        history=(),
    )


def dump_problem(problem: SdpProblem) -> str:
    """Sparse-triplet text serialization for external cross-validation."""
    lines = [f"sense {problem.sense}", f"blocks {len(problem.block_dims)}"]
    for b, dim in enumerate(problem.block_dims):
        lines.append(f"block {b} dim {dim}")

    def triplets(tag: str, b: int, mat: np.ndarray) -> list:
        out = []
        mat = np.asarray(mat, dtype=complex)
        for i, j in zip(*np.nonzero(np.abs(mat) > 0)):
            v = mat[i, j]
            out.append(f"{tag} {b} {i} {j} {v.real:.17g} {v.imag:.17g}")
        return out

    for b, obj in enumerate(problem.objective):
        lines.extend(triplets("obj", b, obj))
    for c, eq in enumerate(problem.equalities):
        lines.append(f"eq {c} rhs {eq.rhs:.17g}")
        for b, mat in eq.coefficients:
            lines.extend(triplets(f"eqcoef {c}", b, mat))
    for j, off in enumerate(problem.psd_offsets):
        coeff_text = " ".join(f"{b}:{c:.17g}" for b, c in off.coefficients)
        lines.append(f"offset {j} coeffs {coeff_text}")
        lines.extend(triplets(f"offsetconst {j}", 0, off.constant))
    return "\n".join(lines) + "\n"
