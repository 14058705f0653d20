"""Small complex-SDP modelling layer compiled to a real conic program.

Hermitian matrix variables are parametrized by their n^2 real degrees of
freedom and mapped into the real PSD cone through the standard embedding

    E(X) = [[Re X, -Im X],
            [Im X,  Re X]]

so the block symmetry of E(X) holds by construction.  Besides linear
(in)equalities and LMIs the program supports hypograph-of-log constraints
``t <= ln(x)`` (exponential cone), which the rate expressions need.

The compiled problem is handed to Clarabel.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import clarabel
import numpy as np
from scipy import sparse

__all__ = [
    "Affine",
    "ConicProgram",
    "HermAffine",
    "MatrixVar",
    "ScalarVar",
    "SolveResult",
    "embed_hermitian",
    "unembed_hermitian",
]

_SQRT2 = np.sqrt(2.0)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
NUMERICAL_FAILURE = "numerical-failure"
ITERATION_LIMIT = "iteration-limit"


def embed_hermitian(H, tol=1e-10):
    """Real symmetric 2n x 2n embedding of a Hermitian matrix."""
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {H.shape}")
    scale = max(1.0, float(np.max(np.abs(H), initial=0.0)))
    if np.max(np.abs(H - H.conj().T), initial=0.0) > tol * scale:
        raise ValueError("matrix is not Hermitian")
    re, im = H.real, H.imag
    return np.block([[re, -im], [im, re]])


def unembed_hermitian(E):
    n = E.shape[0] // 2
    return E[:n, :n] + 1j * E[n:, :n]


def _svec_index(d):
    """Row/col indices of the upper triangle, column-major (Clarabel order)."""
    rows, cols = [], []
    for j in range(d):
        for i in range(j + 1):
            rows.append(i)
            cols.append(j)
    return np.array(rows), np.array(cols)


def _svec(S, idx):
    rows, cols = idx
    v = S[..., rows, cols]
    return np.where(rows == cols, v, v * _SQRT2)


@dataclass(frozen=True)
class MatrixVar:
    name: str
    dim: int
    offset: int

    @property
    def size(self):
        return self.dim * self.dim


@dataclass(frozen=True)
class ScalarVar:
    name: str
    offset: int
    lower: float | None = None

    def _aff(self):
        return Affine({self: 1.0})

    def __add__(self, other):
        return self._aff() + other

    __radd__ = __add__

    def __sub__(self, other):
        return self._aff() - other

    def __rsub__(self, other):
        return Affine.wrap(other) - self._aff()

    def __mul__(self, c):
        return self._aff() * c

    __rmul__ = __mul__

    def __neg__(self):
        return -self._aff()


def _param_layout(n):
    """(kind, i, j) for each real parameter of an n x n Hermitian matrix.

    kind 0: diagonal X_ii, 1: Re X_ij, 2: Im X_ij (i < j).
    """
    kinds, ii, jj = [], [], []
    for i in range(n):
        for j in range(i, n):
            if i == j:
                kinds.append(0)
                ii.append(i)
                jj.append(j)
            else:
                kinds += [1, 2]
                ii += [i, i]
                jj += [j, j]
    return np.array(kinds), np.array(ii), np.array(jj)


_LAYOUTS: dict[int, tuple] = {}


def _layout(n):
    if n not in _LAYOUTS:
        _LAYOUTS[n] = _param_layout(n)
    return _LAYOUTS[n]


def _trace_coeffs(A):
    """Coefficients c with Re tr(A X) = c . params(X) for Hermitian A."""
    kinds, ii, jj = _layout(A.shape[0])
    a = A[ii, jj]
    return np.where(kinds == 0, a.real, np.where(kinds == 1, 2.0 * a.real, 2.0 * a.imag))


def _params_to_matrix(p, n):
    kinds, ii, jj = _layout(n)
    X = np.zeros((n, n), dtype=complex)
    d = kinds == 0
    X[ii[d], jj[d]] = p[d]
    re = kinds == 1
    im = kinds == 2
    X[ii[re], jj[re]] += p[re]
    X[ii[im], jj[im]] += 1j * p[im]
    X = X + np.triu(X, 1).conj().T
    return X


def _congruence_basis(C):
    """Stack of C B_p C^H for every basis element B_p of the parameter space.

    Returns an array of shape (n_params, d, d).
    """
    n = C.shape[1]
    kinds, ii, jj = _layout(n)
    ci = C[:, ii]
    cj = C[:, jj]
    outer = np.einsum("ap,bp->pab", ci, cj.conj())  # c_i c_j^H
    herm = outer + np.conj(np.swapaxes(outer, 1, 2))
    skew = 1j * (outer - np.conj(np.swapaxes(outer, 1, 2)))
    out = np.where(kinds[:, None, None] == 0, outer, np.where(kinds[:, None, None] == 1, herm, skew))
    return out


class Affine:
    """Real scalar affine expression over program variables.

    Matrix terms hold a Hermitian coefficient A meaning Re tr(A X).
    """

    __slots__ = ("terms", "const")

    def __init__(self, terms=None, const=0.0):
        self.terms = dict(terms or {})
        self.const = float(const)

    @staticmethod
    def wrap(x):
        if isinstance(x, Affine):
            return x
        if isinstance(x, ScalarVar):
            return Affine({x: 1.0})
        return Affine(const=float(x))

    def __add__(self, other):
        other = Affine.wrap(other)
        terms = dict(self.terms)
        for k, v in other.terms.items():
            terms[k] = terms[k] + v if k in terms else v
        return Affine(terms, self.const + other.const)

    __radd__ = __add__

    def __neg__(self):
        return Affine({k: -v for k, v in self.terms.items()}, -self.const)

    def __sub__(self, other):
        return self + (-Affine.wrap(other))

    def __rsub__(self, other):
        return Affine.wrap(other) - self

    def __mul__(self, c):
        c = float(c)
        return Affine({k: c * v for k, v in self.terms.items()}, c * self.const)

    __rmul__ = __mul__

    def value(self, values):
        total = self.const
        for var, coef in self.terms.items():
            x = values[var.name]
            if isinstance(var, MatrixVar):
                total += float(np.real(np.trace(coef @ x)))
            else:
                total += coef * float(x)
        return total


def tr(A, X: MatrixVar) -> Affine:
    """Affine expression Re tr(A X)."""
    A = np.asarray(A, dtype=complex)
    if A.shape != (X.dim, X.dim):
        raise ValueError(f"shape mismatch: {A.shape} vs variable {X.name} ({X.dim})")
    return Affine({X: 0.5 * (A + A.conj().T)})


def var(s: ScalarVar) -> Affine:
    return Affine({s: 1.0})


@dataclass
class HermAffine:
    """Hermitian-matrix-valued affine expression.

    const + sum_i s_i * M_i + sum_j sign_j * C_j X_j C_j^H
    """

    dim: int
    const: np.ndarray = None
    scalar_terms: list = field(default_factory=list)
    congruences: list = field(default_factory=list)

    def __post_init__(self):
        if self.const is None:
            self.const = np.zeros((self.dim, self.dim), dtype=complex)

    def add_const(self, M):
        M = np.asarray(M, dtype=complex)
        self._check(M)
        self.const = self.const + M
        return self

    def add_scalar(self, s, M):
        M = np.asarray(M, dtype=complex)
        self._check(M)
        self.scalar_terms.append((s, M))
        return self

    def add_congruence(self, X: MatrixVar, C, sign=1.0):
        C = np.asarray(C, dtype=complex)
        if C.shape != (self.dim, X.dim):
            raise ValueError(f"congruence factor shape {C.shape} does not map {X.dim} -> {self.dim}")
        self.congruences.append((X, C, float(sign)))
        return self

    def _check(self, M):
        if M.shape != (self.dim, self.dim):
            raise ValueError(f"shape mismatch: {M.shape} vs block dimension {self.dim}")

    def value(self, values):
        out = self.const.copy()
        for s, M in self.scalar_terms:
            out = out + float(values[s.name]) * M
        for X, C, sign in self.congruences:
            out = out + sign * (C @ values[X.name] @ C.conj().T)
        return out


@dataclass
class SolveResult:
    status: str
    objective: float | None
    values: dict | None
    solve_time: float
    iterations: int
    duality_gap: float | None = None

    @property
    def ok(self):
        return self.status == OPTIMAL

    def __getitem__(self, name):
        return self.values[name]


class ConicProgram:
    """Maximization problem over Hermitian PSD matrices and real scalars."""

    def __init__(self):
        self.matrix_vars: list[MatrixVar] = []
        self.scalar_vars: list[ScalarVar] = []
        self._n = 0
        self.objective = Affine()
        self.equalities: list[Affine] = []
        self.inequalities: list[Affine] = []  # expr <= 0
        self.logs: list[tuple[Affine, Affine]] = []  # t <= ln(x)
        self.lmis: list[HermAffine] = []
        self._names = set()

    def _claim(self, name):
        if name in self._names:
            raise ValueError(f"duplicate variable name {name!r}")
        self._names.add(name)

    def matrix(self, name, dim) -> MatrixVar:
        """Declare an n x n Hermitian PSD matrix variable."""
        self._claim(name)
        v = MatrixVar(name, int(dim), self._n)
        self._n += v.size
        self.matrix_vars.append(v)
        return v

    def scalar(self, name, lower=None) -> ScalarVar:
        self._claim(name)
        v = ScalarVar(name, self._n, lower)
        self._n += 1
        self.scalar_vars.append(v)
        return v

    def maximize(self, expr):
        self.objective = Affine.wrap(expr)

    def add_eq(self, lhs, rhs=0.0):
        self.equalities.append(Affine.wrap(lhs) - Affine.wrap(rhs))

    def add_le(self, lhs, rhs=0.0):
        self.inequalities.append(Affine.wrap(lhs) - Affine.wrap(rhs))

    def add_ge(self, lhs, rhs=0.0):
        self.add_le(rhs, lhs)

    def add_log(self, t, x):
        """Constrain t <= ln(x)."""
        self.logs.append((Affine.wrap(t), Affine.wrap(x)))

    def add_lmi(self, block: HermAffine):
        """Require ``block`` to be positive semidefinite; returns its index."""
        for X, _, _ in block.congruences:
            if X not in self.matrix_vars:
                raise ValueError(f"LMI references undeclared variable {X.name}")
        self.lmis.append(block)
        return len(self.lmis) - 1

    # -- compilation --------------------------------------------------------

    def _row(self, expr: Affine):
        row = np.zeros(self._n)
        for v, coef in expr.terms.items():
            if isinstance(v, MatrixVar):
                row[v.offset:v.offset + v.size] += _trace_coeffs(coef)
            else:
                row[v.offset] += coef
        return row

    def _lmi_rows(self, block: HermAffine):
        d2 = 2 * block.dim
        idx = _svec_index(d2)
        m = len(idx[0])
        A = np.zeros((m, self._n))
        b = _svec(embed_hermitian(block.const, tol=np.inf), idx)
        for s, M in block.scalar_terms:
            A[:, s.offset] -= _svec(embed_hermitian(M, tol=np.inf), idx)
        for X, C, sign in block.congruences:
            basis = _congruence_basis(C)
            re, im = basis.real, basis.imag
            emb = np.concatenate(
                [np.concatenate([re, -im], axis=2), np.concatenate([im, re], axis=2)], axis=1
            )
            A[:, X.offset:X.offset + X.size] -= sign * _svec(emb, idx).T
        return A, b

    def compile(self):
        """Return (q, A, b, cones) for ``min q.x  s.t.  A x + s = b, s in K``."""
        q = -self._row(self.objective)
        blocks_A, blocks_b, cones = [], [], []

        if self.equalities:
            blocks_A.append(np.array([self._row(e) for e in self.equalities]))
            blocks_b.append(np.array([-e.const for e in self.equalities]))
            cones.append(clarabel.ZeroConeT(len(self.equalities)))

        nonneg_rows, nonneg_b = [], []
        for e in self.inequalities:
            nonneg_rows.append(self._row(e))
            nonneg_b.append(-e.const)
        for s in self.scalar_vars:
            if s.lower is not None:
                row = np.zeros(self._n)
                row[s.offset] = -1.0
                nonneg_rows.append(row)
                nonneg_b.append(-s.lower)
        if nonneg_rows:
            blocks_A.append(np.array(nonneg_rows))
            blocks_b.append(np.array(nonneg_b))
            cones.append(clarabel.NonnegativeConeT(len(nonneg_rows)))

        for t, x in self.logs:
            rows = np.zeros((3, self._n))
            rows[0] = -self._row(t)
            rows[2] = -self._row(x)
            blocks_A.append(rows)
            blocks_b.append(np.array([t.const, 1.0, x.const]))
            cones.append(clarabel.ExponentialConeT())

        for X in self.matrix_vars:
            d2 = 2 * X.dim
            idx = _svec_index(d2)
            basis = _congruence_basis(np.eye(X.dim))
            re, im = basis.real, basis.imag
            emb = np.concatenate(
                [np.concatenate([re, -im], axis=2), np.concatenate([im, re], axis=2)], axis=1
            )
            rows = np.zeros((len(idx[0]), self._n))
            rows[:, X.offset:X.offset + X.size] = -_svec(emb, idx).T
            blocks_A.append(rows)
            blocks_b.append(np.zeros(len(idx[0])))
            cones.append(clarabel.PSDTriangleConeT(d2))

        for block in self.lmis:
            A, b = self._lmi_rows(block)
            blocks_A.append(A)
            blocks_b.append(b)
            cones.append(clarabel.PSDTriangleConeT(2 * block.dim))

        if blocks_A:
            A = np.vstack(blocks_A)
            b = np.concatenate(blocks_b)
        else:
            A = np.zeros((0, self._n))
            b = np.zeros(0)
        return q, A, b, cones

    def _unpack(self, x):
        values = {}
        for v in self.matrix_vars:
            X = _params_to_matrix(x[v.offset:v.offset + v.size], v.dim)
            w, U = np.linalg.eigh(X)
            if w.min() < 0.0:
                X = (U * np.clip(w, 0.0, None)) @ U.conj().T
            values[v.name] = X
        for s in self.scalar_vars:
            values[s.name] = float(x[s.offset])
        return values

    def solve(self, max_iter=200, tol=1e-8, verbose=False) -> SolveResult:
        """Solve the program; never raises on solver trouble, see ``status``."""
        q, A, b, cones = self.compile()
        # a positive rescaling of the cost leaves the optimizer unchanged
        qscale = max(1.0, float(np.max(np.abs(q), initial=0.0)))
        q = q / qscale
        P = sparse.csc_matrix((self._n, self._n))
        As = sparse.csc_matrix(A)
        t0 = time.perf_counter()
        # chordal splitting of degenerate LMI blocks occasionally stalls; retry without it
        for chordal in (True, False):
            settings = clarabel.DefaultSettings()
            settings.verbose = verbose
            settings.max_iter = max_iter
            settings.tol_gap_abs = tol
            settings.tol_gap_rel = tol
            settings.tol_feas = tol
            settings.presolve_enable = False
            settings.chordal_decomposition_enable = chordal
            try:
                sol = clarabel.DefaultSolver(P, q, As, b, cones, settings).solve()
            except Exception:  # solver refused the data; report rather than abort
                return SolveResult(NUMERICAL_FAILURE, None, None, time.perf_counter() - t0, 0)
            status = _map_status(sol.status)
            x = np.asarray(sol.x)
            if status == "almost":
                status = OPTIMAL if self._residual(A, b, x, cones) <= 1e-6 else NUMERICAL_FAILURE
            if status != NUMERICAL_FAILURE:
                break
        elapsed = time.perf_counter() - t0
        if status != OPTIMAL:
            return SolveResult(status, None, None, elapsed, sol.iterations)
        values = self._unpack(x)
        obj = -float(sol.obj_val) * qscale + self.objective.const
        gap = abs(sol.obj_val - sol.obj_val_dual) / max(1.0, abs(sol.obj_val))
        return SolveResult(OPTIMAL, obj, values, elapsed, sol.iterations, gap)

    def _residual(self, A, b, x, cones):
        # scaled violation of the linear parts of s = b - A x in K
        s = b - A @ x
        worst, k = 0.0, 0
        for cone in cones:
            name = type(cone).__name__
            n = _cone_rows(cone)
            if name == "ZeroConeT":
                worst = max(worst, float(np.max(np.abs(s[k:k + n]), initial=0.0)))
            elif name == "NonnegativeConeT":
                worst = max(worst, float(np.max(-s[k:k + n], initial=0.0)))
            k += n
        scale = max(1.0, float(np.max(np.abs(b), initial=0.0)))
        return worst / scale

    def dump(self, path):
        """Write the compiled conic data as sparse triplets (text)."""
        q, A, b, cones = self.compile()
        As = sparse.coo_matrix(A)
        with open(path, "w") as fh:
            fh.write(f"n {self._n} m {A.shape[0]}\n")
            fh.write("cones " + " ".join(_cone_tag(c) for c in cones) + "\n")
            fh.write("q " + " ".join(f"{v:.17g}" for v in q) + "\n")
            fh.write("b " + " ".join(f"{v:.17g}" for v in b) + "\n")
            for i, j, v in zip(As.row, As.col, As.data):
                fh.write(f"{i} {j} {v:.17g}\n")


def _cone_rows(cone):
    name = type(cone).__name__
    if name == "ExponentialConeT":
        return 3
    if name == "PSDTriangleConeT":
        d = cone.dim
        return d * (d + 1) // 2
    return cone.dim


def _cone_tag(cone):
    name = type(cone).__name__
    return {
        "ZeroConeT": "zero",
        "NonnegativeConeT": "nonneg",
        "ExponentialConeT": "exp",
        "PSDTriangleConeT": "psd",
    }.get(name, name)


def _map_status(status):
    s = str(status).split(".")[-1]
    if s == "Solved":
        return OPTIMAL
    if s == "AlmostSolved":
        return "almost"
    if s in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
        return INFEASIBLE
    if s in ("DualInfeasible", "AlmostDualInfeasible"):
        return UNBOUNDED
    if s in ("MaxIterations", "MaxTime"):
        return ITERATION_LIMIT
    return NUMERICAL_FAILURE
