"""Small dense conic programs: problem container, solver front end, checker.

A ConicProblem holds named real decision variables, a linear objective and
four constraint families: linear equalities, scalar nonnegativity (affine
expression >= 0), second-order cones ||A x + b|| <= w.x + d, and Hermitian
LMIs (affine in the variables, made real-symmetric via the standard
[[A, -B], [B, A]] embedding before the solve).

The numerical work is delegated to cvxopt's cone LP solver (dense
interior-point with self-dual embedding), which reports clean primal/dual
infeasibility certificates -- the power-minimization path depends on those.
Problems here are tiny (matrix sides of a dozen or two), so dense is right.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from cvxopt import matrix as cvxmatrix
from cvxopt import solvers as cvxsolvers

__all__ = [
    "LmiConstraint",
    "ConicProblem",
    "Solution",
    "realify",
    "evaluate_lmi",
    "solve",
    "check_solution",
    "dump_problem",
    "parse_problem",
]

PSD_REL_TOL = 1e-9


def realify(H: np.ndarray) -> np.ndarray:
    """Real-symmetric embedding of a Hermitian matrix.

    H = A + iB maps to [[A, -B], [B, A]]; the embedding is PSD iff H is,
    and each eigenvalue of H appears twice.
    """
    A = np.real(H)
    B = np.imag(H)
    return np.block([[A, -B], [B, A]])


@dataclass
class LmiConstraint:
    """Affine Hermitian-matrix constraint F0 + sum_i x_i F_i >= 0 (PSD)."""

    dim: int
    F0: np.ndarray
    coeffs: dict[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.F0 = np.asarray(self.F0, dtype=complex)
        if self.F0.shape != (self.dim, self.dim):
            raise ValueError("constant block has wrong dimension")

    @staticmethod
    def from_affine(fn, var_indices, dim: int, n_vars: int) -> "LmiConstraint":
        """Extract constant and coefficient matrices from an affine map.

        fn takes a full assignment vector and returns the Hermitian matrix;
        only entries listed in var_indices may influence the result.
        """
        x0 = np.zeros(n_vars)
        F0 = np.asarray(fn(x0), dtype=complex)
        coeffs = {}
        for i in var_indices:
            xi = x0.copy()
            xi[i] = 1.0
            Fi = np.asarray(fn(xi), dtype=complex) - F0
            if np.any(Fi != 0):
                coeffs[int(i)] = Fi
        return LmiConstraint(dim=dim, F0=F0, coeffs=coeffs)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        M = self.F0.copy()
        for i, Fi in self.coeffs.items():
            M = M + x[i] * Fi
        return M


def evaluate_lmi(lmi: LmiConstraint, assignment: np.ndarray):
    """Concrete matrix at an assignment and its smallest eigenvalue."""
    assignment = np.asarray(assignment, dtype=float)
    needed = max(lmi.coeffs.keys(), default=-1)
    if assignment.shape[0] <= needed:
        raise ValueError("assignment does not cover all variables")
    M = lmi.evaluate(assignment)
    w = np.linalg.eigvalsh(M)
    return M, float(w[0])


def psd_tolerance(M: np.ndarray) -> float:
    return PSD_REL_TOL * (1.0 + float(np.linalg.norm(M)))


class ConicProblem:
    """Conic program over named real scalars/vectors."""

    def __init__(self):
        self._vars: dict[str, tuple[int, int]] = {}
        self.n_vars = 0
        self.sense = "min"
        self.obj_terms: list[tuple[int, float]] = []
        self.obj_const = 0.0
        self.eqs: list[tuple[list[tuple[int, float]], float]] = []
        self.nonnegs: list[tuple[list[tuple[int, float]], float]] = []
        # each SOC: (A_rows as term lists, b, t_terms, d)
        self.socs: list = []
        self.lmis: list[LmiConstraint] = []

    def add_var(self, name: str, size: int = 1) -> np.ndarray:
        if name in self._vars:
            raise ValueError(f"duplicate variable {name!r}")
        if size < 1:
            raise ValueError("size must be >= 1")
        self._vars[name] = (self.n_vars, size)
        idx = np.arange(self.n_vars, self.n_vars + size)
        self.n_vars += size
        return idx

    def var_indices(self, name: str) -> np.ndarray:
        off, size = self._vars[name]
        return np.arange(off, off + size)

    def set_objective(self, terms, const: float = 0.0, sense: str = "min"):
        if sense not in ("min", "max"):
            raise ValueError("sense must be 'min' or 'max'")
        self.sense = sense
        self.obj_terms = [(int(i), float(c)) for i, c in terms]
        self.obj_const = float(const)

    def add_eq(self, terms, rhs: float):
        self.eqs.append(([(int(i), float(c)) for i, c in terms], float(rhs)))

    def add_nonneg(self, terms, const: float = 0.0):
        """sum_i c_i x_i + const >= 0."""
        self.nonnegs.append(([(int(i), float(c)) for i, c in terms], float(const)))

    def add_soc(self, rows, b, t_terms, d: float = 0.0):
        """||A x + b|| <= t.x + d with A given row-wise as term lists."""
        rows = [[(int(i), float(c)) for i, c in row] for row in rows]
        b = np.asarray(b, dtype=float).reshape(-1)
        if len(rows) != b.shape[0]:
            raise ValueError("A and b row count mismatch")
        self.socs.append((rows, b, [(int(i), float(c)) for i, c in t_terms], float(d)))

    def add_lmi(self, lmi: LmiConstraint):
        self.lmis.append(lmi)

    # -- numeric views -----------------------------------------------------

    def _dense_row(self, terms) -> np.ndarray:
        row = np.zeros(self.n_vars)
        for i, c in terms:
            row[i] += c
        return row

    def objective_vector(self) -> np.ndarray:
        return self._dense_row(self.obj_terms)

    def objective_value(self, x: np.ndarray) -> float:
        return float(self.objective_vector() @ x + self.obj_const)


@dataclass
class Solution:
    x: np.ndarray | None
    objective: float
    status: str  # Optimal | Infeasible | Unbounded | MaxIterations | NumericalTrouble
    gap: float
    iterations: int
    certificate: dict | None = None


def _lower(problem: ConicProblem):
    """Assemble cvxopt conelp data (c, G, h, dims, A, b)."""
    n = problem.n_vars
    G_rows, h_rows = [], []
    dims = {"l": len(problem.nonnegs), "q": [], "s": []}
    for terms, const in problem.nonnegs:
        G_rows.append(-problem._dense_row(terms))
        h_rows.append(const)
    for rows, b, t_terms, d in problem.socs:
        G_rows.append(-problem._dense_row(t_terms))
        h_rows.append(d)
        for row, bi in zip(rows, b):
            G_rows.append(-problem._dense_row(row))
            h_rows.append(bi)
        dims["q"].append(len(rows) + 1)
    for lmi in problem.lmis:
        side = 2 * lmi.dim
        dims["s"].append(side)
        block = np.zeros((side * side, n))
        for i, Fi in lmi.coeffs.items():
            block[:, i] = -realify(Fi).reshape(-1, order="F")
        G_rows.append(block)
        h_rows.append(realify(lmi.F0).reshape(-1, order="F"))
    G = np.vstack([np.atleast_2d(r) for r in G_rows]) if G_rows else np.zeros((0, n))
    h = np.concatenate([np.atleast_1d(r) for r in h_rows]) if h_rows else np.zeros(0)
    sign = 1.0 if problem.sense == "min" else -1.0
    c = sign * problem.objective_vector()
    if problem.eqs:
        A = np.vstack([problem._dense_row(t) for t, _ in problem.eqs])
        b = np.array([rhs for _, rhs in problem.eqs])
    else:
        A, b = np.zeros((0, n)), np.zeros(0)
    return c, G, h, dims, A, b


def solve(problem: ConicProblem, tol: float = 1e-7, max_iter: int = 100) -> Solution:
    """Solve the conic program; statuses follow the Solution contract."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if problem.n_vars == 0:
        raise ValueError("problem has no variables")
    c, G, h, dims, A, b = _lower(problem)
    options = {
        "show_progress": False,
        "maxiters": max_iter,
        "abstol": tol * 1e-2,
        "reltol": tol * 1e-2,
        "feastol": tol,
    }
    kwargs = {}
    if A.shape[0]:
        kwargs["A"] = cvxmatrix(A)
        kwargs["b"] = cvxmatrix(b)
    try:
        sol = cvxsolvers.conelp(
            cvxmatrix(c), cvxmatrix(G), cvxmatrix(h), dims=dims,
            options=options, **kwargs,
        )
    except (ValueError, ArithmeticError):
        # interior-point scaling can break down on badly conditioned
        # iterates; report it as a solve failure instead of crashing
        return Solution(None, float("nan"), "NumericalTrouble", float("nan"), 0)
    return _interpret(problem, sol, tol, max_iter)


def _interpret(problem: ConicProblem, sol: dict, tol: float, max_iter: int) -> Solution:
    status = sol["status"]
    iters = int(sol.get("iterations", 0))
    gap = float(sol["gap"]) if sol.get("gap") is not None else float("nan")
    x = np.array(sol["x"]).reshape(-1) if sol["x"] is not None else None

    if status == "optimal":
        return Solution(x, problem.objective_value(x), "Optimal", gap, iters)
    if status == "primal infeasible":
        cert = {"y": np.array(sol["y"]).reshape(-1) if sol["y"] is not None else None,
                "z": np.array(sol["z"]).reshape(-1) if sol["z"] is not None else None}
        return Solution(None, float("nan"), "Infeasible", gap, iters, cert)
    if status == "dual infeasible":
        cert = {"x": x}
        return Solution(x, float("nan"), "Unbounded", gap, iters, cert)
    # "unknown": accept the iterate when it is verifiably near-optimal
    if x is not None:
        report = check_solution(problem, x)
        relgap = sol.get("relative gap")
        if report.max_violation <= 10 * tol and relgap is not None and relgap <= 100 * tol:
            return Solution(x, problem.objective_value(x), "Optimal", gap, iters)
    if iters >= max_iter:
        return Solution(x, float("nan"), "MaxIterations", gap, iters)
    return Solution(x, float("nan"), "NumericalTrouble", gap, iters)


@dataclass
class ConstraintReport:
    violations: list  # (kind, index, magnitude)
    max_violation: float

    def worst(self):
        if not self.violations:
            return None
        return max(self.violations, key=lambda v: v[2])


def check_solution(problem: ConicProblem, x: np.ndarray) -> ConstraintReport:
    """Per-constraint violation magnitudes at an assignment."""
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != problem.n_vars:
        raise ValueError("assignment dimension mismatch")
    out = []
    for j, (terms, rhs) in enumerate(problem.eqs):
        out.append(("eq", j, abs(problem._dense_row(terms) @ x - rhs)))
    for j, (terms, const) in enumerate(problem.nonnegs):
        out.append(("nonneg", j, max(0.0, -(problem._dense_row(terms) @ x + const))))
    for j, (rows, b, t_terms, d) in enumerate(problem.socs):
        lhs = np.linalg.norm([problem._dense_row(r) @ x + bi for r, bi in zip(rows, b)])
        rhs = problem._dense_row(t_terms) @ x + d
        out.append(("soc", j, max(0.0, lhs - rhs)))
    for j, lmi in enumerate(problem.lmis):
        M, mineig = evaluate_lmi(lmi, x)
        out.append(("lmi", j, max(0.0, -mineig - psd_tolerance(M))))
    return ConstraintReport(out, max((v[2] for v in out), default=0.0))


# -- debug dump (documented plain-text sparse format) ----------------------
#
# Line-oriented; '#' starts a comment. Sections:
#   rsconic 1
#   var <name> <size>                       (in declaration order)
#   objective <min|max> <const>
#   obj <var-index> <coef>
#   eq <rhs> ; term <idx> <coef> ...        (terms on following lines)
#   nonneg <const>
#   soc <rows> <d> / socrow ... / socb ...
#   lmi <dim> / lconst i j re im / lcoef varidx i j re im
# Floats are repr'd; round-trip parse is exact for the structure, values
# reproduce to full double precision.


def dump_problem(problem: ConicProblem) -> str:
    lines = ["rsconic 1"]
    for name, (off, size) in problem._vars.items():
        lines.append(f"var {name} {size}")
    lines.append(f"objective {problem.sense} {problem.obj_const!r}")
    for i, cf in problem.obj_terms:
        lines.append(f"obj {i} {cf!r}")
    for terms, rhs in problem.eqs:
        lines.append(f"eq {rhs!r}")
        for i, cf in terms:
            lines.append(f"term {i} {cf!r}")
    for terms, const in problem.nonnegs:
        lines.append(f"nonneg {const!r}")
        for i, cf in terms:
            lines.append(f"term {i} {cf!r}")
    for rows, b, t_terms, d in problem.socs:
        lines.append(f"soc {len(rows)} {d!r}")
        for i, cf in t_terms:
            lines.append(f"term {i} {cf!r}")
        for r, (row, bi) in enumerate(zip(rows, b)):
            lines.append(f"socb {r} {float(bi)!r}")
            for i, cf in row:
                lines.append(f"socrow {r} {i} {cf!r}")
    for lmi in problem.lmis:
        lines.append(f"lmi {lmi.dim}")
        for i in range(lmi.dim):
            for j in range(lmi.dim):
                v = lmi.F0[i, j]
                if v != 0:
                    lines.append(f"lconst {i} {j} {float(v.real)!r} {float(v.imag)!r}")
        for vi, Fi in sorted(lmi.coeffs.items()):
            for i in range(lmi.dim):
                for j in range(lmi.dim):
                    v = Fi[i, j]
                    if v != 0:
                        lines.append(f"lcoef {vi} {i} {j} {float(v.real)!r} {float(v.imag)!r}")
    return "\n".join(lines) + "\n"


def parse_problem(text: str) -> ConicProblem:
    p = ConicProblem()
    cur = None  # pending multi-line constraint under construction
    soc = None
    lmi = None

    def flush():
        nonlocal cur, soc, lmi
        if cur is not None:
            kind, payload = cur
            if kind == "eq":
                p.add_eq(payload["terms"], payload["rhs"])
            elif kind == "nonneg":
                p.add_nonneg(payload["terms"], payload["const"])
        if soc is not None:
            p.add_soc(soc["rows"], soc["b"], soc["t"], soc["d"])
        if lmi is not None:
            p.add_lmi(LmiConstraint(lmi["dim"], lmi["F0"], lmi["coeffs"]))
        cur = soc = lmi = None

    lines = [ln.strip() for ln in text.splitlines()]
    if not lines or lines[0].split() != ["rsconic", "1"]:
        raise ValueError("not an rsconic v1 dump")
    for ln in lines[1:]:
        if not ln or ln.startswith("#"):
            continue
        tok = ln.split()
        key = tok[0]
        if key == "var":
            flush()
            p.add_var(tok[1], int(tok[2]))
        elif key == "objective":
            flush()
            p.sense, p.obj_const = tok[1], float(tok[2])
        elif key == "obj":
            p.obj_terms.append((int(tok[1]), float(tok[2])))
        elif key == "eq":
            flush()
            cur = ("eq", {"rhs": float(tok[1]), "terms": []})
        elif key == "nonneg":
            flush()
            cur = ("nonneg", {"const": float(tok[1]), "terms": []})
        elif key == "term":
            if cur is not None:
                cur[1]["terms"].append((int(tok[1]), float(tok[2])))
            elif soc is not None:
                soc["t"].append((int(tok[1]), float(tok[2])))
            else:
                raise ValueError(f"stray term line: {ln}")
        elif key == "soc":
            flush()
            m = int(tok[1])
            soc = {"rows": [[] for _ in range(m)], "b": np.zeros(m),
                   "t": [], "d": float(tok[2])}
        elif key == "socb":
            soc["b"][int(tok[1])] = float(tok[2])
        elif key == "socrow":
            soc["rows"][int(tok[1])].append((int(tok[2]), float(tok[3])))
        elif key == "lmi":
            flush()
            d = int(tok[1])
            lmi = {"dim": d, "F0": np.zeros((d, d), complex), "coeffs": {}}
        elif key == "lconst":
            lmi["F0"][int(tok[1]), int(tok[2])] = float(tok[3]) + 1j * float(tok[4])
        elif key == "lcoef":
            vi = int(tok[1])
            if vi not in lmi["coeffs"]:
                lmi["coeffs"][vi] = np.zeros((lmi["dim"], lmi["dim"]), complex)
            lmi["coeffs"][vi][int(tok[2]), int(tok[3])] = float(tok[4]) + 1j * float(tok[5])
        else:
            raise ValueError(f"unknown line: {ln}")
    flush()
    return p
