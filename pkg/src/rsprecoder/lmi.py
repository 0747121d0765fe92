"""S-procedure LMI builders for worst-case WMSE certification.

Each builder emits an affine-in-variables Hermitian LMI. The robust rate
constraints need "tau upper-bounds the squared equalized residual for
every channel in the ball"; the S-procedure turns that semi-infinite
family into a single LMI with one multiplier lambda >= 0, which is
lossless for a single ball constraint.

Bilinearity guard: the blocks contain products g * P, so exactly one of
the equalizer and the precoder may be a decision variable per constraint
(the alternating optimization fixes the other). Builders take fixed
values as plain numbers/arrays and variables as ComplexVar handles, and
refuse the doubly-variable combination.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conic import ConicProblem, LmiConstraint

__all__ = [
    "ComplexVar",
    "add_complex_var",
    "build_private_lmi",
    "build_common_lmi",
    "build_scalar_square_epigraph",
    "build_power_constraint",
]


@dataclass(frozen=True)
class ComplexVar:
    """Handle for a complex scalar/array: indices of its real and imag parts."""

    re: np.ndarray
    im: np.ndarray
    shape: tuple

    def value(self, x: np.ndarray):
        v = x[self.re] + 1j * x[self.im]
        return v.reshape(self.shape) if self.shape else complex(v.reshape(())[()])

    @property
    def indices(self) -> np.ndarray:
        return np.concatenate([np.ravel(self.re), np.ravel(self.im)])


def add_complex_var(problem: ConicProblem, name: str, shape=()) -> ComplexVar:
    size = int(np.prod(shape)) if shape else 1
    re = problem.add_var(name + ".re", size)
    im = problem.add_var(name + ".im", size)
    return ComplexVar(re.reshape(shape or ()), im.reshape(shape or ()), tuple(shape))


def _resolve(arg, x):
    return arg.value(x) if isinstance(arg, ComplexVar) else arg


def _support(*args):
    idx = []
    for a in args:
        if isinstance(a, ComplexVar):
            idx.append(a.indices)
        elif isinstance(a, (int, np.integer)):
            idx.append(np.array([a]))
        elif isinstance(a, np.ndarray) and a.dtype.kind in "iu":
            idx.append(a.ravel())
    return np.concatenate(idx) if idx else np.array([], dtype=int)


def _robust_residual_lmi(problem, h_hat, delta, M, g, target, tau_idx, lam_idx):
    """Shared block structure for the private and common constraints.

    Certifies  max over ||e|| <= delta of ||g (h_hat+e)^H M - target^T||^2 <= tau
    through  [[tau - lam, psi^H, 0], [psi, I, -delta M^H g^H],
              [0, -delta g M, lam I]] >= 0  with psi^H = g h_hat^H M - target^T.
    """
    if isinstance(M, ComplexVar) and isinstance(g, ComplexVar):
        raise ValueError("precoder and equalizer cannot both be variables")
    h_hat = np.asarray(h_hat, dtype=complex).reshape(-1)
    Nt = h_hat.shape[0]
    ncols = M.shape[1]
    dim = 1 + ncols + Nt

    def mat(x):
        Mv = np.asarray(_resolve(M, x), dtype=complex)
        gv = complex(_resolve(g, x))
        tau = x[tau_idx]
        lam = x[lam_idx]
        psiH = gv * (h_hat.conj() @ Mv) - target  # row vector, length ncols
        out = np.zeros((dim, dim), dtype=complex)
        out[0, 0] = tau - lam
        out[0, 1:1 + ncols] = psiH
        out[1:1 + ncols, 0] = psiH.conj()
        out[1:1 + ncols, 1:1 + ncols] = np.eye(ncols)
        cross = -delta * gv * Mv  # Nt x ncols
        out[1 + ncols:, 1:1 + ncols] = cross
        out[1:1 + ncols, 1 + ncols:] = cross.conj().T
        out[1 + ncols:, 1 + ncols:] = lam * np.eye(Nt)
        return out

    support = _support(M, g, int(tau_idx), int(lam_idx))
    lmi = LmiConstraint.from_affine(mat, support, dim, problem.n_vars)
    problem.add_lmi(lmi)
    problem.add_nonneg([(int(lam_idx), 1.0)])
    return lmi


def build_private_lmi(problem: ConicProblem, h_hat, delta, Pp, g, k: int,
                      tau_idx: int, lam_idx: int) -> LmiConstraint:
    """Worst-case residual certificate for user k's private stream.

    Pp is the Nt x K private precoding matrix; the residual target is the
    kth standard basis row (the stream the user actually wants).
    """
    ncols = Pp.shape[1]
    target = np.zeros(ncols, dtype=complex)
    target[k] = 1.0
    return _robust_residual_lmi(problem, h_hat, delta, Pp, g, target, tau_idx, lam_idx)


def build_common_lmi(problem: ConicProblem, h_hat, delta, P, g_c,
                     tau_idx: int, lam_idx: int) -> LmiConstraint:
    """Worst-case residual certificate for the common stream at one user.

    P is the full Nt x (K+1) matrix with the common column first, so the
    residual target is e_1.
    """
    ncols = P.shape[1]
    target = np.zeros(ncols, dtype=complex)
    target[0] = 1.0
    return _robust_residual_lmi(problem, h_hat, delta, P, g_c, target, tau_idx, lam_idx)


def build_scalar_square_epigraph(problem: ConicProblem, g: ComplexVar, s_idx: int) -> LmiConstraint:
    """Schur-complement epigraph: s >= |g|^2 via [[s, conj(g)], [g, 1]] >= 0."""
    if g.shape != ():
        raise ValueError("epigraph builder takes a scalar complex variable")

    def mat(x):
        gv = complex(_resolve(g, x))
        return np.array([[x[s_idx], np.conj(gv)], [gv, 1.0]], dtype=complex)

    lmi = LmiConstraint.from_affine(mat, _support(g, int(s_idx)), 2, problem.n_vars)
    problem.add_lmi(lmi)
    return lmi


def build_power_constraint(problem: ConicProblem, P: ComplexVar, budget=None,
                           t_idx: int | None = None):
    """Second-order cone ||vec(P)|| <= sqrt(budget), or <= x[t_idx] if given."""
    rows = [[(int(i), 1.0)] for i in P.indices]
    b = np.zeros(len(rows))
    if t_idx is not None:
        problem.add_soc(rows, b, [(int(t_idx), 1.0)], 0.0)
    else:
        if budget is None or budget < 0:
            raise ValueError("budget must be nonnegative")
        problem.add_soc(rows, b, [], float(np.sqrt(budget)))
