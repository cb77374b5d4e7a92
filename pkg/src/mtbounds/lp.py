"""Dense bounded-variable linear programming.

A two-phase revised simplex with Bland's rule; the basis system is
refactorized with ``np.linalg.solve`` every iteration, which is cheap at the
problem sizes produced here and avoids incremental-update drift.  Also: LP
text-format export and a matching reader for round trips with external
solvers.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from ._jit import maybe_jit

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
MAX_ITER = 10**6

STATUS_OPTIMAL = "optimal"
STATUS_INFEASIBLE = "infeasible"
STATUS_UNBOUNDED = "unbounded"
STATUS_ITER_LIMIT = "iteration-limit"

_CODE_TO_STATUS = {0: STATUS_OPTIMAL, 1: STATUS_INFEASIBLE,
                   2: STATUS_UNBOUNDED, 3: STATUS_ITER_LIMIT}


class LpError(ValueError):
    pass


@dataclass(eq=False)
class LinearProgram:
    """min c.x subject to A_eq x = b_eq, A_ub x <= b_ub, lo <= x <= hi."""

    c: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    names: tuple[str, ...] = ()

    def __post_init__(self):
        n = self.c.shape[0]
        self.c = np.asarray(self.c, dtype=np.float64)
        self.A_eq = np.asarray(self.A_eq, dtype=np.float64).reshape(-1, n)
        self.b_eq = np.asarray(self.b_eq, dtype=np.float64)
        self.A_ub = np.asarray(self.A_ub, dtype=np.float64).reshape(-1, n)
        self.b_ub = np.asarray(self.b_ub, dtype=np.float64)
        self.lo = np.asarray(self.lo, dtype=np.float64)
        self.hi = np.asarray(self.hi, dtype=np.float64)
        if self.A_eq.shape[0] != self.b_eq.shape[0]:
            raise LpError("A_eq/b_eq row mismatch")
        if self.A_ub.shape[0] != self.b_ub.shape[0]:
            raise LpError("A_ub/b_ub row mismatch")
        if self.lo.shape[0] != n or self.hi.shape[0] != n:
            raise LpError("bound length mismatch")
        if np.any(self.lo > self.hi):
            raise LpError("lo > hi for some variable")
        if not self.names:
            self.names = tuple(f"x{i}" for i in range(n))
        elif len(self.names) != n:
            raise LpError("names length mismatch")

    @property
    def n(self) -> int:
        return self.c.shape[0]


@dataclass(frozen=True)
class LpOutcome:
    status: str
    value: float
    x: np.ndarray | None
    iterations: int


# variable states in the simplex core
_AT_LOWER = 0
_AT_UPPER = 1
_FREE = 2
_BASIC = 3


@maybe_jit
def _simplex_phase(A, b, c, lo, up, state, basis, tol, max_iter):
    """Run the bounded-variable simplex to optimality on A x = b.

    `state` and `basis` are updated in place; returns (code, iterations)
    with code 0 = optimal, 2 = unbounded, 3 = iteration limit.
    """
    m, n = A.shape
    B = np.empty((m, m), dtype=np.float64)
    it = 0
    while it < max_iter:
        it += 1
        for i in range(m):
            for r in range(m):
                B[r, i] = A[r, basis[i]]
        rhs = b.copy()
        for j in range(n):
            if state[j] == _AT_LOWER and lo[j] != 0.0:
                for r in range(m):
                    rhs[r] -= A[r, j] * lo[j]
            elif state[j] == _AT_UPPER and up[j] != 0.0:
                for r in range(m):
                    rhs[r] -= A[r, j] * up[j]
        xB = np.linalg.solve(B, rhs)
        y = np.linalg.solve(B.T, c[basis].copy())

        enter = -1
        sigma = 0.0
        for j in range(n):
            if state[j] == _BASIC:
                continue
            dj = c[j]
            for r in range(m):
                dj -= y[r] * A[r, j]
            if state[j] != _AT_UPPER and dj < -tol:
                enter = j
                sigma = 1.0
                break
            if state[j] != _AT_LOWER and dj > tol:
                enter = j
                sigma = -1.0
                break
        if enter == -1:
            return 0, it

        # xB moves by -t * sigma * B^{-1} a_enter as the entering variable
        # moves by t * sigma from its current bound
        d = np.linalg.solve(B, A[:, enter].copy()) * sigma
        t_best = np.inf
        leave = -1  # -2 means the entering variable flips to its other bound
        leave_to = _AT_LOWER
        span = up[enter] - lo[enter]
        if np.isfinite(span):
            t_best = span
            leave = -2
        for i in range(m):
            bi = basis[i]
            if d[i] > tol:
                if lo[bi] > -np.inf:
                    t = (xB[i] - lo[bi]) / d[i]
                    if t < t_best - 1e-12 or (t < t_best + 1e-12 and
                                              (leave < 0 or bi < basis[leave])):
                        t_best = t
                        leave = i
                        leave_to = _AT_LOWER
            elif d[i] < -tol:
                if up[bi] < np.inf:
                    t = (xB[i] - up[bi]) / d[i]
                    if t < t_best - 1e-12 or (t < t_best + 1e-12 and
                                              (leave < 0 or bi < basis[leave])):
                        t_best = t
                        leave = i
                        leave_to = _AT_UPPER
        if leave == -1:
            return 2, it
        if t_best < 0.0:
            t_best = 0.0
        if leave == -2:
            state[enter] = _AT_UPPER if state[enter] == _AT_LOWER else _AT_LOWER
        else:
            old_state = state[enter]
            state[basis[leave]] = leave_to
            basis[leave] = enter
            state[enter] = _BASIC
            if old_state == _FREE and leave_to == _FREE:  # pragma: no cover
                pass
    return 3, it


def _recover_x(A, b, lo, up, state, basis):
    m, n = A.shape
    x = np.zeros(n)
    for j in range(n):
        if state[j] == _AT_LOWER:
            x[j] = lo[j]
        elif state[j] == _AT_UPPER:
            x[j] = up[j]
    rhs = b - A @ x
    if m:
        x[basis] = np.linalg.solve(A[:, basis], rhs)
    return x


def solve_lp(lp: LinearProgram, tol: float = FEAS_TOL,
             max_iter: int = MAX_ITER) -> LpOutcome:
    """Minimize.  For maximization negate the objective and the value."""
    n = lp.n
    n_ub = lp.A_ub.shape[0]
    # slack variables turn the inequalities into equalities
    A = np.vstack([
        np.hstack([lp.A_eq, np.zeros((lp.A_eq.shape[0], n_ub))]),
        np.hstack([lp.A_ub, np.eye(n_ub)]),
    ])
    b = np.concatenate([lp.b_eq, lp.b_ub])
    m = A.shape[0]
    lo = np.concatenate([lp.lo, np.zeros(n_ub)])
    up = np.concatenate([lp.hi, np.full(n_ub, np.inf)])

    if m == 0:
        # bounds-only problem
        x = np.where(lp.c > 0, lp.lo, np.where(lp.c < 0, lp.hi, np.where(
            np.isfinite(lp.lo), lp.lo, np.where(np.isfinite(lp.hi), lp.hi, 0.0))))
        if np.any((lp.c > 0) & ~np.isfinite(x)) or np.any((lp.c < 0) & ~np.isfinite(x)):
            return LpOutcome(STATUS_UNBOUNDED, -np.inf, None, 0)
        return LpOutcome(STATUS_OPTIMAL, float(lp.c @ x), x, 0)

    # initial point: every structural variable at a finite bound (or 0)
    state = np.empty(n + n_ub + m, dtype=np.int64)
    for j in range(n + n_ub):
        if np.isfinite(lo[j]):
            state[j] = _AT_LOWER
        elif np.isfinite(up[j]):
            state[j] = _AT_UPPER
        else:
            state[j] = _FREE
    x0 = np.where(state[:n + n_ub] == _AT_LOWER, lo,
                  np.where(state[:n + n_ub] == _AT_UPPER, up, 0.0))
    r = b - A @ x0

    # phase 1: artificials with columns sign(r_i) e_i, start basic at |r_i|
    A1 = np.hstack([A, np.diag(np.where(r >= 0, 1.0, -1.0))])
    lo1 = np.concatenate([lo, np.zeros(m)])
    up1 = np.concatenate([up, np.full(m, np.inf)])
    c1 = np.concatenate([np.zeros(n + n_ub), np.ones(m)])
    basis = np.arange(n + n_ub, n + n_ub + m, dtype=np.int64)
    state[n + n_ub:] = _BASIC

    code, it1 = _simplex_phase(A1, b, c1, lo1, up1, state, basis, tol, max_iter)
    if code == 3:
        return LpOutcome(STATUS_ITER_LIMIT, np.nan, None, it1)
    x1 = _recover_x(A1, b, lo1, up1, state, basis)
    if float(c1 @ x1) > math.sqrt(tol) * max(1.0, float(np.abs(b).max(initial=0.0))):
        return LpOutcome(STATUS_INFEASIBLE, np.nan, None, it1)

    # phase 2: artificials pinned to zero, real objective
    lo1[n + n_ub:] = 0.0
    up1[n + n_ub:] = 0.0
    c2 = np.concatenate([lp.c, np.zeros(n_ub + m)])
    for j in range(n + n_ub, n + n_ub + m):
        if state[j] != _BASIC:
            state[j] = _AT_LOWER
    code, it2 = _simplex_phase(A1, b, c2, lo1, up1, state, basis, tol, max_iter)
    if code == 3:
        return LpOutcome(STATUS_ITER_LIMIT, np.nan, None, it1 + it2)
    if code == 2:
        return LpOutcome(STATUS_UNBOUNDED, -np.inf, None, it1 + it2)
    x = _recover_x(A1, b, lo1, up1, state, basis)[:n]
    return LpOutcome(STATUS_OPTIMAL, float(lp.c @ x), x, it1 + it2)


# ---------------------------------------------------------------------------
# LP text format


def _fmt(v: float) -> str:
    return format(v, ".17g")


def _term(coef: float, name: str, first: bool) -> str:
    sign = "-" if coef < 0 else ("" if first else "+")
    return f"{sign} {_fmt(abs(coef))} {name}"


def _expr(coefs, names) -> str:
    parts = []
    for coef, name in zip(coefs, names):
        if coef == 0.0:
            continue
        parts.append(_term(coef, name, not parts))
    return " ".join(parts) if parts else "0 " + names[0]


def export_lp_text(lp: LinearProgram, sense: str = "min") -> str:
    """Serialize in LP text format (deterministic, 17 significant digits)."""
    if sense not in ("min", "max"):
        raise LpError("sense must be 'min' or 'max'")
    lines = ["Minimize" if sense == "min" else "Maximize",
             " obj: " + _expr(lp.c, lp.names),
             "Subject To"]
    for i in range(lp.A_eq.shape[0]):
        lines.append(f" eq{i}: " + _expr(lp.A_eq[i], lp.names) + f" = {_fmt(lp.b_eq[i])}")
    for i in range(lp.A_ub.shape[0]):
        lines.append(f" ub{i}: " + _expr(lp.A_ub[i], lp.names) + f" <= {_fmt(lp.b_ub[i])}")
    lines.append("Bounds")
    for j, name in enumerate(lp.names):
        lo, hi = lp.lo[j], lp.hi[j]
        if lo == -np.inf and hi == np.inf:
            lines.append(f" {name} free")
        elif lo == -np.inf:
            lines.append(f" -inf <= {name} <= {_fmt(hi)}")
        elif hi == np.inf:
            lines.append(f" {name} >= {_fmt(lo)}")
        else:
            lines.append(f" {_fmt(lo)} <= {name} <= {_fmt(hi)}")
    lines.append("End")
    return "\n".join(lines) + "\n"


_TOKEN = re.compile(r"(<=|>=|=|\+|-|[A-Za-z_][A-Za-z0-9_.\[\]\(\),]*"
                    r"|[0-9.][0-9.eE+-]*)")


def _parse_expr(tokens):
    """Consume coef/name terms until a relational operator; returns
    ({name: coef}, remaining tokens)."""
    coefs = {}
    sign = 1.0
    pending = None
    i = 0
    while i < len(tokens):
        t = tokens[i]
        if t in ("<=", ">=", "="):
            break
        if t == "+":
            pass
        elif t == "-":
            sign = -sign
        elif t[0].isdigit() or t[0] == ".":
            pending = float(t)
        else:
            coef = sign * (pending if pending is not None else 1.0)
            coefs[t] = coefs.get(t, 0.0) + coef
            pending = None
            sign = 1.0
        i += 1
    return coefs, tokens[i:]


def parse_lp_text(text: str) -> tuple[LinearProgram, str]:
    """Read the subset of the LP format written by :func:`export_lp_text`.
    Returns (program, sense)."""
    section = None
    sense = "min"
    obj = {}
    eq_rows, ub_rows = [], []
    bounds = {}
    order: list[str] = []

    def note(names):
        for nm in names:
            if nm not in bounds:
                bounds[nm] = [0.0, np.inf]
                order.append(nm)

    for raw in text.splitlines():
        line = raw.split("\\")[0].strip()
        if not line:
            continue
        low = line.lower()
        if low in ("minimize", "maximize"):
            section = "obj"
            sense = "min" if low == "minimize" else "max"
            continue
        if low in ("subject to", "st", "s.t."):
            section = "cons"
            continue
        if low == "bounds":
            section = "bounds"
            continue
        if low == "end":
            break
        if section == "obj":
            body = line.split(":", 1)[-1]
            coefs, _ = _parse_expr(_TOKEN.findall(body))
            for k, v in coefs.items():
                obj[k] = obj.get(k, 0.0) + v
            note(coefs)
        elif section == "cons":
            body = line.split(":", 1)[-1]
            tokens = _TOKEN.findall(body)
            coefs, rest = _parse_expr(tokens)
            if not rest:
                raise LpError(f"constraint without relation: {line!r}")
            op = rest[0]
            rhs_coefs, _ = _parse_expr(rest[1:])
            rhs = 0.0
            for k, v in rhs_coefs.items():
                raise LpError("variables on constraint right-hand side")
            rhs = float("".join(rest[1:])) if len(rest) > 1 else 0.0
            note(coefs)
            if op == "=":
                eq_rows.append((coefs, rhs))
            elif op == "<=":
                ub_rows.append((coefs, rhs))
            else:
                ub_rows.append(({k: -v for k, v in coefs.items()}, -rhs))
        elif section == "bounds":
            tokens = _TOKEN.findall(line)
            if len(tokens) == 2 and tokens[1].lower() == "free":
                note([tokens[0]])
                bounds[tokens[0]] = [-np.inf, np.inf]
            elif "<=" in tokens:
                i1 = tokens.index("<=")
                name = tokens[i1 + 1] if tokens.count("<=") == 2 else None
                if tokens.count("<=") == 2:
                    lo_tok = tokens[:i1]
                    hi_tok = tokens[tokens.index("<=", i1 + 1) + 1:]
                    note([name])
                    lo = -np.inf if "inf" in "".join(lo_tok) else float("".join(lo_tok))
                    bounds[name] = [lo, float("".join(hi_tok))]
                else:
                    name = tokens[0]
                    note([name])
                    bounds[name][1] = float("".join(tokens[i1 + 1:]))
            elif ">=" in tokens:
                i1 = tokens.index(">=")
                name = tokens[0]
                note([name])
                bounds[name][0] = float("".join(tokens[i1 + 1:]))
            else:
                raise LpError(f"unrecognized bounds line: {line!r}")

    names = tuple(order)
    idx = {nm: i for i, nm in enumerate(names)}
    n = len(names)

    def row(coefs):
        r = np.zeros(n)
        for k, v in coefs.items():
            r[idx[k]] = v
        return r

    c = row(obj)
    A_eq = np.array([row(cf) for cf, _ in eq_rows]).reshape(-1, n)
    b_eq = np.array([rhs for _, rhs in eq_rows])
    A_ub = np.array([row(cf) for cf, _ in ub_rows]).reshape(-1, n)
    b_ub = np.array([rhs for _, rhs in ub_rows])
    lo = np.array([bounds[nm][0] for nm in names])
    hi = np.array([bounds[nm][1] for nm in names])
    return LinearProgram(c, A_eq, b_eq, A_ub, b_ub, lo, hi, names), sense
