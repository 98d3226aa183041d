"""Small second-order-cone modelling layer.

Expressions are affine maps ``x -> A x + c`` over a growing vector of
decision variables, carried as a sparse matrix, a constant and an array
shape.  A :class:`ConicProgram` collects three kinds of blocks, each with a
descriptive tag naming the modelling constraint that produced it:

* ``zero``:    expr == 0
* ``nonneg``:  expr >= 0
* ``soc``:     ||x_i|| <= t_i for a batch of rows i

Rotated cones ``u v >= ||w||^2, u, v >= 0`` are stored as the ordinary cone
``||(2w, u - v)|| <= u + v``.

The cubic term w1 |v|^3 is built from a norm cone ``s >= |v|`` and two
rotated cones ``s^2 <= h * 1`` and ``h^2 <= c * s``, which together give
``c >= h^2 / s >= s^3`` (see :func:`cube_epigraph`).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp


class Affine:
    __array_priority__ = 100  # make ndarray op Affine defer to us

    def __init__(self, A, c, shape):
        self.A = sp.csr_matrix(A)
        self.c = np.asarray(c, dtype=float).ravel()
        self.shape = tuple(shape)
        assert self.A.shape[0] == self.c.size == int(np.prod(self.shape, dtype=int))

    # construction ---------------------------------------------------------
    @staticmethod
    def const(val, nvar: int = 0) -> "Affine":
        val = np.asarray(val, dtype=float)
        return Affine(sp.csr_matrix((val.size, nvar)), val.ravel(), val.shape)

    @property
    def size(self) -> int:
        return self.c.size

    @property
    def nvar(self) -> int:
        return self.A.shape[1]

    def _pad(self, n: int) -> sp.csr_matrix:
        if self.nvar == n:
            return self.A
        A = self.A.tocoo()
        return sp.csr_matrix((A.data, (A.row, A.col)), shape=(A.shape[0], n))

    @staticmethod
    def _lift(x) -> "Affine":
        return x if isinstance(x, Affine) else Affine.const(x)

    def broadcast_to(self, shape) -> "Affine":
        shape = tuple(shape)
        if shape == self.shape:
            return self
        idx = np.broadcast_to(np.arange(self.size).reshape(self.shape), shape).ravel()
        return Affine(self.A[idx], self.c[idx], shape)

    # arithmetic -----------------------------------------------------------
    def __add__(self, other):
        o = self._lift(other)
        shape = np.broadcast_shapes(self.shape, o.shape)
        a, b = self.broadcast_to(shape), o.broadcast_to(shape)
        n = max(a.nvar, b.nvar)
        return Affine(a._pad(n) + b._pad(n), a.c + b.c, shape)

    __radd__ = __add__

    def __neg__(self):
        return Affine(-self.A, -self.c, self.shape)

    def __sub__(self, other):
        return self + (-self._lift(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, k):
        if isinstance(k, Affine):
            raise TypeError("product of two affine expressions is not affine")
        k = np.asarray(k, dtype=float)
        shape = np.broadcast_shapes(self.shape, k.shape)
        a = self.broadcast_to(shape)
        kk = np.broadcast_to(k, shape).ravel()
        return Affine(sp.diags(kk) @ a.A, kk * a.c, shape)

    __rmul__ = __mul__

    def __truediv__(self, k):
        return self * (1.0 / np.asarray(k, dtype=float))

    def __getitem__(self, key):
        idx = np.arange(self.size).reshape(self.shape)[key]
        return Affine(self.A[idx.ravel()], self.c[idx.ravel()], idx.shape)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        idx = np.arange(self.size).reshape(shape)
        return Affine(self.A, self.c, idx.shape)

    def sum(self, axis=None):
        idx = np.arange(self.size).reshape(self.shape)
        if axis is None:
            return Affine(sp.csr_matrix(self.A.sum(axis=0)), [self.c.sum()], ())
        axis = axis % len(self.shape)
        moved = np.moveaxis(idx, axis, -1)
        out_shape = moved.shape[:-1]
        rows = np.repeat(np.arange(int(np.prod(out_shape, dtype=int))), moved.shape[-1])
        S = sp.csr_matrix((np.ones(self.size), (rows, moved.ravel())),
                          shape=(rows.max(initial=-1) + 1, self.size))
        return Affine(S @ self.A, S @ self.c, out_shape)

    def dot(self, coeffs, axis=-1):
        """Weighted sum along ``axis``; coeffs broadcast against self."""
        return (self * coeffs).sum(axis=axis)

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return (self.A @ x[: self.nvar] + self.c).reshape(self.shape)

    def __repr__(self):
        return f"Affine(shape={self.shape}, nvar={self.nvar})"


def stack(exprs: Sequence, axis: int = 0) -> Affine:
    exprs = [Affine._lift(e) for e in exprs]
    n = max(e.nvar for e in exprs)
    ids, off = [], 0
    for e in exprs:
        ids.append(off + np.arange(e.size).reshape(e.shape))
        off += e.size
    order = np.stack(ids, axis=axis)
    A = sp.vstack([e._pad(n) for e in exprs]).tocsr()
    c = np.concatenate([e.c for e in exprs])
    return Affine(A[order.ravel()], c[order.ravel()], order.shape)


def concatenate(exprs: Sequence, axis: int = 0) -> Affine:
    exprs = [Affine._lift(e) for e in exprs]
    n = max(e.nvar for e in exprs)
    ids, off = [], 0
    for e in exprs:
        ids.append(off + np.arange(e.size).reshape(e.shape))
        off += e.size
    order = np.concatenate(ids, axis=axis)
    A = sp.vstack([e._pad(n) for e in exprs]).tocsr()
    c = np.concatenate([e.c for e in exprs])
    return Affine(A[order.ravel()], c[order.ravel()], order.shape)


@dataclass
class Block:
    kind: str          # zero | nonneg | soc
    tag: str
    expr: Affine       # zero/nonneg: any shape; soc: (B, 1 + d) with t first
    dim: int = 1       # cone dimension for soc


@dataclass
class ConicSolution:
    x: np.ndarray
    objective: float
    status: str        # optimal | inaccurate | infeasible | max-iters | failed
    primal_residual: float
    rel_gap: float
    iterations: int = 0
    solve_time: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "inaccurate")


@dataclass
class ResidualReport:
    max_violation: float
    by_tag: dict[str, float] = field(default_factory=dict)
    max_rel_violation: float = 0.0


class ConicProgram:
    def __init__(self):
        self.nvar = 0
        self.blocks: list[Block] = []
        self.objective: Affine = Affine.const(0.0)
        self.var_names: dict[str, slice] = {}

    def var(self, shape, name: str | None = None, scale: float = 1.0) -> Affine:
        """New variables; ``scale`` is the expected magnitude, so the solver
        works with ``x / scale`` while expressions stay in physical units."""
        shape = (shape,) if np.isscalar(shape) else tuple(shape)
        n = int(np.prod(shape, dtype=int))
        A = sp.csr_matrix((np.full(n, float(scale)), (np.arange(n), self.nvar + np.arange(n))),
                          shape=(n, self.nvar + n))
        if name:
            self.var_names[name] = slice(self.nvar, self.nvar + n)
        self.nvar += n
        return Affine(A, np.zeros(n), shape)

    def _check_tag(self, tag):
        if not tag:
            raise ValueError("every constraint needs a tag")

    def add_eq(self, lhs, rhs=0.0, tag: str = "") -> int:
        self._check_tag(tag)
        self.blocks.append(Block("zero", tag, Affine._lift(lhs) - rhs))
        return len(self.blocks) - 1

    def add_ge(self, lhs, rhs=0.0, tag: str = "") -> int:
        """lhs >= rhs."""
        self._check_tag(tag)
        self.blocks.append(Block("nonneg", tag, Affine._lift(lhs) - rhs))
        return len(self.blocks) - 1

    def add_le(self, lhs, rhs=0.0, tag: str = "") -> int:
        return self.add_ge(Affine._lift(rhs) - lhs, 0.0, tag)

    def add_soc(self, t, x, tag: str = "") -> int:
        """||x[i, :]|| <= t[i] for each batch row; ``t`` may be a scalar
        expression with a 1-D ``x``."""
        self._check_tag(tag)
        t = Affine._lift(t)
        x = Affine._lift(x)
        if len(x.shape) == 1:
            x = x.reshape(1, x.shape[0])
            t = t.reshape(1)
        if len(t.shape) != 1 or t.shape[0] != x.shape[0]:
            raise ValueError(f"soc batch mismatch: t{t.shape} vs x{x.shape}")
        expr = concatenate([t.reshape(t.shape[0], 1), x], axis=1)
        self.blocks.append(Block("soc", tag, expr, dim=expr.shape[1]))
        return len(self.blocks) - 1

    def add_rsoc(self, u, v, w, tag: str = "") -> int:
        """u[i] v[i] >= ||w[i, :]||^2 with u, v >= 0 (batched like add_soc)."""
        u, v, w = Affine._lift(u), Affine._lift(v), Affine._lift(w)
        if len(w.shape) == 1 and len(u.shape) == 0:
            w = w.reshape(1, w.shape[0])
            u, v = u.reshape(1), v.reshape(1)
        B = max(u.shape[0] if u.shape else 1, v.shape[0] if v.shape else 1, w.shape[0])
        u, v = u.broadcast_to((B,)), v.broadcast_to((B,))
        w = w.broadcast_to((B, w.shape[1]))
        x = concatenate([2.0 * w, (u - v).reshape(B, 1)], axis=1)
        return self.add_soc(u + v, x, tag)

    def minimize(self, obj) -> None:
        obj = Affine._lift(obj)
        if obj.size != 1:
            obj = obj.sum()
        self.objective = obj.reshape(())

    # assembly -------------------------------------------------------------
    def _stacked(self):
        n = self.nvar
        G, h, cones = [], [], []
        for b in self.blocks:
            G.append(b.expr._pad(n))
            h.append(b.expr.c)
            cones.append((b.kind, b.expr.size, b.dim))
        return sp.vstack(G).tocsc() if G else sp.csc_matrix((0, n)), \
            (np.concatenate(h) if h else np.zeros(0)), cones

    def eval_objective(self, x) -> float:
        return float(self.objective.value(x))

    def dump(self) -> str:
        lines = [f"variables {self.nvar}",
                 f"objective nnz={self.objective.A.nnz} const={self.objective.c[0]!r}"]
        for i, b in enumerate(self.blocks):
            lines.append(f"{i} {b.kind} tag={b.tag} rows={b.expr.size} dim={b.dim} "
                         f"nnz={b.expr.A.nnz}")
        return "\n".join(lines)

    def tags(self) -> list[str]:
        return [b.tag for b in self.blocks]


def check_solution(prog: ConicProgram, x) -> ResidualReport:
    """Recompute every block's violation at ``x`` without the solver."""
    x = np.asarray(x, dtype=float)
    if x.size != prog.nvar:
        raise ValueError("solution length does not match program")
    out: dict[str, float] = {}
    rel = 0.0
    for b in prog.blocks:
        val = b.expr.value(x)
        # magnitude of the terms making up each row, for a relative measure
        mag = (abs(b.expr.A) @ np.abs(x[: b.expr.nvar]) + np.abs(b.expr.c)).reshape(b.expr.shape)
        if b.kind == "zero":
            r = np.abs(val)
            m = mag
        elif b.kind == "nonneg":
            r = np.maximum(-val, 0.0)
            m = mag
        else:
            r = np.maximum(np.linalg.norm(val[:, 1:], axis=1) - val[:, 0], 0.0)
            m = mag.max(axis=1)
        viol = float(r.max(initial=0.0))
        if r.size:
            rel = max(rel, float((r / np.maximum(1.0, m)).max()))
        out[b.tag] = max(out.get(b.tag, 0.0), viol)
    return ResidualReport(max(out.values(), default=0.0), out, rel)


@dataclass
class Tolerances:
    feas: float = 1e-8
    gap_rel: float = 1e-8
    gap_abs: float = 1e-8
    max_iter: int = 200
    time_limit: float = float("inf")


class Solver:
    """Interface: solve(prog, tol) -> ConicSolution."""

    def solve(self, prog: ConicProgram, tol: Tolerances | None = None) -> ConicSolution:
        raise NotImplementedError


class ClarabelSolver(Solver):
    """Interior-point backend.  Demotes a 'Solved' status to 'inaccurate' if
    the reported primal residual or relative gap exceeds 1e-7."""

    def solve(self, prog: ConicProgram, tol: Tolerances | None = None) -> ConicSolution:
        import clarabel

        tol = tol or Tolerances()
        G, h, cones = prog._stacked()
        kinds = []
        for kind, size, dim in cones:
            if kind == "zero":
                kinds.append(clarabel.ZeroConeT(size))
            elif kind == "nonneg":
                kinds.append(clarabel.NonnegativeConeT(size))
            else:
                kinds.extend(clarabel.SecondOrderConeT(dim) for _ in range(size // dim))
        st = clarabel.DefaultSettings()
        st.verbose = False
        st.tol_feas = tol.feas
        st.tol_gap_rel = tol.gap_rel
        st.tol_gap_abs = tol.gap_abs
        st.max_iter = tol.max_iter
        st.time_limit = tol.time_limit
        P = sp.csc_matrix((prog.nvar, prog.nvar))
        q = np.asarray(prog.objective.A.toarray()).ravel()
        q = np.pad(q, (0, prog.nvar - q.size))
        solver = clarabel.DefaultSolver(P, q, -G, h, kinds, st)
        r = solver.solve()
        x = np.asarray(r.x, dtype=float)
        S = clarabel.SolverStatus
        obj = prog.eval_objective(x) if x.size == prog.nvar else np.nan
        pobj, dobj = r.obj_val, r.obj_val_dual
        gap = abs(pobj - dobj) / max(1.0, min(abs(pobj), abs(dobj)))
        if r.status == S.Solved:
            status = "optimal" if (r.r_prim <= 1e-7 and gap <= 1e-7) else "inaccurate"
        elif r.status == S.AlmostSolved:
            status = "inaccurate"
        elif r.status in (S.PrimalInfeasible, S.AlmostPrimalInfeasible):
            status = "infeasible"
        elif r.status in (S.MaxIterations, S.MaxTime):
            status = "max-iters"
        else:
            status = "failed"
        return ConicSolution(x, obj, status, float(r.r_prim), float(gap), int(r.iterations),
                             float(r.solve_time))


DEFAULT_SOLVER: Solver = ClarabelSolver()


def solve(prog: ConicProgram, tol: Tolerances | None = None,
          solver: Solver | None = None) -> ConicSolution:
    return (solver or DEFAULT_SOLVER).solve(prog, tol)


# epigraph helpers -----------------------------------------------------------

def cube_epigraph(prog: ConicProgram, v: Affine, tag: str, scale: float = 1.0) -> Affine:
    """Return c with c >= ||v_i||^3 for each row of ``v`` (shape (B, d)).

    Uses s >= ||v||, s^2 <= h * 1, h^2 <= c * s; at the optimum of a
    problem minimising c these hold with equality, so c = s^3.
    """
    B = v.shape[0]
    s = prog.var(B, scale=scale)
    h = prog.var(B, scale=scale ** 2)
    c = prog.var(B, scale=scale ** 3)
    prog.add_soc(s, v, tag=tag + ":norm")
    prog.add_rsoc(h, np.ones(B), s.reshape(B, 1), tag=tag + ":square")
    prog.add_rsoc(c, s, h.reshape(B, 1), tag=tag + ":cube")
    return c


def inverse_epigraph(prog: ConicProgram, d: Affine, tag: str, scale: float = 1.0) -> Affine:
    """p with p * d >= 1, i.e. p >= 1/d for d > 0."""
    B = d.shape[0]
    p = prog.var(B, scale=scale)
    prog.add_rsoc(p, d, np.ones((B, 1)), tag=tag)
    return p


def quad_over_lin(prog: ConicProgram, x: Affine, d: Affine, tag: str,
                  scale: float = 1.0) -> Affine:
    """t with t * d >= ||x_i||^2."""
    B = x.shape[0]
    t = prog.var(B, scale=scale)
    prog.add_rsoc(t, d, x, tag=tag)
    return t
