"""Solver backend contract and the HiGHS attachment (via scipy).

A backend loads a ModelIR, solves it within a time budget, and reports the best
integer solution plus a valid dual bound. Backends that support in-tree lazy
evaluation would invoke the incumbent callback on every candidate solution; the
bundled HiGHS backend does not, so the engine's outer cut loop handles lazily
separated constraints instead (see engine.py).

Lazy-flagged constraints are excluded from the matrix handed to the solver; the
caller owns their enforcement.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np

from .model import (INTEGRALITY_TOL, ModelIR, ModelMalformed, SolveStatus, VarKind, VarRef)


class BackendUnavailable(RuntimeError):
    """Requested solver backend is unknown or cannot be loaded."""


BACKEND_ENV_VAR = "LOTFORGE_BACKEND"


@dataclass
class RawSolution:
    """What a backend reports back: status, incumbent values, and bounds."""

    status: SolveStatus
    values: dict[VarRef, float] | None
    objective: float | None
    dual_bound: float
    nodes: int = 0


class HighsBackend:
    """HiGHS via scipy.optimize.milp; deterministic (single-threaded), no callbacks."""

    name = "highs"
    supports_lazy_callbacks = False

    def solve(self, model: ModelIR, time_limit: float | None = None,
              incumbent_callback: Callable | None = None, seed: int = 0) -> RawSolution:
        # seed is accepted for contract parity; HiGHS runs deterministically here.
        del incumbent_callback, seed
        from scipy import optimize, sparse

        nvars = len(model.variables)
        if nvars == 0:
            return RawSolution(SolveStatus.OPTIMAL, {}, 0.0, 0.0)
        index = {v: i for i, v in enumerate(model.variables)}

        c = np.zeros(nvars)
        for var in model.objective_vars():
            c[index[var]] = -1.0  # milp minimizes

        lb = np.zeros(nvars)
        ub = np.ones(nvars)
        integrality = np.zeros(nvars, dtype=np.uint8)
        for i, var in enumerate(model.variables):
            if var.kind.is_binary:
                integrality[i] = 1
            else:
                ub[i] = np.inf
        for var, value in model.fixings.items():
            i = index[var]
            lb[i] = ub[i] = value

        rows, cols, data = [], [], []
        lo, hi = [], []
        r = 0
        for cons in model.constraints:
            if cons.lazy:
                continue
            for coeff, var in cons.terms:
                rows.append(r)
                cols.append(index[var])
                data.append(float(coeff))
            if cons.sense == "<=":
                lo.append(-np.inf)
                hi.append(cons.rhs)
            elif cons.sense == ">=":
                lo.append(cons.rhs)
                hi.append(np.inf)
            else:
                lo.append(cons.rhs)
                hi.append(cons.rhs)
            r += 1

        constraints = None
        if r:
            matrix = sparse.csr_matrix((data, (rows, cols)), shape=(r, nvars))
            constraints = optimize.LinearConstraint(matrix, np.array(lo), np.array(hi))

        options = {"mip_rel_gap": 0.0, "presolve": True}
        if time_limit is not None and math.isfinite(time_limit):
            options["time_limit"] = max(float(time_limit), 0.005)
        res = optimize.milp(c=c, constraints=constraints,
                            integrality=integrality,
                            bounds=optimize.Bounds(lb, ub), options=options)

        nodes = int(getattr(res, "mip_node_count", 0) or 0)
        if res.status == 2:
            return RawSolution(SolveStatus.INFEASIBLE, None, None, -math.inf, nodes)
        if res.status not in (0, 1):
            raise ModelMalformed(f"solver failure: {res.message}")

        values = None
        objective = None
        if res.x is not None:
            values = self._snap(model, res.x)
            objective = float(model.objective_value(values))
        dual = getattr(res, "mip_dual_bound", None)
        if dual is None or not math.isfinite(dual):
            dual_bound = math.inf if res.status == 1 else (objective or 0.0)
        else:
            dual_bound = -float(dual)  # back to maximization sense
        status = SolveStatus.OPTIMAL if res.status == 0 else SolveStatus.TIME_LIMIT
        if status is SolveStatus.OPTIMAL and objective is not None:
            dual_bound = float(round(objective))
        return RawSolution(status, values, objective, dual_bound, nodes)

    @staticmethod
    def _snap(model: ModelIR, x: np.ndarray) -> dict[VarRef, float]:
        values: dict[VarRef, float] = {}
        for i, var in enumerate(model.variables):
            val = float(x[i])
            if var.kind.is_binary and min(abs(val), abs(val - 1.0)) <= 10 * INTEGRALITY_TOL:
                val = float(round(val))
            values[var] = val
        return values


def solve_flow_lp(model: ModelIR, fixed_binaries: Mapping[VarRef, float]) -> dict[VarRef, float] | None:
    """Re-solve the flow subsystem as an LP with all binary variables fixed.

    Returns flow values at an LP vertex (simplex/crossover), or None when the
    fixed combination is infeasible. Used to check the total-unimodularity
    integrality property of the flow constraint matrix.
    """
    from scipy import optimize, sparse

    flow_vars = [v for v in model.variables if not v.kind.is_binary]
    if not flow_vars:
        return {}
    index = {v: i for i, v in enumerate(flow_vars)}
    values = dict(model.fixings)
    values.update(fixed_binaries)

    a_ub_rows, a_ub_cols, a_ub_data, b_ub = [], [], [], []
    a_eq_rows, a_eq_cols, a_eq_data, b_eq = [], [], [], []
    for cons in model.constraints:
        if cons.lazy:
            continue
        entries = []
        const = 0.0
        for coeff, var in cons.terms:
            if var in index:
                entries.append((index[var], float(coeff)))
            else:
                const += coeff * values.get(var, 0.0)
        if not entries:
            continue
        rhs = cons.rhs - const
        if cons.sense == "==":
            row = len(b_eq)
            for cc, dd in entries:
                a_eq_rows.append(row)
                a_eq_cols.append(cc)
                a_eq_data.append(dd)
            b_eq.append(rhs)
        else:
            flip = -1.0 if cons.sense == ">=" else 1.0
            row = len(b_ub)
            for cc, dd in entries:
                a_ub_rows.append(row)
                a_ub_cols.append(cc)
                a_ub_data.append(flip * dd)
            b_ub.append(flip * rhs)
    a_ub = sparse.csr_matrix((a_ub_data, (a_ub_rows, a_ub_cols)),
                             shape=(len(b_ub), len(flow_vars))) if b_ub else None
    a_eq = sparse.csr_matrix((a_eq_data, (a_eq_rows, a_eq_cols)),
                             shape=(len(b_eq), len(flow_vars))) if b_eq else None
    res = optimize.linprog(c=np.zeros(len(flow_vars)), A_ub=a_ub, b_ub=b_ub or None,
                           A_eq=a_eq, b_eq=b_eq or None,
                           bounds=[(0, None)] * len(flow_vars), method="highs")
    if not res.success:
        return None
    return {v: float(res.x[i]) for v, i in index.items()}


_REGISTRY = {
    "highs": HighsBackend,
    "scipy": HighsBackend,
}


def get_backend(name: str | None = None) -> HighsBackend:
    """Resolve a backend by name, falling back to the LOTFORGE_BACKEND env var."""
    chosen = name or os.environ.get(BACKEND_ENV_VAR, "highs")
    cls = _REGISTRY.get(chosen.lower())
    if cls is None:
        raise BackendUnavailable(
            f"unknown backend {chosen!r}; available: {sorted(_REGISTRY)}")
    try:
        import scipy.optimize  # noqa: F401
    except ImportError as exc:  # pragma: no cover
        raise BackendUnavailable("scipy is required for the HiGHS backend") from exc
    return cls()
