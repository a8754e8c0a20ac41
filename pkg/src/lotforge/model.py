"""Solver-agnostic model representation: variables, linear constraints, objective.

All formulation variants assemble a ModelIR; solver backends consume it through
a narrow contract (see backend.py). Binary parking/driving/direction variables
are keyed by cells or arcs; flow variables are continuous and keyed by arcs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, NamedTuple

from .grid import Arc, Cell


class VarKind(Enum):
    PARK0 = "x0"
    PARK90 = "x90"
    DRIVE = "y"
    FLOW_F = "f"
    FLOW_G = "g"
    DIR_Z = "z"

    @property
    def is_binary(self) -> bool:
        return self not in (VarKind.FLOW_F, VarKind.FLOW_G)


class VarRef(NamedTuple):
    kind: VarKind
    key: Cell | Arc

    def __repr__(self) -> str:
        if self.kind in (VarKind.FLOW_F, VarKind.FLOW_G, VarKind.DIR_Z):
            (a, b) = self.key  # type: ignore[misc]
            return f"{self.kind.value}[{tuple(a)}->{tuple(b)}]"
        return f"{self.kind.value}[{tuple(self.key)}]"


def park0_var(anchor: Cell) -> VarRef:
    return VarRef(VarKind.PARK0, anchor)


def park90_var(anchor: Cell) -> VarRef:
    return VarRef(VarKind.PARK90, anchor)


def drive_var(anchor: Cell) -> VarRef:
    return VarRef(VarKind.DRIVE, anchor)


def flow_f_var(arc: Arc) -> VarRef:
    return VarRef(VarKind.FLOW_F, arc)


def flow_g_var(arc: Arc) -> VarRef:
    return VarRef(VarKind.FLOW_G, arc)


def dir_z_var(arc: Arc) -> VarRef:
    return VarRef(VarKind.DIR_Z, arc)


@dataclass(frozen=True)
class LinearConstraint:
    """sum(coeff * var) <sense> rhs, tagged with its formulation family."""

    terms: tuple[tuple[float, VarRef], ...]
    sense: str  # "<=", ">=", "=="
    rhs: float
    tag: str
    lazy: bool = False

    def __post_init__(self):
        if self.sense not in ("<=", ">=", "=="):
            raise ValueError(f"bad sense {self.sense!r}")
        for coeff, _ in self.terms:
            if not math.isfinite(coeff):
                raise ValueError("non-finite coefficient")

    def evaluate(self, values: Mapping[VarRef, float]) -> float:
        return sum(coeff * values.get(var, 0.0) for coeff, var in self.terms)

    def satisfied_by(self, values: Mapping[VarRef, float], tol: float = 1e-6) -> bool:
        lhs = self.evaluate(values)
        if self.sense == "<=":
            return lhs <= self.rhs + tol
        if self.sense == ">=":
            return lhs >= self.rhs - tol
        return abs(lhs - self.rhs) <= tol

    def signature(self) -> tuple:
        return (frozenset(self.terms), self.sense, self.rhs)


def make_constraint(terms: Iterable[tuple[float, VarRef]], sense: str, rhs: float,
                    tag: str, lazy: bool = False) -> LinearConstraint:
    return LinearConstraint(tuple(terms), sense, float(rhs), tag, lazy)


class ModelMalformed(ValueError):
    """Model violates the IR contract (unknown variables, conflicting fixings, ...)."""


INTEGRALITY_TOL = 1e-6
BOUND_TOL = 1e-5


@dataclass
class ModelIR:
    """Variables, constraints, maximize-stalls objective, and fixings.

    The objective is implicit: maximize the sum of every PARK0/PARK90 variable
    with coefficient one. Fixings pin variables to constants (existing driveways,
    entrances, exits, and inaccessible parking anchors).
    """

    variables: list[VarRef] = field(default_factory=list)
    constraints: list[LinearConstraint] = field(default_factory=list)
    fixings: dict[VarRef, float] = field(default_factory=dict)
    _index: dict[VarRef, int] = field(default_factory=dict, repr=False)

    def add_var(self, var: VarRef) -> VarRef:
        if var not in self._index:
            self._index[var] = len(self.variables)
            self.variables.append(var)
        return var

    def has_var(self, var: VarRef) -> bool:
        return var in self._index

    def add_constraint(self, constraint: LinearConstraint) -> None:
        for _, var in constraint.terms:
            if var not in self._index:
                raise ModelMalformed(f"constraint {constraint.tag} references unknown {var!r}")
        self.constraints.append(constraint)

    def add_constraints(self, constraints: Iterable[LinearConstraint]) -> None:
        for c in constraints:
            self.add_constraint(c)

    def fix(self, var: VarRef, value: float) -> None:
        if var not in self._index:
            raise ModelMalformed(f"fixing references unknown {var!r}")
        old = self.fixings.get(var)
        if old is not None and old != value:
            raise ModelMalformed(f"conflicting fixings for {var!r}: {old} vs {value}")
        self.fixings[var] = float(value)

    def objective_vars(self) -> list[VarRef]:
        return [v for v in self.variables if v.kind in (VarKind.PARK0, VarKind.PARK90)]

    def tag_counts(self, include_lazy: bool = True) -> dict[str, int]:
        counts: dict[str, int] = {}
        for c in self.constraints:
            if c.lazy and not include_lazy:
                continue
            counts[c.tag] = counts.get(c.tag, 0) + 1
        return dict(sorted(counts.items()))

    def objective_value(self, values: Mapping[VarRef, float]) -> float:
        return sum(values.get(v, 0.0) for v in self.objective_vars())


class NonIntegralAssignment(ValueError):
    """A binary variable's value is not integral within tolerance."""


@dataclass(frozen=True)
class Layout:
    """Active fields and arc directions extracted from an integral assignment."""

    park0: frozenset[Cell]
    park90: frozenset[Cell]
    drive: frozenset[Cell]
    directions: frozenset[Arc] = frozenset()
    flows: Mapping[VarRef, float] | None = None

    @property
    def stall_count(self) -> int:
        return len(self.park0) + len(self.park90)

    def to_dict(self) -> dict:
        return {
            "park0": [list(c) for c in sorted(self.park0)],
            "park90": [list(c) for c in sorted(self.park90)],
            "drive": [list(c) for c in sorted(self.drive)],
            "directions": [[a.row, a.col, b.row, b.col] for a, b in sorted(self.directions)],
            "stalls": self.stall_count,
        }

    @staticmethod
    def from_dict(data: Mapping) -> "Layout":
        return Layout(
            park0=frozenset(Cell(int(r), int(c)) for r, c in data.get("park0", ())),
            park90=frozenset(Cell(int(r), int(c)) for r, c in data.get("park90", ())),
            drive=frozenset(Cell(int(r), int(c)) for r, c in data.get("drive", ())),
            directions=frozenset((Cell(int(a), int(b)), Cell(int(c), int(d)))
                                 for a, b, c, d in data.get("directions", ())),
        )


def extract_layout(model: ModelIR, assignment: Mapping[VarRef, float]) -> Layout:
    """Collect active anchors and direction arcs from a solved assignment.

    Binary values must be integral within 1e-6. Continuous flow values are kept
    on the layout for diagnostics. Every active direction arc must join two
    active drive anchors (guaranteed by the z <= y couplings; asserted here).
    """
    values = dict(model.fixings)
    values.update(assignment)
    park0, park90, drive = set(), set(), set()
    directions = set()
    flows: dict[VarRef, float] = {}
    for var in model.variables:
        val = values.get(var, 0.0)
        if var.kind.is_binary:
            if min(abs(val), abs(val - 1.0)) > INTEGRALITY_TOL:
                raise NonIntegralAssignment(f"{var!r} = {val}")
            if val <= 0.5:
                continue
            if var.kind is VarKind.PARK0:
                park0.add(var.key)
            elif var.kind is VarKind.PARK90:
                park90.add(var.key)
            elif var.kind is VarKind.DRIVE:
                drive.add(var.key)
            else:
                directions.add(var.key)
        elif abs(val) > INTEGRALITY_TOL:
            flows[var] = val
    for tail, head in directions:
        if tail not in drive and not _is_virtual(tail):
            raise ModelMalformed(f"direction arc {tail}->{head} leaves inactive drive cell")
        if head not in drive and not _is_virtual(head):
            raise ModelMalformed(f"direction arc {tail}->{head} enters inactive drive cell")
    real_directions = frozenset((a, b) for a, b in directions
                                if not _is_virtual(a) and not _is_virtual(b))
    return Layout(park0=frozenset(park0), park90=frozenset(park90), drive=frozenset(drive),
                  directions=real_directions, flows=flows or None)


# Virtual super-root / super-exit cells used by the disjoint multi-entrance flow
# variants; they carry negative coordinates so they can never collide with real cells.
SUPER_ROOT = Cell(-1, -1)
SUPER_EXIT = Cell(-2, -2)


def _is_virtual(cell: Cell) -> bool:
    return cell.row < 0


class SolveStatus(Enum):
    OPTIMAL = "optimal"
    FEASIBLE = "feasible"
    INFEASIBLE = "infeasible"
    TIME_LIMIT = "time_limit"


@dataclass
class SolveStats:
    wall_time: float = 0.0
    cut_rounds: int = 0
    user_cuts: int = 0
    backend_nodes: int = 0


@dataclass
class SolveResult:
    """Outcome of a solve: bounds, gap, layout, and run statistics.

    The gap follows the (UB - LB) / LB convention, with gap 0 when LB == UB and
    +inf when LB == 0 < UB.
    """

    status: SolveStatus
    lower_bound: int = 0
    upper_bound: float = math.inf
    layout: Layout | None = None
    stats: SolveStats = field(default_factory=SolveStats)
    assignment: dict[VarRef, float] | None = None

    @property
    def gap(self) -> float:
        if self.status is SolveStatus.INFEASIBLE:
            return math.nan
        if self.upper_bound <= self.lower_bound + BOUND_TOL:
            return 0.0
        if self.lower_bound == 0:
            return math.inf
        return (self.upper_bound - self.lower_bound) / self.lower_bound

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "lb": self.lower_bound,
            "ub": None if math.isinf(self.upper_bound) else round(self.upper_bound, 6),
            "gap": None if math.isnan(self.gap) else (None if math.isinf(self.gap) else round(self.gap, 6)),
            "time_s": round(self.stats.wall_time, 4),
            "cut_rounds": self.stats.cut_rounds,
            "cuts": self.stats.user_cuts,
            "layout": self.layout.to_dict() if self.layout is not None else None,
        }


def write_lp(model: ModelIR, include_lazy: bool = True) -> str:
    """Human-readable LP-style dump of the model, with constraint tags."""
    names = {v: repr(v) for v in model.variables}
    lines = ["Maximize"]
    obj = " + ".join(names[v] for v in model.objective_vars()) or "0"
    lines.append("  " + obj)
    lines.append("Subject To")
    for idx, c in enumerate(model.constraints):
        if c.lazy and not include_lazy:
            continue
        terms = " + ".join(
            (f"{coeff:g} {names[v]}" if coeff != 1 else names[v]) for coeff, v in c.terms
        ) or "0"
        marker = " [lazy]" if c.lazy else ""
        lines.append(f"  {c.tag}_{idx}: {terms} {c.sense} {c.rhs:g}{marker}")
    lines.append("Bounds")
    for var, value in sorted(model.fixings.items(), key=lambda kv: repr(kv[0])):
        lines.append(f"  {names[var]} = {value:g}")
    for var in model.variables:
        if var in model.fixings:
            continue
        if var.kind.is_binary:
            lines.append(f"  0 <= {names[var]} <= 1")
        else:
            lines.append(f"  0 <= {names[var]}")
    lines.append("Binaries")
    lines.extend(f"  {names[v]}" for v in model.variables if v.kind.is_binary)
    lines.append("End")
    return "\n".join(lines) + "\n"
