"""Accumulating linear inequality systems and their Phase-I feasibility check.

Each agent owns one `InequalitySystem`. Half-spaces a.x <= b accumulate from
the last reset onward; feasibility is decided by minimizing a single shared
slack s over

    a_t . x - s <= b_t    for every stored constraint t,

solved by a dense two-phase simplex with Bland's anti-cycling rule. The system
is feasible iff the optimal slack is <= EPS_FEAS. A cached witness point gives
an LP-free fast path while new constraints keep it satisfied.

A system may optionally be confined to a coordinate box (`bounds`); the box
enters the LP as ordinary inequality rows and gives an O(dim) per-constraint
infeasibility certificate (a single half-space whose best value over the box
still exceeds its right-hand side dooms the whole system).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import as_vec

EPS_FEAS = 1e-9
MIN_NORMAL = 1e-12
_PIVOT_TOL = 1e-9
_COST_TOL = 1e-9


class SolverStallError(RuntimeError):
    """The simplex exceeded its iteration cap; treated as fatal, not as a verdict."""


@dataclass(frozen=True)
class HalfSpace:
    """One constraint a.x <= b, tagged with the iteration that produced it."""

    a: np.ndarray
    b: float
    iter: int = -1

    def __post_init__(self):
        a = as_vec(self.a)
        if float(np.linalg.norm(a)) <= MIN_NORMAL:
            raise ValueError("near-zero constraint normal rejected")
        if not np.isfinite(self.b):
            raise ValueError("right-hand side must be finite")
        object.__setattr__(self, "a", a)

    def violation(self, x: np.ndarray) -> float:
        return float(self.a @ x - self.b)


@dataclass
class FeasibilityVerdict:
    feasible: bool
    point: np.ndarray | None
    phase1_value: float


class InequalitySystem:
    """Ordered half-space collection with witness caching and optional box domain."""

    def __init__(self, dim: int, bounds: tuple[np.ndarray, np.ndarray] | None = None):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim
        self.constraints: list[HalfSpace] = []
        self.witness: np.ndarray | None = None
        self._witness_worst = -np.inf  # max violation of the witness, kept incrementally
        if bounds is not None:
            lo = as_vec(bounds[0], dim=dim)
            hi = as_vec(bounds[1], dim=dim)
            if np.any(lo >= hi):
                raise ValueError("bounds must satisfy lo < hi componentwise")
            bounds = (lo, hi)
        self.bounds = bounds

    @property
    def size(self) -> int:
        return len(self.constraints)

    def add_constraint(self, h: HalfSpace) -> None:
        """Append a constraint; drop the witness if the new row violates it."""
        if h.a.size != self.dim:
            raise ValueError(f"dimension mismatch: system dim {self.dim}, normal dim {h.a.size}")
        self.constraints.append(h)
        if self.witness is not None:
            v = h.violation(self.witness)
            if v > EPS_FEAS:
                self.witness = None
                self._witness_worst = -np.inf
            else:
                self._witness_worst = max(self._witness_worst, v)

    def drop_oldest(self) -> None:
        if self.constraints:
            self.constraints.pop(0)

    def reset(self) -> None:
        """Remove every stored constraint (bounds persist) and clear the witness."""
        self.constraints = []
        self.witness = None
        self._witness_worst = -np.inf

    def dump(self) -> str:
        """Debug text: one row "a_1 ... a_m | b" per constraint."""
        rows = [" ".join(f"{v:.12g}" for v in h.a) + f" | {h.b:.12g}" for h in self.constraints]
        return "\n".join(rows) + ("\n" if rows else "")

    # -- feasibility ---------------------------------------------------------

    def _bound_rows(self) -> list[tuple[np.ndarray, float]]:
        rows = []
        if self.bounds is not None:
            lo, hi = self.bounds
            eye = np.eye(self.dim)
            for j in range(self.dim):
                if np.isfinite(hi[j]):
                    rows.append((eye[j], float(hi[j])))
                if np.isfinite(lo[j]):
                    rows.append((-eye[j], float(-lo[j])))
        return rows

    def _box_certificate(self) -> FeasibilityVerdict | None:
        """If any single constraint is unsatisfiable inside the box, that settles it."""
        if self.bounds is None:
            return None
        lo, hi = self.bounds
        for h in self.constraints:
            box_min = float(np.sum(np.minimum(h.a * lo, h.a * hi)))
            if box_min - h.b > EPS_FEAS:
                return FeasibilityVerdict(feasible=False, point=None, phase1_value=box_min - h.b)
        return None

    def check_feasible(self, force_lp: bool = False) -> FeasibilityVerdict:
        """Decide feasibility of the stored system (within bounds when present)."""
        if not self.constraints:
            raise ValueError("check_feasible on an empty system")
        if self.witness is not None and not force_lp:
            return FeasibilityVerdict(feasible=True, point=self.witness.copy(),
                                      phase1_value=self._witness_worst)
        certificate = self._box_certificate()
        if certificate is not None:
            return certificate
        rows = self._bound_rows() + [(h.a, h.b) for h in self.constraints]
        s_value, x = _phase1_lp(rows, self.dim)
        if s_value <= EPS_FEAS:
            self.witness = x.copy()
            self._witness_worst = max(h.violation(x) for h in self.constraints)
            return FeasibilityVerdict(feasible=True, point=x, phase1_value=s_value)
        return FeasibilityVerdict(feasible=False, point=None, phase1_value=s_value)


# -- Phase-I linear program ----------------------------------------------------


def _phase1_lp(rows: list[tuple[np.ndarray, float]], dim: int) -> tuple[float, np.ndarray]:
    """Minimize s subject to a_t.x - s <= b_t.

    Free variables are handled by positive/negative splitting:
    v = [x+ (dim), x- (dim), s+, s-, slack (one per row)], all >= 0.
    Returns (achieved slack value, the corresponding x). When the LP is
    unbounded below the point is pushed far enough along the improving ray
    that the achieved slack is decisively negative.
    """
    t_rows = len(rows)
    n_struct = 2 * dim + 2
    n_cols = n_struct + t_rows
    M = np.zeros((t_rows, n_cols))
    rhs = np.zeros(t_rows)
    for t, (a, b) in enumerate(rows):
        M[t, :dim] = a
        M[t, dim:2 * dim] = -a
        M[t, 2 * dim] = -1.0
        M[t, 2 * dim + 1] = 1.0
        M[t, n_struct + t] = 1.0
        rhs[t] = b
    c = np.zeros(n_cols)
    c[2 * dim] = 1.0
    c[2 * dim + 1] = -1.0
    cap = int(1e4 * (t_rows + dim))
    scale = 1.0 + float(np.max(np.abs(rhs))) if t_rows else 1.0
    v = _two_phase_simplex(M, rhs, c, cap, push_target=-10.0 * scale)
    x = v[:dim] - v[dim:2 * dim]
    s = float(v[2 * dim] - v[2 * dim + 1])
    return s, x


def _two_phase_simplex(M: np.ndarray, rhs: np.ndarray, c: np.ndarray,
                       cap: int, push_target: float) -> np.ndarray:
    """Dense two-phase primal simplex (Bland's rule) for min c.v, M v = rhs, v >= 0.

    The LP fed to this routine is feasible by construction, so a positive
    phase-1 optimum indicates numerical failure and raises. An unbounded
    phase 2 returns a point on the improving ray with objective <= push_target.
    """
    m, n = M.shape
    T = np.hstack([M, rhs.reshape(-1, 1)]).astype(float)
    # make all right-hand sides nonnegative
    for i in range(m):
        if T[i, -1] < 0:
            T[i] *= -1.0
    # starting basis: slack columns that survived the sign fix, artificials elsewhere
    basis = [-1] * m
    art_cols: list[int] = []
    for i in range(m):
        slack_col = None
        for j in range(n - m, n):  # slack block is the trailing identity in M
            if T[i, j] == 1.0 and np.count_nonzero(T[:, j]) == 1:
                slack_col = j
                break
        if slack_col is not None:
            basis[i] = slack_col
    need_art = [i for i in range(m) if basis[i] < 0]
    if need_art:
        A_ext = np.zeros((m, len(need_art)))
        for k, i in enumerate(need_art):
            A_ext[i, k] = 1.0
            basis[i] = n + k
            art_cols.append(n + k)
        T = np.hstack([T[:, :-1], A_ext, T[:, -1].reshape(-1, 1)])
    total = T.shape[1] - 1
    blocked = np.zeros(total, dtype=bool)

    if art_cols:
        cost1 = np.zeros(total + 1)
        for j in art_cols:
            cost1[j] = 1.0
        for i, bv in enumerate(basis):
            if cost1[bv] != 0.0:
                cost1 -= cost1[bv] * T[i]
        status, _ = _simplex_loop(T, cost1, basis, blocked, cap)
        if status != "optimal":
            raise SolverStallError("phase 1 did not terminate at an optimum")
        if -cost1[-1] > 1e-7:
            raise SolverStallError("phase 1 optimum is positive for a feasible system")
        _drive_out_artificials(T, basis, art_cols, blocked)
        for j in art_cols:
            blocked[j] = True

    cost2 = np.zeros(total + 1)
    cost2[:n] = c
    for i, bv in enumerate(basis):
        if cost2[bv] != 0.0:
            cost2 -= cost2[bv] * T[i]
    status, ray_col = _simplex_loop(T, cost2, basis, blocked, cap, stop_below=push_target)
    v = np.zeros(total)
    for i, bv in enumerate(basis):
        v[bv] = T[i, -1]
    if status == "unbounded":
        # push along the improving ray until the objective clears push_target
        obj = float(-cost2[-1])
        rate = float(cost2[ray_col])  # < 0
        lam = max(0.0, (obj - push_target) / (-rate))
        direction = np.zeros(total)
        direction[ray_col] = 1.0
        for i, bv in enumerate(basis):
            direction[bv] = -T[i, ray_col]
        v = v + lam * direction
    return v[:n]


def _simplex_loop(T, cost, basis, blocked, cap, stop_below=None):
    """Run Bland-rule pivots until optimal, unbounded, or the objective clears stop_below."""
    for _ in range(cap):
        if stop_below is not None and -cost[-1] <= stop_below:
            return "optimal", None
        enter = -1
        for j in range(T.shape[1] - 1):
            if not blocked[j] and cost[j] < -_COST_TOL:
                enter = j
                break
        if enter < 0:
            return "optimal", None
        ratios = []
        col = T[:, enter]
        for i in range(T.shape[0]):
            if col[i] > _PIVOT_TOL:
                ratios.append((T[i, -1] / col[i], basis[i], i))
        if not ratios:
            return "unbounded", enter
        best = min(r for r, _, _ in ratios)
        # Bland tie-break: smallest basic variable index among minimum-ratio rows
        tied = [(bv, i) for r, bv, i in ratios if r <= best + 1e-12 * (1 + abs(best))]
        leave_row = min(tied)[1]
        _pivot(T, cost, leave_row, enter)
        basis[leave_row] = enter
    raise SolverStallError(f"simplex exceeded {cap} pivots")


def _pivot(T, cost, row, col):
    T[row] /= T[row, col]
    piv_row = T[row]
    factors = T[:, col].copy()
    factors[row] = 0.0
    T -= np.outer(factors, piv_row)
    if cost[col] != 0.0:
        cost -= cost[col] * piv_row


def _drive_out_artificials(T, basis, art_cols, blocked):
    """Pivot zero-level artificial variables out of the basis where possible."""
    art = set(art_cols)
    for i in range(T.shape[0]):
        if basis[i] in art:
            for j in range(T.shape[1] - 1):
                if j not in art and not blocked[j] and abs(T[i, j]) > _PIVOT_TOL:
                    _pivot(T, np.zeros(T.shape[1]), i, j)
                    basis[i] = j
                    break
            # a row whose only support is artificial is redundant; its basic
            # variable stays at zero and never re-enters once blocked
