"""Problem instances: local quadratic objectives, the shared constraint set,
instance generators for both benchmark setups, and a high-accuracy reference
solver for the constrained optimum.

Every agent holds a convex quadratic, either in least-squares form
f(x) = 0.5 ||A x - b||^2 or as a general convex quadratic x'Qx + q'x + c.
The shared set is a box or a Euclidean ball; both are compact and convex.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .numerics import Rng, as_mat, as_vec, solve_spd
from .topology import Graph, build_graph

PSD_EIG_TOL = -1e-10


class OracleConvergenceError(RuntimeError):
    """The reference solver hit its iteration cap before reaching tolerance."""


class GenerationError(RuntimeError):
    """Instance generation failed (degenerate random draw)."""


# -- objectives -----------------------------------------------------------------


class QuadraticObjective:
    """Convex quadratic in least-squares or general form.

    Least squares: f(x) = 0.5 ||A x - b||^2, convex by construction.
    General:       f(x) = x'Qx + q'x + c with Q symmetric PSD.
    """

    def __init__(self, *, A=None, b=None, Q=None, q=None, c=0.0):
        if A is not None:
            self.kind = "least_squares"
            self.A = as_mat(A)
            self.b = as_vec(b, dim=self.A.shape[0])
            self.dim = self.A.shape[1]
        else:
            self.kind = "quadratic"
            self.Q = as_mat(Q)
            if self.Q.shape[0] != self.Q.shape[1]:
                raise ValueError("Q must be square")
            if not np.allclose(self.Q, self.Q.T, atol=1e-12):
                raise ValueError("Q must be symmetric")
            if np.linalg.eigvalsh(self.Q).min() < PSD_EIG_TOL:
                raise ValueError("Q must be positive semidefinite")
            self.q = as_vec(q, dim=self.Q.shape[0])
            self.c = float(c)
            self.dim = self.Q.shape[0]
            self._H = self.Q + self.Q.T

    @classmethod
    def least_squares(cls, A, b) -> "QuadraticObjective":
        return cls(A=A, b=b)

    @classmethod
    def quadratic(cls, Q, q, c=0.0) -> "QuadraticObjective":
        return cls(Q=Q, q=q, c=c)

    def eval(self, x) -> float:
        return self._eval(as_vec(x, dim=self.dim))

    def grad(self, x) -> np.ndarray:
        return self._grad(as_vec(x, dim=self.dim))

    def _eval(self, x: np.ndarray) -> float:
        """eval without boundary validation; x must be a clean float64 vector."""
        if self.kind == "least_squares":
            r = self.A @ x - self.b
            return 0.5 * float(r @ r)
        return float(x @ self.Q @ x + self.q @ x + self.c)

    def _grad(self, x: np.ndarray) -> np.ndarray:
        if self.kind == "least_squares":
            return self.A.T @ (self.A @ x - self.b)
        return self._H @ x + self.q

    def hessian(self) -> np.ndarray:
        if self.kind == "least_squares":
            return self.A.T @ self.A
        return self.Q + self.Q.T

    def to_dict(self) -> dict:
        if self.kind == "least_squares":
            return {"kind": "least_squares", "A": self.A.tolist(), "b": self.b.tolist()}
        return {"kind": "quadratic", "Q": self.Q.tolist(), "q": self.q.tolist(), "c": self.c}

    @classmethod
    def from_dict(cls, d: dict) -> "QuadraticObjective":
        if d["kind"] == "least_squares":
            return cls.least_squares(d["A"], d["b"])
        if d["kind"] == "quadratic":
            return cls.quadratic(d["Q"], d["q"], d.get("c", 0.0))
        raise ValueError(f"unknown objective kind {d.get('kind')!r}")


# -- constraint sets --------------------------------------------------------------


class ConstraintSet:
    """Compact convex feasible set: a coordinate box or a Euclidean ball."""

    def __init__(self, kind: str, **params):
        self.kind = kind
        if kind == "box":
            self.lower = as_vec(params["lower"])
            self.upper = as_vec(params["upper"], dim=self.lower.size)
            if np.any(self.lower >= self.upper):
                raise ValueError("box requires lower < upper componentwise")
            self.dim = self.lower.size
        elif kind == "ball":
            self.ball_center = as_vec(params["center"])
            self.radius = float(params["radius"])
            if self.radius <= 0:
                raise ValueError("ball radius must be positive")
            self.dim = self.ball_center.size
        else:
            raise ValueError(f"unknown constraint kind {kind!r}")

    @classmethod
    def box(cls, lower, upper) -> "ConstraintSet":
        return cls("box", lower=lower, upper=upper)

    @classmethod
    def ball(cls, center, radius) -> "ConstraintSet":
        return cls("ball", center=center, radius=radius)

    def project(self, y) -> np.ndarray:
        return self._project(as_vec(y, dim=self.dim))

    def _project(self, y: np.ndarray) -> np.ndarray:
        """project without boundary validation; y must be a clean float64 vector."""
        if self.kind == "box":
            return np.clip(y, self.lower, self.upper)
        d = y - self.ball_center
        norm = float(np.linalg.norm(d))
        if norm <= self.radius:
            return y.copy()
        return self.ball_center + (self.radius / norm) * d

    def contains(self, x, tol: float = 1e-12) -> bool:
        x = as_vec(x, dim=self.dim)
        if self.kind == "box":
            return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))
        return float(np.linalg.norm(x - self.ball_center)) <= self.radius + tol

    def center(self) -> np.ndarray:
        if self.kind == "box":
            return 0.5 * (self.lower + self.upper)
        return self.ball_center.copy()

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        """Smallest coordinate box containing the set."""
        if self.kind == "box":
            return self.lower.copy(), self.upper.copy()
        r = self.radius
        return self.ball_center - r, self.ball_center + r

    def to_dict(self) -> dict:
        if self.kind == "box":
            return {"kind": "box", "lower": self.lower.tolist(), "upper": self.upper.tolist()}
        return {"kind": "ball", "center": self.ball_center.tolist(), "radius": self.radius}

    @classmethod
    def from_dict(cls, d: dict) -> "ConstraintSet":
        if d["kind"] == "box":
            return cls.box(d["lower"], d["upper"])
        if d["kind"] == "ball":
            return cls.ball(d["center"], d["radius"])
        raise ValueError(f"unknown constraint kind {d.get('kind')!r}")


# -- instances --------------------------------------------------------------------


@dataclass
class OracleResult:
    """Reference optimum: the point, sum-form value, per-agent values, and the
    projected-gradient fixed-point residual it was solved to."""

    x_star: np.ndarray
    f_star: float
    local_values: list[float]
    kkt_residual: float

    def to_dict(self) -> dict:
        return {
            "x_star": self.x_star.tolist(),
            "f_star": self.f_star,
            "local_values": list(self.local_values),
            "kkt_residual": self.kkt_residual,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "OracleResult":
        return cls(
            x_star=as_vec(d["x_star"]),
            f_star=float(d["f_star"]),
            local_values=[float(v) for v in d["local_values"]],
            kkt_residual=float(d["kkt_residual"]),
        )


@dataclass
class ProblemInstance:
    """One multi-agent problem: objectives, shared constraint, topology, and a
    lazily solved optimum cache. Treated as immutable after generation except
    for the `optimum` cache."""

    objectives: list[QuadraticObjective]
    constraint: ConstraintSet
    graph: Graph
    optimum: OracleResult | None = field(default=None)

    def __post_init__(self):
        dims = {o.dim for o in self.objectives}
        if len(dims) != 1:
            raise ValueError("all objectives must share one decision dimension")
        if self.constraint.dim != self.dim:
            raise ValueError("constraint dimension does not match the objectives")
        if self.graph.n_agents != len(self.objectives):
            raise ValueError("graph size does not match the number of objectives")

    @property
    def n_agents(self) -> int:
        return len(self.objectives)

    @property
    def dim(self) -> int:
        return self.objectives[0].dim

    def sum_value(self, x) -> float:
        x = as_vec(x, dim=self.dim)
        return sum(o._eval(x) for o in self.objectives)

    def sum_grad(self, x) -> np.ndarray:
        x = as_vec(x, dim=self.dim)
        g = np.zeros(self.dim)
        for o in self.objectives:
            g += o._grad(x)
        return g

    def _sum_value(self, x: np.ndarray) -> float:
        return sum(o._eval(x) for o in self.objectives)

    def _sum_grad(self, x: np.ndarray) -> np.ndarray:
        g = np.zeros(self.dim)
        for o in self.objectives:
            g += o._grad(x)
        return g

    def ensure_optimum(self, tol: float = 1e-10) -> OracleResult:
        if self.optimum is None:
            self.optimum = solve_reference(self, tol)
        return self.optimum

    def to_json(self) -> str:
        doc = {
            "objectives": [o.to_dict() for o in self.objectives],
            "constraint": self.constraint.to_dict(),
            "graph": {"n_agents": self.graph.n_agents, "edges": sorted(self.graph.edges)},
        }
        if self.optimum is not None:
            doc["optimum"] = self.optimum.to_dict()
        return json.dumps(doc, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ProblemInstance":
        doc = json.loads(text)
        graph = Graph(
            n_agents=int(doc["graph"]["n_agents"]),
            edges=frozenset(tuple(e) for e in doc["graph"]["edges"]),
        )
        inst = cls(
            objectives=[QuadraticObjective.from_dict(d) for d in doc["objectives"]],
            constraint=ConstraintSet.from_dict(doc["constraint"]),
            graph=graph,
        )
        if "optimum" in doc:
            inst.optimum = OracleResult.from_dict(doc["optimum"])
        return inst


# -- generators -------------------------------------------------------------------


def gen_paper_instance(n: int = 4, dim: int = 6, rows_per_agent: int = 2,
                       rng: Rng | None = None, graph_kind: str = "random",
                       edge_prob: float = 0.5) -> ProblemInstance:
    """Random least-squares instance with a shifted sine-patterned box.

    A_i entries are U(0, 0.1), b_i entries U(0, 5). The box is placed relative
    to the unconstrained minimizer t* of the summed objective:
    l_j = t*_j + 10 + 10 sin(j pi / 120) and u_j = l_j + 10 for j = 1..dim,
    so the constrained optimum is forced onto the boundary.
    """
    if n < 2 or dim < 1 or rows_per_agent < 1:
        raise ValueError("need n >= 2, dim >= 1, rows_per_agent >= 1")
    if rng is None:
        raise ValueError("gen_paper_instance needs an Rng")
    objectives = []
    for _ in range(n):
        A = rng.uniform_array((rows_per_agent, dim), 0.0, 0.1)
        b = rng.uniform_array(rows_per_agent, 0.0, 5.0)
        objectives.append(QuadraticObjective.least_squares(A, b))
    H = sum((o.A.T @ o.A for o in objectives), np.zeros((dim, dim)))
    rhs = sum((o.A.T @ o.b for o in objectives), np.zeros(dim))
    try:
        theta_unc = solve_spd(H + 1e-10 * np.eye(dim), rhs)
    except Exception as exc:
        raise GenerationError(f"aggregate normal system is singular: {exc}") from exc
    j = np.arange(1, dim + 1)
    offset = 10.0 + 10.0 * np.sin(j * math.pi / 120.0)
    lower = theta_unc + offset
    upper = theta_unc + 10.0 + offset
    graph = build_graph(graph_kind, n, edge_prob=edge_prob, rng=rng)
    return ProblemInstance(
        objectives=objectives,
        constraint=ConstraintSet.box(lower, upper),
        graph=graph,
    )


def gen_triangle_demo() -> ProblemInstance:
    """Three fixed convex quadratics on a triangle graph, ball constraint of radius 4."""
    f1 = QuadraticObjective.quadratic([[2.0, 0.5], [0.5, 3.0]], [-4.0, -2.0], 0.0)
    f2 = QuadraticObjective.quadratic([[1.0, -1.0], [-1.0, 4.0]], [3.0, -1.0], 0.0)
    f3 = QuadraticObjective.quadratic([[3.0, 0.0], [0.0, 2.0]], [1.0, -3.0], 2.0)
    graph = build_graph("triangle", 3)
    return ProblemInstance(
        objectives=[f1, f2, f3],
        constraint=ConstraintSet.ball([0.0, 0.0], 4.0),
        graph=graph,
    )


# -- reference solver -------------------------------------------------------------


def estimate_lipschitz(H: np.ndarray, iters: int = 200) -> float:
    """Largest-eigenvalue estimate of a PSD matrix by power iteration, padded 1%."""
    n = H.shape[0]
    v = np.ones(n) / math.sqrt(n)
    v[0] += 1e-3  # break symmetry deterministically
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(iters):
        w = H @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 1.0
        v = w / norm
        lam = float(v @ H @ v)
    return max(lam * 1.01, 1e-12)


def _projected_gradient(grad_fn, project, x0: np.ndarray, L: float,
                        tol: float, max_iter: int) -> tuple[np.ndarray, float, int]:
    """Fixed-step projected gradient; stops on the fixed-point residual."""
    x = project(x0)
    for it in range(max_iter):
        x_next = project(x - grad_fn(x) / L)
        res = float(np.linalg.norm(x - x_next))
        x = x_next
        if res <= tol:
            return x, res, it + 1
    raise OracleConvergenceError(
        f"projected gradient did not reach tol {tol:g} within {max_iter} iterations")


def solve_reference(inst: ProblemInstance, tol: float = 1e-10,
                    max_iter: int = 1_000_000) -> OracleResult:
    """High-accuracy constrained optimum of the summed objective.

    Plain projected gradient with stepsize 1/L, L from power iteration on the
    aggregate Hessian; the loop is deliberately simple so it can be audited
    against the first-order optimality property directly.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    H = sum((o.hessian() for o in inst.objectives), np.zeros((inst.dim, inst.dim)))
    L = estimate_lipschitz(H)
    x0 = inst.constraint.center()
    x, res, _ = _projected_gradient(inst._sum_grad, inst.constraint._project, x0, L, tol, max_iter)
    return OracleResult(
        x_star=x,
        f_star=inst.sum_value(x),
        local_values=[o.eval(x) for o in inst.objectives],
        kkt_residual=res,
    )


def minimize_local(obj: QuadraticObjective, cs: ConstraintSet, tol: float = 1e-10,
                   max_iter: int = 1_000_000) -> tuple[np.ndarray, float]:
    """Constrained minimum of a single objective (used for naive Polyak targets)."""
    L = estimate_lipschitz(obj.hessian())
    x, _, _ = _projected_gradient(obj._grad, cs._project, cs.center(), L, tol, max_iter)
    return x, obj._eval(x)
