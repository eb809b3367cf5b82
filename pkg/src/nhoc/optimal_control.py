"""Necessary conditions for optimal control of constrained systems.

The control problem is lifted to a second-order variational problem on D by
substituting the controlled equations of motion into the cost; the resulting
Lagrangian L(q, y, ydot) = C(q, y, u(q, y, ydot)) is handled with chart
multipliers lambda_i for the admissibility constraint qdot = rho_D y and,
in the underactuated case, multipliers lambda_bar_alpha for the drift
constraints Phi^alpha = 0 on the unactuated accelerations.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .algebroid import grad_potential
from .dynamics import drift_acceleration
from .errors import DimensionMismatch, SingularHessian
from .numerics import FD_STEP, fd_jacobian, rk4_step


@dataclass(frozen=True)
class CostModel:
    """Running cost C(q, y, u) with optional analytic partials.

    Partials left as None are evaluated by central finite differences with
    step 1e-6.  ``quadratic`` marks C = (1/2) u^T W u, whose partials are
    exact and whose Legendre transform is closed-form.
    """

    evaluator: Callable[[np.ndarray, np.ndarray, np.ndarray], float]
    k: int
    cq: Optional[Callable] = None
    cy: Optional[Callable] = None
    cu: Optional[Callable] = None
    cuu: Optional[Callable] = None
    cuq: Optional[Callable] = None
    cuy: Optional[Callable] = None
    quadratic: bool = False
    weight: Optional[np.ndarray] = None

    def value(self, q, y, u):
        return float(self.evaluator(q, y, u))

    def du(self, q, y, u):
        if self.cu is not None:
            return np.asarray(self.cu(q, y, u), dtype=float)
        return _fd_grad(lambda uu: self.evaluator(q, y, uu), u)

    def dy(self, q, y, u):
        if self.cy is not None:
            return np.asarray(self.cy(q, y, u), dtype=float)
        return _fd_grad(lambda yy: self.evaluator(q, yy, u), y)

    def dq(self, q, y, u):
        if self.cq is not None:
            return np.asarray(self.cq(q, y, u), dtype=float)
        return _fd_grad(lambda qq: self.evaluator(qq, y, u), q)

    def d2uu(self, q, y, u):
        if self.cuu is not None:
            return np.asarray(self.cuu(q, y, u), dtype=float)
        if self.cu is not None:
            return fd_jacobian(lambda uu: self.cu(q, y, uu), u)
        return _fd_second(lambda uu: self.evaluator(q, y, uu), u)

    @property
    def weight_identity(self):
        cached = self.__dict__.get("_weight_identity")
        if cached is None:
            cached = bool(self.quadratic and self.weight is not None
                          and np.array_equal(self.weight, np.eye(self.weight.shape[0])))
            object.__setattr__(self, "_weight_identity", cached)
        return cached

    def solve_hessian(self, q, y, u, rhs):
        """Solve d2C/du2 x = rhs, raising SingularHessian when degenerate."""
        if self.weight_identity:
            return rhs
        hess = self.weight if self.quadratic else self.d2uu(q, y, u)
        try:
            return np.linalg.solve(hess, rhs)
        except np.linalg.LinAlgError as exc:
            raise SingularHessian("cost Hessian is singular at the state") from exc

    def d2uq(self, q, y, u):
        if self.cuq is not None:
            return np.asarray(self.cuq(q, y, u), dtype=float)
        if np.size(q) == 0:
            return np.zeros((self.k, 0))
        if self.cu is not None:
            return fd_jacobian(lambda qq: self.cu(qq, y, u), q)
        return _fd_mixed(lambda uu, qq: self.evaluator(qq, y, uu), u, q)

    def d2uy(self, q, y, u):
        if self.cuy is not None:
            return np.asarray(self.cuy(q, y, u), dtype=float)
        if self.cu is not None:
            return fd_jacobian(lambda yy: self.cu(q, yy, u), y)
        return _fd_mixed(lambda uu, yy: self.evaluator(q, yy, uu), u, y)


def _fd_grad(f, x, step=FD_STEP):
    x = np.asarray(x, dtype=float)
    g = np.empty(x.size)
    for i in range(x.size):
        dx = np.zeros_like(x)
        dx[i] = step
        g[i] = (f(x + dx) - f(x - dx)) / (2.0 * step)
    return g


# second derivatives of a plain evaluator: wider step, since two differences
# of a 1e-6 stencil would lose most of the precision
FD2_STEP = 1e-4


def _fd_second(f, x, step=FD2_STEP):
    x = np.asarray(x, dtype=float)
    n = x.size
    out = np.empty((n, n))
    f0 = f(x)
    for i in range(n):
        ei = np.zeros(n)
        ei[i] = step
        out[i, i] = (f(x + ei) - 2.0 * f0 + f(x - ei)) / step ** 2
        for j in range(i + 1, n):
            ej = np.zeros(n)
            ej[j] = step
            val = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej)
                   + f(x - ei - ej)) / (4.0 * step ** 2)
            out[i, j] = out[j, i] = val
    return out


def _fd_mixed(f, x, z, step=FD2_STEP):
    """d^2 f / dx dz for a scalar f(x, z), shape (len(x), len(z))."""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    out = np.empty((x.size, z.size))
    for i in range(x.size):
        ei = np.zeros(x.size)
        ei[i] = step
        for j in range(z.size):
            ej = np.zeros(z.size)
            ej[j] = step
            out[i, j] = (f(x + ei, z + ej) - f(x + ei, z - ej)
                         - f(x - ei, z + ej) + f(x - ei, z - ej)) / (4.0 * step ** 2)
    return out


def quadratic_cost(weight):
    """Control-effort cost (1/2) u^T W u with exact partials."""
    w = np.atleast_2d(np.asarray(weight, dtype=float))
    if np.abs(w - w.T).max() > 1e-12 * max(1.0, np.abs(w).max()):
        raise DimensionMismatch("quadratic cost weight must be symmetric")
    k = w.shape[0]
    zero_q = lambda q, y, u: np.zeros(np.size(q))
    zero_y = lambda q, y, u: np.zeros(np.size(y))
    return CostModel(
        evaluator=lambda q, y, u: 0.5 * float(u @ w @ u),
        k=k,
        cq=zero_q, cy=zero_y,
        cu=lambda q, y, u: w @ u,
        cuu=lambda q, y, u: w,
        cuq=lambda q, y, u: np.zeros((k, np.size(q))),
        cuy=lambda q, y, u: np.zeros((k, np.size(y))),
        quadratic=True, weight=w)


@dataclass(frozen=True)
class ControlDistribution:
    """Input sections over the adapted D-basis.

    ``input_matrix`` has one column per input; ``actuated_indices`` is set
    when the inputs are basis-aligned (selection columns), which the
    underactuated machinery requires.
    """

    input_matrix: np.ndarray
    actuated_indices: Optional[tuple] = None

    def __post_init__(self):
        m = np.atleast_2d(np.asarray(self.input_matrix, dtype=float))
        if np.linalg.matrix_rank(m, tol=1e-10) < m.shape[1]:
            raise DimensionMismatch("input matrix must have full column rank")
        object.__setattr__(self, "input_matrix", m)
        if self.actuated_indices is not None:
            object.__setattr__(self, "actuated_indices", tuple(int(i) for i in self.actuated_indices))
        square = m.shape[0] == m.shape[1]
        object.__setattr__(self, "_identity", square and np.array_equal(m, np.eye(m.shape[0])))
        object.__setattr__(self, "_inverse", None if not square else np.linalg.inv(m))

    def solve_inputs(self, rhs):
        """B^{-1} rhs for square input matrices (identity fast path)."""
        if self._identity:
            return rhs
        if self._inverse is None:
            raise DimensionMismatch("input matrix is not square")
        return self._inverse @ rhs

    def solve_inputs_t(self, rhs):
        """B^{-T} rhs for square input matrices (identity fast path)."""
        if self._identity:
            return rhs
        if self._inverse is None:
            raise DimensionMismatch("input matrix is not square")
        return self._inverse.T @ rhs

    @classmethod
    def full(cls, rank_d):
        return cls(input_matrix=np.eye(rank_d), actuated_indices=tuple(range(rank_d)))

    @classmethod
    def on_indices(cls, rank_d, indices):
        indices = tuple(int(i) for i in indices)
        m = np.zeros((rank_d, len(indices)))
        for col, idx in enumerate(indices):
            m[idx, col] = 1.0
        return cls(input_matrix=m, actuated_indices=indices)

    @property
    def rank_d(self):
        return self.input_matrix.shape[0]

    @property
    def k(self):
        return self.input_matrix.shape[1]

    @property
    def fully_actuated(self):
        return self.k == self.rank_d

    @property
    def unactuated_indices(self):
        if self.actuated_indices is None:
            raise DimensionMismatch("input sections are not basis-aligned")
        return tuple(i for i in range(self.rank_d) if i not in self.actuated_indices)


@dataclass(frozen=True)
class OCProblem:
    """Constrained system + inputs + cost + horizon + boundary data on D."""

    system: object
    controls: ControlDistribution
    cost: CostModel
    horizon: float
    q0: Optional[np.ndarray] = None
    y0: Optional[np.ndarray] = None
    qT: Optional[np.ndarray] = None
    yT: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.horizon <= 0:
            raise DimensionMismatch("horizon must be positive")
        if self.controls.rank_d != self.system.rank_d:
            raise DimensionMismatch("input sections do not match rank of D")
        if self.cost.k != self.controls.k:
            raise DimensionMismatch("cost control dimension does not match input count")
        for name in ("q0", "qT"):
            val = getattr(self, name)
            arr = self.system.parent.chart_point(val) if val is not None else None
            object.__setattr__(self, name, arr)
        for name in ("y0", "yT"):
            val = getattr(self, name)
            if val is not None:
                arr = np.atleast_1d(np.asarray(val, dtype=float))
                if arr.shape != (self.system.rank_d,):
                    raise DimensionMismatch(f"{name} must have length {self.system.rank_d}")
                object.__setattr__(self, name, arr)

    @property
    def dim_q(self):
        return self.system.dim_q

    @property
    def rank_d(self):
        return self.system.rank_d


@dataclass(frozen=True)
class ExtremalState:
    """Multiplier-side state (q, y, v = actuated ydot, lambda, lambda_bar)."""

    q: np.ndarray = field(default_factory=lambda: np.zeros(0))
    y: np.ndarray = field(default_factory=lambda: np.zeros(0))
    v: np.ndarray = field(default_factory=lambda: np.zeros(0))
    lam: np.ndarray = field(default_factory=lambda: np.zeros(0))
    lam_bar: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        for name in ("q", "y", "v", "lam", "lam_bar"):
            value = getattr(self, name)
            if type(value) is not np.ndarray or value.ndim != 1:
                object.__setattr__(self, name,
                                   np.atleast_1d(np.asarray(value, dtype=float)))


def pack_extremal(state):
    return np.concatenate([state.q, state.y, state.v, state.lam, state.lam_bar])


def unpack_extremal(problem, z, k=None):
    nq, m = problem.dim_q, problem.rank_d
    k = problem.controls.k if k is None else k
    z = np.asarray(z, dtype=float)
    return ExtremalState(q=z[:nq], y=z[nq:nq + m], v=z[nq + m:nq + m + k],
                         lam=z[nq + m + k:2 * nq + m + k], lam_bar=z[2 * nq + m + k:])


def drift_jacobians(system, q, y, geo=None):
    """Partials of the drift Gamma(y,y) + grad V with respect to q and y.

    Returns (d_drift/dq of shape (rank_d, dim_q), d_drift/dy of shape
    (rank_d, rank_d)).  The q-derivative is finite-differenced through the
    geometry (step 1e-6); it vanishes for chart-independent models with a
    chart-independent potential gradient, which the FD reproduces cheaply.
    """
    if geo is not None:
        gamma = geo.get("gamma")
        if gamma is None:
            gamma = system.gamma(q)
    else:
        gamma = system.gamma(q)
    ddy = np.einsum("cab,b->ca", gamma, y) + np.einsum("cab,a->cb", gamma, y)
    if system.dim_q == 0:
        return np.zeros((system.rank_d, 0)), ddy
    if system.parent.q_independent:
        if system.parent.zero_potential:
            return np.zeros((system.rank_d, system.dim_q)), ddy
        # only the potential gradient can vary with q
        ddq = fd_jacobian(lambda qq: grad_potential(system, qq), q)
    else:
        ddq = fd_jacobian(lambda qq: drift_acceleration(system, qq, y), q)
    return ddq, ddy


def recover_controls(problem, q, y, ydot):
    """Controls realizing the acceleration ydot at (q, y).

    Fully actuated: u = B^{-1}(ydot + drift).  With basis-aligned partial
    actuation, ydot holds the actuated components only and the drift is
    restricted to those rows.
    """
    system = problem.system
    q = system.parent.chart_point(q)
    y = np.atleast_1d(np.asarray(y, dtype=float))
    ydot = np.atleast_1d(np.asarray(ydot, dtype=float))
    delta = drift_acceleration(system, q, y)
    ctrl = problem.controls
    if ctrl.fully_actuated:
        if ydot.shape != (system.rank_d,):
            raise DimensionMismatch(f"ydot must have length {system.rank_d}")
        return ctrl.solve_inputs(ydot + delta)
    act = list(ctrl.actuated_indices)
    if ydot.shape != (len(act),):
        raise DimensionMismatch(f"ydot must have length {len(act)} (actuated rows)")
    return ydot + delta[act]


def lift_cost(problem, q, y, ydot):
    """Cost Lagrangian on the second-order constraint space: C at the
    control recovered from (q, y, ydot)."""
    u = recover_controls(problem, q, y, ydot)
    q = problem.system.parent.chart_point(q)
    return problem.cost.value(q, np.atleast_1d(np.asarray(y, dtype=float)), u)


def necessary_conditions_field(problem, state):
    """Explicit ODE of the fully actuated necessary conditions.

    lambda_dot_i = dL/dq^i - lambda_j d(rho^j_A)/dq^i y^A,
    d/dt(dL/dydot^A) = dL/dy^A - rho^i_A lambda_i,  qdot = rho y;
    the acceleration vdot is resolved through the cost Hessian.
    """
    ctrl = problem.controls
    if not ctrl.fully_actuated:
        raise DimensionMismatch("necessary_conditions_field requires full actuation")
    system, cost = problem.system, problem.cost
    q, y, v, lam = state.q, state.y, state.v, state.lam
    geo = system.geometry(q)
    anchor = geo["anchor_d"]
    delta = drift_acceleration(system, q, y, geo)
    u = ctrl.solve_inputs(v + delta)
    ddq, ddy = drift_jacobians(system, q, y, geo)

    cu = cost.du(q, y, u)
    p_y = ctrl.solve_inputs_t(cu)
    l_y = ddy.T @ p_y if cost.quadratic else cost.dy(q, y, u) + ddy.T @ p_y
    qdot = anchor.T @ y
    ydot = v
    rhs = l_y - anchor @ lam

    delta_dot = ddq @ qdot + ddy @ ydot
    bt_rhs = rhs if ctrl._identity else ctrl.input_matrix.T @ rhs
    if not cost.quadratic:
        bt_rhs = bt_rhs - cost.d2uq(q, y, u) @ qdot - cost.d2uy(q, y, u) @ ydot
    w = cost.solve_hessian(q, y, u, bt_rhs)
    vdot = (w if ctrl._identity else ctrl.input_matrix @ w) - delta_dot

    if problem.dim_q > 0:
        l_q = ddq.T @ p_y if cost.quadratic else cost.dq(q, y, u) + ddq.T @ p_y
        lamdot = l_q - np.einsum("iAj,j,A->i", system.anchor_d_dq(q), lam, y)
    else:
        lamdot = np.zeros(0)
    return ExtremalState(q=qdot, y=ydot, v=vdot, lam=lamdot)


def underactuated_field(problem, state):
    """Explicit ODE of the underactuated necessary conditions.

    The unactuated accelerations are eliminated through Phi^alpha = 0
    (index reduction), and the multipliers lambda_bar_alpha evolve by
    lambda_bar_dot = dL/dy^alpha + lambda_bar_beta dPhi^beta/dy^alpha
    - lambda_i rho^i_alpha.  With every index actuated this coincides with
    the fully actuated field.
    """
    ctrl = problem.controls
    act = list(ctrl.actuated_indices)
    una = list(ctrl.unactuated_indices)
    system, cost = problem.system, problem.cost
    q, y, v, lam, lam_bar = state.q, state.y, state.v, state.lam, state.lam_bar
    if v.shape != (len(act),):
        raise DimensionMismatch(f"v must hold the {len(act)} actuated accelerations")
    if lam_bar.shape != (len(una),):
        raise DimensionMismatch(f"lambda_bar must have length {len(una)}")

    geo = system.geometry(q)
    anchor = geo["anchor_d"]
    delta = drift_acceleration(system, q, y, geo)
    u = v + delta[act]
    ddq, ddy = drift_jacobians(system, q, y, geo)

    ydot = np.empty(system.rank_d)
    ydot[act] = v
    ydot[una] = -delta[una]
    qdot = anchor.T @ y

    cu = cost.du(q, y, u)
    l_y = ddy[act].T @ cu if cost.quadratic else cost.dy(q, y, u) + ddy[act].T @ cu
    rho_lam = anchor @ lam

    rhs_a = l_y[act] - rho_lam[act] + ddy[np.ix_(una, act)].T @ lam_bar
    delta_dot = ddq @ qdot + ddy @ ydot
    if not cost.quadratic:
        rhs_a = rhs_a - cost.d2uq(q, y, u) @ qdot - cost.d2uy(q, y, u) @ ydot
    vdot = cost.solve_hessian(q, y, u, rhs_a) - delta_dot[act]

    lam_bar_dot = l_y[una] - rho_lam[una] + ddy[np.ix_(una, una)].T @ lam_bar

    if problem.dim_q > 0:
        l_q = ddq[act].T @ cu if cost.quadratic else cost.dq(q, y, u) + ddq[act].T @ cu
        lamdot = (l_q + ddq[una].T @ lam_bar
                  - np.einsum("iAj,j,A->i", system.anchor_d_dq(q), lam, y))
    else:
        lamdot = np.zeros(0)
    return ExtremalState(q=qdot, y=ydot, v=vdot, lam=lamdot, lam_bar=lam_bar_dot)


def integrate_extremal(problem, state0, t_final, dt, field=None):
    """Fixed-step RK4 integration of an extremal ODE; returns (times, states)."""
    if field is None:
        field = (necessary_conditions_field if problem.controls.fully_actuated
                 else underactuated_field)
    k = state0.v.size

    def rhs(t, z):
        s = unpack_extremal(problem, z, k=k)
        ds = field(problem, s)
        return np.concatenate([ds.q, ds.y, ds.v, ds.lam, ds.lam_bar])

    n_steps = int(round(t_final / dt))
    times = np.empty(n_steps + 1)
    states = []
    z = pack_extremal(state0)
    for i in range(n_steps + 1):
        times[i] = i * dt
        states.append(unpack_extremal(problem, z, k=k))
        if i < n_steps:
            z = rk4_step(rhs, times[i], z, dt)
    return times, states
