"""Invariant suites run by the `check` command; reusable from tests."""

from dataclasses import dataclass

import numpy as np

from .algebroid import build_constrained_system, build_splitting, christoffel
from .dynamics import StateQY, dalembert_oracle_field, nonholonomic_field
from .hamiltonian import (PhasePoint, build_hamiltonian, inverse_legendre,
                          legendre_map, symplecticity_defect)
from .numerics import fd_partials
from .optimal_control import ControlDistribution, OCProblem, quadratic_cost


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    threshold: float

    @property
    def passed(self):
        return self.value < self.threshold


def _random_chart_points(model, rng, count):
    if model.dim_q == 0:
        return [np.zeros(0)] * count
    return [0.3 * rng.standard_normal(model.dim_q) for _ in range(count)]


def check_projectors(model, spec, rng):
    """Idempotence, complementarity and metric-orthogonality of P and Q."""
    worst_idem, worst_comp, worst_orth = 0.0, 0.0, 0.0
    for q in _random_chart_points(model, rng, 3):
        split = build_splitting(model, spec, q)
        p, qq = split.projector_p, split.projector_q
        worst_idem = max(worst_idem, float(np.abs(p @ p - p).max()))
        worst_comp = max(worst_comp, float(np.abs(p + qq - np.eye(model.rank_e)).max()))
        g = np.asarray(model.metric(q), dtype=float)
        for _ in range(100):
            v = rng.standard_normal(model.rank_e)
            w = rng.standard_normal(model.rank_e)
            worst_orth = max(worst_orth, abs(float((p @ v) @ g @ (qq @ w))))
    return [CheckResult("projector idempotence", worst_idem, 1e-12),
            CheckResult("projector complement", worst_comp, 1e-12),
            CheckResult("projector metric orthogonality", worst_orth, 1e-10)]


def check_span_annihilator(model, spec):
    """Projectors agree between the span and annihilator representations."""
    from .algebroid import ConstraintSpec

    d = spec.d_basis()
    mu = spec.to_annihilator()
    split_span = build_splitting(model, ConstraintSpec(span_basis=d))
    if mu.shape[0] == 0:
        value = float(np.abs(split_span.projector_p - np.eye(model.rank_e)).max())
    else:
        split_ann = build_splitting(model, ConstraintSpec(annihilator=mu))
        value = float(np.abs(split_span.projector_p - split_ann.projector_p).max())
    return [CheckResult("span/annihilator projector agreement", value, 1e-10)]


def check_bracket_antisymmetry(system, rng):
    worst = 0.0
    for q in _random_chart_points(system.parent, rng, 3):
        cd = system.structure_d(q)
        worst = max(worst, float(np.abs(cd + cd.swapaxes(1, 2)).max()))
    return [CheckResult("projected bracket antisymmetry", worst, 1e-14)]


def check_koszul(system, rng):
    """Defining relation of the Levi-Civita connection, with independent
    finite differences (step 1e-5) for the anchor-derivative terms."""
    worst_koszul, worst_torsion = 0.0, 0.0
    for q in _random_chart_points(system.parent, rng, 3):
        gd = system.metric_d(q)
        cd = system.structure_d(q)
        gamma = christoffel(system, q).gamma
        lhs = 2.0 * np.einsum("cm,mab->cab", gd, gamma)
        rhs = (np.einsum("am,mcb->cab", gd, cd)
               + np.einsum("bm,mca->cab", gd, cd)
               - np.einsum("cm,mba->cab", gd, cd))
        if system.dim_q > 0:
            dgd = fd_partials(lambda qq: system.metric_d(qq), q, step=1e-5)
            rho = system.anchor_d(q)
            rhs = rhs + (np.einsum("ai,ibc->cab", rho, dgd)
                         + np.einsum("bi,iac->cab", rho, dgd)
                         - np.einsum("ci,iab->cab", rho, dgd))
        worst_koszul = max(worst_koszul, float(np.abs(lhs - rhs).max()))
        worst_torsion = max(worst_torsion,
                            float(np.abs(gamma - gamma.swapaxes(1, 2) - cd).max()))
    return [CheckResult("Koszul defining relation", worst_koszul, 1e-8),
            CheckResult("torsion identity", worst_torsion, 1e-10)]


def check_oracle(model, spec, system, rng):
    """nonholonomic_field against the Lagrange-d'Alembert solve (dim_q = 0)."""
    if model.dim_q != 0:
        return []
    d = spec.d_basis()
    worst = 0.0
    for _ in range(100):
        y = rng.uniform(-1.0, 1.0, system.rank_d)
        _, ydot = nonholonomic_field(system, StateQY(q=np.zeros(0), y=y))
        oracle = dalembert_oracle_field(model, spec, d.T @ y)
        worst = max(worst, float(np.abs(ydot - oracle).max()))
    return [CheckResult("Lagrange-d'Alembert oracle equivalence", worst, 1e-10)]


def _default_problem(system):
    return OCProblem(system=system, controls=ControlDistribution.full(system.rank_d),
                     cost=quadratic_cost(np.eye(system.rank_d)), horizon=1.0)


def check_legendre_roundtrip(system, rng):
    problem = _default_problem(system)
    worst = 0.0
    for _ in range(100):
        q = (np.zeros(0) if system.dim_q == 0
             else 0.3 * rng.standard_normal(system.dim_q))
        phase = PhasePoint(q=q, y=rng.uniform(-1, 1, system.rank_d),
                           p_q=rng.uniform(-1, 1, system.dim_q),
                           p_y=rng.uniform(-1, 1, system.rank_d))
        state = inverse_legendre(problem, phase)
        back = legendre_map(problem, state)
        worst = max(worst, float(np.abs(back.flat() - phase.flat()).max()))
    return [CheckResult("Legendre roundtrip", worst, 1e-10)]


def check_symplecticity(system):
    problem = _default_problem(system)
    hs = build_hamiltonian(problem)
    n, m = system.dim_q, system.rank_d
    phase = PhasePoint(q=np.zeros(n), y=np.full(m, 0.3), p_q=np.full(n, 0.1),
                       p_y=np.full(m, 0.2))
    results = []
    for scheme in ("stormer_verlet", "symp_euler"):
        worst = max(symplecticity_defect(hs, phase, dt, scheme) for dt in (0.1, 0.01))
        results.append(CheckResult(f"symplecticity defect ({scheme})", worst, 1e-6))
    return results


def run_all(model, spec, seed=20260810):
    """Full invariant suite for one model; returns a list of CheckResults."""
    rng = np.random.default_rng(seed)
    system = build_constrained_system(model, spec)
    results = []
    results += check_projectors(model, spec, rng)
    results += check_span_annihilator(model, spec)
    results += check_bracket_antisymmetry(system, rng)
    results += check_koszul(system, rng)
    results += check_oracle(model, spec, system, rng)
    results += check_legendre_roundtrip(system, rng)
    results += check_symplecticity(system)
    return results
