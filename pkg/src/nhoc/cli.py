"""Command-line front-end: simulate, optimize, check and derive.

Exit codes: 0 success, 1 invariant-check failure, 2 configuration or parse
error, 3 numerical failure, 4 shooting non-convergence (best iterate is
still written).
"""

import argparse
import json
import sys

import numpy as np

from .algebroid import build_constrained_system, christoffel
from .bvp import ShootingProblem, NewtonOptions, extremal_trajectory, solve_bvp, trajectory_cost
from .checks import run_all
from .dynamics import StateQY, simulate
from .errors import (ConstraintViolated, DimensionMismatch, FixedPointDivergence,
                     NewtonDivergence, NhocError, NonFiniteState, NotPositiveDefinite,
                     ParseError, RankDeficient, SingularHessian, SingularJacobian,
                     SingularMetric, ValidationError)
from .hamiltonian import build_hamiltonian, regularity_matrix
from .models import load_model_config, make_builtin
from .optimal_control import (ControlDistribution, ExtremalState, OCProblem,
                              quadratic_cost)

CONFIG_ERRORS = (ParseError, ValidationError, DimensionMismatch,
                 NotPositiveDefinite, RankDeficient)
NUMERICAL_ERRORS = (SingularMetric, SingularHessian, NonFiniteState,
                    FixedPointDivergence, ConstraintViolated, SingularJacobian)


def parse_vector(text):
    if text is None or text == "":
        return np.zeros(0)
    try:
        vec = np.array([float(part) for part in text.split(",")], dtype=float)
    except ValueError:
        raise ValidationError(f"could not parse vector {text!r}") from None
    if not np.all(np.isfinite(vec)):
        raise ValidationError(f"vector {text!r} has non-finite entries")
    return vec


def parse_params(text):
    params = {}
    if not text:
        return params
    for item in text.split(","):
        if "=" not in item:
            raise ValidationError(f"bad --params item {item!r}, expected key=value")
        key, _, value = item.partition("=")
        try:
            params[key.strip()] = float(value)
        except ValueError:
            raise ValidationError(f"bad numeric value in --params item {item!r}") from None
        if not np.isfinite(params[key.strip()]):
            raise ValidationError(f"non-finite value in --params item {item!r}")
    return params


def load_model(args):
    if args.config is not None:
        return load_model_config(args.config)
    return make_builtin(args.builtin, **parse_params(args.params))


def format_value(x):
    return f"{x:.17g}"


def write_trajectory_csv(path, traj):
    """Delimited output: t, q_*, y_*, pq_*, py_*, u_*, energy, hamiltonian.

    Blocks that are absent from the trajectory are omitted entirely; values
    carry 17 significant digits so parsing recovers them exactly.
    """
    blocks = [("t", traj.times.reshape(-1, 1))]
    if traj.qs is not None and traj.qs.shape[1] > 0:
        blocks.append(("q", traj.qs))
    blocks.append(("y", traj.ys))
    if traj.p_qs is not None and traj.p_qs.shape[1] > 0:
        blocks.append(("pq", traj.p_qs))
    if traj.p_ys is not None:
        blocks.append(("py", traj.p_ys))
    if traj.controls is not None:
        blocks.append(("u", traj.controls))
    if traj.energies is not None:
        blocks.append(("energy", traj.energies.reshape(-1, 1)))
    if traj.hamiltonians is not None:
        blocks.append(("hamiltonian", traj.hamiltonians.reshape(-1, 1)))
    header = []
    for name, arr in blocks:
        if arr.shape[1] == 1 and name in ("t", "energy", "hamiltonian"):
            header.append(name)
        else:
            header.extend(f"{name}_{i}" for i in range(arr.shape[1]))
    data = np.hstack([arr for _, arr in blocks])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in data:
            fh.write(",".join(format_value(v) for v in row) + "\n")


def cmd_simulate(args):
    model, spec = load_model(args)
    system = build_constrained_system(model, spec)
    if args.T <= 0 or args.dt <= 0:
        raise ValidationError("need --T > 0 and --dt > 0")
    y0 = parse_vector(args.y0)
    q0 = parse_vector(args.q0) if args.q0 else np.zeros(model.dim_q)
    if y0.shape != (system.rank_d,):
        raise ValidationError(f"--y0 must have length {system.rank_d}")
    if q0.shape != (model.dim_q,):
        raise ValidationError(f"--q0 must have length {model.dim_q}")
    traj = simulate(system, StateQY(q=q0, y=y0), args.T, args.dt, integrator=args.integrator)
    write_trajectory_csv(args.out, traj)
    drift = float(np.abs(traj.energies - traj.energies[0]).max())
    rel = drift / max(1.0, abs(float(traj.energies[0])))
    print(f"wrote {len(traj)} samples to {args.out}")
    print(f"energy drift: max abs {drift:.6e}, relative {rel:.6e}")
    return 0


def cmd_optimize(args):
    model, spec = load_model(args)
    system = build_constrained_system(model, spec)
    if args.T <= 0 or args.dt <= 0:
        raise ValidationError("need --T > 0 and --dt > 0")
    y0, yT = parse_vector(args.y0), parse_vector(args.yT)
    if y0.shape != (system.rank_d,) or yT.shape != (system.rank_d,):
        raise ValidationError(f"--y0/--yT must have length {system.rank_d}")
    q0 = parse_vector(args.q0) if args.q0 else np.zeros(model.dim_q)
    qT = parse_vector(args.qT) if args.qT else np.zeros(model.dim_q)
    if q0.shape != (model.dim_q,) or qT.shape != (model.dim_q,):
        raise ValidationError(f"--q0/--qT must have length {model.dim_q}")
    weights = parse_vector(args.weights) if args.weights else np.ones(system.rank_d)
    if weights.shape != (system.rank_d,):
        raise ValidationError(f"--weights must have length {system.rank_d}")

    controls = ControlDistribution.full(system.rank_d)
    problem = OCProblem(system=system, controls=controls, cost=quadratic_cost(np.diag(weights)),
                        horizon=args.T, q0=q0, y0=y0, qT=qT, yT=yT)
    report = regularity_matrix(problem, ExtremalState(q=q0, y=y0, v=np.zeros(system.rank_d)))
    if not report.is_regular:
        raise SingularHessian(
            f"regularity matrix is singular (det = {report.determinant:.3e})")
    hs = build_hamiltonian(problem)
    sp = ShootingProblem(hs=hs, dt=args.dt, scheme=args.integrator,
                         newton=NewtonOptions(tolerance=args.newton_tol,
                                              max_iterations=args.max_iterations))
    guess = parse_vector(args.guess) if args.guess else np.zeros(sp.n_momenta)
    if guess.shape != (sp.n_momenta,):
        raise ValidationError(f"--guess must have length {sp.n_momenta}")

    def report_trajectory(traj, p0, iterations, residual_norm, cost):
        write_trajectory_csv(args.out, traj)
        max_dh = float(np.abs(traj.hamiltonians - traj.hamiltonians[0]).max())
        print(f"wrote {len(traj)} samples to {args.out}")
        print(f"p0: {','.join(format_value(v) for v in p0)}")
        print(f"cost: {cost:.12g}")
        print(f"iterations: {iterations}")
        print(f"residual: {residual_norm:.6e}")
        print(f"max |dH|: {max_dh:.6e}")

    try:
        result = solve_bvp(sp, guess)
    except NewtonDivergence as exc:
        if exc.best is None:
            raise
        traj = extremal_trajectory(sp, exc.best)
        report_trajectory(traj, exc.best, sp.newton.max_iterations,
                          exc.residual_norm, trajectory_cost(sp, traj))
        print(f"error: NewtonDivergence: {exc}", file=sys.stderr)
        return 4
    report_trajectory(result.trajectory, result.p0, result.iterations,
                      result.residual_norm, result.cost)
    return 0


def cmd_check(args):
    model, spec = load_model(args)
    results = run_all(model, spec)
    width = max(len(r.name) for r in results)
    failures = 0
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        print(f"{r.name:<{width}}  {r.value:12.4e} < {r.threshold:8.1e}  {status}")
        failures += 0 if r.passed else 1
    if failures:
        print(f"{failures} check(s) FAILED")
        return 1
    print("all checks passed")
    return 0


def cmd_derive(args):
    model, spec = load_model(args)
    system = build_constrained_system(model, spec)
    q = parse_vector(args.q) if args.q else np.zeros(model.dim_q)
    if q.shape != (model.dim_q,):
        raise ValidationError(f"--q must have length {model.dim_q}")
    doc = {
        "q": q.tolist(),
        "structure_constants": system.structure_d(q).tolist(),
        "restricted_metric": system.metric_d(q).tolist(),
        "restricted_metric_inverse": system.metric_d_inv(q).tolist(),
        "christoffel": christoffel(system, q).gamma.tolist(),
    }
    print(json.dumps(doc, indent=2))
    return 0


def add_model_arguments(parser):
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--builtin", choices=["suslov", "chaplygin", "double_integrator"],
                       help="built-in model name")
    group.add_argument("--config", help="path to a model config JSON document")
    parser.add_argument("--params", default="",
                        help="builtin parameters as key=value pairs, comma separated")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nhoc",
        description="nonholonomic mechanics and optimal control on constrained bundles")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="integrate the free nonholonomic flow")
    add_model_arguments(p_sim)
    p_sim.add_argument("--q0", default="", help="initial chart point (comma separated)")
    p_sim.add_argument("--y0", required=True, help="initial fiber velocity (comma separated)")
    p_sim.add_argument("--T", type=float, required=True, help="final time")
    p_sim.add_argument("--dt", type=float, required=True, help="fixed step size")
    p_sim.add_argument("--integrator", choices=["rk4", "symp_euler"], default="rk4")
    p_sim.add_argument("--out", required=True, help="output CSV path")
    p_sim.set_defaults(func=cmd_simulate)

    p_opt = sub.add_parser("optimize", help="solve the optimal-control boundary problem")
    add_model_arguments(p_opt)
    p_opt.add_argument("--q0", default="", help="initial chart point")
    p_opt.add_argument("--qT", default="", help="terminal chart point")
    p_opt.add_argument("--y0", required=True, help="initial fiber velocity")
    p_opt.add_argument("--yT", required=True, help="terminal fiber velocity")
    p_opt.add_argument("--T", type=float, required=True, help="horizon")
    p_opt.add_argument("--dt", type=float, default=1e-3, help="integration step")
    p_opt.add_argument("--integrator", choices=["rk4", "symp_euler", "stormer_verlet"],
                       default="rk4")
    p_opt.add_argument("--weights", default="", help="diagonal cost weights")
    p_opt.add_argument("--guess", default="", help="initial momenta guess")
    p_opt.add_argument("--newton-tol", type=float, default=1e-10, dest="newton_tol")
    p_opt.add_argument("--max-iterations", type=int, default=50, dest="max_iterations")
    p_opt.add_argument("--out", required=True, help="output CSV path")
    p_opt.set_defaults(func=cmd_optimize)

    p_chk = sub.add_parser("check", help="run the invariant suite on a model")
    add_model_arguments(p_chk)
    p_chk.set_defaults(func=cmd_check)

    p_der = sub.add_parser("derive", help="print derived geometric data as JSON")
    add_model_arguments(p_der)
    p_der.add_argument("--q", default="", help="chart point (comma separated)")
    p_der.set_defaults(func=cmd_derive)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CONFIG_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except NUMERICAL_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except NewtonDivergence as exc:
        print(f"error: NewtonDivergence: {exc}", file=sys.stderr)
        return 4
    except NhocError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
