"""Command-line interface.

Subcommands: train, eval, plot, check.  Exit codes: 0 success, 2 config
error, 3 numeric divergence, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .config import load_config
from .errors import (BasisGenerationError, ConfigError, DivergenceError,
                     IllConditionedError, ShapeError, SingularityError)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

logger = logging.getLogger("cempid")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cempid",
        description="6-DoF underwater-vehicle simulator and cross-entropy "
                    "PID tuning toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="optimize policy weights")
    p_train.add_argument("--config", help="JSON config file (defaults used if omitted)")
    p_train.add_argument("--seed", type=int, help="master seed (overrides config)")
    p_train.add_argument("--out", required=True, help="output directory")
    p_train.add_argument("--epochs", type=int, help="override cem.epochs")
    p_train.add_argument("--workers", type=int, help="override cem.workers")

    p_eval = sub.add_parser("eval", help="evaluate a controller")
    group = p_eval.add_mutually_exclusive_group(required=True)
    group.add_argument("--weights", help="trained weight file (also runs the naive baseline)")
    group.add_argument("--naive", action="store_true", help="naive baseline only")
    p_eval.add_argument("--scenario", required=True,
                        choices=["none", "sensor", "actuator-current"])
    p_eval.add_argument("--episodes", type=int, help="episodes per controller")
    p_eval.add_argument("--out", required=True, help="output directory")
    p_eval.add_argument("--config", help="JSON config file")
    p_eval.add_argument("--seed", type=int, help="master seed (overrides config)")
    p_eval.add_argument("--workers", type=int, default=1,
                        help="parallel episode evaluations")

    p_plot = sub.add_parser("plot", help="regenerate figures from CSVs")
    p_plot.add_argument("--in", dest="in_dir", required=True)
    p_plot.add_argument("--out", dest="out_dir", required=True)

    p_check = sub.add_parser("check", help="validate config and run self-tests")
    p_check.add_argument("--config", help="JSON config file")
    return parser


def _self_tests(cfg: dict) -> bool:
    """Fast invariant checks; prints one line per check."""
    from . import policy
    from .dynamics import NO_CURRENT, SimState, kinematic_transform, m_eta, step_dynamics
    from .episode import naive_gains
    from .harness import build_vehicle
    from .lyapunov import check_param_constraints, make_basis

    rng = np.random.default_rng(0)
    model = build_vehicle(cfg)
    ok = True

    def report(name: str, passed: bool):
        nonlocal ok
        ok = ok and passed
        print(f"{'PASS' if passed else 'FAIL'}  {name}")

    report("policy weight count == 2918", policy.NUM_WEIGHTS == 2918)

    flat = rng.standard_normal(policy.NUM_WEIGHTS)
    report("weight pack/unpack round-trip",
           np.array_equal(policy.pack_weights(policy.unpack_weights(flat)), flat))

    worst = 0.0
    for _ in range(50):
        eta = np.concatenate([rng.uniform(-5, 5, 3), rng.uniform(-0.4, 0.4, 2),
                              rng.uniform(-np.pi, np.pi, 1)])
        R = kinematic_transform(eta)[:3, :3]
        worst = max(worst, float(np.max(np.abs(R.T @ R - np.eye(3)))))
    report("rotation block orthonormal (50 poses)", worst < 1e-12)

    eta = np.array([0.3, -0.2, 0.5, 0.1, -0.15, 0.7])
    me = m_eta(eta, model)
    report("M_eta symmetric positive definite",
           np.array_equal(me, me.T) and np.linalg.eigvalsh(me).min() > 0)

    basis = make_basis(cfg["rng"]["basis_seed"])
    basis2 = make_basis(cfg["rng"]["basis_seed"])
    report("similarity basis deterministic and invertible",
           np.array_equal(basis.P, basis2.P)
           and np.max(np.abs(basis.P @ basis.P_inv - np.eye(6))) < 1e-8)

    lam = rng.uniform(0.5, 2.0, 6)
    eigs = np.sort(np.linalg.eigvals(basis.transform(lam)).real)
    report("similarity preserves spectrum",
           np.allclose(eigs, np.sort(lam), rtol=1e-6))

    dist = policy.forward(np.zeros(policy.NUM_WEIGHTS), np.zeros(18))
    report("zero-weight network heads at softplus(0)",
           np.allclose(dist.mu, np.log(2))
           and np.allclose(dist.sigma, np.log(2) + policy.SIGMA_FLOOR))

    flags = check_param_constraints(
        naive_gains(eta, np.zeros(6), model), eta, np.zeros(6), model)
    report("naive gains satisfy constraints 1,2,3,5",
           flags[0] and flags[1] and flags[2] and flags[4])

    state = SimState(eta=eta, nu=rng.uniform(-0.2, 0.2, 6),
                     err_integral=np.zeros(6))
    u = rng.uniform(-10, 10, 6)
    s1 = step_dynamics(state, u, NO_CURRENT, np.zeros(6), 0.05, model)
    s2 = step_dynamics(state, u, NO_CURRENT, np.zeros(6), 0.05, model)
    report("step_dynamics deterministic",
           np.array_equal(s1.eta, s2.eta) and np.array_equal(s1.nu, s2.nu))
    return ok


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            from .harness import train
            cfg = load_config(args.config)
            summary = train(cfg, args.out, master_seed=args.seed,
                            epochs=args.epochs, workers=args.workers)
            print(f"best episode cost: {summary['best_cost']:.6g}")
            print(f"weights: {summary['weights']}")
        elif args.command == "eval":
            from .harness import evaluate
            cfg = load_config(args.config)
            summary = evaluate(cfg, args.out, args.scenario,
                               weights_path=args.weights,
                               episodes=args.episodes, master_seed=args.seed,
                               workers=args.workers)
            for controller, row in summary.items():
                print(f"{controller}: J = {row['j_mean']:.6g} +- {row['j_std']:.3g}, "
                      f"state {row['state_pct_mean']:.1f}%, "
                      f"param {row['param_pct_mean']:.1f}%")
        elif args.command == "plot":
            from .plots import plot_all
            written = plot_all(args.in_dir, args.out_dir)
            for path in written:
                print(f"wrote {path}")
        elif args.command == "check":
            cfg = load_config(args.config)
            print("config OK")
            if not _self_tests(cfg):
                return EXIT_NUMERIC
    except (ConfigError, ShapeError) as err:
        logger.error("%s", err)
        return EXIT_CONFIG
    except (DivergenceError, SingularityError, IllConditionedError,
            BasisGenerationError) as err:
        logger.error("numeric failure: %s", err)
        return EXIT_NUMERIC
    except OSError as err:
        logger.error("I/O failure: %s", err)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
