"""Command-line front end.

Single-instance commands (quantize, recover) reproduce trial 0 of the
oversampling sweep at the first configured (r, lambda), so their output
can be cross-checked against sweep CSV rows run with the same seed.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from sdlowrank import harness
from sdlowrank import noise_shaping
from sdlowrank import recovery
from sdlowrank import sensing
from sdlowrank import sigma_delta

__all__ = ["main", "build_parser"]


def _common_flags(parser):
    parser.add_argument("--config", metavar="FILE", help="flat key=value config file")
    parser.add_argument("--seed", type=int, metavar="U64", help="override master_seed")
    parser.add_argument("--out", metavar="DIR", help="override output_path")
    parser.add_argument("--workers", type=int, metavar="N", help="parallel trial workers")
    parser.add_argument(
        "--paper-scale", action="store_true",
        help="use full-size defaults instead of desk-scale (long running)",
    )


def _load_config(args, **defaults):
    overrides = {}
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.out is not None:
        overrides["output_path"] = args.out
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.config:
        return harness.load_config(args.config, **overrides)
    merged = dict(defaults)
    merged.update(overrides)
    if args.paper_scale:
        return harness.paper_config(**merged)
    return harness.desk_config(**merged)


def _first_instance_task(config):
    r = config.orders[0]
    lam = config.oversampling_grid[0]
    m = int(round(lam * config.ell))
    return harness._TrialTask(
        experiment=harness._EXP_OVERSAMPLING,
        config=config,
        r=r,
        m=m,
        lam=lam,
        trial_index=0,
        operator_seed=harness._derive_seed(
            config.master_seed, harness._EXP_OVERSAMPLING, harness._ROLE_OPERATOR, 0
        ),
        matrix_seed=harness._derive_seed(
            config.master_seed, harness._EXP_OVERSAMPLING, harness._ROLE_MATRIX, 0
        ),
    )


def cmd_quantize(args):
    config = _load_config(args)
    task = _first_instance_task(config)
    op = sensing.draw_operator(
        task.m, config.n1, config.n2, config.distribution, task.operator_seed
    )
    X = harness.make_low_rank(config.n1, config.n2, config.rank, task.matrix_seed)
    X, note = harness._apply_scaling(X, op, config.mu)
    y = sensing.apply(op, X)
    L = config.levels_for(task.r, float(np.max(np.abs(y))))
    alphabet = sigma_delta.build_alphabet(L, config.beta)
    scheme = sigma_delta.default_scheme(task.r, alphabet)
    run = sigma_delta.quantize(y, scheme)
    print(f"order r={task.r} m={task.m} lambda={task.lam:g}")
    print(f"input scale {note.scale:.6g}, max |y| = {np.max(np.abs(y)):.6g}")
    print(f"alphabet: 2L={2 * L} levels, step beta={config.beta:g}, "
          f"max level {alphabet.max_level:.6g}")
    print(f"max |u| = {np.max(np.abs(run.state)):.6g} "
          f"(certified bound {scheme.stability_constant:g})")
    print(f"overflow: {run.overflow}")
    print(f"state recursion residual: {sigma_delta.state_residual(run, task.r):.3e}")
    if args.out:
        import os
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "quantize_instance.npz")
        np.savez(path, y=y, q=run.output, u=run.state, X=X)
        print(f"wrote {path}")
    return 0


def cmd_recover(args):
    config = _load_config(args)
    task = _first_instance_task(config)
    record = harness._run_trial(task)
    print(f"order r={record.r} m={record.m} lambda={record.lam:g} "
          f"form={config.constraint_form}")
    print(f"relative error {record.err_relative:.6e} "
          f"(frobenius {record.err_frobenius:.6e})")
    print(f"nuclear norm of estimate {record.objective:.6g}")
    print(f"iterations {record.iterations}, converged {record.converged}, "
          f"overflow {record.overflow}")
    return 0 if record.converged else 1


def _run_sweep(args, runner, defaults):
    config = _load_config(args, **defaults)
    result = runner(config)
    print(f"wrote {result.csv_path}")
    print(f"wrote {result.summary_path}")
    print(f"wrote {result.plot_path}")
    for r, slope in sorted(result.slopes.items()):
        print(f"r={r}: fitted slope {slope:.4f}")
    if result.failures:
        print(f"{len(result.failures)} trial failures (see summary)", file=sys.stderr)
    return 0


def cmd_sweep_oversampling(args):
    return _run_sweep(args, harness.run_oversampling_sweep, {})


def cmd_sweep_noise(args):
    # measurement-noise experiment runs first order only at m = 2 ell
    defaults = {"orders": (1,), "oversampling_grid": (2.0,)}
    return _run_sweep(args, harness.run_noise_sweep, defaults)


def cmd_rate_distortion(args):
    defaults = {"orders": (2, 3), "constraint_form": "encoded"}
    return _run_sweep(args, harness.run_rate_distortion, defaults)


def cmd_rip_check(args):
    config = _load_config(args)
    lam = config.oversampling_grid[0]
    m = int(round(lam * config.ell))
    seed = harness._derive_seed(
        config.master_seed, harness._EXP_OVERSAMPLING, harness._ROLE_OPERATOR, 0
    )
    op = sensing.draw_operator(m, config.n1, config.n2, config.distribution, seed)
    est = sensing.empirical_rip(op, config.rank, args.trials, seed=config.master_seed)
    print(f"operator {m} x ({config.n1} x {config.n2}), rank {config.rank}, "
          f"{args.trials} trials")
    print(f"delta_hat = {est.delta_hat:.4f} "
          f"(extremes {est.extremes[0]:.4f}, {est.extremes[1]:.4f})")
    return 0


def cmd_selftest(args):
    failures = []

    def check(name, fn):
        try:
            fn()
            print(f"ok {name}")
        except Exception as exc:  # noqa: BLE001 - reported, then aggregated
            failures.append(name)
            print(f"FAIL {name}: {type(exc).__name__}: {exc}")

    def quantizer_stability():
        rng = np.random.default_rng(7)
        for r in (1, 2):
            alphabet = sigma_delta.build_alphabet(
                sigma_delta.required_levels(0.9, 0.5, r), 0.5
            )
            scheme = sigma_delta.default_scheme(r, alphabet)
            for _ in range(50):
                y = rng.uniform(-0.9, 0.9, 64)
                run = sigma_delta.quantize(y, scheme)
                assert not run.overflow
                assert sigma_delta.state_residual(run, r) <= 1e-9

    def shaping_roundtrip():
        op = noise_shaping.DifferenceOperator(size=256, order=2)
        v = np.round(np.random.default_rng(3).uniform(-1, 1, 256) * 512) / 512
        back = noise_shaping.apply_difference(noise_shaping.apply_inverse_power(v, op), op)
        assert np.max(np.abs(back - v)) <= 1e-10

    def small_recovery():
        config = harness.desk_config(
            n1=4, n2=4, rank=1, ell=16, oversampling_grid=(4.0,), orders=(1,),
            trials=1, constraint_form="full_inverse_power",
            output_path="/tmp/sdlowrank-selftest",
        )
        task = _first_instance_task(config)
        record = harness._run_trial(task)
        assert record.converged, "solver did not converge"
        assert record.err_relative < 1.0

    def csv_roundtrip():
        rec = harness.TrialRecord(
            r=1, m=16, ell=8, lam=2.0, trial_index=0, seed=9,
            err_frobenius=0.5, err_relative=0.1, objective=3.0,
            sigma_k_tail=0.0, eps=0.0,
        )
        import tempfile, os
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, "t.csv")
            harness.write_records_csv([rec], path)
            assert harness.read_records_csv(path) == [rec]

    check("quantizer stability", quantizer_stability)
    check("noise shaping roundtrip", shaping_roundtrip)
    check("small recovery", small_recovery)
    check("csv roundtrip", csv_roundtrip)
    if failures:
        print(f"SELFTEST FAIL ({len(failures)} of 4)")
        return 1
    print("SELFTEST PASS")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sdlowrank",
        description="Sigma-Delta quantization of low-rank matrix measurements "
                    "and nuclear-norm recovery",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    commands = [
        ("quantize", cmd_quantize, "quantize one seeded instance and report state bounds"),
        ("recover", cmd_recover, "run the full pipeline on one seeded instance"),
        ("sweep-oversampling", cmd_sweep_oversampling,
         "error vs oversampling factor for each order"),
        ("sweep-noise", cmd_sweep_noise, "error vs measurement noise level"),
        ("rate-distortion", cmd_rate_distortion, "error vs bit rate via encoding"),
        ("rip-check", cmd_rip_check, "estimate the restricted isometry constant"),
        ("selftest", cmd_selftest, "run fast internal consistency checks"),
    ]
    for name, fn, help_text in commands:
        p = sub.add_parser(name, help=help_text)
        _common_flags(p)
        if name == "rip-check":
            p.add_argument("--trials", type=int, default=200,
                           help="sample matrices for the isometry estimate")
        p.set_defaults(func=fn)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
