"""Command-line entry point: ``hal-loss {curves,verify,gradcheck,train,sweep}``.

Exit codes: 0 success, 1 a check failed, 2 usage error.

Any subcommand accepts ``--config PATH`` pointing at a flat ``key=value`` file
(``#`` starts a comment). Keys are long flag names without the dashes; flags
given on the command line override the file. Boolean keys take true/false.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import asdict, fields
from pathlib import Path

from hal_loss import experiments, likelihood, losses, svg
from hal_loss import scalar_math as sm
from hal_loss.synth_data import DEFAULT_WEIGHTS, generate_classification, generate_regression
from hal_loss.trainer import GRADIENT_LOSSES, TrainConfig, gradient_check, train

EXIT_OK, EXIT_CHECK_FAILED, EXIT_USAGE = 0, 1, 2

CURVE_LOSSES = ("smooth_l1", "bsmooth_l1", "focal", "bfocal")
DEFAULT_CURVE_SIGMAS = {"bsmooth_l1": "0.5,2.0", "bfocal": "0.7,1.0,2.0"}


class UsageError(Exception):
    pass


def fmt(x: float) -> str:
    """Shortest round-trip decimal, as used in every CSV."""
    return repr(float(x))


def float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def write_csv(rows: list[list], header: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _emit(text: str, out: Path | None, name: str) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    out.mkdir(parents=True, exist_ok=True)
    # newline="" keeps LF endings on every platform
    with open(out / name, "w", newline="", encoding="utf-8") as fh:
        fh.write(text)


# ----------------------------------------------------------------------------
# config file
# ----------------------------------------------------------------------------


def read_config(path: str) -> list[tuple[str, str]]:
    pairs = []
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (part.strip() for part in line.split("=", 1))
        pairs.append((key.replace("_", "-"), value))
    return pairs


def config_tokens(parser: argparse.ArgumentParser, pairs: list[tuple[str, str]]) -> list[str]:
    flags = {}
    for action in parser._actions:
        for opt in action.option_strings:
            flags[opt] = action
    tokens = []
    for key, value in pairs:
        opt = f"--{key}"
        action = flags.get(opt)
        if action is None or key == "config":
            raise UsageError(f"unknown config key {key!r}")
        if isinstance(action, argparse.BooleanOptionalAction):
            v = value.lower()
            if v not in ("true", "false", "1", "0", "yes", "no"):
                raise UsageError(f"config key {key!r} expects true/false")
            tokens.append(opt if v in ("true", "1", "yes") else f"--no-{key}")
        else:
            tokens += [opt, value]
    return tokens


# ----------------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------------


def _grid(start_k: int, stop_k: int, step: float) -> list[float]:
    return [k * step for k in range(start_k, stop_k + 1)]


def curves_table(loss: str, sigmas: list[float], beta: float, gamma: float, eps_max: float, step: float):
    """Rows of (x, baseline, bayesian per sigma) for a loss family."""
    if step <= 0:
        raise UsageError("--step must be > 0")
    losses.LossParams(beta, gamma, 0.0)  # validates beta and gamma
    if loss in ("smooth_l1", "bsmooth_l1"):
        xs = _grid(0, int(math.floor(eps_max / step + 1e-9)), step)
        header = ["eps", "smooth_l1"]
        cols = [[losses.smooth_l1(x, beta) for x in xs]]
        if loss == "bsmooth_l1":
            for sg in sigmas:
                p = losses.LossParams(beta=beta, gamma=gamma, s=sm.log_variance_from_sigma(sg))
                header.append(f"bsmooth_l1_sigma={sg!r}")
                cols.append([losses.bayesian_smooth_l1(x, p).value for x in xs])
    else:
        n = int(math.floor(1.0 / step + 1e-9))
        xs = [x for x in _grid(1, n, step) if x < 1.0]
        header = ["p_t", "focal"]
        cols = [[losses.focal(x, gamma) for x in xs]]
        if loss == "bfocal":
            for sg in sigmas:
                p = losses.LossParams(beta=beta, gamma=gamma, s=sm.log_variance_from_sigma(sg))
                header.append(f"bfocal_sigma={sg!r}")
                cols.append([losses.bayesian_focal(x, p).value for x in xs])
    rows = [[x] + [c[i] for c in cols] for i, x in enumerate(xs)]
    return header, rows


def cmd_curves(args) -> int:
    sigmas = args.sigma if args.sigma is not None else float_list(DEFAULT_CURVE_SIGMAS.get(args.loss, ""))
    if any(not s > 0 for s in sigmas):
        raise UsageError("--sigma values must be > 0")
    header, rows = curves_table(args.loss, sigmas, args.beta, args.gamma, args.eps_max, args.step)
    out = Path(args.out) if args.out else None
    _emit(write_csv(rows, header), out, f"curves_{args.loss}.csv")
    if args.plot and out is not None:
        xs = [r[0] for r in rows]
        series = {h: [r[i] for r in rows] for i, h in enumerate(header) if i > 0}
        chart = svg.line_chart(xs, series, title=f"{args.loss} loss", xlabel=header[0], ylabel="loss")
        _emit(chart, out, f"curves_{args.loss}.svg")
    return EXIT_OK


def cmd_verify(args) -> int:
    quad = likelihood.QuadConfig(args.abs_tol, args.rel_tol, args.tail_cut)
    header = [
        "sigma", "beta", "tau", "alpha_closed", "alpha_solved", "alpha_rel_err",
        "mass_closed", "mass_quad", "mass_residual", "inner_mass_residual", "ok",
    ]
    rows = []
    failed = False
    for sigma in args.sigma_grid:
        for beta in args.beta_grid:
            spec = likelihood.PiecewiseDensitySpec.normalized(sigma, beta)
            m = likelihood.mass_breakdown(spec, quad)
            try:
                solved = likelihood.solve_alpha(sigma, beta, quad)
            except likelihood.BracketError:
                solved = math.nan
            t = sm.tau(beta, sigma)
            rel = abs(solved - spec.alpha_rate) / spec.alpha_rate
            resid = max(abs(m.total_closed - 1.0), abs(m.total_quad - 1.0))
            inner_resid = abs(m.inner_quad - (1.0 - t))
            ok = m.converged and resid < args.tol and rel < args.alpha_tol and inner_resid < args.tol
            failed |= not ok
            rows.append([sigma, beta, t, spec.alpha_rate, solved, rel,
                         m.total_closed, m.total_quad, resid, inner_resid, "true" if ok else "false"])
    text = write_csv(rows, header)
    _emit(text, Path(args.out) if args.out else None, "verify.csv")
    if args.out:
        sys.stdout.write(text)
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def cmd_gradcheck(args) -> int:
    ids = GRADIENT_LOSSES if args.loss == "all" else (args.loss,)
    header = ["loss", "wrt", "point", "analytic", "numeric", "rel_error"]
    rows, summary = [], []
    failed = False
    for loss_id in ids:
        rep = gradient_check(loss_id, args.points, args.seed)
        for e in rep.entries:
            point = json.dumps(e.point, sort_keys=True, separators=(",", ":"))
            rows.append([loss_id, e.wrt, point, e.analytic, e.numeric, e.rel_error])
        ok = rep.max_rel_error < args.tol
        failed |= not ok
        summary.append(f"{loss_id}: max_rel_error={fmt(rep.max_rel_error)} {'PASS' if ok else 'FAIL'}\n")
    if args.out:
        _emit(write_csv(rows, header), Path(args.out), "gradcheck.csv")
    sys.stdout.write("".join(summary))
    return EXIT_CHECK_FAILED if failed else EXIT_OK


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        learning_rate=args.lr,
        iterations=args.iterations,
        s1_init=args.s1_init,
        s2_init=args.s2_init,
        beta=args.beta,
        gamma=args.gamma,
        class_weight=args.class_weight,
        seed=args.seed,
        reduction=args.reduction,
        optimizer=args.optimizer,
        s_lr_scale=args.s_lr_scale,
        freeze_log_variances=args.freeze_log_variances,
        record_every=args.record_every,
    )


def cmd_train(args) -> int:
    cfg = _train_config(args)
    weights = tuple(args.weights)
    data_seed = args.seed if args.data_seed is None else args.data_seed
    reg = generate_regression(args.n_reg, weights, args.sigma_true, data_seed)
    cls = generate_classification(args.n_cls, weights, args.flip_rate, data_seed)
    rep = train(cfg, reg, cls)

    report = rep.to_dict()
    wall_time = report.pop("wall_time")
    report["config"] = asdict(cfg)
    report["data"] = {
        "n_reg": args.n_reg, "n_cls": args.n_cls, "sigma_true": args.sigma_true,
        "flip_rate": args.flip_rate, "weights": list(weights), "seed": data_seed,
    }
    text = json.dumps(report, indent=1, sort_keys=True) + "\n"
    out = Path(args.out) if args.out else None
    _emit(text, out, "train_report.json")
    if out is not None:
        _emit(json.dumps({"wall_time": wall_time}) + "\n", out, "timing.json")
        if args.plot:
            traj = rep.loss_trajectory
            chart = svg.line_chart(
                [t[0] for t in traj],
                {"total": [t[1] for t in traj], "reg": [t[2] for t in traj], "cls": [t[3] for t in traj]},
                title="training loss", xlabel="iteration", ylabel="loss",
            )
            _emit(chart, out, "train_loss.svg")
        if args.dump_data:
            _emit(reg.to_csv(), out, "reg_data.csv")
            _emit(cls.to_csv(), out, "cls_data.csv")
        sys.stdout.write(
            f"sigma1_hat={fmt(rep.sigma1_hat)} sigma2_hat={fmt(rep.sigma2_hat)} "
            f"residual_rms={fmt(rep.reg_residual_rms)} diverged={str(rep.diverged).lower()}\n"
        )
    return EXIT_CHECK_FAILED if rep.diverged else EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _train_config(args)
    data = experiments.DataSpec(
        n_reg=args.n_reg, n_cls=args.n_cls, sigma_true=args.sigma_true,
        flip_rate=args.flip_rate, weights=tuple(args.weights),
    )
    if args.kind == "flip":
        pts = experiments.label_noise_sweep(args.flip_grid, args.seeds, cfg, data, with_baseline=args.baseline)
        ordered = experiments.strictly_increasing_by_seed(pts)
        failed = not all(ordered.values())
    else:
        pts = experiments.sigma_sweep(args.sigma_grid, args.seeds, cfg, data)
        failed = any(
            p.sigma_true > 0 and abs(p.sigma1_hat / p.sigma_true - 1.0) > args.recovery_tol for p in pts
        )
    failed |= any(p.diverged for p in pts)
    names = [f.name for f in fields(experiments.SweepPoint)]
    rows = [[getattr(p, n) if not isinstance(getattr(p, n), bool) else str(getattr(p, n)).lower()
             for n in names] for p in pts]
    text = write_csv(rows, names)
    _emit(text, Path(args.out) if args.out else None, f"sweep_{args.kind}.csv")
    if args.out:
        sys.stdout.write(text)
    return EXIT_CHECK_FAILED if failed else EXIT_OK


# ----------------------------------------------------------------------------
# parser
# ----------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value file; flags override it")
    p.add_argument("--out", help="output directory (default: stdout)")
    p.add_argument("--seed", type=int, default=0)


def _add_training(p: argparse.ArgumentParser, s_lr_scale: float = 1.0) -> None:
    d = TrainConfig()
    p.add_argument("--lr", type=float, default=d.learning_rate)
    p.add_argument("--iterations", type=int, default=d.iterations)
    p.add_argument("--s1-init", type=float, default=d.s1_init)
    p.add_argument("--s2-init", type=float, default=d.s2_init)
    p.add_argument("--beta", type=float, default=d.beta)
    p.add_argument("--gamma", type=float, default=d.gamma)
    p.add_argument("--class-weight", type=float, default=d.class_weight)
    p.add_argument("--reduction", choices=("mean", "sum"), default=d.reduction)
    p.add_argument("--optimizer", choices=("gd", "adam"), default=d.optimizer)
    p.add_argument("--s-lr-scale", type=float, default=s_lr_scale)
    p.add_argument("--freeze-log-variances", action=argparse.BooleanOptionalAction, default=False)
    p.add_argument("--record-every", type=int, default=d.record_every)
    p.add_argument("--n-reg", type=int, default=1000)
    p.add_argument("--n-cls", type=int, default=2000)
    p.add_argument("--sigma-true", type=float, default=0.3)
    p.add_argument("--flip-rate", type=float, default=0.1)
    p.add_argument("--weights", type=float_list, default=list(DEFAULT_WEIGHTS),
                   help="true weights, bias last")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hal-loss", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("curves", help="tabulate loss curves (CSV, optional SVG)")
    _add_common(p)
    p.add_argument("--loss", choices=CURVE_LOSSES, required=True)
    p.add_argument("--sigma", type=float_list, default=None)
    p.add_argument("--beta", type=float, default=losses.DEFAULT_BETA)
    p.add_argument("--gamma", type=float, default=losses.DEFAULT_GAMMA)
    p.add_argument("--eps-max", type=float, default=4.0)
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--plot", action=argparse.BooleanOptionalAction, default=True)
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("verify", help="check density normalization and the Laplace-rate closed form")
    _add_common(p)
    p.add_argument("--sigma-grid", type=float_list, default=[0.25, 0.5, 1.0, 2.0, 4.0])
    p.add_argument("--beta-grid", type=float_list, default=[0.5, 1.0, 2.0])
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--alpha-tol", type=float, default=1e-8)
    p.add_argument("--abs-tol", type=float, default=likelihood.QuadConfig.abs_tol)
    p.add_argument("--rel-tol", type=float, default=likelihood.QuadConfig.rel_tol)
    p.add_argument("--tail-cut", type=float, default=likelihood.QuadConfig.tail_cut)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("gradcheck", help="analytic vs finite-difference gradients")
    _add_common(p)
    p.add_argument("--loss", choices=("all",) + GRADIENT_LOSSES, default="all")
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("train", help="train the toy two-head model")
    _add_common(p)
    _add_training(p)
    p.add_argument("--data-seed", type=int, default=None)
    p.add_argument("--plot", action=argparse.BooleanOptionalAction, default=False)
    p.add_argument("--dump-data", action=argparse.BooleanOptionalAction, default=False)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="flip-rate or sigma grids over several seeds")
    _add_common(p)
    _add_training(p, s_lr_scale=experiments.LABEL_NOISE_CONFIG.s_lr_scale)
    p.add_argument("--kind", choices=("flip", "sigma"), default="flip")
    p.add_argument("--flip-grid", type=float_list, default=list(experiments.FLIP_GRID))
    p.add_argument("--sigma-grid", type=float_list, default=[0.1, 0.3, 0.5])
    p.add_argument("--seeds", type=int_list, default=list(experiments.SEEDS))
    p.add_argument("--baseline", action=argparse.BooleanOptionalAction, default=False,
                   help="also train a plain-focal baseline and report its clean accuracy")
    p.add_argument("--recovery-tol", type=float, default=0.15)
    p.set_defaults(func=cmd_sweep)
    return parser


def run(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        subparsers = parser._subparsers._group_actions[0].choices
        if argv and argv[0] in subparsers:
            pre = argparse.ArgumentParser(add_help=False)
            pre.add_argument("--config")
            known, _ = pre.parse_known_args(argv[1:])
            if known.config:
                tokens = config_tokens(subparsers[argv[0]], read_config(known.config))
                argv = [argv[0]] + tokens + argv[1:]
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except (UsageError, ValueError) as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"hal-loss: error: {exc}\n")
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
