"""Command line entry point: ``layerfem study | mesh dump | adapt``."""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .bench import STUDIES, StudyConfig, run_study
from .elements import LocalSpace
from .fd import AdaptConfig, adapt_loop, write_adapt_csv
from .fem import METHODS, NumericalFailure, assemble, make_stab_plan
from .mesh import MeshFamily, MeshSpec, build_stype_mesh, dump_mesh
from .norms import write_csv
from .problems import problem_example1, problem_example2

log = logging.getLogger("layerfem")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _ConfigError(message)


class _ConfigError(Exception):
    pass


def _floats(text: str) -> tuple:
    try:
        return tuple(float(t) for t in text.split(",") if t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> tuple:
    try:
        return tuple(int(t) for t in text.split(",") if t)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="layerfem", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    # accept -v after the subcommand too without overriding a leading one
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    st = sub.add_parser("study", parents=[common],
                        help="run a convergence-type study and write CSV")
    st.add_argument("--study", choices=STUDIES, default="convergence")
    st.add_argument("--method", choices=METHODS + ("fd-upwind",), default="galerkin")
    st.add_argument("--space", choices=("full", "serendipity"), default="full")
    st.add_argument("--p", type=int, default=4)
    st.add_argument("--mesh", default=None, help="shishkin | bakhvalov-s | poly-s:<m> | "
                                                 "mod-bakhvalov-s (default depends on study)")
    st.add_argument("--sigma", type=float, default=None)
    st.add_argument("--eps", type=_floats, default=(1e-6,), help="value or comma list")
    st.add_argument("--N", type=_ints, default=(8, 16, 32, 64), help="comma list")
    st.add_argument("--interp", choices=("vec", "gl", "eq"), default="vec")
    st.add_argument("--C-SD", dest="C_SD", type=float, default=1.0)
    st.add_argument("--C-LPS", dest="C_LPS", type=float, default=0.001)
    st.add_argument("--sd-set", type=int, choices=(1, 2), default=2)
    st.add_argument("--clamp", action="store_true", help="cap SDFEM weights for coercivity")
    st.add_argument("--extended", action="store_true", help="append N = 128, 256, 320")
    st.add_argument("--dump-matrix", metavar="PATH", default=None,
                    help="write the system matrix for the first N as 'row col value' text")
    st.add_argument("--out", default="-", help="CSV path or - for stdout")

    me = sub.add_parser("mesh", parents=[common], help="mesh utilities")
    msub = me.add_subparsers(dest="mesh_command", required=True, parser_class=_Parser)
    md = msub.add_parser("dump", parents=[common], help="write S-type mesh nodes as text")
    md.add_argument("--mesh", default="bakhvalov-s")
    md.add_argument("--N", type=int, default=16)
    md.add_argument("--eps", type=float, default=1e-6)
    md.add_argument("--sigma", type=float, default=5.5)
    md.add_argument("--beta", type=float, default=1.0)
    md.add_argument("--out", required=True)

    ad = sub.add_parser("adapt", parents=[common], help="adaptive upwind-FD loop with trace CSV")
    ad.add_argument("--init", choices=("equidistant", "shishkin"), default="equidistant")
    ad.add_argument("--n0", type=int, default=4)
    ad.add_argument("--alpha", type=float, default=0.9)
    ad.add_argument("--max-dofs", type=int, default=512 * 512)
    ad.add_argument("--eps", type=float, default=1e-6)
    ad.add_argument("--sigma", type=float, default=None)
    ad.add_argument("--out", default="-")
    return ap


def _open_out(path):
    return sys.stdout if path == "-" else open(path, "w", newline="")


def _study(args) -> None:
    eps = args.eps[0] if len(args.eps) == 1 else args.eps
    cfg = StudyConfig(study=args.study, method=args.method, space=args.space, p=args.p,
                      N=args.N, eps=eps, mesh=args.mesh, sigma=args.sigma, interp=args.interp,
                      C_SD=args.C_SD, C_LPS=args.C_LPS, sd_set=args.sd_set, clamp=args.clamp,
                      extended=args.extended).validate()
    if args.dump_matrix:
        if cfg.is_fd:
            raise ValueError("--dump-matrix is available for FEM methods only")
        pr = problem_example1(cfg.eps_list()[0])
        mesh = build_stype_mesh(MeshSpec(cfg.n_list()[0], pr.epsilon, cfg.resolved_sigma(),
                                         pr.beta, cfg.resolved_mesh()))
        space = LocalSpace.make(cfg.space, cfg.p)
        plan = make_stab_plan(cfg.method, mesh, space, pr, C_SD=cfg.C_SD, C_LPS=cfg.C_LPS,
                              sd_set=cfg.sd_set, clamp=cfg.clamp)
        assemble(pr, mesh, space, plan).dump_coo(args.dump_matrix)
    records = run_study(cfg)
    for r in records:
        log.info("N=%d dofs=%d %.2fs", r.N, r.dofs, r.wall_time)
    fh = _open_out(args.out)
    try:
        write_csv(records, fh)
    finally:
        if fh is not sys.stdout:
            fh.close()


def _mesh_dump(args) -> None:
    mesh = build_stype_mesh(MeshSpec(args.N, args.eps, args.sigma, args.beta,
                                     MeshFamily.parse(args.mesh)))
    dump_mesh(mesh, args.out)


def _adapt(args) -> None:
    cfg = AdaptConfig(alpha=args.alpha, max_dofs=args.max_dofs, init=args.init, n0=args.n0)
    if args.sigma is not None:
        cfg.sigma = args.sigma
    cfg.validate()
    if not 0.0 < args.eps <= 1.0:
        raise ValueError("eps must lie in (0, 1]")

    def report(step):
        log.info("iter %d: %dx%d dofs=%d err=%.3e", step.iter, step.grid.N, step.grid.M,
                 step.dofs, step.true_error)

    steps = adapt_loop(problem_example2(args.eps), cfg, args.eps, callback=report)
    fh = _open_out(args.out)
    try:
        write_adapt_csv(steps, fh)
    finally:
        if fh is not sys.stdout:
            fh.close()


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _ConfigError as exc:
        print(f"layerfem: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    handlers = {"study": _study, "mesh": _mesh_dump, "adapt": _adapt}
    try:
        handlers[args.command](args)
    except (NumericalFailure, np.linalg.LinAlgError) as exc:
        print(f"layerfem: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, OSError) as exc:
        print(f"layerfem: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
