"""Command-line entry point: ``rearrange <command> [options]``.

Exit codes: 0 when every verdict holds (or is vacuous), 2 when any verdict
is violated, 1 on operational errors (bad input, unknown theorem, I/O).
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

from .errors import RearrangementError
from .geometry import gamma_for_case, read_constants, search_constants, write_constants
from .grid import atomic_write, read_grid, write_grid
from .inequalities import (
    VIOLATED,
    run_counterexample,
    verify_cor_1_6,
    verify_cor_2_2,
    verify_lipschitz_bound,
    verify_thm_1_1,
    verify_thm_1_2,
    verify_thm_1_3,
    verify_thm_1_4,
    verify_thm_2_1,
    write_reports,
)
from .orlicz import NFunction, parse_nfunction, verify_orlicz_local, verify_orlicz_polya_szego
from .rearrange import schwarz, write_profile

log = logging.getLogger("rearrange")

COMMANDS = ("symmetrize", "verify", "constants", "counterexample", "suite")
THEOREMS = ("1.1", "1.2", "1.3", "1.4", "1.6", "1.7", "2.1", "2.2", "3.4", "3.9")
EXIT_OK, EXIT_ERROR, EXIT_VIOLATED = 0, 1, 2


class UsageError(RearrangementError):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 is reserved for violated verdicts
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


@dataclass
class RunConfig:
    command: str
    inputs: list = field(default_factory=list)
    thm: str | None = None
    eps: float | None = None
    n: int | None = None
    h: float | None = None
    case: str | None = None
    nfunc: str | None = None
    constants: str | None = None
    out: Path = Path(".")
    emit_plots: bool = False

    def validate(self):
        for p in self.inputs + ([self.constants] if self.constants else []):
            if not Path(p).is_file():
                raise UsageError(f"input not found: {p}")
        if self.thm is not None and self.thm not in THEOREMS:
            raise UsageError(f"unknown theorem tag {self.thm!r}; expected one of {', '.join(THEOREMS)}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rearrange", description="Rearrangements of grid functions and checks of gradient estimates.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--input", action="append", default=[], help="RGRID file (repeat for two-function checks)")
    p.add_argument("--thm", help="theorem tag: " + ", ".join(THEOREMS))
    p.add_argument("--eps", type=float)
    p.add_argument("--n", type=int)
    p.add_argument("--h", type=float)
    p.add_argument("--case", choices=("i", "ii", "iii", "iv", "v"))
    p.add_argument("--nfunc", help="N-function descriptor (e.g. 'tag=p-log p=2') or NFUNC file")
    p.add_argument("--constants", help="RCONST certificate with Q and C")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("--emit-plots", action="store_true", help="also write CSV data series")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _config(ns) -> RunConfig:
    return RunConfig(ns.command, list(ns.input), ns.thm, ns.eps, ns.n, ns.h, ns.case, ns.nfunc,
                     ns.constants, Path(ns.out), ns.emit_plots)


def _series(header, *cols) -> str:
    rows = [",".join(header)]
    rows += [",".join(repr(float(v)) for v in row) for row in zip(*cols)]
    return "\n".join(rows) + "\n"


def _need_input(cfg: RunConfig, count: int = 1):
    if len(cfg.inputs) < count:
        raise UsageError(f"'{cfg.command}' needs {count} --input file(s)")
    return [read_grid(p) for p in cfg.inputs[:count]]


# --- commands ----------------------------------------------------------------------------


def cmd_symmetrize(cfg: RunConfig) -> int:
    (u,) = _need_input(cfg)
    sym = schwarz(u)
    write_profile(sym.profile, cfg.out / "profile.rprof")
    h = cfg.h or u.h
    g = sym.to_grid(h)
    write_grid(g, cfg.out / "symmetrized.rgrid")
    summary = [
        f"measure_input={u.domain.measure!r}",
        f"measure_ball={sym.ball.measure!r}",
        f"measure_ball_grid={g.domain.measure!r}",
        f"radius={sym.ball.radius!r}",
        f"l2_input={u.lp_norm(2)!r}",
        f"l2_profile={sym.profile.lp_norm(2)!r}",
        f"l2_resampled={g.lp_norm(2)!r}",
    ]
    atomic_write(cfg.out / "summary.txt", "\n".join(summary) + "\n")
    if cfg.emit_plots:
        lin = sym.profile.linear_view()
        atomic_write(cfg.out / "profile.csv", _series(("s", "u_star"), lin.breakpoints, lin.values))
    return EXIT_OK


def _constants(cfg: RunConfig, u):
    if cfg.constants:
        consts, _ = read_constants(cfg.constants)
        if consts is None or math.isnan(consts.Q):
            raise UsageError(f"{cfg.constants} has no Q")
        return consts
    log.info("no --constants given; searching Q and C on the input domain")
    return search_constants(u.domain)


def _nfunc(cfg: RunConfig) -> NFunction:
    if cfg.nfunc is None:
        raise UsageError(f"--thm {cfg.thm} needs --nfunc")
    if Path(cfg.nfunc).is_file():
        return parse_nfunction(Path(cfg.nfunc).read_text(encoding="utf-8"))
    return parse_nfunction(cfg.nfunc)


def _certificate(cfg: RunConfig, u, consts):
    case = cfg.case or "i"
    if case == "i":
        return gamma_for_case("i", u.n)
    return gamma_for_case(case, u.n, Q=consts.Q, C=consts.C, eps=cfg.eps, measure=u.domain.measure)


def _eps(cfg: RunConfig, u) -> float:
    return 0.1 * u.domain.measure if cfg.eps is None else cfg.eps


def cmd_verify(cfg: RunConfig) -> int:
    if cfg.thm is None:
        raise UsageError("verify needs --thm")
    thm = cfg.thm
    if thm == "2.2":
        u, v = _need_input(cfg, 2)
    else:
        (u,) = _need_input(cfg)
    needs_q = thm not in ("1.1", "1.7", "3.4") or (cfg.case or "i") != "i"
    consts = _constants(cfg, u) if needs_q else None
    if thm == "1.1":
        rep = verify_thm_1_1(u, _certificate(cfg, u, consts))
    elif thm == "1.2":
        rep = verify_thm_1_2(u, consts.Q)
    elif thm == "1.3":
        rep = verify_thm_1_3(u, consts.Q, consts.C, trace_measure=cfg.eps)
    elif thm == "1.4":
        rep = verify_thm_1_4(u, consts.Q, consts.C, proj_measure=cfg.eps)
    elif thm == "1.6":
        base = verify_thm_1_3(u, consts.Q, consts.C, trace_measure=cfg.eps)
        rep = verify_cor_1_6(u, math.sqrt(base.constant))
    elif thm == "1.7":
        rep = verify_lipschitz_bound(u, _certificate(cfg, u, consts).gamma)
    elif thm == "2.1":
        rep = verify_thm_2_1(u, consts.Q, _eps(cfg, u))
    elif thm == "2.2":
        rep = verify_cor_2_2(u, v, _eps(cfg, u), consts.Q)
    elif thm == "3.4":
        rep = verify_orlicz_polya_szego(u, _certificate(cfg, u, consts), _nfunc(cfg))
    else:
        rep = verify_orlicz_local(u, consts.Q, _eps(cfg, u), _nfunc(cfg))
    write_reports([rep], cfg.out / f"report_{thm.replace('.', '_')}.rrep")
    print(f"{rep.name}: {rep.verdict} (lhs={rep.lhs:.6g}, rhs={rep.rhs:.6g})")
    return EXIT_VIOLATED if rep.verdict == VIOLATED else EXIT_OK


def cmd_constants(cfg: RunConfig) -> int:
    (u,) = _need_input(cfg)
    consts = search_constants(u.domain)
    cert = None
    if cfg.case:
        cert = _certificate(cfg, u, consts)
    write_constants(cfg.out / "constants.rconst", consts, cert)
    print(f"Q={consts.Q:.6g} C={consts.C:.6g}" + (f" gamma={cert.gamma:.6g}" if cert else ""))
    return EXIT_OK


def cmd_counterexample(cfg: RunConfig) -> int:
    n = cfg.n or 2
    trace = run_counterexample(n, "interior")
    atomic_write(cfg.out / f"counterexample_n{n}.csv", trace.to_csv())
    print(f"n={n} slope={trace.slope:.6g} source_energy={trace.source_energy:.6g}")
    return EXIT_OK


def cmd_suite(cfg: RunConfig) -> int:
    from .suite import run_suite

    results = run_suite()
    status = EXIT_OK
    summary = []
    for label, reports, series in results:
        write_reports(reports, cfg.out / f"{label}.rrep")
        if cfg.emit_plots:
            for name, text in series.items():
                atomic_write(cfg.out / "plots" / name, text)
        for r in reports:
            summary.append(f"{label} {r.name} {r.verdict}")
            if r.verdict == VIOLATED:
                status = EXIT_VIOLATED
    atomic_write(cfg.out / "summary.txt", "\n".join(summary) + "\n")
    print("\n".join(summary))
    return status


DISPATCH = {
    "symmetrize": cmd_symmetrize,
    "verify": cmd_verify,
    "constants": cmd_constants,
    "counterexample": cmd_counterexample,
    "suite": cmd_suite,
}


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(name)s: %(message)s")
    cfg = _config(ns)
    try:
        cfg.validate()
        cfg.out.mkdir(parents=True, exist_ok=True)
        return DISPATCH[cfg.command](cfg)
    except (RearrangementError, ValueError, OSError) as exc:
        print(f"rearrange: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
