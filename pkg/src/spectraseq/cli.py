"""Command-line interface.

Exit codes: 0 success, 1 usage or domain error (message on stderr), 2 an
inconclusive verdict under ``--strict``. Output is deterministic: numbers are
printed at 17 significant digits and nothing depends on time or locale.

Spectrum arguments accept a ``.json``/``.csv`` file or a built-in
``torus1:J`` / ``torus2:J`` (spectrum of ``I - Laplacian``).
"""

import argparse
import io
import shlex
import subprocess
import sys
from pathlib import Path

from . import __version__
from ._numerics import dump_json, fmt
from .coeffs import (
    BlockSequence,
    abs_pairing,
    classify_decay,
    load_coeffs,
    pairing,
    save_coeffs,
    sobolev_norm,
)
from .errors import SpectraSeqError
from .komatsu import load_komatsu, validate_conditions
from .operators import adjointness_residual, apply, extract_tensor, load_tensor, save_tensor
from .spectrum import (
    Spectrum,
    load_spectrum,
    minimal_s0,
    save_spectrum,
    summability_test,
    counting_exponent,
    torus_laplacian_spectrum,
)
from .universality import (
    evaluate,
    factorization_check,
    load_points,
    save_points,
    torus_basis,
)

EXIT_OK, EXIT_ERROR, EXIT_INCONCLUSIVE = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# ---------------------------------------------------------------------------
# file helpers


def _fmt_of(path: str) -> str:
    suffix = Path(path).suffix.lower()
    if suffix == ".csv":
        return "csv"
    return "json"


def _read(path: str) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc


def _spectrum(arg: str) -> Spectrum:
    if not Path(arg).exists() and ":" in arg:
        kind, _, j = arg.partition(":")
        if kind in ("torus1", "torus2"):
            try:
                J = int(j)
            except ValueError as exc:
                raise UsageError(f"bad built-in spectrum {arg!r}") from exc
            return torus_laplacian_spectrum(1 if kind == "torus1" else 2, J)
    fmt_ = _fmt_of(arg)
    return load_spectrum(_read(arg), fmt_, label=Path(arg).stem if fmt_ == "csv" else None)


def _coeffs(path: str, sp: Spectrum | None = None) -> BlockSequence:
    return load_coeffs(_read(path), _fmt_of(path), sp)


# ---------------------------------------------------------------------------
# output helpers


def _table(rows) -> str:
    width = max(len(k) for k, _ in rows)
    out = []
    for k, v in rows:
        if isinstance(v, float):
            v = fmt(v)
        elif isinstance(v, complex):
            v = f"{fmt(v.real)} {fmt(v.imag)}j"
        elif v is None:
            v = "-"
        out.append(f"{k.ljust(width)}  {v}")
    return "\n".join(out) + "\n"


def _emit(args, payload: dict, rows=None):
    if args.json or rows is None:
        sys.stdout.write(dump_json(payload) + "\n")
    else:
        sys.stdout.write(_table(rows))


def _cx(z: complex) -> list:
    return [z.real, z.imag]


# ---------------------------------------------------------------------------
# commands


def cmd_spectrum_info(args) -> int:
    sp = _spectrum(args.spectrum)
    alpha, r2 = counting_exponent(sp)
    payload = {
        "label": sp.label,
        "blocks": len(sp),
        "total_dim": sp.total_dim,
        "fitted_counting_exponent": alpha,
        "fit_r2": r2,
        "minimal_s0": minimal_s0(sp, args.margin),
    }
    code = EXIT_OK
    if args.q is not None:
        rep = summability_test(sp, args.q, args.margin)
        payload.update(rep.as_dict())
        if args.strict and rep.verdict == "inconclusive":
            code = EXIT_INCONCLUSIVE
    _emit(args, payload, list(payload.items()))
    return code


def cmd_spectrum_gen(args) -> int:
    sp = torus_laplacian_spectrum(args.n, args.J)
    sys.stdout.write(save_spectrum(sp, args.format))
    return EXIT_OK


def cmd_classify(args) -> int:
    sp = _spectrum(args.spectrum)
    rep = classify_decay(_coeffs(args.coeffs, sp), sp, args.threshold)
    payload = rep.as_dict()
    _emit(args, payload, list(payload.items()))
    return EXIT_OK


def cmd_norm(args) -> int:
    sp = _spectrum(args.spectrum)
    val = sobolev_norm(_coeffs(args.coeffs, sp), sp, args.s)
    payload = {"s": args.s, "norm": val}
    _emit(args, payload, list(payload.items()))
    return EXIT_OK


def cmd_pair(args) -> int:
    sp = _spectrum(args.spectrum)
    u, w = _coeffs(args.u, sp), _coeffs(args.w, sp)
    if args.abs:
        val = abs_pairing(u, w)
        payload = {"abs_pairing": val}
    else:
        z = pairing(u, w)
        payload = {"pairing": _cx(z)}
        if not args.json:
            _emit(args, payload, [("pairing", z)])
            return EXIT_OK
    _emit(args, payload, list(payload.items()))
    return EXIT_OK


def _tensor(args):
    dom = _spectrum(args.domain_spectrum) if args.domain_spectrum else None
    cod = _spectrum(args.codomain_spectrum) if args.codomain_spectrum else None
    return load_tensor(_read(args.tensor), dom, cod)


def cmd_op_apply(args) -> int:
    t = _tensor(args)
    out = apply(t, _coeffs(args.coeffs))
    sys.stdout.write(save_coeffs(out, "json"))
    return EXIT_OK


def cmd_op_adjoint_check(args) -> int:
    t = _tensor(args)
    u, v = _coeffs(args.u), _coeffs(args.v)
    res = adjointness_residual(t, u, v)
    lhs = pairing(apply(t, u), v)
    bound = 1e-10 * (1.0 + abs(lhs))
    payload = {"residual": res, "pairing": _cx(lhs), "tolerance": bound, "within_tolerance": res <= bound}
    rows = [("residual", res), ("pairing", lhs), ("tolerance", bound), ("within_tolerance", str(res <= bound).lower())]
    _emit(args, payload, rows)
    return EXIT_OK


def cmd_op_extract(args) -> int:
    sp = _spectrum(args.domain_spectrum)
    argv = shlex.split(args.probe_cmd)
    if not argv:
        raise UsageError("empty --probe-cmd")

    def probe(u: BlockSequence) -> BlockSequence:
        proc = subprocess.run(argv, input=save_coeffs(u, "json").encode(), capture_output=True)
        if proc.returncode != 0:
            raise UsageError(f"probe command failed ({proc.returncode}): {proc.stderr.decode(errors='replace').strip()}")
        return load_coeffs(proc.stdout, "json")

    t = extract_tensor(probe, sp, args.domain_trunc, args.codomain_trunc, check_linearity=not args.no_linearity_check)
    sys.stdout.write(save_tensor(t))
    return EXIT_OK


def _basis_for(manifold: str, label: str, nblocks: int, J):
    if manifold == "torus1":
        return torus_basis(1, J if J is not None else max(nblocks - 1, 1))
    if J is None:
        if label.startswith("torus2-J"):
            try:
                J = int(label[len("torus2-J"):])
            except ValueError:
                J = None
        if J is None:
            raise UsageError("torus2 needs --J (or coefficients labelled torus2-J<J>)")
    return torus_basis(2, J)


def cmd_reconstruct(args) -> int:
    if _fmt_of(args.coeffs) == "csv":
        if args.J is None:
            raise UsageError("csv coefficients carry no spectrum; pass --J")
        b = _basis_for(args.manifold, "", 0, args.J)
    else:
        raw = _coeffs(args.coeffs)
        b = _basis_for(args.manifold, raw.spectrum_label, len(raw), args.J)
    phi = load_coeffs(_read(args.coeffs), _fmt_of(args.coeffs), b.spectrum)
    pts = load_points(_read(args.points), args.manifold)
    vals = [evaluate(phi, b, p) for p in pts]
    sys.stdout.write(save_points(pts, vals))
    return EXIT_OK


def cmd_factor_check(args) -> int:
    t = load_tensor(_read(args.tensor))
    b = _basis_for(args.manifold, t.domain_label, len(t.domain_dims), args.J)
    dev = factorization_check(t, b, args.grid)
    payload = {"grid": args.grid, "domain_blocks": len(t.domain_dims), "max_deviation": dev}
    _emit(args, payload, list(payload.items()))
    return EXIT_OK


def cmd_komatsu_validate(args) -> int:
    m = load_komatsu(_read(args.file))
    rep = validate_conditions(m, args.K)
    if args.json:
        sys.stdout.write(dump_json(rep.as_dict()) + "\n")
    else:
        lines = [f"K = {rep.K} (verdicts hold up to K only)"]
        for i, c in enumerate(rep.conditions, start=1):
            status = "holds" if c.holds else f"FAILS at k={c.first_violation}"
            lines.append(f"({i}) {c.name}: {status}")
        sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="spectraseq", description="Eigenfunction-expansion toolkit")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--json", action="store_true", help="machine-readable output")
        sp.add_argument("--strict", action="store_true", help="exit 2 on inconclusive verdicts")
        return sp

    s = common(sub.add_parser("spectrum-info", help="counting exponent and summability verdict"))
    s.add_argument("spectrum")
    s.add_argument("--q", type=float)
    s.add_argument("--margin", type=float, default=0.05)
    s.set_defaults(func=cmd_spectrum_info)

    s = common(sub.add_parser("spectrum-gen", help="write a built-in torus spectrum"))
    s.add_argument("--n", type=int, choices=(1, 2), default=1)
    s.add_argument("--J", type=int, required=True)
    s.add_argument("--format", choices=("json", "csv"), default="json")
    s.set_defaults(func=cmd_spectrum_gen)

    s = common(sub.add_parser("classify", help="decay-based regularity class"))
    s.add_argument("spectrum")
    s.add_argument("coeffs")
    s.add_argument("--threshold", type=float, default=4.0)
    s.set_defaults(func=cmd_classify)

    s = common(sub.add_parser("norm", help="Sobolev-scale norm"))
    s.add_argument("spectrum")
    s.add_argument("coeffs")
    s.add_argument("--s", type=float, required=True)
    s.set_defaults(func=cmd_norm)

    s = common(sub.add_parser("pair", help="bilinear (or absolute) pairing"))
    s.add_argument("spectrum")
    s.add_argument("u")
    s.add_argument("w")
    s.add_argument("--abs", action="store_true")
    s.set_defaults(func=cmd_pair)

    for name, func, extra in (
        ("op-apply", cmd_op_apply, ("coeffs",)),
        ("op-adjoint-check", cmd_op_adjoint_check, ("u", "v")),
    ):
        s = common(sub.add_parser(name))
        s.add_argument("tensor")
        for a in extra:
            s.add_argument(a)
        s.add_argument("--domain-spectrum")
        s.add_argument("--codomain-spectrum")
        s.set_defaults(func=func)

    s = common(sub.add_parser("op-extract", help="tensor of a black-box linear map"))
    s.add_argument("--probe-cmd", required=True, help="reads coeffs json on stdin, writes coeffs json")
    s.add_argument("--domain-spectrum", required=True)
    s.add_argument("--domain-trunc", type=int, required=True)
    s.add_argument("--codomain-trunc", type=int, required=True)
    s.add_argument("--no-linearity-check", action="store_true")
    s.set_defaults(func=cmd_op_extract)

    s = common(sub.add_parser("reconstruct", help="evaluate coefficients at points"))
    s.add_argument("--manifold", choices=("torus1", "torus2"), required=True)
    s.add_argument("--coeffs", required=True)
    s.add_argument("--points", required=True)
    s.add_argument("--J", type=int)
    s.set_defaults(func=cmd_reconstruct)

    s = common(sub.add_parser("factor-check", help="universality factorization f = fhat o delta"))
    s.add_argument("--tensor", required=True)
    s.add_argument("--manifold", choices=("torus1", "torus2"), default="torus1")
    s.add_argument("--grid", type=int, required=True)
    s.add_argument("--J", type=int)
    s.set_defaults(func=cmd_factor_check)

    s = common(sub.add_parser("komatsu-validate", help="weight-sequence conditions"))
    s.add_argument("file")
    s.add_argument("--K", type=int)
    s.set_defaults(func=cmd_komatsu_validate)
    return p


def run(argv=None) -> int:
    """Execute one command; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        # buffer stdout so nothing is written when a command fails midway
        real, buf = sys.stdout, io.StringIO()
        sys.stdout = buf
        try:
            code = args.func(args)
        finally:
            sys.stdout = real
        real.write(buf.getvalue())
        real.flush()
        return code
    except (UsageError, SpectraSeqError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
