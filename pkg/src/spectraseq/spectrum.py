"""Eigenvalue / multiplicity data of a positive self-adjoint operator.

A :class:`Spectrum` is the ordered list of blocks ``(lambda_j, d_j)``. Besides
ingestion and serialization this module estimates the growth exponent of the
counting function ``N(lambda) = sum_{lambda_j <= lambda} d_j``, which decides
for which ``q`` the series ``sum_j d_j lambda_j^{-q}`` converges.
"""

import csv
import io
import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Literal

import numpy as np

from ._numerics import dump_json, fmt, fsum, loglog_fit
from .errors import InsufficientData, InvariantError, ParseError

__all__ = [
    "Spectrum",
    "SummabilityReport",
    "load_spectrum",
    "save_spectrum",
    "group_eigenvalues",
    "torus_laplacian_spectrum",
    "torus_lattice_shells",
    "counting_exponent",
    "summability_test",
    "minimal_s0",
]

MIN_FIT_BLOCKS = 8


@dataclass(frozen=True)
class Spectrum:
    """Ordered eigenvalue blocks. ``blocks[j] = (lambda_j, d_j)``."""

    blocks: tuple
    label: str = "spectrum"

    def __post_init__(self):
        blocks = tuple((float(lam), int(d)) for lam, d in self.blocks)
        object.__setattr__(self, "blocks", blocks)
        if not blocks:
            raise InvariantError("spectrum needs at least one block")
        prev = 0.0
        for j, (lam, d) in enumerate(blocks):
            if not math.isfinite(lam) or lam <= 0.0:
                raise InvariantError(f"lambda must be positive and finite (block {j}: {lam!r})")
            if d < 1:
                raise InvariantError(f"dim must be >= 1 (block {j}: {d})")
            if lam < prev:
                raise InvariantError(f"order violation: lambda decreases at block {j} ({prev!r} -> {lam!r})")
            prev = lam

    def __len__(self):
        return len(self.blocks)

    @cached_property
    def lambdas(self) -> np.ndarray:
        a = np.array([b[0] for b in self.blocks], dtype=float)
        a.setflags(write=False)
        return a

    @cached_property
    def dims(self) -> np.ndarray:
        a = np.array([b[1] for b in self.blocks], dtype=int)
        a.setflags(write=False)
        return a

    @property
    def total_dim(self) -> int:
        return int(self.dims.sum())

    def truncate(self, n: int) -> "Spectrum":
        return Spectrum(self.blocks[:n], self.label)

    def counting_function(self) -> np.ndarray:
        """N(lambda_j) for every block; ties share the count of the whole tie."""
        cum = np.cumsum(self.dims)
        lam = self.lambdas
        out = cum.copy()
        # walk backwards so each block in a run of equal lambdas gets the run total
        for j in range(len(lam) - 2, -1, -1):
            if lam[j] == lam[j + 1]:
                out[j] = out[j + 1]
        return out


@dataclass(frozen=True)
class SummabilityReport:
    exponent_q: float
    partial_sum: float
    fitted_counting_exponent: float
    verdict: Literal["converges", "diverges", "inconclusive"]
    fit_r2: float
    margin: float

    def as_dict(self) -> dict:
        return {
            "exponent_q": self.exponent_q,
            "partial_sum": self.partial_sum,
            "fitted_counting_exponent": self.fitted_counting_exponent,
            "margin": self.margin,
            "verdict": self.verdict,
            "fit_r2": self.fit_r2,
        }


# ---------------------------------------------------------------------------
# I/O


def _read_text(source) -> str:
    if isinstance(source, (bytes, bytearray)):
        return bytes(source).decode("utf-8")
    if isinstance(source, str):
        return source
    data = source.read()
    return data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data


def load_spectrum(source, format: str = "json", label: str | None = None) -> Spectrum:
    """Parse a spectrum from a byte/text stream (or raw bytes/str).

    ``label`` overrides the stored label; CSV files carry none, so the
    default there is ``"spectrum"``.
    """
    text = _read_text(source)
    if format == "json":
        try:
            obj = json.loads(text)
            raw = [(b["lambda"], b["dim"]) for b in obj["blocks"]]
            stored = obj.get("label", "spectrum")
        except (ValueError, KeyError, TypeError) as exc:
            raise ParseError(f"malformed spectrum json: {exc}") from exc
    elif format == "csv":
        rows = list(csv.reader(io.StringIO(text)))
        rows = [r for r in rows if r and any(c.strip() for c in r)]
        if not rows or [c.strip() for c in rows[0]] != ["lambda", "dim"]:
            raise ParseError('spectrum csv must start with header "lambda,dim"')
        raw = []
        for n, r in enumerate(rows[1:], start=2):
            if len(r) != 2:
                raise ParseError(f"line {n}: expected 2 fields")
            raw.append((r[0], r[1]))
        stored = "spectrum"
    else:
        raise ParseError(f"unknown spectrum format {format!r}")

    blocks = []
    for lam, d in raw:
        try:
            lam_f = float(lam)
            d_f = float(d)
        except (TypeError, ValueError) as exc:
            raise ParseError(f"non-numeric block entry ({lam!r}, {d!r})") from exc
        if isinstance(lam, bool) or isinstance(d, bool) or d_f != int(d_f):
            raise ParseError(f"dim must be an integer, got {d!r}")
        blocks.append((lam_f, int(d_f)))
    return Spectrum(tuple(blocks), label if label is not None else str(stored))


def save_spectrum(sp: Spectrum, format: str = "json") -> str:
    if format == "json":
        body = {"label": sp.label, "blocks": [{"lambda": lam, "dim": d} for lam, d in sp.blocks]}
        return dump_json(body) + "\n"
    if format == "csv":
        lines = ["lambda,dim"] + [f"{fmt(lam)},{d}" for lam, d in sp.blocks]
        return "\n".join(lines) + "\n"
    raise ParseError(f"unknown spectrum format {format!r}")


# ---------------------------------------------------------------------------
# construction


def group_eigenvalues(raw: Iterable[float], rel_tol: float = 1e-9, label: str = "spectrum") -> Spectrum:
    """Sort raw eigenvalues and merge near-equal neighbours into blocks.

    Consecutive sorted values with ``|a - b| <= rel_tol * max(a, b)`` join the
    same block; the block eigenvalue is the mean of its members.
    """
    vals = sorted(float(x) for x in raw)
    if not vals:
        raise InvariantError("no eigenvalues given")
    if rel_tol < 0:
        raise InvariantError("rel_tol must be non-negative")
    if vals[0] <= 0.0 or not all(math.isfinite(v) for v in vals):
        raise InvariantError("eigenvalues must be positive and finite")

    groups = [[vals[0]]]
    for prev, cur in zip(vals, vals[1:]):
        if abs(cur - prev) <= rel_tol * max(cur, prev):
            groups[-1].append(cur)
        else:
            groups.append([cur])
    blocks = tuple((math.fsum(g) / len(g), len(g)) for g in groups)
    return Spectrum(blocks, label)


def torus_lattice_shells(n: int, J: int):
    """Lattice points ``k`` with ``|k|_inf <= J`` grouped by ``|k|^2``.

    Returns a list of ``(norm2, points)`` with ``points`` an ``(m, n)`` int array
    in lexicographic order; shells ascend in ``norm2``.
    """
    if n not in (1, 2):
        raise InvariantError("only tori of dimension 1 or 2 are built in")
    if J < 1:
        raise InvariantError("max frequency must be >= 1")
    rng = np.arange(-J, J + 1)
    if n == 1:
        pts = rng[:, None]
    else:
        pts = np.array([(a, b) for a in rng for b in rng])
    norm2 = (pts * pts).sum(axis=1)
    shells = []
    for r in np.unique(norm2):
        shells.append((int(r), pts[norm2 == r]))
    return shells


def torus_laplacian_spectrum(n: int, J: int) -> Spectrum:
    """Spectrum of ``I - Laplacian`` on the flat torus T^n, frequencies ``|k|_inf <= J``."""
    shells = torus_lattice_shells(n, J)
    blocks = tuple((1.0 + r, len(p)) for r, p in shells)
    label = "torus1" if n == 1 else f"torus2-J{J}"
    return Spectrum(blocks, label)


# ---------------------------------------------------------------------------
# summability


def counting_exponent(sp: Spectrum):
    """Fit ``log N(lambda) ~ alpha log lambda`` over the upper half of the blocks.

    Returns ``(alpha, r2)``.
    """
    nb = len(sp)
    if nb < MIN_FIT_BLOCKS:
        raise InsufficientData(f"need at least {MIN_FIT_BLOCKS} blocks, have {nb}")
    lo = nb // 2
    lam = sp.lambdas[lo:]
    N = sp.counting_function()[lo:].astype(float)
    try:
        slope, _, r2 = loglog_fit(lam, N)
    except ValueError as exc:
        raise InsufficientData(f"counting-function fit failed: {exc}") from exc
    return slope, r2


def summability_test(sp: Spectrum, q: float, margin: float = 0.05) -> SummabilityReport:
    """Heuristic verdict on convergence of ``sum_j d_j lambda_j^{-q}``.

    The series converges exactly when ``q`` exceeds the counting exponent;
    verdicts within ``margin`` of the fitted exponent are ``inconclusive``.
    """
    if margin <= 0:
        raise InvariantError("margin must be positive")
    alpha, r2 = counting_exponent(sp)
    partial = fsum(sp.dims * sp.lambdas ** (-float(q)))
    if q > alpha + margin:
        verdict = "converges"
    elif q < alpha - margin:
        verdict = "diverges"
    else:
        verdict = "inconclusive"
    return SummabilityReport(float(q), partial, alpha, verdict, r2, float(margin))


def minimal_s0(sp: Spectrum, margin: float = 0.05) -> float:
    """Smallest exponent s0 the fit certifies for ``sum d_j lambda_j^{-s0} < inf``."""
    if margin <= 0:
        raise InvariantError("margin must be positive")
    alpha, _ = counting_exponent(sp)
    return alpha + margin
