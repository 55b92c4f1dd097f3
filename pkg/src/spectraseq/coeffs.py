"""Block coefficient sequences and the Sobolev scale built on a spectrum.

A :class:`BlockSequence` stores one complex vector per eigenvalue block.
Sequences may be shorter than their spectrum; missing trailing blocks are
zero. Every reduction goes through exactly rounded summation so results do
not depend on evaluation order.

The pairing is *bilinear* (no conjugation), the convention under which the
alpha-dual and adjoint identities hold.
"""

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ._numerics import cdot, dump_json, fmt, fsum, loglog_fit
from .errors import AlignmentError, InsufficientData, InvariantError, ParseError
from .spectrum import MIN_FIT_BLOCKS, Spectrum, _read_text

__all__ = [
    "BlockSequence",
    "DecayReport",
    "block_hs_norms",
    "sobolev_norm",
    "apply_power",
    "pairing",
    "abs_pairing",
    "modulus",
    "cauchy_schwarz_gap",
    "dual_certificate",
    "coordinate_dual",
    "classify_decay",
    "load_coeffs",
    "save_coeffs",
]


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=complex).ravel()
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class BlockSequence:
    spectrum_label: str
    blocks: tuple

    def __post_init__(self):
        blocks = tuple(_frozen(b) for b in self.blocks)
        for j, b in enumerate(blocks):
            if b.size == 0:
                raise InvariantError(f"block {j} is empty")
            if not np.isfinite(b).all():
                raise InvariantError(f"block {j} has non-finite entries")
        object.__setattr__(self, "blocks", blocks)

    def __len__(self):
        return len(self.blocks)

    def __eq__(self, other):
        if not isinstance(other, BlockSequence):
            return NotImplemented
        return (
            self.spectrum_label == other.spectrum_label
            and len(self) == len(other)
            and all(np.array_equal(a, b) for a, b in zip(self.blocks, other.blocks))
        )

    __hash__ = None

    @property
    def dims(self) -> tuple:
        return tuple(b.size for b in self.blocks)

    def flat(self) -> np.ndarray:
        return np.concatenate(self.blocks)

    # --- constructors -----------------------------------------------------

    @classmethod
    def zeros(cls, sp: Spectrum, n: int | None = None) -> "BlockSequence":
        n = len(sp) if n is None else n
        return cls(sp.label, tuple(np.zeros(d, dtype=complex) for d in sp.dims[:n]))

    @classmethod
    def from_flat(cls, label: str, dims: Sequence[int], values) -> "BlockSequence":
        values = np.asarray(values, dtype=complex).ravel()
        if values.size != sum(dims):
            raise AlignmentError(f"{values.size} values for total dimension {sum(dims)}")
        offsets = np.cumsum([0, *dims])
        return cls(label, tuple(values[offsets[j] : offsets[j + 1]] for j in range(len(dims))))

    @classmethod
    def basis(cls, sp: Spectrum, j: int, l: int, n: int | None = None) -> "BlockSequence":
        """Coordinate sequence with a single 1 at block ``j``, slot ``l`` (0-based)."""
        n = len(sp) if n is None else n
        if not 0 <= j < n or not 0 <= l < sp.dims[j]:
            raise AlignmentError(f"coordinate ({j}, {l}) outside the truncation")
        blocks = [np.zeros(d, dtype=complex) for d in sp.dims[:n]]
        blocks[j][l] = 1.0
        return cls(sp.label, tuple(blocks))

    def padded(self, n: int, dims: Sequence[int]) -> "BlockSequence":
        """Extend with zero blocks up to ``n`` blocks."""
        if n <= len(self):
            return self
        extra = tuple(np.zeros(d, dtype=complex) for d in dims[len(self) : n])
        return BlockSequence(self.spectrum_label, self.blocks + extra)

    def map_blocks(self, fn) -> "BlockSequence":
        return BlockSequence(self.spectrum_label, tuple(fn(j, b) for j, b in enumerate(self.blocks)))


@dataclass(frozen=True)
class DecayReport:
    estimated_order: float
    constant_C: float
    fit_r2: float
    classification: str  # "smooth_like" | "sobolev" | "distribution_like"
    threshold: float
    fitted_blocks: int

    @property
    def label(self) -> str:
        if self.classification == "sobolev":
            return f"sobolev({fmt(self.estimated_order)})"
        return self.classification

    def as_dict(self) -> dict:
        return {
            "estimated_order": self.estimated_order,
            "constant_C": self.constant_C,
            "fit_r2": self.fit_r2,
            "classification": self.label,
            "threshold": self.threshold,
            "fitted_blocks": self.fitted_blocks,
        }


# ---------------------------------------------------------------------------
# alignment


def _check_against(v: BlockSequence, sp: Spectrum):
    if v.spectrum_label != sp.label:
        raise AlignmentError(f"sequence is on {v.spectrum_label!r}, spectrum is {sp.label!r}")
    if len(v) > len(sp):
        raise AlignmentError(f"sequence has {len(v)} blocks, spectrum only {len(sp)}")
    for j, (b, d) in enumerate(zip(v.blocks, sp.dims)):
        if b.size != d:
            raise AlignmentError(f"block {j} has length {b.size}, expected dim {d}")


def _check_pair(u: BlockSequence, w: BlockSequence) -> int:
    """Common prefix length of two sequences on the same spectrum."""
    if u.spectrum_label != w.spectrum_label:
        raise AlignmentError(f"sequences live on {u.spectrum_label!r} and {w.spectrum_label!r}")
    n = min(len(u), len(w))
    for j in range(n):
        if u.blocks[j].size != w.blocks[j].size:
            raise AlignmentError(f"block {j}: lengths {u.blocks[j].size} and {w.blocks[j].size}")
    return n


def _moduli(v: BlockSequence, n: int | None = None) -> list:
    return [np.abs(b) for b in v.blocks[:n]]


# ---------------------------------------------------------------------------
# norms and pairings


def block_hs_norms(v: BlockSequence) -> list:
    """Euclidean norm of each block."""
    return [math.sqrt(fsum(a * a)) for a in _moduli(v)]


def sobolev_norm(v: BlockSequence, sp: Spectrum, s: float) -> float:
    """``sqrt(sum_j lambda_j^{2s} ||v_j||^2)`` over the stored blocks."""
    _check_against(v, sp)
    if len(v) == 0:
        return 0.0
    weights = sp.lambdas[: len(v)] ** (2.0 * s)
    terms = np.concatenate([w * a * a for w, a in zip(weights, _moduli(v))])
    return math.sqrt(fsum(terms))


def apply_power(v: BlockSequence, sp: Spectrum, s: float) -> BlockSequence:
    """Coefficients of ``E^s v``: block j scaled by ``lambda_j^s``.

    The factor and the product are formed in extended precision and rounded
    once, so powers compose to within 2 ulp and invert to within 1 ulp.
    """
    _check_against(v, sp)
    scale = np.power(sp.lambdas[: len(v)].astype(np.longdouble), np.longdouble(float(s)))

    def _scale(j, b):
        re = (b.real.astype(np.longdouble) * scale[j]).astype(float)
        im = (b.imag.astype(np.longdouble) * scale[j]).astype(float)
        return re + 1j * im

    return v.map_blocks(_scale)


def pairing(u: BlockSequence, w: BlockSequence) -> complex:
    """Bilinear pairing ``sum_{j,l} u_jl w_jl`` (no conjugation)."""
    n = _check_pair(u, w)
    if n == 0:
        return 0j
    return cdot(np.concatenate(u.blocks[:n]), np.concatenate(w.blocks[:n]))


def abs_pairing(u: BlockSequence, w: BlockSequence) -> float:
    """Truncated alpha-dual mass ``sum_{j,l} |u_jl| |w_jl|``."""
    n = _check_pair(u, w)
    if n == 0:
        return 0.0
    return fsum(np.concatenate([a * b for a, b in zip(_moduli(u, n), _moduli(w, n))]))


def modulus(v: BlockSequence) -> BlockSequence:
    return v.map_blocks(lambda j, b: np.abs(b).astype(complex))


def cauchy_schwarz_gap(u: BlockSequence, w: BlockSequence, sp: Spectrum, s: float) -> float:
    """``||u||_s * ||w||_{-s} - sum |u_jl||w_jl|``; non-negative up to rounding."""
    _check_pair(u, w)
    return sobolev_norm(u, sp, s) * sobolev_norm(w, sp, -s) - abs_pairing(u, w)


def dual_certificate(w: BlockSequence, sp: Spectrum, s: float, s0: float) -> float:
    """Truncated mass ``sum_j lambda_j^{-s-s0/2} ||w_j||``.

    Finite for every ``w`` in the alpha-dual of ``H^s``; feed the partial sums
    to a tail fit to judge membership.
    """
    if s0 <= 0:
        raise InvariantError("s0 must be positive")
    _check_against(w, sp)
    if len(w) == 0:
        return 0.0
    weights = sp.lambdas[: len(w)] ** (-s - s0 / 2.0)
    return fsum(weights * np.array(block_hs_norms(w)))


def coordinate_dual(v: BlockSequence, sp: Spectrum) -> BlockSequence:
    """Values of ``pairing(v, e_jl)`` over every coordinate functional of the truncation.

    Coordinates are their own dual basis, so applying this twice gives ``v`` back.
    """
    _check_against(v, sp)
    n = len(v)
    vals = [pairing(v, BlockSequence.basis(sp, j, l, n)) for j in range(n) for l in range(sp.dims[j])]
    return BlockSequence.from_flat(v.spectrum_label, v.dims, vals)


# ---------------------------------------------------------------------------
# decay classification


def classify_decay(
    v: BlockSequence,
    sp: Spectrum,
    smooth_threshold: float,
    order_tol: float = 1e-9,
) -> DecayReport:
    """Fit ``max_l |v_jl| ~ C lambda_j^{-N}`` and classify the sequence.

    The fit runs over the non-zero blocks in the upper half of the support
    (blocks ``0..last non-zero``). ``order_tol`` only absorbs rounding in
    the slope when deciding ``distribution_like``.
    """
    _check_against(v, sp)
    peaks = np.array([a.max() for a in _moduli(v)]) if len(v) else np.zeros(0)
    nz = np.flatnonzero(peaks > 0)
    if nz.size < MIN_FIT_BLOCKS:
        raise InsufficientData(f"need {MIN_FIT_BLOCKS} non-zero blocks, have {nz.size}")
    last = int(nz[-1])
    window = nz[nz >= (last + 1) // 2]
    if window.size < MIN_FIT_BLOCKS:
        raise InsufficientData(f"only {window.size} non-zero blocks in the fit window")
    try:
        slope, intercept, r2 = loglog_fit(sp.lambdas[window], peaks[window])
    except ValueError as exc:
        raise InsufficientData(f"decay fit failed: {exc}") from exc
    order = -slope
    if order > smooth_threshold:
        cls = "smooth_like"
    elif order < -order_tol:
        cls = "distribution_like"
    else:
        cls = "sobolev"
    return DecayReport(order, math.exp(intercept), r2, cls, float(smooth_threshold), int(window.size))


# ---------------------------------------------------------------------------
# I/O


def load_coeffs(source, format: str = "json", sp: Spectrum | None = None) -> BlockSequence:
    """Read a coefficient file.

    With a spectrum the result is validated against it and zero-padded to the
    full spectrum length. CSV files need the spectrum for block sizes.
    """
    text = _read_text(source)
    if format == "json":
        try:
            obj = json.loads(text)
            label = str(obj["spectrum_label"])
            blocks = []
            for j, blk in enumerate(obj["blocks"]):
                vals = []
                for pair in blk:
                    re, im = pair
                    vals.append(complex(float(re), float(im)))
                blocks.append(vals)
        except (ValueError, KeyError, TypeError) as exc:
            raise ParseError(f"malformed coeffs json: {exc}") from exc
        v = BlockSequence(label, tuple(blocks))
    elif format == "csv":
        if sp is None:
            raise ParseError("csv coefficients need a spectrum")
        rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
        if not rows or [c.strip() for c in rows[0]] != ["j", "l", "re", "im"]:
            raise ParseError('coeffs csv must start with header "j,l,re,im"')
        blocks = [np.zeros(d, dtype=complex) for d in sp.dims]
        top = 0
        for n, r in enumerate(rows[1:], start=2):
            try:
                j, l, re, im = int(r[0]), int(r[1]), float(r[2]), float(r[3])
            except (ValueError, IndexError) as exc:
                raise ParseError(f"line {n}: {exc}") from exc
            if not 0 <= j < len(sp) or not 1 <= l <= sp.dims[j]:
                raise AlignmentError(f"line {n}: coordinate (j={j}, l={l}) outside the spectrum")
            blocks[j][l - 1] = complex(re, im)
            top = max(top, j + 1)
        v = BlockSequence(sp.label, tuple(blocks[:top]))
    else:
        raise ParseError(f"unknown coeffs format {format!r}")
    if sp is not None:
        _check_against(v, sp)
        v = v.padded(len(sp), sp.dims)
    return v


def save_coeffs(v: BlockSequence, format: str = "json") -> str:
    if format == "json":
        blocks = [[[z.real, z.imag] for z in b] for b in v.blocks]
        return dump_json({"spectrum_label": v.spectrum_label, "blocks": blocks}) + "\n"
    if format == "csv":
        lines = ["j,l,re,im"]
        for j, b in enumerate(v.blocks):
            for l, z in enumerate(b, start=1):
                lines.append(f"{j},{l},{fmt(z.real)},{fmt(z.imag)}")
        return "\n".join(lines) + "\n"
    raise ParseError(f"unknown coeffs format {format!r}")
