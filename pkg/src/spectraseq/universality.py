"""Point-evaluable eigenbases on flat tori and the delta mapping.

Built-in bases are *real* trigonometric systems, orthonormal in L^2 of the
torus and grouped by the eigenvalues of ``I - Laplacian``:

* ``torus1``: ``1/sqrt(2 pi)``, then ``cos(jx)/sqrt(pi)``, ``sin(jx)/sqrt(pi)``
  for block ``j >= 1`` (slot 0 cosine, slot 1 sine);
* ``torus2``: ``1/(2 pi)`` and, per lattice point ``k`` of a shell listed in
  lexicographic order, ``cos(k.x)/(sqrt(2) pi)`` when ``k`` is the positive
  representative of ``+-k`` and ``sin(-k.x)/(sqrt(2) pi)`` otherwise.

With a real basis the delta functional at ``x`` has coefficients
``e_jl(x)`` and the bilinear pairing reconstructs point values. Grids are
uniform (``x_m = 2 pi m / M``) and quadrature is the periodic trapezoid rule,
exact for band-limited integrands below the Nyquist limit.
"""

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ._numerics import fmt
from .coeffs import BlockSequence, DecayReport, _check_against, classify_decay, pairing
from .errors import AlignmentError, AliasError, InsufficientData, ParseError, TruncationError
from .operators import BlockTensor, apply
from .spectrum import Spectrum, _read_text, torus_lattice_shells

__all__ = [
    "Point",
    "EigenBasis",
    "ProbeReport",
    "torus_basis",
    "delta_coefficients",
    "evaluate",
    "fourier_coefficients",
    "grid_points",
    "hinf_mapping_check",
    "reextract_tensor",
    "factorization_check",
    "load_grid",
    "load_points",
    "save_points",
]

TWO_PI = 2.0 * math.pi


def _reduce(a: float) -> float:
    r = float(a) % TWO_PI
    return 0.0 if r >= TWO_PI else r


@dataclass(frozen=True)
class Point:
    coordinates: tuple

    def __post_init__(self):
        c = self.coordinates
        if np.isscalar(c):
            c = (c,)
        c = tuple(_reduce(a) for a in c)
        if len(c) not in (1, 2) or not all(math.isfinite(a) for a in c):
            raise AlignmentError("a torus point has 1 or 2 finite angles")
        object.__setattr__(self, "coordinates", c)


def _as_point(x) -> Point:
    return x if isinstance(x, Point) else Point(x)


@dataclass(frozen=True, eq=False)
class EigenBasis:
    """Real orthonormal eigenbasis of ``I - Laplacian`` on ``torus1`` or ``torus2``.

    ``frequencies[j]`` holds the lattice points of block ``j`` (one per slot);
    ``kinds[j]`` marks each slot as cosine (``True``) or sine (``False``).
    """

    spectrum: Spectrum
    manifold: str
    frequencies: tuple
    kinds: tuple

    @property
    def dimension(self) -> int:
        return 1 if self.manifold == "torus1" else 2

    def max_frequency(self, trunc: int) -> int:
        return int(max(np.abs(f).max() for f in self.frequencies[:trunc]))

    def evaluator(self, points: np.ndarray, trunc: int) -> np.ndarray:
        """Matrix ``B[p, c] = e_c(x_p)`` over all coordinates ``c`` of the first ``trunc`` blocks.

        ``points`` has shape ``(P, dimension)``.
        """
        pts = np.asarray(points, dtype=float).reshape(-1, self.dimension)
        freqs = np.concatenate(self.frequencies[:trunc])
        kinds = np.concatenate(self.kinds[:trunc])
        phase = pts @ freqs.T.astype(float)
        if self.manifold == "torus1":
            norm = np.where(np.all(freqs == 0, axis=1), 1.0 / math.sqrt(TWO_PI), 1.0 / math.sqrt(math.pi))
        else:
            norm = np.where(np.all(freqs == 0, axis=1), 1.0 / TWO_PI, 1.0 / (math.sqrt(2.0) * math.pi))
        return np.where(kinds, np.cos(phase), np.sin(phase)) * norm

    def quadrature_weight(self, M: int) -> float:
        return (TWO_PI / M) ** self.dimension


def torus_basis(n: int, J: int) -> EigenBasis:
    """Eigenbasis on ``T^n`` with frequencies ``|k|_inf <= J``."""
    shells = torus_lattice_shells(n, J)
    sp = Spectrum(tuple((1.0 + r, len(p)) for r, p in shells), "torus1" if n == 1 else f"torus2-J{J}")
    freqs, kinds = [], []
    for r, pts in shells:
        if n == 1:
            if r == 0:
                f, c = np.zeros((1, 1), dtype=int), np.array([True])
            else:
                j = int(round(math.sqrt(r)))
                f, c = np.array([[j], [j]]), np.array([True, False])
        else:
            positive = (pts[:, 0] > 0) | ((pts[:, 0] == 0) & (pts[:, 1] > 0))
            # sine slots use the positive representative so that sin(k.x) has a fixed sign convention
            f = np.where(positive[:, None], pts, -pts)
            c = positive | (r == 0)
        f.setflags(write=False)
        c.setflags(write=False)
        freqs.append(f)
        kinds.append(c)
    return EigenBasis(sp, "torus1" if n == 1 else "torus2", tuple(freqs), tuple(kinds))


@dataclass(frozen=True)
class ProbeReport:
    probe: int
    classification: str
    decay: DecayReport | None
    note: str

    def as_dict(self) -> dict:
        return {
            "probe": self.probe,
            "classification": self.classification,
            "decay": None if self.decay is None else self.decay.as_dict(),
            "note": self.note,
        }


# ---------------------------------------------------------------------------


def _check_trunc(b: EigenBasis, trunc: int):
    if not 1 <= trunc <= len(b.spectrum):
        raise TruncationError(f"truncation {trunc} outside 1..{len(b.spectrum)}")


def delta_coefficients(b: EigenBasis, x, trunc: int) -> BlockSequence:
    """Coefficients of the point evaluation at ``x``: block j, slot l is ``e_jl(x)``."""
    _check_trunc(b, trunc)
    p = _as_point(x)
    if len(p.coordinates) != b.dimension:
        raise AlignmentError(f"{b.manifold} points have {b.dimension} coordinate(s)")
    row = b.evaluator(np.array([p.coordinates]), trunc)[0]
    return BlockSequence.from_flat(b.spectrum.label, tuple(b.spectrum.dims[:trunc]), row)


def evaluate(phi: BlockSequence, b: EigenBasis, x) -> complex:
    """Truncated pairing of ``phi`` with the delta at ``x``.

    Equals ``phi(x)`` for band-limited ``phi``; for general coefficient
    sequences it is only the partial sum.
    """
    _check_against(phi, b.spectrum)
    if len(phi) == 0:
        return 0j
    return pairing(phi, delta_coefficients(b, x, len(phi)))


def grid_points(b: EigenBasis, M: int) -> np.ndarray:
    """Uniform grid as a ``(M**dimension, dimension)`` array, first axis slowest."""
    x = TWO_PI * np.arange(M) / M
    if b.dimension == 1:
        return x[:, None]
    g1, g2 = np.meshgrid(x, x, indexing="ij")
    return np.column_stack([g1.ravel(), g2.ravel()])


def _grid_size(b: EigenBasis, samples: np.ndarray) -> int:
    if b.dimension == 1:
        if samples.ndim != 1:
            raise AlignmentError("torus1 samples must be a 1-d array")
        return samples.shape[0]
    if samples.ndim != 2 or samples.shape[0] != samples.shape[1]:
        raise AlignmentError("torus2 samples must be a square 2-d array")
    return samples.shape[0]


def fourier_coefficients(b: EigenBasis, samples, trunc: int) -> BlockSequence:
    """Trapezoid-rule inner products ``(f, e_jl)`` from uniform grid samples."""
    _check_trunc(b, trunc)
    samples = np.asarray(samples, dtype=complex)
    M = _grid_size(b, samples)
    if not np.all(np.isfinite(samples)):
        raise AlignmentError("samples must be finite")
    need = 2 * b.max_frequency(trunc)
    if M <= need:
        raise AliasError(f"grid of {M} points per axis aliases frequency {need // 2}; need more than {need}")
    B = b.evaluator(grid_points(b, M), trunc)
    coef = b.quadrature_weight(M) * (B.T @ samples.ravel())
    return BlockSequence.from_flat(b.spectrum.label, tuple(b.spectrum.dims[:trunc]), coef)


def _coefficient_class(coef: BlockSequence, sp: Spectrum, threshold: float, noise_floor: float):
    """Classify sample-map coefficients after zeroing quadrature noise."""
    scale = max((np.abs(blk).max() for blk in coef.blocks), default=0.0)
    cut = noise_floor * scale
    cleaned = coef.map_blocks(lambda j, blk: np.where(np.abs(blk) > cut, blk, 0))
    nz = [j for j, blk in enumerate(cleaned.blocks) if np.any(blk != 0)]
    if all(j == 0 for j in nz):
        return "smooth_like", None, "constant sample map"
    try:
        rep = classify_decay(cleaned, sp, threshold)
    except InsufficientData as exc:
        return "unclassified", None, str(exc)
    return rep.classification, rep, ""


def hinf_mapping_check(
    m: Callable[[Point], BlockSequence],
    b: EigenBasis,
    probes: Sequence[BlockSequence],
    grid_size: int,
    threshold: float,
    trunc: int | None = None,
    noise_floor: float = 1e-13,
) -> list:
    """Decay class of ``x -> pairing(m(x), u)`` for every probe ``u``.

    A mapping into a sequence space is smooth-type when each such scalar map
    is. Coefficients below ``noise_floor`` times the largest one are treated
    as zero. Maps whose only content is the constant mode are reported
    ``smooth_like``; maps with too few non-zero blocks to fit are
    ``unclassified``.
    """
    trunc = len(b.spectrum) if trunc is None else trunc
    _check_trunc(b, trunc)
    need = 2 * b.max_frequency(trunc)
    if grid_size <= need:
        raise AliasError(f"grid of {grid_size} points per axis aliases frequency {need // 2}")
    pts = grid_points(b, grid_size)
    images = [m(Point(tuple(p))) for p in pts]
    out = []
    shape = (grid_size,) * b.dimension
    for idx, u in enumerate(probes):
        vals = np.array([pairing(img, u) for img in images]).reshape(shape)
        coef = fourier_coefficients(b, vals, trunc)
        cls, rep, note = _coefficient_class(coef, b.spectrum, threshold, noise_floor)
        out.append(ProbeReport(idx, cls, rep, note))
    return out


def reextract_tensor(fhat: BlockTensor, b: EigenBasis, grid_size: int) -> BlockTensor:
    """Recover a tensor from the point map ``x -> apply(fhat, delta_x)``.

    Each codomain coordinate functional composed with the point map is a
    function on the torus; its Fourier coefficients are one tensor row.
    """
    trunc = len(fhat.domain_dims)
    _check_trunc(b, trunc)
    if fhat.domain_label != b.spectrum.label or fhat.domain_dims != tuple(b.spectrum.dims[:trunc]):
        raise AlignmentError("tensor domain must be the basis spectrum truncation")
    need = 2 * b.max_frequency(trunc)
    if grid_size <= need:
        raise AliasError(f"grid of {grid_size} points per axis aliases frequency {need // 2}")
    pts = grid_points(b, grid_size)
    B = b.evaluator(pts, trunc)
    dims = fhat.domain_dims
    images = np.array(
        [apply(fhat, BlockSequence.from_flat(b.spectrum.label, dims, row)).flat() for row in B]
    )
    shape = (grid_size,) * b.dimension
    rows = [fourier_coefficients(b, images[:, c].reshape(shape), trunc).flat() for c in range(images.shape[1])]
    dense = np.array(rows).reshape(images.shape[1], -1)
    roff = np.cumsum([0, *fhat.codomain_dims])
    coff = np.cumsum([0, *dims])
    entries = {}
    for k in range(len(fhat.codomain_dims)):
        for j in range(trunc):
            blk = dense[roff[k] : roff[k + 1], coff[j] : coff[j + 1]]
            if np.any(blk != 0):
                entries[(k, j)] = blk
    return BlockTensor(fhat.domain_label, fhat.codomain_label, dims, fhat.codomain_dims, entries)


def factorization_check(fhat: BlockTensor, b: EigenBasis, grid_size: int) -> float:
    """Max entrywise gap between ``fhat`` and the tensor re-extracted from ``fhat o delta``."""
    again = reextract_tensor(fhat, b, grid_size)
    diff = again.todense() - fhat.todense()
    return float(np.abs(diff).max(initial=0.0))


# ---------------------------------------------------------------------------
# I/O


def _rows(text: str):
    return [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]


def load_grid(source, manifold: str):
    """Read ``grid.csv`` (``x1[,x2],re,im``) into a sample array on a uniform grid."""
    rows = _rows(_read_text(source))
    dim = 1 if manifold == "torus1" else 2
    header = ["x1", "re", "im"] if dim == 1 else ["x1", "x2", "re", "im"]
    if not rows or [c.strip() for c in rows[0]] != header:
        raise ParseError(f"grid csv must start with header {','.join(header)!r}")
    data = rows[1:]
    M = len(data) if dim == 1 else int(round(math.sqrt(len(data))))
    if M < 1 or M**dim != len(data):
        raise ParseError("grid csv does not hold a full uniform grid")
    samples = np.full((M,) * dim, np.nan, dtype=complex)
    for n, r in enumerate(data, start=2):
        try:
            vals = [float(c) for c in r]
        except ValueError as exc:
            raise ParseError(f"line {n}: {exc}") from exc
        if len(vals) != dim + 2:
            raise ParseError(f"line {n}: expected {dim + 2} fields")
        idx = []
        for a in vals[:dim]:
            m = a * M / TWO_PI
            mi = int(round(m))
            if abs(m - mi) > 1e-6 or not 0 <= mi < M:
                raise ParseError(f"line {n}: {a!r} is not a node of the {M}-point grid")
            idx.append(mi)
        samples[tuple(idx)] = complex(vals[dim], vals[dim + 1])
    if np.any(np.isnan(samples.real)):
        raise ParseError("grid csv has repeated nodes")
    return samples


def load_points(source, manifold: str) -> list:
    rows = _rows(_read_text(source))
    dim = 1 if manifold == "torus1" else 2
    allowed = (["x"], ["x1"]) if dim == 1 else (["x1", "x2"],)
    if not rows or [c.strip() for c in rows[0][:dim]] not in allowed:
        raise ParseError("points csv must start with header 'x' (torus1) or 'x1,x2' (torus2)")
    pts = []
    for n, r in enumerate(rows[1:], start=2):
        try:
            pts.append(Point(tuple(float(c) for c in r[:dim])))
        except (ValueError, AlignmentError) as exc:
            raise ParseError(f"line {n}: {exc}") from exc
    return pts


def save_points(points: Sequence[Point], values: Sequence[complex]) -> str:
    dim = len(points[0].coordinates) if points else 1
    head = "x" if dim == 1 else "x1,x2"
    lines = [f"{head},phi_re,phi_im"]
    for p, z in zip(points, values):
        coords = ",".join(fmt(a) for a in p.coordinates)
        lines.append(f"{coords},{fmt(z.real)},{fmt(z.imag)}")
    return "\n".join(lines) + "\n"
