"""Sequential linear mappings stored as sparse block tensors.

Entry ``(k, j)`` of a :class:`BlockTensor` is the ``g_k x d_j`` matrix taking
domain block ``j`` to codomain block ``k``; absent keys are zero. The adjoint
is the plain transpose, *not* the conjugate transpose, because the pairing
it must respect is bilinear::

    pairing(apply(t, u), v) == pairing(u, apply(adjoint(t), v))
"""

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from ._numerics import dump_json, fsum, loglog_fit, thread_count
from .coeffs import BlockSequence, _check_pair, abs_pairing, block_hs_norms, pairing
from .errors import AlignmentError, InsufficientData, NonlinearityError, ParseError, ShapeError
from .spectrum import Spectrum, _read_text

__all__ = [
    "BlockTensor",
    "SequentialityReport",
    "apply",
    "adjoint",
    "adjointness_residual",
    "sequentiality_check",
    "truncation_limit_check",
    "extract_tensor",
    "extract_tensor_dual",
    "hs_pairing_bound",
    "load_tensor",
    "save_tensor",
]


@dataclass(frozen=True, eq=False)
class BlockTensor:
    """Sparse block matrix between two spectrum truncations.

    ``domain_dims`` / ``codomain_dims`` fix the truncation (block sizes
    ``d_j`` and ``g_k``); ``entries`` maps ``(k, j)`` to a complex matrix.
    """

    domain_label: str
    codomain_label: str
    domain_dims: tuple
    codomain_dims: tuple
    entries: Mapping = field(default_factory=dict)

    def __post_init__(self):
        ddims = tuple(int(d) for d in self.domain_dims)
        cdims = tuple(int(g) for g in self.codomain_dims)
        if any(d < 1 for d in ddims + cdims):
            raise ShapeError("block dimensions must be >= 1")
        entries = {}
        for key in sorted(self.entries):
            k, j = (int(x) for x in key)
            if not (0 <= k < len(cdims) and 0 <= j < len(ddims)):
                raise ShapeError(f"entry ({k}, {j}) outside the {len(cdims)}x{len(ddims)} block grid")
            m = np.array(self.entries[key], dtype=complex)
            if m.shape != (cdims[k], ddims[j]):
                raise ShapeError(f"entry ({k}, {j}) has shape {m.shape}, expected {(cdims[k], ddims[j])}")
            if not np.isfinite(m).all():
                raise ShapeError(f"entry ({k}, {j}) has non-finite values")
            m.setflags(write=False)
            entries[(k, j)] = m
        object.__setattr__(self, "domain_dims", ddims)
        object.__setattr__(self, "codomain_dims", cdims)
        object.__setattr__(self, "entries", entries)

    @classmethod
    def between(cls, domain: Spectrum, codomain: Spectrum, entries=None, n_domain=None, n_codomain=None):
        nd = len(domain) if n_domain is None else n_domain
        nc = len(codomain) if n_codomain is None else n_codomain
        return cls(domain.label, codomain.label, tuple(domain.dims[:nd]), tuple(codomain.dims[:nc]), entries or {})

    @classmethod
    def identity(cls, sp: Spectrum, n: int | None = None) -> "BlockTensor":
        n = len(sp) if n is None else n
        return cls.between(sp, sp, {(k, k): np.eye(sp.dims[k]) for k in range(n)}, n, n)

    @classmethod
    def diagonal(cls, sp: Spectrum, scale, n: int | None = None) -> "BlockTensor":
        """``f_kk = scale[k] * I``; ``scale`` may be a callable of lambda."""
        n = len(sp) if n is None else n
        vals = scale(sp.lambdas[:n]) if callable(scale) else np.asarray(scale)
        return cls.between(sp, sp, {(k, k): vals[k] * np.eye(sp.dims[k]) for k in range(n)}, n, n)

    def todense(self) -> np.ndarray:
        roff = np.cumsum([0, *self.codomain_dims])
        coff = np.cumsum([0, *self.domain_dims])
        out = np.zeros((roff[-1], coff[-1]), dtype=complex)
        for (k, j), m in self.entries.items():
            out[roff[k] : roff[k + 1], coff[j] : coff[j + 1]] = m
        return out

    def rows(self) -> dict:
        """Entries grouped by output block: ``{k: [(j, matrix), ...]}`` with ascending j."""
        out = {}
        for (k, j), m in self.entries.items():
            out.setdefault(k, []).append((j, m))
        return out


@dataclass(frozen=True)
class SequentialityReport:
    schedule: tuple
    cond1_masses: np.ndarray  # (len(schedule), codomain coordinates)
    cond2_mass: np.ndarray  # (len(schedule),)
    cond1_slopes: np.ndarray
    cond2_slope: float
    margin: float
    verdict: str  # "certified" | "uncertified"

    @property
    def tail_slopes(self) -> np.ndarray:
        return np.concatenate([[self.cond2_slope], self.cond1_slopes])

    def as_dict(self) -> dict:
        return {
            "schedule": list(self.schedule),
            "cond1_final_masses": self.cond1_masses[-1].tolist(),
            "cond2_mass": self.cond2_mass.tolist(),
            "cond1_max_slope": float(np.max(self.cond1_slopes)) if self.cond1_slopes.size else -math.inf,
            "cond2_slope": self.cond2_slope,
            "margin": self.margin,
            "verdict": self.verdict,
        }


# ---------------------------------------------------------------------------
# application


def _check_domain(t: BlockTensor, u: BlockSequence):
    if u.spectrum_label != t.domain_label:
        raise AlignmentError(f"input is on {u.spectrum_label!r}, tensor domain is {t.domain_label!r}")
    if len(u) > len(t.domain_dims):
        raise AlignmentError(f"input has {len(u)} blocks, tensor domain truncation is {len(t.domain_dims)}")
    for j, b in enumerate(u.blocks):
        if b.size != t.domain_dims[j]:
            raise AlignmentError(f"input block {j} has length {b.size}, tensor expects {t.domain_dims[j]}")


def _apply_upto(t: BlockTensor, u: BlockSequence, n: int) -> BlockSequence:
    """``sum_{j < n} f_kj u_j`` for every codomain block, accumulated in ascending j."""
    out = [np.zeros(g, dtype=complex) for g in t.codomain_dims]
    limit = min(n, len(u))
    for k, row in t.rows().items():
        acc = out[k]
        for j, m in row:
            if j >= limit:
                break
            acc = acc + m @ u.blocks[j]
        out[k] = acc
    return BlockSequence(t.codomain_label, tuple(out))


def apply(t: BlockTensor, u: BlockSequence) -> BlockSequence:
    """``f(u)_k = sum_j f_kj u_j``; the result spans the full codomain truncation."""
    _check_domain(t, u)
    return _apply_upto(t, u, len(u))


def adjoint(t: BlockTensor) -> BlockTensor:
    """Transposed tensor: entry ``(j, k)`` is ``f_kj.T`` (no conjugation)."""
    return BlockTensor(
        t.codomain_label,
        t.domain_label,
        t.codomain_dims,
        t.domain_dims,
        {(j, k): m.T for (k, j), m in t.entries.items()},
    )


def adjointness_residual(t: BlockTensor, u: BlockSequence, v: BlockSequence) -> float:
    """``|<f(u), v> - <u, f^t(v)>|`` under the bilinear pairing."""
    lhs = pairing(apply(t, u), v)
    rhs = pairing(u, apply(adjoint(t), v))
    return abs(lhs - rhs)


def hs_pairing_bound(u: BlockSequence, w: BlockSequence):
    """``(sum |u_jl||w_jl|, sum_j ||u_j|| ||w_j||)``; the first never exceeds the second."""
    n = _check_pair(u, w)
    hs = fsum(np.array(block_hs_norms(u)[:n]) * np.array(block_hs_norms(w)[:n])) if n else 0.0
    return abs_pairing(u, w), hs


# ---------------------------------------------------------------------------
# sequentiality certificates


def _weighted_mass(v: BlockSequence, y: BlockSequence) -> float:
    return abs_pairing(v, y)


def truncation_limit_check(
    t: BlockTensor, u: BlockSequence, v: BlockSequence, schedule: Sequence[int]
) -> list:
    """``sum_{k,i} |v_ki| |(sum_{j<n} f_kj u_j)_i|`` for every ``n`` in ``schedule``.

    For ``n`` covering all of ``u`` the value coincides bit for bit with the
    untruncated ``abs_pairing(v, apply(t, u))``.
    """
    _check_domain(t, u)
    if v.spectrum_label != t.codomain_label:
        raise AlignmentError(f"probe is on {v.spectrum_label!r}, tensor codomain is {t.codomain_label!r}")
    sched = [int(n) for n in schedule]
    if any(b <= a for a, b in zip(sched, sched[1:])):
        raise AlignmentError("schedule must be strictly ascending")
    if sched and (sched[0] < 0 or sched[-1] > len(t.domain_dims)):
        raise AlignmentError("schedule exceeds the domain truncation")
    return [_weighted_mass(v, _apply_upto(t, u, n)) for n in sched]


def _dyadic_schedule(n_blocks: int) -> list:
    sched = []
    n = 2
    while n < n_blocks:
        sched.append(n)
        n *= 2
    sched.append(n_blocks)
    return sched


def _tail_slope(schedule, partial) -> float:
    """Decay exponent (in block index) of the average per-block increment.

    ``-inf`` when the partial sums have stopped moving or moved in a single
    interval only: within the truncation the series is then a finite sum.
    """
    partial = np.asarray(partial, dtype=float)
    sched = np.asarray(schedule, dtype=float)
    incr = np.diff(partial)
    width = np.diff(sched)
    rate = np.abs(incr) / width
    keep = rate > 0
    if incr.size == 0 or incr[-1] == 0.0 or keep.sum() < 2:
        return -math.inf
    mid = np.sqrt(sched[:-1] * sched[1:])
    slope, _, _ = loglog_fit(mid[keep], rate[keep])
    return slope


def sequentiality_check(
    t: BlockTensor, u: BlockSequence, v: BlockSequence, margin: float = 0.1
) -> SequentialityReport:
    """Tail-fit certificate for the two absolute-convergence conditions.

    Condition 1, per output coordinate ``(k, i)``: ``sum_{j,l} |f_kjli| |u_jl|``.
    Condition 2: ``sum_{k,i} |v_ki| |(sum_j f_kj u_j)_i|``. Both are summed over
    truncations ``n = 2, 4, 8, ...`` (condition 2 truncates ``j`` and ``k``).
    The verdict is ``certified`` only if every increment decays faster than
    ``n^{-1-margin}``; this is evidence, not proof.
    """
    _check_domain(t, u)
    if v.spectrum_label != t.codomain_label:
        raise AlignmentError(f"probe is on {v.spectrum_label!r}, tensor codomain is {t.codomain_label!r}")
    nd, nc = len(t.domain_dims), len(t.codomain_dims)
    n_blocks = max(nd, nc)
    if n_blocks < 16:
        raise InsufficientData(f"need at least 16 blocks for tail fitting, have {n_blocks}")
    u = u.padded(nd, t.domain_dims)
    v = v.padded(nc, t.codomain_dims)
    sched = _dyadic_schedule(n_blocks)

    roff = np.cumsum([0, *t.codomain_dims])
    n_coords = int(roff[-1])
    # per-term magnitudes |f_kjli||u_jl| summed over l, bucketed by j
    mass1 = np.zeros((nd, n_coords))
    for (k, j), m in t.entries.items():
        mass1[j, roff[k] : roff[k + 1]] = np.abs(m) @ np.abs(u.blocks[j])
    cond1 = np.empty((len(sched), n_coords))
    for s, n in enumerate(sched):
        for c in range(n_coords):
            cond1[s, c] = fsum(mass1[: min(n, nd), c])

    vt = v.blocks
    cond2 = np.empty(len(sched))
    for s, n in enumerate(sched):
        partial = _apply_upto(t, u, n)
        kmax = min(n, nc)
        terms = np.concatenate([np.abs(vt[k]) * np.abs(partial.blocks[k]) for k in range(kmax)])
        cond2[s] = fsum(terms)

    slopes1 = np.array([_tail_slope(sched, cond1[:, c]) for c in range(n_coords)])
    slope2 = _tail_slope(sched, cond2)
    bound = -1.0 - margin
    all_slopes = np.concatenate([[slope2], slopes1])
    ok = bool(np.all(all_slopes < bound))  # nan compares False -> uncertified
    return SequentialityReport(
        tuple(sched), cond1, cond2, slopes1, slope2, float(margin), "certified" if ok else "uncertified"
    )


# ---------------------------------------------------------------------------
# extraction


def _map_all(fn, items, workers):
    workers = thread_count() if workers is None else max(1, workers)
    if workers == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _random_sequence(rng, label, dims):
    return BlockSequence(
        label, tuple(rng.standard_normal(d) + 1j * rng.standard_normal(d) for d in dims)
    )


def _check_linear(m, label, dims, rng, probes=8, rtol=1e-10):
    for _ in range(probes):
        a = _random_sequence(rng, label, dims)
        b = _random_sequence(rng, label, dims)
        ab = BlockSequence(label, tuple(x + y for x, y in zip(a.blocks, b.blocks)))
        ya, yb, yab = m(a).flat(), m(b).flat(), m(ab).flat()
        if not (ya.shape == yb.shape == yab.shape):
            raise NonlinearityError("mapping output size depends on the input")
        scale = np.abs(ya).max(initial=0.0) + np.abs(yb).max(initial=0.0)
        err = np.abs(yab - ya - yb).max(initial=0.0)
        if err > rtol * max(scale, 1e-300):
            raise NonlinearityError(f"superposition violated: error {err:.3e} vs scale {scale:.3e}")


def extract_tensor(
    m: Callable[[BlockSequence], BlockSequence],
    domain: Spectrum,
    domain_trunc: int,
    codomain_trunc: int,
    codomain_label: str | None = None,
    *,
    check_linearity: bool = True,
    seed: int = 0,
    workers: int | None = None,
) -> BlockTensor:
    """Recover the tensor of a black-box linear map by probing coordinate inputs.

    The image of ``e_{jl}`` restricted to codomain block ``k`` is column ``l``
    of ``f_kj``. All-zero blocks are dropped from the result.
    """
    if not 1 <= domain_trunc <= len(domain):
        raise AlignmentError(f"domain truncation {domain_trunc} outside 1..{len(domain)}")
    if codomain_trunc < 1:
        raise AlignmentError("codomain truncation must be >= 1")
    dims = tuple(domain.dims[:domain_trunc])
    if check_linearity:
        _check_linear(m, domain.label, dims, np.random.default_rng(seed))

    coords = [(j, l) for j in range(domain_trunc) for l in range(dims[j])]
    images = _map_all(lambda jl: m(BlockSequence.basis(domain, jl[0], jl[1], domain_trunc)), coords, workers)

    label = codomain_label
    gdims = None
    for img in images:
        if len(img) < codomain_trunc:
            raise AlignmentError(f"mapping returned {len(img)} blocks, need {codomain_trunc}")
        d = img.dims[:codomain_trunc]
        if gdims is None:
            gdims = d
            label = img.spectrum_label if label is None else label
        elif d != gdims:
            raise AlignmentError("mapping output block sizes vary between probes")

    cols = {}
    for (j, l), img in zip(coords, images):
        for k in range(codomain_trunc):
            col = img.blocks[k]
            if np.any(col != 0):
                mat = cols.setdefault((k, j), np.zeros((gdims[k], dims[j]), dtype=complex))
                mat[:, l] = col
    return BlockTensor(domain.label, label, dims, gdims, cols)


def extract_tensor_dual(
    g: Callable[[BlockSequence], BlockSequence],
    domain_dims: Sequence[int],
    codomain: Spectrum,
    codomain_trunc: int,
    domain_label: str,
    *,
    workers: int | None = None,
) -> BlockTensor:
    """Recover ``f`` from its adjoint action ``v -> v o f`` on coordinate functionals.

    ``g(e_{ki})`` is a sequence over the domain; its block ``j``, slot ``l`` is
    ``f_kjli``. The returned tensor maps domain -> codomain.
    """
    if not 1 <= codomain_trunc <= len(codomain):
        raise AlignmentError(f"codomain truncation {codomain_trunc} outside 1..{len(codomain)}")
    ddims = tuple(int(d) for d in domain_dims)
    gdims = tuple(codomain.dims[:codomain_trunc])
    coords = [(k, i) for k in range(codomain_trunc) for i in range(gdims[k])]
    rows = _map_all(lambda ki: g(BlockSequence.basis(codomain, ki[0], ki[1], codomain_trunc)), coords, workers)
    entries = {}
    for (k, i), row in zip(coords, rows):
        if row.dims[: len(ddims)] != ddims[: len(row)]:
            raise AlignmentError("functional images do not match the domain block sizes")
        for j, blk in enumerate(row.blocks[: len(ddims)]):
            if np.any(blk != 0):
                mat = entries.setdefault((k, j), np.zeros((gdims[k], ddims[j]), dtype=complex))
                mat[i, :] = blk
    return BlockTensor(domain_label, codomain.label, ddims, gdims, entries)


# ---------------------------------------------------------------------------
# I/O


def load_tensor(source, domain: Spectrum | None = None, codomain: Spectrum | None = None) -> BlockTensor:
    """Read ``tensor.json``.

    Block sizes come from, in order of preference: the given spectra, the
    optional ``domain_dims``/``codomain_dims`` fields, or the stored matrix
    shapes (every block index up to the maximum must then be covered).
    """
    text = _read_text(source)
    try:
        obj = json.loads(text)
        dlabel = str(obj["domain"])
        clabel = str(obj["codomain"])
        raw = []
        for e in obj["entries"]:
            k, j = e["k"], e["j"]
            if isinstance(k, bool) or isinstance(j, bool) or int(k) != k or int(j) != j:
                raise ValueError("block indices must be integers")
            mat = [[complex(float(re), float(im)) for re, im in row] for row in e["matrix"]]
            arr = np.array(mat, dtype=complex)
            if arr.ndim != 2:
                raise ValueError(f"entry ({k}, {j}) is not a matrix")
            raw.append((int(k), int(j), arr))
        ddims = obj.get("domain_dims")
        cdims = obj.get("codomain_dims")
    except (ValueError, KeyError, TypeError) as exc:
        raise ParseError(f"malformed tensor json: {exc}") from exc

    def infer(dims, sp, label, axis, which):
        if sp is not None:
            if sp.label != label:
                raise AlignmentError(f"tensor {which} is {label!r} but spectrum is {sp.label!r}")
            if dims is not None:
                if list(dims) != list(sp.dims[: len(dims)]):
                    raise AlignmentError(f"stored {which} dims disagree with the spectrum")
                return tuple(dims)
            top = max((e[axis] for e in raw), default=-1) + 1
            return tuple(sp.dims[: max(top, 1)])
        if dims is not None:
            return tuple(int(d) for d in dims)
        found = {}
        for e in raw:
            size = e[2].shape[0 if axis == 0 else 1]
            if found.setdefault(e[axis], size) != size:
                raise ShapeError(f"inconsistent sizes for {which} block {e[axis]}")
        top = max(found, default=-1) + 1
        missing = [b for b in range(top) if b not in found]
        if missing or top == 0:
            raise ParseError(f"cannot infer {which} block sizes; pass the {which} spectrum")
        return tuple(found[b] for b in range(top))

    cd = infer(cdims, codomain, clabel, 0, "codomain")
    dd = infer(ddims, domain, dlabel, 1, "domain")
    return BlockTensor(dlabel, clabel, dd, cd, {(k, j): m for k, j, m in raw})


def save_tensor(t: BlockTensor) -> str:
    entries = [
        {"k": k, "j": j, "matrix": [[[z.real, z.imag] for z in row] for row in m]}
        for (k, j), m in t.entries.items()
    ]
    body = {
        "domain": t.domain_label,
        "codomain": t.codomain_label,
        "domain_dims": list(t.domain_dims),
        "codomain_dims": list(t.codomain_dims),
        "entries": entries,
    }
    return dump_json(body) + "\n"
