"""Deterministic reductions, log-log regression and 17-digit serialization."""

import math
import os

import numpy as np

__all__ = [
    "fsum",
    "csum",
    "cdot",
    "loglog_fit",
    "fmt",
    "dump_json",
    "thread_count",
]


def fsum(values) -> float:
    """Correctly rounded sum; independent of order, so reproducible everywhere."""
    return math.fsum(np.asarray(values, dtype=float).ravel().tolist())


def csum(values) -> complex:
    v = np.asarray(values, dtype=complex).ravel()
    return complex(math.fsum(v.real.tolist()), math.fsum(v.imag.tolist()))


def cdot(a, b) -> complex:
    """Bilinear sum of a_i * b_i with the real/imag parts accumulated exactly."""
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    re = np.concatenate([a.real * b.real, -(a.imag * b.imag)])
    im = np.concatenate([a.real * b.imag, a.imag * b.real])
    return complex(math.fsum(re.tolist()), math.fsum(im.tolist()))


def loglog_fit(x, y):
    """Least-squares line through (log x, log y).

    Returns ``(slope, intercept, r2)``. ``r2`` is clipped to [0, 1] and is 1
    for a perfect fit of constant data.
    """
    lx = np.log(np.asarray(x, dtype=float))
    ly = np.log(np.asarray(y, dtype=float))
    n = lx.size
    if n < 2:
        raise ValueError("need at least two points")
    mx = fsum(lx) / n
    my = fsum(ly) / n
    dx = lx - mx
    dy = ly - my
    sxx = fsum(dx * dx)
    if sxx == 0.0:
        raise ValueError("abscissae are all equal")
    slope = fsum(dx * dy) / sxx
    intercept = my - slope * mx
    resid = ly - (slope * lx + intercept)
    ss_res = fsum(resid * resid)
    ss_tot = fsum(dy * dy)
    if ss_tot <= 0.0:
        r2 = 1.0
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return slope, intercept, r2


def fmt(x) -> str:
    """Format a real with 17 significant digits (round-trips exactly)."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    s = format(x, ".17g")
    return "0" if s == "-0" else s


def _encode(obj, out):
    if obj is None:
        out.append("null")
    elif obj is True:
        out.append("true")
    elif obj is False:
        out.append("false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        if not math.isfinite(obj):
            # JSON has no literal for these; emit strings so output stays valid
            out.append('"' + fmt(obj) + '"')
        else:
            out.append(fmt(obj))
    elif isinstance(obj, str):
        import json

        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        out.append("{")
        for i, (k, v) in enumerate(obj.items()):
            if i:
                out.append(", ")
            _encode(str(k), out)
            out.append(": ")
            _encode(v, out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(", ")
            _encode(v, out)
        out.append("]")
    else:
        raise TypeError(f"cannot encode {type(obj).__name__}")


def dump_json(obj) -> str:
    """JSON text with every float written at 17 significant digits."""
    out = []
    _encode(obj, out)
    return "".join(out)


def thread_count() -> int:
    raw = os.environ.get("SPECTRASEQ_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1
