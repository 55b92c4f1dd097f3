import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectraseq import (
    BlockSequence,
    BlockTensor,
    Point,
    apply,
    classify_decay,
    coordinate_dual,
    delta_coefficients,
    evaluate,
    factorization_check,
    fourier_coefficients,
    hinf_mapping_check,
    torus_basis,
)
from spectraseq.errors import AliasError, AlignmentError, ParseError, TruncationError
from spectraseq.universality import grid_points, load_grid, load_points, reextract_tensor, save_points

B1 = torus_basis(1, 16)
B2 = torus_basis(2, 3)
SQRT_PI = math.sqrt(math.pi)


def _sin3():
    blocks = [np.zeros(d, dtype=complex) for d in B1.spectrum.dims]
    blocks[3][1] = SQRT_PI
    return BlockSequence(B1.spectrum.label, tuple(blocks))


def _direct_torus1(phi, x):
    """Independent trigonometric sum for torus1 coefficients."""
    total = phi.blocks[0][0] / math.sqrt(2 * math.pi)
    for j in range(1, len(phi)):
        c, s = phi.blocks[j]
        total += (c * math.cos(j * x) + s * math.sin(j * x)) / SQRT_PI
    return total


def _band_limited(rng, b, trunc=None):
    trunc = len(b.spectrum) if trunc is None else trunc
    return BlockSequence(
        b.spectrum.label,
        tuple(rng.standard_normal(d) + 1j * rng.standard_normal(d) for d in b.spectrum.dims[:trunc]),
    )


class TestPoint:
    def test_reduced(self):
        assert Point((2 * math.pi + 1.0,)).coordinates[0] == pytest.approx(1.0)
        assert 0 <= Point((-0.5,)).coordinates[0] < 2 * math.pi

    def test_bad_dimension(self):
        with pytest.raises(AlignmentError):
            Point((1.0, 2.0, 3.0))


class TestBasis:
    def test_torus1_layout(self):
        assert B1.spectrum.blocks[:3] == ((1.0, 1), (2.0, 2), (5.0, 2))
        assert B1.max_frequency(len(B1.spectrum)) == 16

    def test_torus2_layout(self):
        sp = B2.spectrum
        assert sp.total_dim == 49
        assert B2.frequencies[1].tolist() == [[1, 0], [0, 1], [0, 1], [1, 0]]
        assert B2.kinds[1].tolist() == [False, False, True, True]

    @pytest.mark.parametrize("b,M", [(B1, 33), (B1, 64), (B2, 7), (B2, 12)])
    def test_grid_gram_is_identity(self, b, M):
        B = b.evaluator(grid_points(b, M), len(b.spectrum))
        gram = b.quadrature_weight(M) * (B.T @ B)
        assert np.abs(gram - np.eye(gram.shape[0])).max() <= 1e-10


class TestDelta:
    @pytest.mark.parametrize("x", [0.0, 1.3, 5.9])
    def test_constant_block(self, x):
        assert delta_coefficients(B1, x, 5).blocks[0][0] == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-15)

    def test_sines_vanish_at_origin(self):
        d = delta_coefficients(B1, 0.0, len(B1.spectrum))
        assert all(blk[1] == 0 for blk in d.blocks[1:])

    def test_does_not_decay(self):
        b = torus_basis(1, 256)
        rep = classify_decay(delta_coefficients(b, 0.7, len(b.spectrum)), b.spectrum, 4.0)
        assert rep.classification == "distribution_like" or abs(rep.estimated_order) < 0.1

    def test_truncation_error(self):
        with pytest.raises(TruncationError):
            delta_coefficients(B1, 0.0, 100)

    def test_torus2_point(self):
        d = delta_coefficients(B2, (0.0, 0.0), len(B2.spectrum))
        assert d.blocks[0][0] == pytest.approx(1 / (2 * math.pi))
        with pytest.raises(AlignmentError):
            delta_coefficients(B2, 0.0, 2)

    def test_biduality(self):
        d = delta_coefficients(B1, 2.2, len(B1.spectrum))
        assert coordinate_dual(coordinate_dual(d, B1.spectrum), B1.spectrum) == d


class TestEvaluate:
    def test_sin3(self):
        assert evaluate(_sin3(), B1, math.pi / 6) == pytest.approx(1.0, abs=1e-12)

    def test_zero(self):
        assert evaluate(BlockSequence.zeros(B1.spectrum), B1, 0.4) == 0

    def test_direct_oracle(self, rng):
        phi = _band_limited(rng, B1)
        for x in grid_points(B1, 64)[:, 0]:
            assert abs(evaluate(phi, B1, x) - _direct_torus1(phi, x)) <= 1e-11

    @settings(max_examples=50)
    @given(st.integers(0, 2**32 - 1), st.floats(0, 2 * math.pi, exclude_max=True))
    def test_fixed_order_reconstruction(self, seed, x):
        phi = _band_limited(np.random.default_rng(seed), B1)
        e = delta_coefficients(B1, x, len(phi)).flat().real
        c = phi.flat()
        oracle = complex(math.fsum(c.real * e), math.fsum(c.imag * e))
        assert evaluate(phi, B1, x) == oracle

    def test_torus2_oracle(self, rng):
        phi = _band_limited(rng, B2)
        x = (0.4, 2.5)
        freqs = np.concatenate(B2.frequencies)
        kinds = np.concatenate(B2.kinds)
        total = 0j
        for c, k, is_cos in zip(phi.flat(), freqs, kinds):
            if not k.any():
                total += c / (2 * math.pi)
            else:
                ph = k[0] * x[0] + k[1] * x[1]
                total += c * (math.cos(ph) if is_cos else math.sin(ph)) / (math.sqrt(2) * math.pi)
        assert abs(evaluate(phi, B2, x) - total) <= 1e-12


class TestFourier:
    def test_constant(self):
        coef = fourier_coefficients(B1, np.ones(40), len(B1.spectrum))
        assert coef.blocks[0][0] == pytest.approx(math.sqrt(2 * math.pi), rel=1e-14)
        assert np.abs(coef.flat()[1:]).max() <= 1e-12

    def test_sin3(self):
        x = grid_points(B1, 40)[:, 0]
        coef = fourier_coefficients(B1, np.sin(3 * x), len(B1.spectrum))
        expected = _sin3().flat()
        assert np.abs(coef.flat() - expected).max() <= 1e-12

    @pytest.mark.parametrize("b,M", [(B1, 33), (B1, 50), (B2, 8)])
    def test_roundtrip_and_parseval(self, rng, b, M):
        phi = _band_limited(rng, b)
        pts = grid_points(b, M)
        samples = np.array([evaluate(phi, b, tuple(p)) for p in pts])
        shape = (M,) * b.dimension
        coef = fourier_coefficients(b, samples.reshape(shape), len(b.spectrum))
        assert np.abs(coef.flat() - phi.flat()).max() <= 1e-11
        again = np.array([evaluate(coef, b, tuple(p)) for p in pts])
        assert np.abs(again - samples).max() <= 1e-11
        energy = b.quadrature_weight(M) * math.fsum(np.abs(samples) ** 2)
        assert math.fsum(np.abs(phi.flat()) ** 2) == pytest.approx(energy, rel=1e-11)

    def test_alias(self):
        with pytest.raises(AliasError):
            fourier_coefficients(B1, np.ones(32), len(B1.spectrum))
        with pytest.raises(AliasError):
            fourier_coefficients(B2, np.ones((6, 6)), len(B2.spectrum))

    def test_alias_threshold_depends_on_truncation(self):
        coef = fourier_coefficients(B1, np.ones(8), 4)
        assert len(coef) == 4


class TestHinf:
    def test_smoothed_delta_is_smooth(self, rng):
        b = torus_basis(1, 32)
        sp = b.spectrum
        t = BlockTensor.diagonal(sp, lambda lam: lam**-4.0)
        probes = [
            BlockSequence(sp.label, tuple(np.exp(2j * math.pi * rng.random(d)) for d in sp.dims)) for _ in range(3)
        ]
        reports = hinf_mapping_check(lambda x: apply(t, delta_coefficients(b, x, len(sp))), b, probes, 128, 3.0)
        assert [r.classification for r in reports] == ["smooth_like"] * 3
        for r in reports:
            assert r.decay.estimated_order == pytest.approx(4.0, abs=0.05)

    def test_constant_map(self):
        b = torus_basis(1, 32)
        c = BlockSequence.basis(b.spectrum, 2, 0)
        reports = hinf_mapping_check(lambda x: c, b, [c, BlockSequence.basis(b.spectrum, 5, 1)], 128, 3.0)
        assert [r.classification for r in reports] == ["smooth_like", "smooth_like"]

    def test_raw_delta_high_coordinate(self):
        b = torus_basis(1, 32)
        probe = BlockSequence.basis(b.spectrum, 30, 0)
        (rep,) = hinf_mapping_check(lambda x: delta_coefficients(b, x, len(b.spectrum)), b, [probe], 128, 3.0)
        assert rep.classification != "smooth_like"

    def test_raw_delta_generic_probe_not_smooth(self, rng):
        b = torus_basis(1, 64)
        sp = b.spectrum
        probe = BlockSequence(sp.label, tuple(np.ones(d) for d in sp.dims))
        (rep,) = hinf_mapping_check(lambda x: delta_coefficients(b, x, len(sp)), b, [probe], 256, 3.0)
        assert rep.classification == "sobolev"
        assert rep.decay.estimated_order == pytest.approx(0.0, abs=0.05)

    def test_alias(self):
        b = torus_basis(1, 32)
        with pytest.raises(AliasError):
            hinf_mapping_check(lambda x: delta_coefficients(b, x, 33), b, [], 64, 3.0)


class TestFactorization:
    def test_diagonal_smoothing(self):
        b = torus_basis(1, 64)
        t = BlockTensor.diagonal(b.spectrum, lambda lam: lam**-2.0)
        assert factorization_check(t, b, 256) <= 1e-9
        assert factorization_check(t, b, 129) <= 1e-9

    def test_zero(self):
        b = torus_basis(1, 16)
        assert factorization_check(BlockTensor.between(b.spectrum, b.spectrum), b, 64) == 0.0

    def test_identity_band(self):
        b = torus_basis(1, 16)
        assert factorization_check(BlockTensor.identity(b.spectrum, 10), b, 64) <= 1e-9

    def test_torus2_random(self, rng):
        from conftest import random_tensor

        sp = B2.spectrum
        t = random_tensor(rng, sp, sp, len(sp), len(sp), density=0.3)
        assert factorization_check(t, B2, 16) <= 1e-9

    def test_reextract_keeps_labels(self):
        b = torus_basis(1, 16)
        t = BlockTensor.diagonal(b.spectrum, lambda lam: lam**-1.0)
        again = reextract_tensor(t, b, 64)
        assert (again.domain_label, again.codomain_label) == (t.domain_label, t.codomain_label)

    def test_alias(self):
        b = torus_basis(1, 16)
        with pytest.raises(AliasError):
            factorization_check(BlockTensor.identity(b.spectrum), b, 32)

    def test_domain_mismatch(self):
        b = torus_basis(1, 16)
        with pytest.raises(AlignmentError):
            factorization_check(BlockTensor.identity(B2.spectrum), b, 64)


class TestIO:
    def test_grid_torus1(self):
        M = 8
        x = grid_points(B1, M)[:, 0]
        text = "x1,re,im\n" + "".join(f"{float(a)!r},{math.cos(a)!r},0\n" for a in x[::-1])
        samples = load_grid(text.encode(), "torus1")
        assert np.allclose(samples, np.cos(x))

    def test_grid_torus2(self):
        M = 3
        pts = grid_points(B2, M)
        text = "x1,x2,re,im\n" + "".join(f"{float(a)!r},{float(c)!r},{i},1\n" for i, (a, c) in enumerate(pts))
        samples = load_grid(text.encode(), "torus2")
        assert samples.shape == (3, 3)
        assert samples[1, 2] == 5 + 1j

    @pytest.mark.parametrize(
        "text",
        [
            "x,re,im\n0,1,0\n",
            "x1,re,im\n0,1,0\n0,1,0\n",
            "x1,re,im\n0,1,0\n1.0,1,0\n",
            "x1,re,im\n0,a,0\n",
        ],
    )
    def test_grid_errors(self, text):
        with pytest.raises(ParseError):
            load_grid(text.encode(), "torus1")

    def test_points_roundtrip(self):
        pts = load_points(b"x\n0.5\n7.0\n", "torus1")
        assert pts[1].coordinates[0] == pytest.approx(7.0 - 2 * math.pi)
        out = save_points(pts, [1 + 2j, -0.5])
        assert out.splitlines()[0] == "x,phi_re,phi_im"
        assert out.splitlines()[1] == "0.5,1,2"

    def test_points_torus2(self):
        pts = load_points(b"x1,x2\n0.5,1\n", "torus2")
        assert pts[0].coordinates == (0.5, 1.0)
        assert save_points(pts, [0j]).splitlines()[0] == "x1,x2,phi_re,phi_im"

    def test_points_header(self):
        with pytest.raises(ParseError):
            load_points(b"y\n1\n", "torus1")
