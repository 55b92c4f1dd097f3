import json
import math
import subprocess
import sys
import textwrap

import numpy as np
import pytest

from spectraseq import BlockSequence, BlockTensor, counting_exponent, save_coeffs, save_spectrum, save_tensor, torus_laplacian_spectrum
from spectraseq.cli import run


def _run(capsys, *argv):
    code = run([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def files(tmp_path):
    sp = torus_laplacian_spectrum(1, 16)
    (tmp_path / "sp.json").write_text(save_spectrum(sp, "json"))
    (tmp_path / "zero.json").write_text(save_coeffs(BlockSequence.zeros(sp), "json"))
    rng = np.random.default_rng(5)
    u = BlockSequence(sp.label, tuple(rng.standard_normal(d) + 1j * rng.standard_normal(d) for d in sp.dims))
    (tmp_path / "u.json").write_text(save_coeffs(u, "json"))
    (tmp_path / "u.csv").write_text(save_coeffs(u, "csv"))
    (tmp_path / "id.json").write_text(save_tensor(BlockTensor.identity(sp)))
    decay = BlockSequence(sp.label, tuple(np.full(d, lam**-3.0) for lam, d in sp.blocks))
    (tmp_path / "decay.json").write_text(save_coeffs(decay, "json"))
    sin3 = [np.zeros(d) for d in sp.dims]
    sin3[3][1] = math.sqrt(math.pi)
    (tmp_path / "sin3.json").write_text(save_coeffs(BlockSequence(sp.label, tuple(sin3)), "json"))
    (tmp_path / "pts.csv").write_text(f"x\n0\n{math.pi / 6!r}\n")
    (tmp_path / "fact.json").write_text(json.dumps({"values": [math.factorial(k) for k in range(10)], "A": 1, "H": 2}))
    return tmp_path


class TestSpectrumInfo:
    def test_converges(self, capsys):
        code, out, _ = _run(capsys, "spectrum-info", "torus1:512", "--q", "0.6", "--json")
        rep = json.loads(out)
        assert code == 0
        assert rep["verdict"] == "converges"
        assert abs(rep["fitted_counting_exponent"] - 0.5) <= 0.05

    def test_table_output(self, capsys):
        code, out, _ = _run(capsys, "spectrum-info", "torus1:512", "--q", "0.4")
        assert code == 0
        assert any(line.split() == ["verdict", "diverges"] for line in out.splitlines())

    def test_strict_inconclusive(self, capsys):
        assert _run(capsys, "spectrum-info", "torus1:512", "--q", "0.5")[0] == 0
        assert _run(capsys, "spectrum-info", "torus1:512", "--q", "0.5", "--strict")[0] == 2

    def test_file_input(self, capsys, files):
        code, out, _ = _run(capsys, "spectrum-info", files / "sp.json", "--json")
        assert code == 0 and json.loads(out)["blocks"] == 17

    def test_seventeen_digits(self, capsys):
        _, out, _ = _run(capsys, "spectrum-info", "torus1:512", "--json")
        assert '"fit_r2": 0.99999998492216413' in out
        alpha = counting_exponent(torus_laplacian_spectrum(1, 512))[0]
        assert json.loads(out)["fitted_counting_exponent"] == alpha

    def test_gen(self, capsys):
        code, out, _ = _run(capsys, "spectrum-gen", "--n", "1", "--J", "2", "--format", "csv")
        assert code == 0 and out == "lambda,dim\n1,1\n2,2\n5,2\n"


class TestCoefficients:
    def test_norm_zero(self, capsys, files):
        code, out, _ = _run(capsys, "norm", files / "sp.json", files / "zero.json", "--s", "2.5", "--json")
        assert code == 0 and json.loads(out)["norm"] == 0

    def test_norm_csv_matches_json(self, capsys, files):
        a = _run(capsys, "norm", files / "sp.json", files / "u.json", "--s", "1")[1]
        b = _run(capsys, "norm", files / "sp.json", files / "u.csv", "--s", "1")[1]
        assert a == b

    def test_classify(self, capsys, files):
        code, out, _ = _run(capsys, "classify", "torus1:16", files / "decay.json", "--threshold", "2", "--json")
        rep = json.loads(out)
        assert code == 0
        assert rep["classification"] == "smooth_like"
        assert abs(rep["estimated_order"] - 3) < 1e-9

    def test_pair(self, capsys, files):
        code, out, _ = _run(capsys, "pair", files / "sp.json", files / "u.json", files / "zero.json", "--json")
        assert code == 0 and json.loads(out) == {"pairing": [0, 0]}
        code, out, _ = _run(capsys, "pair", files / "sp.json", files / "u.json", files / "u.json", "--abs", "--json")
        assert json.loads(out)["abs_pairing"] > 0


class TestOperators:
    def test_adjoint_identity(self, capsys, files):
        code, out, _ = _run(capsys, "op-adjoint-check", files / "id.json", files / "u.json", files / "u.json", "--json")
        rep = json.loads(out)
        assert code == 0
        assert rep["residual"] == 0 and rep["within_tolerance"] is True

    def test_apply_identity(self, capsys, files):
        code, out, _ = _run(capsys, "op-apply", files / "id.json", files / "u.json")
        assert code == 0 and out == (files / "u.json").read_text()

    def test_apply_with_spectra(self, capsys, files):
        code, out, _ = _run(
            capsys, "op-apply", files / "id.json", files / "u.json",
            "--domain-spectrum", "torus1:16", "--codomain-spectrum", files / "sp.json",
        )
        assert code == 0

    def test_extract_via_probe_command(self, capsys, tmp_path):
        script = tmp_path / "probe.py"
        script.write_text(
            textwrap.dedent(
                """
                import json, sys
                obj = json.load(sys.stdin)
                # multiply block j by (j + 1)
                obj["blocks"] = [[[(j + 1) * re, (j + 1) * im] for re, im in blk] for j, blk in enumerate(obj["blocks"])]
                json.dump(obj, sys.stdout)
                """
            )
        )
        code, out, err = _run(
            capsys, "op-extract", "--probe-cmd", f"{sys.executable} {script}",
            "--domain-spectrum", "torus1:4", "--domain-trunc", "3", "--codomain-trunc", "3",
        )
        assert code == 0, err
        t = json.loads(out)
        assert [(e["k"], e["j"]) for e in t["entries"]] == [(0, 0), (1, 1), (2, 2)]
        assert t["entries"][2]["matrix"] == [[[3, 0], [0, 0]], [[0, 0], [3, 0]]]

    def test_extract_failing_probe(self, capsys):
        code, out, err = _run(
            capsys, "op-extract", "--probe-cmd", f"{sys.executable} -c 'import sys; sys.exit(3)'",
            "--domain-spectrum", "torus1:4", "--domain-trunc", "2", "--codomain-trunc", "2",
        )
        assert code == 1 and out == "" and "probe command failed" in err


class TestUniversality:
    def test_reconstruct(self, capsys, files):
        code, out, _ = _run(capsys, "reconstruct", "--manifold", "torus1", "--coeffs", files / "sin3.json", "--points", files / "pts.csv")
        lines = out.splitlines()
        assert code == 0 and lines[0] == "x,phi_re,phi_im"
        assert float(lines[1].split(",")[1]) == 0
        assert abs(float(lines[2].split(",")[1]) - 1) <= 1e-12

    def test_reconstruct_csv_needs_J(self, capsys, files):
        assert _run(capsys, "reconstruct", "--manifold", "torus1", "--coeffs", files / "u.csv", "--points", files / "pts.csv")[0] == 1
        assert _run(capsys, "reconstruct", "--manifold", "torus1", "--coeffs", files / "u.csv", "--points", files / "pts.csv", "--J", "16")[0] == 0

    def test_factor_check(self, capsys, tmp_path):
        sp = torus_laplacian_spectrum(1, 32)
        (tmp_path / "t.json").write_text(save_tensor(BlockTensor.diagonal(sp, lambda lam: lam**-2.0)))
        code, out, _ = _run(capsys, "factor-check", "--tensor", tmp_path / "t.json", "--manifold", "torus1", "--grid", "128", "--json")
        assert code == 0 and json.loads(out)["max_deviation"] <= 1e-9

    def test_factor_check_alias(self, capsys, tmp_path):
        sp = torus_laplacian_spectrum(1, 32)
        (tmp_path / "t.json").write_text(save_tensor(BlockTensor.identity(sp)))
        code, out, err = _run(capsys, "factor-check", "--tensor", tmp_path / "t.json", "--grid", "64")
        assert code == 1 and out == "" and "alias" in err


class TestKomatsu:
    def test_factorial(self, capsys, files):
        code, out, _ = _run(capsys, "komatsu-validate", files / "fact.json")
        assert code == 0
        assert "(2) M_{k+1}<=A*H^k*M_k: holds" in out
        assert "FAILS at k=2" in out

    def test_json(self, capsys, files):
        _, out, _ = _run(capsys, "komatsu-validate", files / "fact.json", "--K", "6", "--json")
        rep = json.loads(out)
        assert rep["K"] == 6 and rep["conditions"][2]["first_violation"] == 2


class TestErrors:
    def test_missing_file(self, capsys):
        code, out, err = _run(capsys, "norm", "nope.json", "nope.json", "--s", "1")
        assert code == 1 and out == "" and err.startswith("error:")

    def test_usage(self, capsys):
        assert _run(capsys, "norm")[0] == 1
        assert _run(capsys, "no-such-command")[0] == 1

    def test_invariant_violation(self, capsys, tmp_path):
        (tmp_path / "bad.csv").write_text("lambda,dim\n2,1\n1,1\n")
        code, out, err = _run(capsys, "spectrum-info", tmp_path / "bad.csv")
        assert code == 1 and out == ""

    def test_alignment(self, capsys, files):
        code, _, err = _run(capsys, "norm", "torus2:2", files / "u.json", "--s", "1")
        assert code == 1 and "error" in err


@pytest.mark.parametrize(
    "argv",
    [
        ["spectrum-info", "torus1:512", "--q", "0.6"],
        ["komatsu-validate", "{fact}"],
        ["norm", "{sp}", "{u}", "--s", "0.3", "--json"],
    ],
)
def test_repeatable(capsys, files, argv):
    argv = [a.format(fact=files / "fact.json", sp=files / "sp.json", u=files / "u.json") for a in argv]
    assert _run(capsys, *argv) == _run(capsys, *argv)


def test_console_script(files):
    proc = subprocess.run(
        [sys.executable, "-m", "spectraseq", "norm", str(files / "sp.json"), str(files / "zero.json"), "--s", "1", "--json"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["norm"] == 0
