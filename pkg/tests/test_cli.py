"""Command-line surface: grammar, exit codes, determinism, formats."""
import json

from momenta.cli import main


def run(argv, capsys):
    rc = main(argv)
    out = capsys.readouterr().out
    return rc, out


class TestCompute:
    def test_json_round_trip_and_determinism(self, capsys, tmp_path):
        args = ["compute", "--family", "qhermite2:q=0.25", "--N", "16",
                "--K", "8", "--bits", "192"]
        rc1, out1 = run(args, capsys)
        rc2, out2 = run(args, capsys)
        assert rc1 == rc2 == 0
        assert out1 == out2           # byte-identical reports
        doc = json.loads(out1)
        assert doc["version"] == "0.1.0"
        assert doc["config"]["bits"] == 192
        assert "moments" in doc["tables"]
        assert "U" in doc["tables"]
        assert doc["tables"]["moments"][0]["value"] == "1.0"

    def test_exact_mode(self, capsys):
        rc, out = run(["compute", "--family", "gegenbauer:lambda=0.5",
                       "--N", "12", "--K", "6", "--bits", "128", "--exact"],
                      capsys)
        assert rc == 0
        doc = json.loads(out)
        assert doc["verdicts"]["moments_exact"] is True

    def test_unknown_family_exit_code(self, capsys):
        rc, _ = run(["compute", "--family", "nope:q=1"], capsys)
        assert rc == 2

    def test_short_table_exit_code(self, capsys, tmp_path):
        path = tmp_path / "short.json"
        path.write_text(json.dumps({"b": ["1", "2"]}))
        rc, _ = run(["compute", "--family", f"table:{path}", "--N", "16",
                     "--K", "4", "--bits", "128"], capsys)
        assert rc == 2

    def test_csv_output(self, capsys, tmp_path):
        out = tmp_path / "rep"
        rc, _ = run(["compute", "--family", "cubic_sym", "--N", "10",
                     "--K", "5", "--bits", "128", "--format", "csv",
                     "--out", str(out)], capsys)
        assert rc == 0
        files = sorted(p.name for p in tmp_path.iterdir())
        assert "rep_moments.csv" in files
        assert "rep_verdicts.json" in files
        first = (tmp_path / "rep_moments.csv").read_text().splitlines()
        assert first[0] == "index,value,err"


class TestReports:
    def test_decimal_strings_preserve_precision(self):
        from mpmath import mp, mpf
        from momenta.reports import decimal_str
        with mp.workprec(512):
            x = mp.sqrt(mpf(2)) * mpf(10) ** 600
            text = decimal_str(x, 512)
            back = mpf(text)
            assert abs(back - x) <= abs(x) * mpf(2) ** -500


class TestVerify:
    def test_cs_cubic_divergent(self, capsys):
        rc, out = run(["verify", "cs", "--family", "cubic_sym", "--N", "40",
                       "--bits", "160"], capsys)
        assert rc == 0
        doc = json.loads(out)
        assert doc["verdicts"]["verdict"] == "divergent"

    def test_aci_lognormal(self, capsys):
        rc, out = run(["verify", "aci", "--family", "lognormal:q=0.5",
                       "--imax", "4", "--jmax", "4", "--bits", "256"],
                      capsys)
        assert rc == 0
        doc = json.loads(out)
        assert doc["verdicts"]["all_certified"] is True
        worst = float(doc["verdicts"]["max_residual"])
        assert worst < 1e-20

    def test_cs_star_qhermite(self, capsys):
        rc, out = run(["verify", "cs-star", "--family", "qhermite2:q=0.25",
                       "--N", "20", "--j", "0,1", "--bits", "192"], capsys)
        assert rc == 0
        doc = json.loads(out)
        assert doc["verdicts"]["verdict_j0"] == "convergent"
        assert doc["verdicts"]["verdict_j1"] == "convergent"


class TestAlpha:
    def test_eval_grid(self, capsys):
        rc, out = run(["alpha", "eval", "--grid", "2:3:1", "--bits", "96",
                       "--eps-tail", "1e-8"], capsys)
        assert rc == 0
        doc = json.loads(out)
        assert len(doc["tables"]["u"]) == 2
        assert float(doc["tables"]["k"][0]["value"]) < 1

    def test_asymptotics(self, capsys):
        rc, out = run(["alpha", "asymptotics", "--alphas", "20,200",
                       "--bits", "96", "--eps-tail", "1e-8"], capsys)
        assert rc == 0
        doc = json.loads(out)
        au = [float(r["value"]) for r in doc["tables"]["alpha_u"]]
        av = [float(r["value"]) for r in doc["tables"]["alpha_v"]]
        assert au[0] < au[1] < float(doc["verdicts"]["pi2_over_24"])
        assert av[0] > av[1] > float(doc["verdicts"]["pi2_over_6"])

    def test_env_bits_override(self, capsys, monkeypatch):
        monkeypatch.setenv("MOMENTA_BITS", "96")
        rc, out = run(["alpha", "eval", "--grid", "2:2:1",
                       "--eps-tail", "1e-8"], capsys)
        assert rc == 0
        assert json.loads(out)["config"]["bits"] == 96
        # explicit flag wins over the environment
        rc, out = run(["alpha", "eval", "--grid", "2:2:1", "--bits", "128",
                       "--eps-tail", "1e-8"], capsys)
        assert json.loads(out)["config"]["bits"] == 128


class TestOthers:
    def test_cubic_report(self, capsys):
        rc, out = run(["cubic", "report", "--n", "20", "--quad-upto", "1",
                       "--bits", "96", "--eps-tail", "1e-10"], capsys)
        assert rc == 0
        doc = json.loads(out)
        assert doc["verdicts"]["verdict"] == "divergent"
        assert doc["verdicts"]["bounds_hold"] is True
        assert doc["verdicts"]["envelope_ok"] is True

    def test_nullspace(self, capsys):
        rc, out = run(["nullspace", "--q", "0.5", "--init", "1",
                       "--m-max", "4", "--bits", "192"], capsys)
        assert rc == 0
        doc = json.loads(out)
        assert float(doc["verdicts"]["max_residual"]) < 1e-20

    def test_oracle_invert(self, capsys):
        rc, out = run(["oracle", "invert", "--family",
                       "alsalam_chihara:p=0.25,beta=1", "--N", "8",
                       "--bits", "192"], capsys)
        assert rc == 0
        doc = json.loads(out)
        assert doc["verdicts"]["within_tolerance"] is True
