import csv
import io
import subprocess
import sys


from sfem_sif.cli import main


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_run_row(store_root, capsys):
    code, out, _ = run(["run", "--specimen", "SEN", "--method", "ES", "--densities", "1/8",
                        "--output-dir", str(store_root)], capsys)
    assert code == 0
    (row,) = rows(out)
    assert row["method"] == "ES" and row["extraction"] == "MCCI"
    assert float(row["err_vs_ref"]) < 0


def test_unknown_method_is_usage_error(capsys):
    code, _, err = run(["run", "--method", "XFEM", "--no-reference"], capsys)
    assert code == 2 and "usage error" in err


def test_alpha_without_value_is_usage_error(capsys):
    code, _, err = run(["run", "--method", "ALPHA", "--no-reference"], capsys)
    assert code == 2 and "alpha" in err


def test_bad_flag_is_usage_error(capsys):
    assert run(["run", "--colour", "red"], capsys)[0] == 2
    assert run([], capsys)[0] == 2


def test_missing_reference_is_numerical_failure(tmp_path, capsys):
    code, _, err = run(["run", "--output-dir", str(tmp_path)], capsys)
    assert code == 1 and "reference missing" in err


def test_method_alpha_shorthand(capsys):
    code, out, _ = run(["run", "--method", "ALPHA:0.42", "--densities", "1/4",
                        "--no-reference"], capsys)
    assert code == 0 and rows(out)[0]["method"] == "ALPHA(0.42)"


def test_config_file_and_cod_output(store_root, tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"specimen = CEN\nmethod = NS\ndensities = 1/8\noutput_dir = {store_root}\n")
    cod = tmp_path / "cod.csv"
    code, out, _ = run(["run", "--config", str(cfg), "--cod", str(cod)], capsys)
    assert code == 0 and rows(out)[0]["specimen"] == "CEN"
    profile = list(csv.DictReader(cod.open()))
    assert len(profile) == 8 and float(profile[-1]["ratio"]) > 1


def test_sweeps_and_compare(store_root, tmp_path, capsys):
    out_file = tmp_path / "sweep.csv"
    code, _, _ = run(["sweep-density", "--densities", "1/4,1/8,1/16", "--out", str(out_file),
                      "--output-dir", str(store_root)], capsys)
    assert code == 0
    table = list(csv.DictReader(out_file.open()))
    assert len(table) == 3 and len({r["slope"] for r in table}) == 1
    code, out, _ = run(["sweep-alpha", "--densities", "1/4", "--grid", "0.3,0.4,0.5",
                        "--output-dir", str(store_root)], capsys)
    assert code == 0 and sum(int(r["optimum"]) for r in rows(out)) == 1
    code, out, _ = run(["compare", "--specimen", "CEN", "--densities", "1/4",
                        "--output-dir", str(store_root)], capsys)
    assert code == 0 and "dtipmod_NS" in rows(out)[0]


def test_sweep_needs_three_densities(store_root, capsys):
    code, _, err = run(["sweep-density", "--densities", "1/4,1/8",
                        "--output-dir", str(store_root)], capsys)
    assert code == 2 and "at least 3" in err


def test_export_fields(tmp_path, capsys):
    code, out, _ = run(["export-fields", "--method", "NS", "--densities", "1/4",
                        "--normalize", "--dir", str(tmp_path)], capsys)
    assert code == 0
    assert out.split() == [str(tmp_path / "nodes.csv"), str(tmp_path / "domains.csv")]
    dom = list(csv.DictReader((tmp_path / "domains.csv").open()))
    assert {r["kind"] for r in dom} == {"node"} and len(dom) == 81


def test_build_reference_bit_identical(tmp_path, store_root, capsys):
    code, out, _ = run(["build-reference", "--specimen", "CEN", "--output-dir", str(tmp_path)],
                       capsys)
    assert code == 0
    built = (tmp_path / "reference" / "CEN.json").read_bytes()
    assert built == (store_root / "reference" / "CEN.json").read_bytes()


def test_rerun_is_bit_identical(store_root, tmp_path):
    cmd = [sys.executable, "-m", "sfem_sif", "run", "--specimen", "SEN", "--method", "NS",
           "--densities", "1/8", "--extractions", "MCCI,VCE", "--output-dir", str(store_root)]
    first = subprocess.run(cmd, capture_output=True, check=True).stdout
    second = subprocess.run(cmd, capture_output=True, check=True).stdout
    assert first == second and first.count(b"\n") == 3
