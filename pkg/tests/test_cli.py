import json

import pytest

from noft import io as nio
from noft.cli import main
from noft.model import init_model
from noft.tensor import RngState, gaussian_sample


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestTrainCommand:
    def test_default_config_short_run(self, tmp_path, capsys):
        ckpt = tmp_path / "m.nofc"
        report = tmp_path / "r.csv"
        code, out, _ = run(
            capsys, "train", "--shape", "4,16,16", "--steps", "200",
            "--out", str(ckpt), "--report", str(report),
        )
        assert code == 0
        assert ckpt.exists()
        lines = report.read_text().strip().splitlines()
        assert lines[0] == "step,loss,l_noise,l_info,mean_lambda"
        assert len(lines) == 201

    def test_instance_mode_without_orig_names_flag(self, tmp_path, capsys):
        code, _, err = run(
            capsys, "train", "--mode", "instance", "--steps", "5",
            "--out", str(tmp_path / "m.nofc"),
        )
        assert code == 1
        assert "--orig" in err

    def test_identical_invocations_byte_identical_outputs(self, tmp_path, capsys):
        paths = []
        for tag in ("a", "b"):
            ckpt = tmp_path / f"{tag}.nofc"
            report = tmp_path / f"{tag}.csv"
            code, _, _ = run(
                capsys, "train", "--shape", "2,4,4", "--steps", "40",
                "--seed", "9", "--out", str(ckpt), "--report", str(report),
            )
            assert code == 0
            paths.append((ckpt, report))
        assert paths[0][0].read_bytes() == paths[1][0].read_bytes()
        assert paths[0][1].read_bytes() == paths[1][1].read_bytes()

    def test_config_file_driven_run(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("steps = 10\nbeta = 0.05\nseed = 3\n")
        code, _, _ = run(
            capsys, "train", "--config", str(cfg), "--shape", "2,4,4",
            "--out", str(tmp_path / "m.nofc"),
        )
        assert code == 0

    def test_bad_config_value_exits_with_data_error(self, tmp_path, capsys):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("beta = banana\n")
        code, _, err = run(
            capsys, "train", "--config", str(cfg), "--shape", "2,4,4",
            "--out", str(tmp_path / "m.nofc"),
        )
        assert code == 2
        assert "beta" in err


class TestApplyCommand:
    @pytest.fixture
    def trained(self, tmp_path, capsys):
        ckpt = tmp_path / "m.nofc"
        orig = tmp_path / "orig.noft"
        nio.write_noise(orig, gaussian_sample((2, 4, 4), RngState(0)))
        code, _, _ = run(
            capsys, "train", "--shape", "2,4,4", "--steps", "30",
            "--out", str(ckpt),
        )
        assert code == 0
        return ckpt, orig

    def test_seed_changes_output(self, tmp_path, trained, capsys):
        ckpt, orig = trained
        out1 = tmp_path / "n1.noft"
        out2 = tmp_path / "n2.noft"
        assert run(capsys, "apply", "--checkpoint", str(ckpt), "--orig", str(orig),
                   "--div-seed", "1", "--out", str(out1))[0] == 0
        assert run(capsys, "apply", "--checkpoint", str(ckpt), "--orig", str(orig),
                   "--div-seed", "2", "--out", str(out2))[0] == 0
        assert out1.read_bytes() != out2.read_bytes()

    def test_equal_seeds_bitwise_equal(self, tmp_path, trained, capsys):
        ckpt, orig = trained
        out1 = tmp_path / "n1.noft"
        out2 = tmp_path / "n2.noft"
        for out in (out1, out2):
            run(capsys, "apply", "--checkpoint", str(ckpt), "--orig", str(orig),
                "--div-seed", "7", "--out", str(out))
        assert out1.read_bytes() == out2.read_bytes()

    def test_shape_mismatch_is_data_error(self, tmp_path, trained, capsys):
        ckpt, _ = trained
        wrong = tmp_path / "wrong.noft"
        nio.write_noise(wrong, gaussian_sample((2, 5, 5), RngState(1)))
        code, _, err = run(capsys, "apply", "--checkpoint", str(ckpt),
                           "--orig", str(wrong), "--div-seed", "1",
                           "--out", str(tmp_path / "o.noft"))
        assert code == 2
        assert "shape" in err.lower()


class TestSweepCommand:
    def test_three_betas_three_rows(self, tmp_path, capsys):
        out = tmp_path / "sweep.json"
        code, table, _ = run(
            capsys, "sweep", "--betas", "0.01,0.1,1", "--trials", "3",
            "--steps", "40", "--shape", "2,4,4", "--out", str(out),
        )
        assert code == 0
        payload = json.loads(out.read_text())
        assert [row["beta"] for row in payload["rows"]] == [0.01, 0.1, 1.0]
        assert "beta" in table

    def test_single_trial_marks_diversity_unavailable(self, tmp_path, capsys):
        out = tmp_path / "sweep.json"
        code, table, _ = run(
            capsys, "sweep", "--betas", "0.1", "--trials", "1",
            "--steps", "20", "--shape", "2,4,4", "--out", str(out),
        )
        assert code == 0
        assert "n/a" in table
        assert json.loads(out.read_text())["rows"][0]["diversity"] is None

    def test_malformed_beta_token_names_it(self, tmp_path, capsys):
        code, _, err = run(
            capsys, "sweep", "--betas", "0.1,pear", "--out", str(tmp_path / "s.json"),
        )
        assert code == 1
        assert "pear" in err

    def test_deterministic_json(self, tmp_path, capsys):
        outs = []
        for tag in ("a", "b"):
            out = tmp_path / f"{tag}.json"
            run(capsys, "sweep", "--betas", "0.1", "--trials", "2",
                "--steps", "25", "--shape", "2,4,4", "--seed", "5", "--out", str(out))
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]


class TestGradcheckCommand:
    def test_default_passes(self, capsys):
        code, out, _ = run(capsys, "gradcheck")
        assert code == 0
        assert "passed" in out

    def test_impossible_tolerance_is_numeric_failure(self, capsys):
        code, _, err = run(capsys, "gradcheck", "--tol", "1e-13")
        assert code == 3
        assert "FAILED" in err


class TestOtDemoCommand:
    def test_swap_cost_plan_printed(self, capsys):
        code, out, _ = run(capsys, "ot-demo", "--size", "2", "--epsilon", "1")
        assert code == 0
        # closed form: diagonal 1 / (2 (1 + e^-1)) = 0.365529...
        assert "0.365529" in out
        assert "entropy" in out

    def test_bad_size(self, capsys):
        code, _, err = run(capsys, "ot-demo", "--size", "1")
        assert code == 1


class TestInspectCommand:
    def test_noise_file(self, tmp_path, capsys):
        path = tmp_path / "n.noft"
        nio.write_noise(path, gaussian_sample((4, 16, 16), RngState(3)))
        code, out, _ = run(capsys, "inspect", "--file", str(path))
        assert code == 0
        assert "(4, 16, 16)" in out

    def test_checkpoint_reports_parameter_count(self, tmp_path, capsys):
        path = tmp_path / "m.nofc"
        model = init_model((4, 64, 64), seed=0)
        nio.write_checkpoint(path, model)
        code, out, _ = run(capsys, "inspect", "--file", str(path))
        assert code == 0
        assert str(model.parameter_count) in out

    def test_truncated_file_mentions_truncation(self, tmp_path, capsys):
        path = tmp_path / "n.noft"
        nio.write_noise(path, gaussian_sample((2, 4, 4), RngState(4)))
        path.write_bytes(path.read_bytes()[:-6])
        code, _, err = run(capsys, "inspect", "--file", str(path))
        assert code == 2
        assert "truncated" in err

    def test_unknown_magic(self, tmp_path, capsys):
        path = tmp_path / "x.bin"
        path.write_bytes(b"XXXXsomething")
        code, _, err = run(capsys, "inspect", "--file", str(path))
        assert code == 2

    def test_missing_file(self, tmp_path, capsys):
        code, _, err = run(capsys, "inspect", "--file", str(tmp_path / "nope.noft"))
        assert code == 2


class TestUsageErrors:
    def test_no_subcommand(self, capsys):
        assert run(capsys, )[0] == 1

    def test_unknown_flag(self, capsys):
        assert run(capsys, "train", "--frobnicate")[0] == 1

    def test_generic_mode_needs_shape(self, tmp_path, capsys):
        code, _, err = run(capsys, "train", "--steps", "1", "--out", str(tmp_path / "m.nofc"))
        assert code == 1
        assert "--shape" in err
