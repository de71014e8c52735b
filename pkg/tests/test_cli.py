"""
Tests for the command-line surface: parsing, exit codes and output
"""

import json
import logging

import pytest

import main as cli
from framework.errors import MissingParameter, UnknownSubcommand, UsageError
from .games_fixtures import deposit_document

LAMBDA = ["--lambda", "0.5,0.2,0.3"]


@pytest.fixture(autouse=True)
def release_log_handlers():
    yield
    root = logging.getLogger()
    for handler in cli._installed_handlers:
        root.removeHandler(handler)
        handler.close()
    cli._installed_handlers.clear()


@pytest.fixture
def run(tmp_path, capsys):
    """main() with the log file under tmp_path; returns (exit code, stdout)"""
    def invoke(*argv):
        code = cli.main(list(argv) + ["--log-file", str(tmp_path / "run.log")])
        return code, capsys.readouterr().out
    return invoke


def test_parse_binds_and_converts():
    cmd = cli.parse(["comg", "prob", *LAMBDA, "--f1", "1", "--f2", "10", "--T", "2"], document={})
    assert cmd.name == "comg prob"
    assert cmd.params["T"] == 2
    assert cmd.params["lambda"].m == 2
    assert cmd.inputs["f2"] == "10"
    assert cmd.fmt == "json"


def test_flags_override_document():
    document = {"params": {"lambda": "0.5,0.2,0.3", "f1": 1, "f2": 10, "T": 1},
                "format": "csv", "seed": 9}
    cmd = cli.parse(["comg", "prob", "--T", "2"], document=document)
    assert cmd.params["T"] == 2
    assert cmd.params["f2"] == 10
    assert cmd.fmt == "csv"
    assert cmd.seed == 9


def test_document_settings_are_merged():
    document = {"settings": {"iewds_bound": 16}, "params": {"lambda": "0,1"}}
    cmd = cli.parse(["crab", "safety", "--c", "1", "--v", "2", "--T", "1"], document=document)
    assert cmd.config.iewds_bound == 16


def test_parse_errors():
    with pytest.raises(UnknownSubcommand):
        cli.parse(["comg", "nope"], document={})
    with pytest.raises(MissingParameter):
        cli.parse(["comg", "prob", *LAMBDA, "--f1", "1", "--f2", "10"], document={})
    with pytest.raises(UsageError):
        cli.parse(["comg", "prob", *LAMBDA, "--f1", "x", "--f2", "10", "--T", "1"], document={})
    with pytest.raises(UsageError):
        cli.parse(["comg", "prob", *LAMBDA, "--f1", "1", "--f2", "10", "--T", "1", "--seed", "-1"],
                  document={})


def test_comg_prob_output(run):
    code, out = run("comg", "prob", *LAMBDA, "--f1", "1", "--f2", "10", "--T", "2")
    assert code == 0
    report = json.loads(out)
    assert report["command"] == "comg prob"
    assert report["result"]["p"] == "17/20"
    assert report["result"]["tstar"] == [1, 0]
    assert report["provenance"]["inputs"]["T"] == "2"


def test_oracle_agrees(run):
    code, out = run("comg", "oracle", *LAMBDA, "--f1", "1", "--f2", "10", "--T", "2")
    assert code == 0
    assert json.loads(out)["result"]["agree"] is True


def test_exit_codes(run):
    assert run("comg", "prob", *LAMBDA, "--f1", "10", "--f2", "1", "--T", "2")[0] == 2
    assert run("comg", "nope")[0] == 1
    assert run("bogus")[0] == 1
    assert run("comg", "prob", *LAMBDA, "--f1", "1")[0] == 1
    assert run("comg", "oracle", *LAMBDA, "--f1", "1", "--f2", "10", "--T", "40")[0] == 3


def test_crab_safety_output(run):
    code, out = run("crab", "safety", "--lambda", "0,0.5,0.5", "--c", "0.6", "--v", "1", "--T", "1")
    assert code == 0
    assert json.loads(out)["result"]["safe"] is True


def test_two_htlc_check(run):
    code, out = run("two-htlc", "check", *LAMBDA, "--T1", "3", "--T2", "5", "--v1", "10", "--v2", "10",
                    "--cap1", "1", "--cap2", "1")
    assert code == 0
    result = json.loads(out)["result"]
    assert result["condition"] is False
    assert result["witness"]["gain"] == "17/10"


def test_wormhole_check(run):
    code, out = run("wormhole", "check", *LAMBDA, "--v3", "10", "--routing-fee", "1")
    assert code == 0
    result = json.loads(out)["result"]
    assert result["gain"] == "1"
    assert result["agree"] is True
    assert result["witness"]["deviator"] == "B"


def test_wormhole_check_needs_hashrate():
    with pytest.raises(MissingParameter):
        cli.parse(["wormhole", "check", "--v3", "10", "--routing-fee", "1"], document={})


def test_compose_check_ic(run, tmp_path):
    document = deposit_document()
    game = tmp_path / "game.json"
    settlement = tmp_path / "settlement.json"
    game.write_text(json.dumps(document))
    settlement.write_text(json.dumps(document["settlement"]))
    code, out = run("compose", "check-ic", *LAMBDA, "--game", str(game), "--settlement", str(settlement))
    assert code == 0
    assert json.loads(out)["result"]["holds"] is True


def test_malformed_config_document(run, tmp_path):
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    assert run("comg", "prob", "--config", str(broken))[0] == 1


def test_csv_output(run):
    code, out = run("comg", "sweep", *LAMBDA, "--f1", "1", "--f2", "10", "--T-max", "3", "--format", "csv")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "T,p_analytic,p_oracle,p_mc,se,rho_1,rho_2,tstar_1,tstar_2"
    assert len(lines) == 5


def test_json_output_is_reproducible(run):
    argv = ("comg", "simulate", *LAMBDA, "--f1", "1", "--f2", "10", "--T", "2",
            "--trials", "1000", "--seed", "42")
    assert run(*argv) == run(*argv)
