""" Test experiment file parsing """
from pathlib import Path

import pytest

from src.data_pipline.config_file import load_experiment, parse_experiment
from src.evaluation.metrics import LossKind
from src.rules.decision_rules import RuleKind
from src.simulation.config import ExternalIncomeSource, IncomeFamily
from src.utilities.errors import InvalidConfigError

EXAMPLE = """\
# lognormal incomes at three noise levels
n = 2000
snr_levels = 1, 0.5, 0.25
replications = 50
seed = 7
budget_fraction = 0.1
rules = plug_in, james_stein, eb_npmle, ubi
rule.eb_npmle.grid_size = 200
income_family = lognormal
income.sdlog = 0.8
output_dir = out/lognormal
plots = true
"""


def _config_error(text: str) -> InvalidConfigError:
    with pytest.raises(InvalidConfigError) as info:
        parse_experiment(text)
    return info.value


def test_example_file():
    plan = parse_experiment(EXAMPLE)
    assert plan.snr_levels == (1.0, 0.5, 0.25)
    assert plan.output_dir == Path("out/lognormal")
    assert plan.plots

    config = plan.configs[0]
    assert config.replications == 50 and config.seed == 7
    assert [spec.kind for spec in config.rules] == [
        RuleKind.PLUG_IN, RuleKind.JAMES_STEIN, RuleKind.EB_NPMLE, RuleKind.UBI
    ]
    assert config.rules[2].npmle_config().grid_size == 200
    assert config.income_source.family is IncomeFamily.LOGNORMAL
    assert config.income_source.n == 2000
    assert config.loss is LossKind.SQUARED


def test_configs_differ_only_in_snr():
    first, second, _ = parse_experiment(EXAMPLE).configs
    assert first.rules == second.rules
    assert first.seed == second.seed
    assert first.snr_target != second.snr_target


def test_defaults():
    plan = parse_experiment("n = 100\nsnr_levels = 1\nrules = ubi\nincome_family = two_point\n")
    config = plan.configs[0]
    assert config.replications == 200
    assert config.budget_fraction == 0.1
    assert plan.output_dir == Path("out")
    assert not plan.plots


def test_overrides_win_over_the_file():
    plan = parse_experiment(EXAMPLE, seed=99, output_dir=Path("elsewhere"), plots=False, loss="one_sided")
    assert all(config.seed == 99 for config in plan.configs)
    assert all(config.loss is LossKind.ONE_SIDED for config in plan.configs)
    assert plan.output_dir == Path("elsewhere")
    assert not plan.plots


def test_unknown_key_names_its_line():
    error = _config_error(EXAMPLE + "colour = blue\n")
    assert error.line == 13
    assert "colour" in error.message


def test_duplicate_key():
    error = _config_error(EXAMPLE + "seed = 8\n")
    assert error.line == 13
    assert "line 5" in error.message


def test_empty_value():
    error = _config_error("n =\nsnr_levels = 1\nrules = ubi\nincome_family = two_point\n")
    assert error.line == 1


def test_bad_value_names_its_line():
    error = _config_error("n = 100\nsnr_levels = 1, -2\nrules = ubi\nincome_family = two_point\n")
    assert error.line == 2


def test_options_for_an_unlisted_rule():
    error = _config_error("n = 10\nsnr_levels = 1\nrules = ubi\nincome_family = two_point\nrule.eb_npmle.tol = 1e-6\n")
    assert error.line == 5


def test_invalid_rule_option_names_its_line():
    error = _config_error("n = 10\nsnr_levels = 1\nrules = eb_npmle\nincome_family = two_point\nrule.eb_npmle.tol = tiny\n")
    assert error.line == 5


def test_unknown_rule():
    assert _config_error("n = 10\nsnr_levels = 1\nrules = lasso\nincome_family = two_point\n").line == 3


def test_rule_listed_twice():
    assert _config_error("n = 10\nsnr_levels = 1\nrules = ubi, ubi\nincome_family = two_point\n").line == 3


def test_income_family_and_file_conflict():
    error = _config_error("snr_levels = 1\nrules = ubi\nincome_family = two_point\nincome_file = panel.csv\n")
    assert error.line == 4


def test_income_file_does_not_take_n():
    error = _config_error("n = 10\nsnr_levels = 1\nrules = ubi\nincome_file = panel.csv\n")
    assert error.line == 1


def test_income_file_resolves_against_base_dir(tmp_path):
    plan = parse_experiment("snr_levels = 1\nrules = ubi\nincome_file = panel.csv\n", base_dir=tmp_path)
    assert plan.configs[0].income_source == ExternalIncomeSource(tmp_path / "panel.csv")


def test_n_is_required_with_a_family():
    assert _config_error("snr_levels = 1\nrules = ubi\nincome_family = lognormal\n").line == 3


def test_an_income_source_is_required():
    assert "income_family" in _config_error("n = 10\nsnr_levels = 1\nrules = ubi\n").message


def test_missing_required_key():
    error = _config_error("n = 10\nrules = ubi\nincome_family = two_point\n")
    assert "snr_levels" in error.message


def test_load_experiment(write_text):
    plan = load_experiment(write_text("experiment.txt", EXAMPLE), seed=3)
    assert plan.configs[0].seed == 3


def test_load_missing_experiment(tmp_path):
    with pytest.raises(InvalidConfigError):
        load_experiment(tmp_path / "absent.txt")
