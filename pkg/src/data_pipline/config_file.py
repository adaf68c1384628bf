"""
Experiment configuration files.

Flat ``key = value`` lines, ``#`` comments, one experiment per file. Lines
are tokenized by python-dotenv's parser (which keeps the line number of
every binding) and the values validated by a pydantic model, so every
rejection names the line of the offending key.

Example::

    n = 2000
    snr_levels = 1, 0.5, 0.25
    replications = 200
    seed = 7
    budget_fraction = 0.1
    rules = plug_in, james_stein, oracle_bayes, eb_npmle, ubi
    rule.eb_npmle.grid_size = 200
    income_family = lognormal
    income.sdlog = 0.8
    output_dir = out/lognormal
    plots = true
"""
from __future__ import annotations

import io
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Optional

from dotenv.parser import parse_stream
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from src.evaluation.metrics import LossKind
from src.rules.decision_rules import RuleSpec
from src.simulation.config import EvaluationTarget, ExternalIncomeSource, IncomeSpec, SimConfig
from src.utilities.errors import InvalidConfigError, TargetingException

RULE_PREFIX: str = "rule."
INCOME_PREFIX: str = "income."


def _split_list(value: Any) -> Any:
    if isinstance(value, str):
        return [part.strip() for part in value.split(",") if part.strip()]
    return value


class ExperimentFile(BaseModel):
    """ Scalar and list keys of an experiment file; prefixed keys are handled separately """

    model_config = ConfigDict(extra="forbid", frozen=True)

    n: Optional[int] = Field(default=None, gt=0)
    snr_levels: list[float] = Field(min_length=1)
    replications: int = Field(default=200, ge=1)
    seed: int = Field(default=0, ge=0, lt=2**64)
    budget_fraction: float = Field(default=0.1, gt=0, le=1)
    poverty_quantile: float = Field(default=0.5, gt=0, lt=1)
    rules: list[str] = Field(min_length=1)
    income_family: Optional[str] = None
    income_file: Optional[Path] = None
    income_noise_sd: float = Field(default=0.0, ge=0)
    loss: LossKind = LossKind.SQUARED
    evaluate_against: EvaluationTarget = EvaluationTarget.REALIZED
    output_dir: Path = Path("out")
    plots: bool = False

    @field_validator("snr_levels", "rules", mode="before")
    @classmethod
    def _comma_separated(cls, value: Any) -> Any:
        return _split_list(value)

    @field_validator("snr_levels")
    @classmethod
    def _positive_levels(cls, value: list[float]) -> list[float]:
        if any(not level > 0 for level in value):
            raise ValueError("every SNR level must be positive")
        return value


@dataclass(frozen=True)
class ExperimentPlan:
    """ One ``SimConfig`` per SNR level plus where and how to write results """

    configs: tuple[SimConfig, ...]
    output_dir: Path
    plots: bool

    @property
    def snr_levels(self) -> tuple[float, ...]:
        return tuple(c.snr_target for c in self.configs)


def _read_bindings(text: str) -> tuple[dict[str, str], dict[str, int]]:
    values: dict[str, str] = {}
    lines: dict[str, int] = {}
    for binding in parse_stream(io.StringIO(text)):
        line = binding.original.line
        if binding.error:
            raise InvalidConfigError(f"cannot parse {binding.original.string.strip()!r}", line)
        if binding.key is None:
            continue
        key = binding.key.strip()
        if key in lines:
            raise InvalidConfigError(f"duplicate key {key!r} (first set on line {lines[key]})", line)
        if binding.value is None or not binding.value.strip():
            raise InvalidConfigError(f"key {key!r} has no value", line)
        values[key] = binding.value.strip()
        lines[key] = line
    return values, lines


def _line_of(lines: dict[str, int], *keys: str) -> Optional[int]:
    for key in keys:
        if key in lines:
            return lines[key]
    return None


def _validate(scalars: dict[str, str], lines: dict[str, int]) -> ExperimentFile:
    try:
        return ExperimentFile(**scalars)
    except ValidationError as exc:
        first = exc.errors()[0]
        field = str(first["loc"][0]) if first["loc"] else ""
        if first["type"] == "extra_forbidden":
            raise InvalidConfigError(f"unknown key {field!r}", lines.get(field))
        if first["type"] == "missing":
            raise InvalidConfigError(f"required key {field!r} is missing")
        raise InvalidConfigError(f"{field} = {scalars.get(field)!r}: {first['msg']}", lines.get(field))


def _prefixed(values: dict[str, str], prefix: str) -> dict[str, str]:
    return {k[len(prefix):]: v for k, v in values.items() if k.startswith(prefix)}


def _rule_specs(parsed: ExperimentFile, values: dict[str, str], lines: dict[str, int]) -> tuple[RuleSpec, ...]:
    options: dict[str, dict[str, str]] = {}
    for key, value in _prefixed(values, RULE_PREFIX).items():
        kind, _, option = key.partition(".")
        if not option:
            raise InvalidConfigError(f"rule option key {RULE_PREFIX + key!r} must read rule.<kind>.<option>",
                                     lines[RULE_PREFIX + key])
        if kind not in parsed.rules:
            raise InvalidConfigError(f"options given for rule {kind!r}, which is not listed in rules",
                                     lines[RULE_PREFIX + key])
        options.setdefault(kind, {})[option] = value

    specs = []
    for kind in parsed.rules:
        try:
            specs.append(RuleSpec(kind, options.get(kind, {})))
        except InvalidConfigError as exc:
            option_keys = [f"{RULE_PREFIX}{kind}.{o}" for o in options.get(kind, {})]
            raise InvalidConfigError(exc.message, _line_of(lines, *option_keys, "rules"))
    if len({s.name for s in specs}) != len(specs):
        raise InvalidConfigError("a rule is listed twice", lines["rules"])
    return tuple(specs)


def _income_source(
    parsed: ExperimentFile,
    values: dict[str, str],
    lines: dict[str, int],
    base_dir: Path,
) -> IncomeSpec | ExternalIncomeSource:
    params = _prefixed(values, INCOME_PREFIX)
    if parsed.income_file is not None:
        if parsed.income_family is not None:
            raise InvalidConfigError("set either income_family or income_file, not both", lines["income_file"])
        if parsed.n is not None:
            raise InvalidConfigError("n is taken from income_file; remove it", lines["n"])
        if params:
            raise InvalidConfigError("income.<param> keys need income_family", _line_of(lines, *(INCOME_PREFIX + k for k in params)))
        path = parsed.income_file if parsed.income_file.is_absolute() else base_dir / parsed.income_file
        return ExternalIncomeSource(path)

    if parsed.income_family is None:
        raise InvalidConfigError("one of income_family or income_file is required")
    if parsed.n is None:
        raise InvalidConfigError("n is required with income_family", lines["income_family"])
    try:
        return IncomeSpec(parsed.income_family, parsed.n, params)
    except InvalidConfigError as exc:
        raise InvalidConfigError(exc.message, _line_of(lines, *(INCOME_PREFIX + k for k in params), "income_family"))


def parse_experiment(
    text: str,
    *,
    base_dir: Path = Path("."),
    seed: Optional[int] = None,
    output_dir: Optional[Path] = None,
    plots: Optional[bool] = None,
    loss: Optional[LossKind | str] = None,
) -> ExperimentPlan:
    """
    Parse an experiment file's text into an ``ExperimentPlan``.

    :param base_dir: directory relative ``income_file`` paths resolve against
    :param seed: overrides ``seed``
    :param output_dir: overrides ``output_dir``
    :param plots: overrides ``plots``
    :param loss: overrides ``loss``
    """
    values, lines = _read_bindings(text)
    scalars = {k: v for k, v in values.items() if not k.startswith((RULE_PREFIX, INCOME_PREFIX))}
    parsed = _validate(scalars, lines)

    rules = _rule_specs(parsed, values, lines)
    source = _income_source(parsed, values, lines, base_dir)

    try:
        template = SimConfig(
            snr_target=parsed.snr_levels[0],
            replications=parsed.replications,
            seed=parsed.seed if seed is None else seed,
            rules=rules,
            income_source=source,
            budget_fraction=parsed.budget_fraction,
            poverty_quantile=parsed.poverty_quantile,
            income_noise_sd=parsed.income_noise_sd,
            loss=parsed.loss if loss is None else LossKind(loss),
            evaluate_against=parsed.evaluate_against,
        )
    except (TargetingException, ValueError) as exc:
        raise InvalidConfigError(str(exc))

    configs = tuple(replace(template, snr_target=level) for level in parsed.snr_levels)
    return ExperimentPlan(
        configs=configs,
        output_dir=parsed.output_dir if output_dir is None else Path(output_dir),
        plots=parsed.plots if plots is None else plots,
    )


def load_experiment(path: Path, **overrides: Any) -> ExperimentPlan:
    """ Read and parse an experiment file; see ``parse_experiment`` for the overrides """
    path = Path(path)
    if not path.exists():
        raise InvalidConfigError(f"config file not found: {path}")
    return parse_experiment(path.read_text(encoding="utf-8"), base_dir=path.parent, **overrides)
