"""Flat `key = value` run configuration.

    # layer-1 (and single node) hyperparameters
    epsilon = 0.3
    lambda = 0.01
    grid.rows = 4
    grid.cols = 4
    layer2.epsilon = 0.4
    layer2.block_rows = 2

Layer-2 hyperparameters start from the layer-1 values and are then overridden by `layer2.*` keys.
"""

from collections.abc import Iterable, Mapping
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from tessera.exceptions import ConfigError, TesseraStructureError
from tessera.routing import PipelineSpec
from tessera.structure import GridSpec, Hyperparams

HYPERPARAM_KEYS = frozenset({"epsilon", "lambda", "mu", "t_gap", "m_u", "min_models_for_matching"})
_GRID_KEYS = {"grid.rows": "rows", "grid.cols": "cols", "grid.width": "width", "grid.height": "height"}
_BLOCK_KEYS = {"layer2.block_rows": "block_rows", "layer2.block_cols": "block_cols"}


class GridConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    rows: int = Field(default=4, ge=1)
    cols: int = Field(default=4, ge=1)
    width: float = Field(default=640.0, gt=0)
    height: float = Field(default=480.0, gt=0)

    def to_spec(self) -> GridSpec:
        return GridSpec(self.width, self.height, self.rows, self.cols)


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    layer1: Hyperparams = Field(default_factory=Hyperparams)
    layer2: Hyperparams = Field(default_factory=Hyperparams)
    grid: GridConfig = Field(default_factory=GridConfig)
    block_rows: int | None = Field(default=None, ge=1)
    block_cols: int | None = Field(default=None, ge=1)

    @property
    def params(self) -> Hyperparams:
        """Hyperparameters of a standalone node"""
        return self.layer1

    def pipeline_spec(self) -> PipelineSpec:
        try:
            return PipelineSpec(
                grid=self.grid.to_spec(),
                layer1=self.layer1,
                layer2=self.layer2,
                block_rows=self.block_rows,
                block_cols=self.block_cols,
            )
        except TesseraStructureError as e:
            raise ConfigError(str(e)) from e


def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    values: dict[str, str] = {}
    for line_number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        key, separator, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not separator or not key or not value:
            raise ConfigError(f"{source}:{line_number}: expected 'key = value' but got {raw_line.strip()!r}.")
        values[key] = value
    return values


def _check_keys(keys: Iterable[str]) -> None:
    unknown = sorted(
        key
        for key in keys
        if key not in HYPERPARAM_KEYS
        and key not in _GRID_KEYS
        and key not in _BLOCK_KEYS
        and not (key.startswith("layer2.") and key.removeprefix("layer2.") in HYPERPARAM_KEYS)
    )
    if unknown:
        raise ConfigError(f"Unknown configuration keys: {unknown}.")


def build_config(values: Mapping[str, Any]) -> RunConfig:
    """Turn flat keys into a validated `RunConfig`; values may be strings or already typed"""
    _check_keys(values)
    layer1 = {key: value for key, value in values.items() if key in HYPERPARAM_KEYS}
    layer2_overrides = {
        key.removeprefix("layer2."): value
        for key, value in values.items()
        if key.startswith("layer2.") and key not in _BLOCK_KEYS
    }
    try:
        return RunConfig(
            layer1=Hyperparams.model_validate(layer1),
            layer2=Hyperparams.model_validate(layer1 | layer2_overrides),
            grid=GridConfig.model_validate({name: values[key] for key, name in _GRID_KEYS.items() if key in values}),
            **{name: values[key] for key, name in _BLOCK_KEYS.items() if key in values},
        )
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration:\n{e}") from e


def load_config(path: Path | None = None, overrides: Mapping[str, Any] | None = None) -> RunConfig:
    """Read `path` (if any) and apply `overrides` on top; `None` overrides are ignored"""
    values: dict[str, Any] = {}
    if path is not None:
        try:
            text = path.read_text()
        except OSError as e:
            raise ConfigError(f"Could not read the configuration file {path}: {e}") from e
        values |= parse_config_text(text, str(path))
    if overrides:
        values |= {key: value for key, value in overrides.items() if value is not None}
    return build_config(values)
