"""Loading experiment files.

Validation errors name the dotted field path and, when the field appears in
the file, its line number.
"""

from __future__ import annotations

from collections.abc import Mapping
from pathlib import Path
from typing import Any

import yaml
from pydantic import ValidationError

from lpi_marl.exceptions import ConfigurationError
from lpi_marl.harness.schemas import ExperimentConfig
from lpi_marl.logging import get_logger

logger = get_logger(__name__)


def _line_index(node: yaml.Node, prefix: str = "", index: dict[str, int] | None = None) -> dict[str, int]:
    """Map dotted paths to 1-based line numbers of a composed YAML tree."""
    index = {} if index is None else index
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            path = f"{prefix}.{key_node.value}" if prefix else str(key_node.value)
            index[path] = key_node.start_mark.line + 1
            _line_index(value_node, path, index)
    elif isinstance(node, yaml.SequenceNode):
        for k, item in enumerate(node.value):
            path = f"{prefix}.{k}"
            index[path] = item.start_mark.line + 1
            _line_index(item, path, index)
    return index


def _locate(path: str, lines: Mapping[str, int]) -> int | None:
    """Line of ``path`` or of its closest enclosing field."""
    parts = path.split(".")
    while parts:
        line = lines.get(".".join(parts))
        if line is not None:
            return line
        parts.pop()
    return None


def parse_experiment(text: str, source: str = "<string>") -> ExperimentConfig:
    """Parse and validate an experiment document.

    Raises:
        ConfigurationError: On YAML syntax errors or schema violations
    """
    try:
        node = yaml.compose(text)
        data: Any = yaml.safe_load(text)
    except yaml.YAMLError as e:
        mark = getattr(e, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigurationError(f"{source}: invalid YAML: {e}", line=line) from e
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"{source}: expected a mapping at the top level", line=1)
    lines = _line_index(node) if node is not None else {}
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        first = e.errors()[0]
        path = ".".join(str(part) for part in first["loc"])
        raise ConfigurationError(
            f"{source}: {first['msg']}", field=path or None, line=_locate(path, lines)
        ) from e


def load_experiment(path: str | Path) -> ExperimentConfig:
    """Load an experiment file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigurationError(f"Cannot read config {path}: {e}") from e
    config = parse_experiment(text, str(path))
    logger.debug(f"Loaded experiment '{config.name}' from {path}")
    return config
