import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Union

from pydantic import ValidationError

from ..rules.gtables import chain_from_sources
from ..utils.errors import GuardianError, ScenarioValidationError
from ..utils.schemas import Scenario

logger = logging.getLogger(__name__)


def _inline_rule_sources(sources: List[str], base_dir: Path) -> List[str]:
    """Replace rules-file references by their gtables lines, paths relative to the scenario file."""
    lines: List[str] = []
    for source in sources:
        if source.lstrip().startswith("gtables"):
            lines.append(source)
            continue
        path = Path(source)
        if not path.is_absolute():
            path = base_dir / path
        try:
            text = path.read_text()
        except OSError as e:
            raise ScenarioValidationError(f"cannot read rules file {path}: {e}")
        for raw in text.splitlines():
            line = raw.strip()
            if line and not line.startswith("#"):
                lines.append(line)
    return lines


def resolve_rule_files(data: Dict[str, Any], base_dir: Path) -> Dict[str, Any]:
    data = dict(data)
    nodes = []
    for node in data.get("nodes", []):
        if isinstance(node, dict) and node.get("rules"):
            node = {**node, "rules": _inline_rule_sources(node["rules"], base_dir)}
        nodes.append(node)
    if "nodes" in data:
        data["nodes"] = nodes

    updates = []
    for update in data.get("rule_updates", []):
        if isinstance(update, dict) and update.get("rules"):
            update = {**update, "rules": _inline_rule_sources(update["rules"], base_dir)}
        updates.append(update)
    if "rule_updates" in data:
        data["rule_updates"] = updates
    return data


def scenario_from_dict(data: Dict[str, Any], base_dir: Union[str, Path] = ".") -> Scenario:
    """Validate a scenario document; every rule is parsed here so nothing fails mid-run."""
    if not isinstance(data, dict):
        raise ScenarioValidationError("scenario document must be a JSON object")
    data = resolve_rule_files(data, Path(base_dir))
    try:
        scenario = Scenario.model_validate(data)
    except ValidationError as e:
        raise ScenarioValidationError(f"invalid scenario: {e}")

    for node in scenario.nodes:
        _check_rules(node.rules, f"node {node.id!r}")
    for update in scenario.rule_updates:
        _check_rules(update.rules, f"rule update at {update.time_s}s")
    return scenario


def _check_rules(sources: List[str], where: str) -> None:
    try:
        chain_from_sources(sources)
    except GuardianError as e:
        raise ScenarioValidationError(f"{where}: {e}")


def load_scenario(path: Union[str, Path]) -> Scenario:
    path = Path(path)
    logger.info(f"Loading scenario from {path}")
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except OSError as e:
        raise ScenarioValidationError(f"cannot read scenario {path}: {e}")
    except json.JSONDecodeError as e:
        raise ScenarioValidationError(f"{path}: not valid JSON: {e}")
    return scenario_from_dict(data, path.parent)
