"""LoRaWAN Gateway Planner error types.

Every error is a ``ValueError`` so the CLI maps all of them to exit code 1.
"""

from pydantic import ValidationError


class ScenarioError(ValueError):
    """Scenario file or geometry violates the scenario schema."""


class ConfigError(ValueError):
    """Run configuration is incomplete or contradictory."""


class DomainError(ValueError):
    """Input outside a formula's mathematical domain (e.g. distance <= 0)."""


class GainMapError(ValueError):
    """Coverage-map file does not match the gain-map CSV schema."""


class BoundsError(ValueError):
    """Position lies outside a coverage map."""


class SolverRefusalError(ValueError):
    """Solver refuses an instance it cannot handle."""


class InfeasiblePlanError(ValueError):
    """Operation needs a feasible placement but got an infeasible one."""


class ModelValidityWarning(UserWarning):
    """Channel model evaluated outside its published validity range."""


def format_validation_errors(e: ValidationError) -> str:
    """Convert pydantic errors to a compact ``field: message`` summary.

    Args:
        e: The pydantic validation error.

    Returns:
        Semicolon-separated messages, one per failing field.
    """
    messages = []
    for error in e.errors():
        field = ".".join(str(part) for part in error["loc"]) or "root"
        messages.append(f"{field}: {error['msg']}")
    return "; ".join(messages)
