from types import ModuleType
from typing import List

from qdiana.utils.discovery import discover_modules


def get_all_commands() -> List[ModuleType]:
    """
    Subcommand modules of this package, in name order.
    Each defines NAME, HELP, configure(parser) and handle(args) -> int.
    """
    return sorted(discover_modules(__name__, __path__, "handle"), key=lambda module: module.NAME)
