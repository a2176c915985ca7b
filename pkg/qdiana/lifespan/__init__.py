from typing import Callable, List

from qdiana.utils.discovery import discover_modules


def get_all_startup_tasks() -> List[Callable[[], None]]:
    """Startup hooks run before a command is dispatched, lowest PRIORITY first."""
    return [module.startup for module in discover_modules(__name__, __path__, "startup")]


def get_all_shutdown_tasks() -> List[Callable[[], None]]:
    # reverse of startup order
    return [module.shutdown for module in reversed(discover_modules(__name__, __path__, "shutdown"))]
