import importlib
import pkgutil
from types import ModuleType
from typing import Iterable, List


def discover_modules(package: str, search_path: Iterable[str], entry: str) -> List[ModuleType]:
    """
    Imports every module of `package` and keeps those exposing a callable `entry`.
    Modules are ordered by their optional PRIORITY attribute (default 50, lower first),
    then by module name.
    """
    found = []

    for _, module_name, _ in pkgutil.iter_modules(list(search_path)):
        module = importlib.import_module(f".{module_name}", package=package)

        if callable(getattr(module, entry, None)):
            found.append((getattr(module, "PRIORITY", 50), module_name, module))

    found.sort(key=lambda item: (item[0], item[1]))

    return [module for _, _, module in found]
