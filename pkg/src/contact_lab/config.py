"""Line-based ``key = value`` run configuration.

A document is a list of ``key = value`` lines; ``#`` starts a comment.
``[command]`` headers open sections: keys before the first header apply to
every command, keys in a section only when that command runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Optional

COMMANDS = ("build", "simulate", "estimate", "verify", "sweep", "oracle", "schedule")
FAMILIES = ("interval", "star", "sv_tree", "sv_plus", "sv_minus")
LEMMAS = (
    "rw_interval",
    "biased_walk",
    "star_extinction",
    "tree_extinction",
    "path_transmission",
    "star_survival",
    "relay",
    "edge_removal",
)

# keys that only steer execution and are left out of output headers
EXECUTION_KEYS = ("out", "threads")


class ConfigError(ValueError):
    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        self.message = message
        where = f"line {line}, column {column}: " if line else ""
        super().__init__(where + message)


class UnknownKey(ConfigError):
    pass


class TypeMismatch(ConfigError):
    pass


class MissingRequired(ConfigError):
    pass


def _int(text: str) -> int:
    return int(text, 10)


def _float(text: str) -> float:
    x = float(text)
    if x != x:
        raise ValueError("nan is not allowed")
    return x


def _bool(text: str) -> bool:
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _list(conv: Callable[[str], Any]) -> Callable[[str], tuple]:
    def parse(text: str) -> tuple:
        items = [x.strip() for x in text.split(",") if x.strip()]
        if not items:
            raise ValueError("empty list")
        return tuple(conv(x) for x in items)

    return parse


def _choice(options: tuple[str, ...]) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text

    return parse


def _positive(x) -> bool:
    return x > 0


def _non_negative(x) -> bool:
    return x >= 0


def _all(pred):
    return lambda xs: all(pred(x) for x in xs)


# key -> (parser, check, description of the check)
SCHEMA: dict[str, tuple[Callable[[str], Any], Optional[Callable[[Any], bool]], str]] = {
    "command": (_choice(COMMANDS), None, ""),
    "lemma": (_choice(LEMMAS), None, ""),
    "graph": (_choice(FAMILIES), None, ""),
    "n": (_int, _positive, "must be >= 1"),
    "pad": (_int, _non_negative, "must be >= 0"),
    "i_max": (_int, lambda x: x >= 2 and x % 2 == 0, "must be an even integer >= 2"),
    "i": (_int, lambda x: x >= 2 and x % 2 == 0, "must be an even integer >= 2"),
    "length": (_int, _positive, "must be >= 1"),
    "hops": (_int, _positive, "must be >= 1"),
    "lambda": (_float, _non_negative, "must be >= 0"),
    "lambdas": (_list(_float), _all(_non_negative), "entries must be >= 0"),
    "sizes": (_list(_int), _all(lambda x: x >= 2), "entries must be >= 2"),
    "times": (_list(_float), _all(_non_negative), "entries must be >= 0"),
    "t": (_float, _non_negative, "must be >= 0"),
    "horizon": (_float, lambda x: 0 < x <= 1e12, "must lie in (0, 1e12]"),
    "n_runs": (_int, _positive, "must be >= 1"),
    "seed": (_int, lambda x: 0 <= x < 2**64, "must be an unsigned 64-bit integer"),
    "out": (str, lambda x: bool(x), "must be non-empty"),
    "ci": (_choice(("wilson", "clopper-pearson")), None, ""),
    "threads": (_int, _positive, "must be >= 1"),
    "budget": (_int, lambda x: x >= 2, "must be >= 2"),
    "init": (str, lambda x: bool(x), "must be non-empty"),
    "method": (_choice(("direct", "replay")), None, ""),
    "trace": (_bool, None, ""),
    "include_hub": (_bool, None, ""),
}

DEFAULTS: dict[str, Any] = {
    "seed": 0,
    "n_runs": 1000,
    "horizon": 100.0,
    "out": "contact_lab_out",
    "ci": "wilson",
    "threads": 1,
    "budget": 1_000_000,
    "method": "direct",
    "trace": False,
    "include_hub": True,
}

REQUIRED: dict[str, tuple[str, ...]] = {
    "build": ("graph",),
    "simulate": ("graph", "lambda"),
    "estimate": ("graph", "lambda"),
    "verify": ("lemma",),
    "sweep": ("graph", "lambdas", "times"),
    "oracle": ("graph", "lambda", "times"),
    "schedule": ("i", "lambda"),
}

LEMMA_DEFAULTS: dict[str, dict[str, Any]] = {
    "rw_interval": {"n": 5, "lambda": 0.25, "n_runs": 20000},
    "biased_walk": {"lambda": 0.25, "n_runs": 50000},
    "star_extinction": {"n": 4, "lambda": 0.2, "n_runs": 20000},
    "tree_extinction": {"n": 6, "lambda": 0.25, "times": (10.0, 20.0), "n_runs": 20000},
    "path_transmission": {"length": 4, "lambda": 0.25, "t": 2.0, "n_runs": 50000},
    "star_survival": {"lambdas": (0.5,), "sizes": (10, 20, 40), "n_runs": 500, "horizon": 1000.0},
    "relay": {"i_max": 4, "lambda": 1.0, "hops": 2, "n_runs": 500, "horizon": 200.0},
    "edge_removal": {"i_max": 4, "lambda": 0.25, "horizon": 500.0, "n_runs": 2000},
}


@dataclass
class RunConfig:
    """Validated settings for one CLI invocation."""

    command: str
    values: dict[str, Any] = field(default_factory=dict)
    explicit: frozenset = frozenset()

    def __getitem__(self, key: str) -> Any:
        return self.values[key]

    def get(self, key: str, default: Any = None) -> Any:
        return self.values.get(key, default)

    def echo(self) -> list[str]:
        """``key=value`` pairs, sorted, for embedding in output headers."""
        out = []
        for key in sorted(self.values):
            if key in EXECUTION_KEYS:
                continue
            val = self.values[key]
            if isinstance(val, tuple):
                text = ",".join(_fmt(x) for x in val)
            else:
                text = _fmt(val)
            out.append(f"{key}={text}")
        return out


def _fmt(x: Any) -> str:
    if isinstance(x, float):
        return f"{x:.17g}"
    return str(x).lower() if isinstance(x, bool) else str(x)


def convert(key: str, text: str, line: int = 0, column: int = 0) -> Any:
    if key not in SCHEMA:
        raise UnknownKey(f"unknown key {key!r}", line, column)
    parser, check, what = SCHEMA[key]
    try:
        value = parser(text)
    except ValueError as exc:
        raise TypeMismatch(f"{key}: {exc}", line, column) from None
    if check is not None and not check(value):
        raise TypeMismatch(f"{key} = {text}: {what}", line, column)
    return value


def parse_entries(text: str, command: Optional[str] = None) -> dict[str, tuple[Any, int]]:
    """Raw validated values from a document, with their line numbers."""
    entries: dict[str, tuple[Any, int]] = {}
    section: Optional[str] = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise TypeMismatch("unterminated section header", lineno, len(line) - len(line.lstrip()) + 1)
            section = stripped[1:-1].strip()
            if section not in COMMANDS:
                raise UnknownKey(f"unknown section [{section}]", lineno, line.index("[") + 2)
            continue
        if "=" not in line:
            raise TypeMismatch("expected 'key = value'", lineno, 1)
        key_part, _, value_part = line.partition("=")
        key = key_part.strip()
        key_col = len(key_part) - len(key_part.lstrip()) + 1
        value = value_part.strip()
        value_col = len(key_part) + 2 + (len(value_part) - len(value_part.lstrip()))
        if key not in SCHEMA:
            raise UnknownKey(f"unknown key {key!r}", lineno, key_col)
        if section is not None and command is not None and section != command:
            continue
        entries[key] = (convert(key, value, lineno, value_col), lineno)
    return entries


def parse_config(
    text: str,
    command: Optional[str] = None,
    overrides: Optional[dict[str, str]] = None,
) -> RunConfig:
    """Validate a document (plus command-line overrides) into a RunConfig.

    ``command`` selects the section; if omitted, the document's ``command``
    key decides. Missing optional keys take the documented defaults.
    """
    entries = parse_entries(text, command)
    values = {k: v for k, (v, _) in entries.items()}
    for key, raw in (overrides or {}).items():
        values[key] = convert(key, raw)
    if command is None:
        command = values.get("command")
        if command is None:
            raise MissingRequired("no command given")
        # re-read so that the command's own section applies
        entries = parse_entries(text, command)
        values = {k: v for k, (v, _) in entries.items()}
        for key, raw in (overrides or {}).items():
            values[key] = convert(key, raw)
    elif command not in COMMANDS:
        raise TypeMismatch(f"unknown command {command!r}")
    values["command"] = command
    explicit = frozenset(values)
    if command == "verify" and "lemma" in values:
        for key, val in LEMMA_DEFAULTS[values["lemma"]].items():
            values.setdefault(key, val)
    for key, val in DEFAULTS.items():
        values.setdefault(key, val)
    for key in REQUIRED[command]:
        if key not in values:
            raise MissingRequired(f"command {command!r} needs key {key!r}")
    graph = values.get("graph")
    if graph in ("sv_tree", "sv_plus", "sv_minus") and "i_max" not in values:
        raise MissingRequired(f"graph {graph!r} needs key 'i_max'")
    if graph in ("interval", "star") and "n" not in values:
        raise MissingRequired(f"graph {graph!r} needs key 'n'")
    return RunConfig(command, values, explicit)
