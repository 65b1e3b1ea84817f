"""INI reading with line numbers for diagnostics."""

from __future__ import annotations

import configparser
import re
from pathlib import Path


class ConfigError(ValueError):
    """Invalid configuration value; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        self.line = line
        self.source = source
        where = ""
        if source:
            where = f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


_SECTION = re.compile(r"^\s*\[([^\]]+)\]")
_KEY = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")


class IniFile:
    """Thin wrapper over :class:`configparser.ConfigParser` that remembers
    where each key was defined."""

    def __init__(self, text: str, source: str | None = None):
        self.source = source
        self.parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        self.parser.optionxform = str
        try:
            self.parser.read_string(text, source=source or "<string>")
        except configparser.Error as exc:
            line = getattr(exc, "lineno", None)
            raise ConfigError(f"syntax error: {exc.message if hasattr(exc, 'message') else exc}", line, source) from exc
        self.lines: dict[tuple[str, str], int] = {}
        self.section_lines: dict[str, int] = {}
        section = None
        for i, raw in enumerate(text.splitlines(), start=1):
            m = _SECTION.match(raw)
            if m:
                section = m.group(1).strip()
                self.section_lines[section] = i
                continue
            m = _KEY.match(raw)
            if m and section is not None:
                self.lines[(section, m.group(1).strip())] = i

    @classmethod
    def read(cls, path: str | Path) -> "IniFile":
        path = Path(path)
        try:
            text = path.read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read {path}: {exc.strerror}") from exc
        return cls(text, str(path))

    def error(self, section: str, key: str | None, message: str) -> ConfigError:
        line = self.lines.get((section, key)) if key else self.section_lines.get(section)
        label = f"[{section}] {key}" if key else f"[{section}]"
        return ConfigError(f"{label}: {message}", line, self.source)

    def has(self, section: str, key: str) -> bool:
        return self.parser.has_option(section, key)

    def get(self, section: str, key: str, default=None, required: bool = False) -> str | None:
        if not self.has(section, key):
            if required:
                raise self.error(section, None, f"missing required key '{key}'")
            return default
        return self.parser.get(section, key).strip()

    def get_float(self, section: str, key: str, default=None, required: bool = False) -> float | None:
        raw = self.get(section, key, None, required)
        if raw is None:
            return default
        try:
            return float(raw)
        except ValueError:
            raise self.error(section, key, f"expected a number, got {raw!r}") from None

    def get_int(self, section: str, key: str, default=None, required: bool = False) -> int | None:
        raw = self.get(section, key, None, required)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise self.error(section, key, f"expected an integer, got {raw!r}") from None

    def get_bool(self, section: str, key: str, default=None) -> bool | None:
        raw = self.get(section, key)
        if raw is None:
            return default
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise self.error(section, key, f"expected on/off, got {raw!r}")

    def get_floats(self, section: str, key: str, default=None, required: bool = False) -> list[float] | None:
        raw = self.get(section, key, None, required)
        if raw is None:
            return default
        parts = [p for p in re.split(r"[,\s]+", raw) if p]
        try:
            return [float(p) for p in parts]
        except ValueError:
            raise self.error(section, key, f"expected a list of numbers, got {raw!r}") from None
