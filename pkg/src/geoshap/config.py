"""Flat key=value config files.

Grammar: one `key = value` pair per line, `#` starts a comment, blank lines
ignored. A key may repeat; repeated keys accumulate in order. Values are kept
as raw strings; callers split/convert as needed.
"""

from .errors import GeoShapError


class ConfigError(GeoShapError):
    pass


def parse_kv(text):
    """Parse config text into {key: [values...]} preserving repetition order."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out.setdefault(key, []).append(value)
    return out


def load_kv(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_kv(fh.read())


def single(cfg, key, default=None, required=False):
    """Fetch a key that must appear at most once."""
    values = cfg.get(key)
    if not values:
        if required:
            raise ConfigError(f"missing required config key: {key!r}")
        return default
    if len(values) > 1:
        raise ConfigError(f"config key {key!r} given {len(values)} times, expected once")
    return values[0]


def name_list(value):
    """Split a comma-separated list of identifiers."""
    return tuple(part.strip() for part in value.split(",") if part.strip())
