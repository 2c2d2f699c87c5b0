"""
Helpers for nested config dicts and `section.key=value` overrides.
"""
import os

try:
    import tomllib as toml_reader
except ImportError:     # Python < 3.11
    import tomli as toml_reader

from .errors import ConfigurationError

SEED_ENV_VAR = 'MUTOR_SEED'

_NOTHING = object()


def dict_update_recursive(target_dict, source_dict):
    """
    Recursively update dict, so that sub-dicts are updated instead of replaced.
    Target dict is updated in place.

    @param target_dict: dict to update
    @param source_dict: dict from which to copy values
    """
    for key, val in source_dict.items():
        if isinstance(val, dict) and isinstance(target_dict.get(key), dict):
            dict_update_recursive(target_dict[key], val)
        else:
            target_dict[key] = val
    return target_dict


def dict_get_nested(target_dict, keys, default=None):
    """
    Return value from nested path within dict.

    @param target_dict: Dict from which to retrieve value
    @param keys:        Nested path keys, or a dotted string
    @param default:     Default value to return if item is not found

    @return value at nested path
    """
    keys = split_keys(keys)
    cur = target_dict
    for key in keys:
        if not isinstance(cur, dict):
            return default
        cur = cur.get(key, _NOTHING)
        if cur is _NOTHING:
            return default
    return cur


def dict_set_nested(target_dict, keys, value, extend=True):
    """
    Set value at nested path within dict. Optionally build out parent path.

    @param target_dict: Dict to update
    @param keys:        Nested path keys, or a dotted string
    @param value:       Value to set in target dict
    @param extend:      If True, create missing intermediate levels as needed.
                        If False, raise KeyError if an intermediate level is missing.
    """
    keys = split_keys(keys)
    cur = target_dict
    consumed = []
    for key in keys[:-1]:
        consumed.append(key)
        child = cur.get(key, _NOTHING)
        if child is _NOTHING:
            if not extend:
                raise KeyError("Item at %s not found" % ('.'.join(consumed),))
            cur[key] = child = {}
        elif not isinstance(child, dict):
            raise KeyError("Item at %s not a dict" % ('.'.join(consumed),))
        cur = child
    cur[keys[-1]] = value


def split_keys(keys, delim='.'):
    """
    @return list of path keys from a dotted string or a key sequence
    """
    if isinstance(keys, str):
        keys = keys.split(delim)
    keys = list(keys)
    if not keys or not all(keys):
        raise KeyError("No key specified")
    return keys


def parse_override(text):
    """
    Parse one `section.key=value` override. The value is read as a TOML
    scalar or array; anything that does not parse is kept as a string.

    @return (keys, value)
    """
    if '=' not in text:
        raise ConfigurationError("Override %r is not of the form section.key=value" % text)
    path, raw = text.split('=', 1)
    path = path.strip()
    try:
        value = toml_reader.loads('v = %s' % raw.strip())['v']
    except toml_reader.TOMLDecodeError:
        value = raw.strip()
    return split_keys(path), value


def apply_overrides(target_dict, overrides):
    """
    Apply `section.key=value` overrides in order.
    """
    for text in overrides or ():
        keys, value = parse_override(text)
        dict_set_nested(target_dict, keys, value, extend=True)
    return target_dict


def load_toml(path):
    """
    @return dict parsed from a TOML file
    """
    try:
        with open(path, 'rb') as fin:
            return toml_reader.load(fin)
    except OSError as exc:
        raise ConfigurationError("Cannot read config %s: %s" % (path, exc))
    except toml_reader.TOMLDecodeError as exc:
        raise ConfigurationError("Malformed config %s: %s" % (path, exc))


def seed_from_env(default):
    """
    @return MUTOR_SEED as an int if set, else default
    """
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None or raw.strip() == '':
        return default
    try:
        return int(raw)
    except ValueError:
        raise ConfigurationError("%s=%r is not an integer" % (SEED_ENV_VAR, raw))
