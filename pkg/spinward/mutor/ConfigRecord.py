"""
Dictionary with dict-style and attribute-style access, used for every
configuration record (offsets, model, training, experiment).
"""
import copy
import logging

from .config_util import dict_get_nested, dict_set_nested, dict_update_recursive
from .errors import ConfigurationError

logger = logging.getLogger(__name__)


class ConfigRecord(dict):
    """
    Dictionary with dict-style and attribute-style access.

    Subclasses declare DEFAULTS; construction starts from a deep copy of
    the defaults, applies the given values, and calls validate().
    Unknown keys are rejected so config typos fail early.
    """

    DEFAULTS = {}


    def __init__(self, *args, **kwargs):
        super(ConfigRecord, self).__init__(copy.deepcopy(self.DEFAULTS))
        values = dict(*args, **kwargs)
        if self.DEFAULTS:
            unknown = sorted(set(values) - set(self.DEFAULTS))
            if unknown:
                raise ConfigurationError("Unknown %s keys: %s" % (self.__class__.__name__, ', '.join(unknown)))
        dict_update_recursive(self, values)
        self.validate()


    def __setattr__(self, key, value):
        super(ConfigRecord, self).__setitem__(key, value)


    def __getattr__(self, key):
        try:
            return super(ConfigRecord, self).__getitem__(key)
        except KeyError:
            raise AttributeError(key)


    def __repr__(self):
        return "%s(%s)" % (self.__class__.__name__, super(ConfigRecord, self).__repr__())


    def __deepcopy__(self, memo):
        return self.__class__(copy.deepcopy(dict(self), memo))


    def validate(self):
        """
        Check invariants. Subclasses raise ConfigurationError.
        """


    @classmethod
    def from_dict(cls, source):
        """
        Return a new record created from a dict (or None for all defaults).

        @param source:      Source dict.
        """
        if isinstance(source, cls):
            return copy.deepcopy(source)
        return cls(dict(source or {}))


    def as_dict(self):
        """
        Return dict version (copy) of the record.

        @return dict with all nested records also converted to dicts.
        """
        return _plain(self)


    def get_nested(self, keys, default=None):
        """
        Return value from nested path within the record.

        @param keys:        Nested path keys or dotted string
        @param default:     Default value to return if item is not found
        """
        return dict_get_nested(self, keys, default)


    def set_nested(self, keys, value, extend=False):
        """
        Set value at nested path and re-validate.

        @param keys:        Nested path keys or dotted string
        @param value:       New value
        @param extend:      If True, create missing intermediate levels as needed.
        """
        dict_set_nested(self, keys, value, extend=extend)
        self.validate()


    def replace(self, **changes):
        """
        @return a validated copy with the given top-level keys changed
        """
        values = self.as_dict()
        values.update(changes)
        return self.__class__(values)


    def pretty_string(self, delimiter=':'):
        """
        Generate formatted text, one `<key> <delimiter> <value>` row per
        element, nested records indented under their key.

        @param delimiter:   Column delimiter

        @return string
        """
        return '\n'.join(_pretty_rows(self, delimiter, ""))


def _plain(value):
    if isinstance(value, dict):
        return dict((key, _plain(val)) for key, val in value.items())
    if isinstance(value, (list, tuple)):
        return [_plain(val) for val in value]
    return value


def _pretty_rows(record, delimiter, indent):
    keys = sorted(record.keys())
    if not keys:
        return []
    width = max(len(str(key)) for key in keys)
    rows = []
    for key in keys:
        value = record[key]
        if isinstance(value, dict):
            rows.append("%s%-*s %s" % (indent, width, key, delimiter))
            rows.extend(_pretty_rows(value, delimiter, indent + "  "))
        else:
            rows.append("%s%-*s %s %r" % (indent, width, key, delimiter, value))
    return rows
