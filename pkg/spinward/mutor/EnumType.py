#   EnumType.py
"""
Integer-valued enumerations for flag arrays.

Values are plain ints so they can be stored directly in numpy
int8 arrays (token kinds, target kinds) and compared without conversion.
"""


class EnumType(object):
    """
    Enumerated-values class with bidirectional name/value mapping.

    E.g.,
        |   TokenKind = EnumType('Regular', 'Register')
        |   TokenKind.Register          -> 1
        |   TokenKind[1]                -> 'Register'
        |   TokenKind.parse('register') -> 1
        |
        |   for value, name in TokenKind:
        |       print(value, name)
    """

    def __init__(self, *names, **kwargs):
        if len(set(names)) != len(names):
            raise ValueError("Duplicate enumeration names in %r" % (names,))
        self._names = list(names)
        self._base = kwargs.get('base', 0)
        for idx, name in enumerate(self._names):
            object.__setattr__(self, name, idx + self._base)


    def __setattr__(self, key, value):
        if not key.startswith('_'):
            raise AttributeError('Attempted to change enumeration value %s' % key)
        object.__setattr__(self, key, value)


    def __contains__(self, key):
        if isinstance(key, int):
            return self._base <= key < self._base + len(self._names)
        return key in self._names


    def __iter__(self):
        return iter(self.items())


    def __getitem__(self, key):
        if isinstance(key, int):
            if key not in self:
                raise IndexError("Enumeration value %d out of range" % key)
            return self._names[key - self._base]
        return self._name_to_enum(key)


    def __len__(self):
        return len(self._names)


    def __repr__(self):
        return "EnumType(%s)" % ', '.join(self._names)


    def items(self):
        """
        @return ordered list of enumerated (value, name) tuples
        """
        return [(idx + self._base, name) for idx, name in enumerate(self._names)]


    def names(self):
        """
        @return ordered list of enumerated value names
        """
        return self._names[:]


    def values(self):
        """
        @return ordered list of enumerated values
        """
        return [idx + self._base for idx in range(len(self._names))]


    def parse(self, value):
        """
        Convert a config value (name in any case, or int) to the enumeration value.

        @param value:   Name or integer value.

        @return integer enumeration value
        """
        if isinstance(value, int):
            if value not in self:
                raise ValueError("Unknown enumeration value %r (expected one of %s)"
                                 % (value, ', '.join(self._names)))
            return value
        folded = str(value).strip().lower()
        for idx, name in enumerate(self._names):
            if name.lower() == folded:
                return idx + self._base
        raise ValueError("Unknown enumeration name %r (expected one of %s)"
                         % (value, ', '.join(self._names)))


    def _name_to_enum(self, name):
        """
        @return enumeration value corresponding to name
        """
        if name not in self._names:
            raise AttributeError("Unknown enum value name '%s'" % name)
        return getattr(self, name)
