"""
Metaclass for named plugin registries.

Offset samplers, training methods and task adapters are each a plugin
group; configs refer to a plugin by its _PLUGIN_NAME.
"""
import logging

from .errors import ConfigurationError

logger = logging.getLogger(__name__)


class PluginGroup(type):
    """
    Metaclass for plugin groups.
    Based on Marty Alchin's Simple Plugin Framework (http://martyalchin.com/2008/jan/10/simple-plugin-framework/)

    The first class created with this metaclass is the mount point; every
    subclass that is not marked _VIRTUAL_BASE is registered as a plugin.
    """

    _VIRTUAL_BASE = False


    def __init__(cls, name, bases, attrs):
        super(PluginGroup, cls).__init__(name, bases, attrs)
        if not hasattr(cls, 'plugins'):
            # Mount point: set up the registry, do not register itself.
            cls.plugins = []
        elif not cls._VIRTUAL_BASE:
            plugin_name = getattr(cls, '_PLUGIN_NAME', None)
            if not plugin_name:
                raise TypeError("Plugin class %s has no _PLUGIN_NAME" % name)
            if cls.get_plugin_class_by_name(plugin_name) is not None:
                raise TypeError("Duplicate plugin name %r in %s" % (plugin_name, cls.__mro__[1].__name__))
            cls.plugins.append(cls)
            logger.debug("Registered plugin %s", plugin_name)


    def get_plugin_names(cls):
        """
        @return list of names (strings) of plugins in this PluginGroup
        """
        return [p._PLUGIN_NAME for p in cls.plugins]


    def get_plugin_class_by_name(cls, plugin_name):
        """
        Names are matched case-insensitively.

        @param plugin_name:  Name of plugin for which to return class.

        @return plugin class matching the specified name, or None if no match
        """
        folded = str(plugin_name).lower()
        for plugin in cls.plugins:
            if plugin._PLUGIN_NAME.lower() == folded:
                return plugin
        return None


    def get_plugin_by_name(cls, plugin_name, *args, **kwargs):
        """
        @param plugin_name:  Name of plugin for which to return an instance.

        @return instance of plugin class matching the specified name
        @raise ConfigurationError if no plugin has that name
        """
        plugin_class = cls.get_plugin_class_by_name(plugin_name)
        if plugin_class is None:
            raise ConfigurationError("Unknown %s %r (expected one of %s)"
                                     % (cls.__name__, plugin_name, ', '.join(cls.get_plugin_names())))
        return plugin_class(*args, **kwargs)
