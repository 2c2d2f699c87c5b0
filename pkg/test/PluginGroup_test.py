import unittest

from spinward.mutor.OffsetSampler import OffsetSampler
from spinward.mutor.PluginGroup import PluginGroup
from spinward.mutor.errors import ConfigurationError
from spinward.mutor.methods import TrainingMethod
from spinward.mutor.tasks import Task


class PluginGroup1(metaclass=PluginGroup):
    """Single-level plugin group -- no intermediate virtual class(es)"""


class P1_1(PluginGroup1):
    _PLUGIN_NAME = 'P1_1'


class P1_2(PluginGroup1):
    _PLUGIN_NAME = 'P1_2'


class P1_3(PluginGroup1):
    _PLUGIN_NAME = 'P1_3'


class PluginGroup2(metaclass=PluginGroup):
    """Virtual-base PluginGroup"""
    _VIRTUAL_BASE = True


class P2_1v(PluginGroup2):
    _PLUGIN_NAME = 'P2_1v'


class P2_1(P2_1v):
    _PLUGIN_NAME = 'P2_1'
    _VIRTUAL_BASE = False


class P2_2(PluginGroup2):
    _PLUGIN_NAME = 'P2_2'
    _VIRTUAL_BASE = False


class P2_3(PluginGroup2):
    _PLUGIN_NAME = 'P2_3'
    _VIRTUAL_BASE = False


class PluginGroupTest(unittest.TestCase):

    def test_get_plugin_names(self):
        self.assertEqual(PluginGroup1.get_plugin_names(), 'P1_1 P1_2 P1_3'.split())


    def test_get_plugin_names_vb(self):
        self.assertEqual(PluginGroup2.get_plugin_names(), 'P2_1 P2_2 P2_3'.split())


    def test_get_plugin_by_name(self):
        actual = PluginGroup1.get_plugin_by_name("P1_2")
        self.assertEqual(actual.__class__, P1_2)


    def test_get_plugin_by_name_vb(self):
        actual = PluginGroup2.get_plugin_by_name("P2_2")
        self.assertEqual(actual.__class__, P2_2)


    def test_get_plugin_class_by_name_folds_case(self):
        self.assertIs(PluginGroup1.get_plugin_class_by_name("p1_2"), P1_2)
        self.assertIsNone(PluginGroup1.get_plugin_class_by_name("P9"))


    def test_get_plugin_by_name_unknown(self):
        with self.assertRaises(ConfigurationError):
            PluginGroup1.get_plugin_by_name("P9")


    def test_missing_name_rejected(self):
        with self.assertRaises(TypeError):
            class Nameless(PluginGroup1):
                pass


    def test_duplicate_name_rejected(self):
        with self.assertRaises(TypeError):
            class Again(PluginGroup1):
                _PLUGIN_NAME = 'P1_1'


    def test_library_registries(self):
        self.assertEqual(OffsetSampler.get_plugin_names(), ['OneD', 'StarGraph', 'TwoD'])
        self.assertEqual(TrainingMethod.get_plugin_names(), ['NextToken', 'MuToR', 'MultiTokenBaseline'])
        self.assertEqual(Task.get_plugin_names(), ['star_graph', 'grid'])


if __name__ == '__main__':
    unittest.main()
