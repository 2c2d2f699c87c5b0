"""
Offset configuration and the per-sequence offset samplers.

    OneD        d uniform on {min_offset, ..., d_max}
    StarGraph   d uniform on {2, ..., d_max}; the next token is never a
                register target
    TwoD        (d_h, d_w) uniform on {1..d_max_2d}^2 minus (1, 1);
                rasterised d = (d_h - 1) * w + d_w - 1 on a width-w grid
"""
import collections
import logging

from .ConfigRecord import ConfigRecord
from .PluginGroup import PluginGroup
from .errors import ConfigurationError

logger = logging.getLogger(__name__)

# slot: register-embedding row used when embeddings differ per offset
Offset = collections.namedtuple('Offset', 'd d_h d_w slot')


class OffsetSpec(ConfigRecord):

    DEFAULTS = {
        'mode': 'OneD',
        'd_max': 4,
        'd_max_2d': 3,
        'min_offset': 1,
        'register_density': 1.0,
        'skip_wrapped_2d': False,
    }

    def validate(self):
        sampler_class = OffsetSampler.get_plugin_class_by_name(self.mode)
        if sampler_class is None:
            raise ConfigurationError("Unknown offset mode %r (expected one of %s)"
                                     % (self.mode, ', '.join(OffsetSampler.get_plugin_names())))
        self['mode'] = sampler_class._PLUGIN_NAME
        if not 0.0 <= float(self.register_density) <= 1.0:
            raise ConfigurationError("register_density must lie in [0, 1], got %r" % (self.register_density,))
        sampler_class.check_spec(self)


def sampler_for(spec):
    """
    @return the OffsetSampler plugin instance for an OffsetSpec
    """
    return OffsetSampler.get_plugin_by_name(spec.mode, spec)


def sample_offset(spec, rng, grid_width=None):
    """
    Draw the single offset used for one sequence.

    @param spec:        OffsetSpec
    @param rng:         numpy Generator
    @param grid_width:  Grid width w (TwoD only)

    @return Offset(d, d_h, d_w, slot)
    """
    return sampler_for(spec).sample(rng, grid_width)


def register_slot_count(spec):
    """
    @return number of distinct register-embedding rows when each offset
            has its own embedding
    """
    return sampler_for(spec).slot_count()


class OffsetSampler(object, metaclass=PluginGroup):
    """
    Mount point for offset samplers. Each sampler enumerates its
    admissible offsets; sampling picks one uniformly.
    """

    def __init__(self, spec):
        self.spec = spec


    @classmethod
    def check_spec(cls, spec):
        pass


    def offsets(self, grid_width=None):
        raise NotImplementedError()


    def slot_count(self):
        raise NotImplementedError()


    def sample(self, rng, grid_width=None):
        support = self.offsets(grid_width)
        return support[int(rng.integers(len(support)))]


class OneDSampler(OffsetSampler):
    _PLUGIN_NAME = 'OneD'

    @classmethod
    def check_spec(cls, spec):
        if not 1 <= int(spec.min_offset) <= int(spec.d_max):
            raise ConfigurationError("OneD offsets need 1 <= min_offset <= d_max, got %r..%r"
                                     % (spec.min_offset, spec.d_max))

    def offsets(self, grid_width=None):
        low = int(self.spec.min_offset)
        return [Offset(d, None, None, d - low) for d in range(low, int(self.spec.d_max) + 1)]

    def slot_count(self):
        return int(self.spec.d_max) - int(self.spec.min_offset) + 1


class StarGraphSampler(OffsetSampler):
    _PLUGIN_NAME = 'StarGraph'

    @classmethod
    def check_spec(cls, spec):
        if int(spec.d_max) < 2:
            raise ConfigurationError("StarGraph offsets need d_max >= 2, got %r" % (spec.d_max,))

    def offsets(self, grid_width=None):
        return [Offset(d, None, None, d - 2) for d in range(2, int(self.spec.d_max) + 1)]

    def slot_count(self):
        return int(self.spec.d_max) - 1


class TwoDSampler(OffsetSampler):
    _PLUGIN_NAME = 'TwoD'

    @classmethod
    def check_spec(cls, spec):
        if int(spec.d_max_2d) < 2:
            raise ConfigurationError("TwoD offsets need d_max_2d >= 2, got %r" % (spec.d_max_2d,))

    def offsets(self, grid_width=None):
        if not grid_width:
            raise ConfigurationError("TwoD offsets need a grid width")
        width = int(grid_width)
        limit = int(self.spec.d_max_2d)
        support = []
        for d_h in range(1, limit + 1):
            for d_w in range(1, limit + 1):
                if (d_h, d_w) == (1, 1):
                    continue
                slot = (d_h - 1) * limit + (d_w - 1) - 1
                support.append(Offset((d_h - 1) * width + d_w - 1, d_h, d_w, slot))
        return support

    def slot_count(self):
        return int(self.spec.d_max_2d) ** 2 - 1
