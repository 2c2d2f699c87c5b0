"""
Training methods: how a raw sequence is prepared and which loss is taken.

    NextToken           no registers, next-token loss only (a forced to 0)
    MuToR               interleaved registers, combined loss
    MultiTokenBaseline  no registers, extra prediction heads
"""
import logging

from .OffsetSampler import register_slot_count, sample_offset
from .PluginGroup import PluginGroup
from .augment import interleave, plain
from .errors import ConfigurationError
from .objectives import baseline_mtp_loss, combined_loss

logger = logging.getLogger(__name__)


class TrainingMethod(object, metaclass=PluginGroup):
    """
    Mount point for training methods.

    @param model_config:    ModelConfig of the model being trained
    @param offset_spec:     OffsetSpec
    @param a:               Auxiliary loss weight
    """

    FORCES_A_ZERO = False
    USES_REGISTERS = False

    def __init__(self, model_config, offset_spec, a):
        self.model_config = model_config
        self.offset_spec = offset_spec
        self.a = float(a)
        self.check()


    def check(self):
        if int(self.model_config.baseline_heads) and not isinstance(self, MultiTokenBaseline):
            raise ConfigurationError("model.baseline_heads is only used by MultiTokenBaseline")


    def prepare(self, raw, rng):
        """
        @param raw:     RawSequence
        @param rng:     Generator for this sequence and epoch

        @return AugmentedSequence
        """
        return plain(raw)


    def loss(self, output, batch_):
        """
        @param output:  ForwardOutput
        @param batch_:  augment.Batch the output was computed from

        @return LossBreakdown
        """
        raise NotImplementedError()


class NextToken(TrainingMethod):
    _PLUGIN_NAME = 'NextToken'
    FORCES_A_ZERO = True

    def loss(self, output, batch_):
        return combined_loss(output.logits, batch_, 0.0)


class MuToR(TrainingMethod):
    _PLUGIN_NAME = 'MuToR'
    USES_REGISTERS = True

    def check(self):
        super(MuToR, self).check()
        config = self.model_config
        if config.per_offset and int(config.register_slots) < register_slot_count(self.offset_spec):
            raise ConfigurationError("PerOffset register embeddings need %d rows, model has %d"
                                     % (register_slot_count(self.offset_spec), config.register_slots))

    def prepare(self, raw, rng):
        offset = sample_offset(self.offset_spec, rng, raw.grid_width)
        return interleave(raw, self.offset_spec, offset, rng,
                          register_base=self.model_config.register_base,
                          per_offset=self.model_config.per_offset)

    def loss(self, output, batch_):
        return combined_loss(output.logits, batch_, self.a)


class MultiTokenBaseline(TrainingMethod):
    _PLUGIN_NAME = 'MultiTokenBaseline'

    def check(self):
        if int(self.model_config.baseline_heads) == 0 and self.a > 0.0:
            raise ConfigurationError("MultiTokenBaseline with a > 0 needs model.baseline_heads >= 1")

    def loss(self, output, batch_):
        return baseline_mtp_loss(output.logits, output.head_logits, batch_, self.a)