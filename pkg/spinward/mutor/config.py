"""
Configuration records: model, training and whole experiments.

An experiment file is TOML with [model], [train] and [offsets]
sections; see configs/ for examples.
"""
import logging

from .ConfigRecord import ConfigRecord
from .OffsetSampler import OffsetSpec
from .config_util import apply_overrides, load_toml, seed_from_env
from .errors import ConfigurationError
from .kinds import RegisterEmbeddingMode

logger = logging.getLogger(__name__)


class ModelConfig(ConfigRecord):
    """
    Decoder-only transformer shape. vocab_size is the task vocabulary;
    register rows are appended after it in the embedding table.
    bidirectional_prefix selects the attention mask for both training
    and decoding.
    """

    DEFAULTS = {
        'n_layers': 2,
        'n_heads': 2,
        'd_model': 32,
        'd_head': 16,
        'vocab_size': 0,
        'theta': 10000.0,
        'register_embedding_mode': 'Shared',
        'register_slots': 1,
        'baseline_heads': 0,
        'max_seq_len': 512,
        'mlp_ratio': 4,
        'init_std': 0.02,
        'norm_eps': 1e-6,
        'bidirectional_prefix': False,
    }

    def validate(self):
        for key in ('n_layers', 'n_heads', 'd_model', 'd_head', 'max_seq_len', 'mlp_ratio'):
            if int(self[key]) < 1:
                raise ConfigurationError("model.%s must be positive, got %r" % (key, self[key]))
        if int(self.d_model) != int(self.n_heads) * int(self.d_head):
            raise ConfigurationError("d_model (%d) must equal n_heads * d_head (%d * %d)"
                                     % (self.d_model, self.n_heads, self.d_head))
        if int(self.d_head) % 2:
            raise ConfigurationError("d_head must be even for RoPE, got %d" % self.d_head)
        if int(self.vocab_size) < 0:
            raise ConfigurationError("vocab_size must be >= 0, got %r" % (self.vocab_size,))
        try:
            mode = RegisterEmbeddingMode.parse(self.register_embedding_mode)
        except ValueError as exc:
            raise ConfigurationError(str(exc))
        self['register_embedding_mode'] = RegisterEmbeddingMode[mode]
        if mode == RegisterEmbeddingMode.PerOffset and int(self.register_slots) < 1:
            raise ConfigurationError("PerOffset register embeddings need register_slots >= 1")
        if int(self.baseline_heads) < 0:
            raise ConfigurationError("baseline_heads must be >= 0, got %r" % (self.baseline_heads,))
        if not isinstance(self.bidirectional_prefix, bool):
            raise ConfigurationError("bidirectional_prefix must be true or false, got %r" % (self.bidirectional_prefix,))

    @property
    def per_offset(self):
        return self.register_embedding_mode == 'PerOffset'

    @property
    def register_rows(self):
        return int(self.register_slots) if self.per_offset else 1

    @property
    def register_base(self):
        """Token id of the first register row."""
        return int(self.vocab_size)


class TrainConfig(ConfigRecord):
    """
    Optimisation and method settings. lr decays linearly to 0 at
    total_steps after a linear warmup.
    """

    DEFAULTS = {
        'method': 'MuToR',
        'a': 0.5,
        'lr_peak': 1e-3,
        'warmup_steps': 100,
        'total_steps': 1000,
        'batch_size': 32,
        'seed': 0,
        'beta1': 0.9,
        'beta2': 0.95,
        'eps': 1e-8,
        'weight_decay': 0.0,
        'grad_clip': 1.0,
        'checkpoint_every': 0,
        'eval_every': 0,
        'eval_batch_size': 32,
        'log_every': 50,
        'evaluation_order': 'fixed',
    }

    def validate(self):
        from .methods import TrainingMethod

        method_class = TrainingMethod.get_plugin_class_by_name(self.method)
        if method_class is None:
            raise ConfigurationError("Unknown method %r (expected one of %s)"
                                     % (self.method, ', '.join(TrainingMethod.get_plugin_names())))
        self['method'] = method_class._PLUGIN_NAME
        if not 0.0 <= float(self.a) <= 1.0:
            raise ConfigurationError("a must lie in [0, 1], got %r" % (self.a,))
        if method_class.FORCES_A_ZERO and float(self.a) != 0.0:
            logger.info("method %s trains next-token only; forcing a = 0", self.method)
            self['a'] = 0.0
        if int(self.total_steps) < 1:
            raise ConfigurationError("total_steps must be positive, got %r" % (self.total_steps,))
        if not 0 <= int(self.warmup_steps) <= int(self.total_steps):
            raise ConfigurationError("warmup_steps must lie in [0, total_steps], got %r" % (self.warmup_steps,))
        if int(self.batch_size) < 1:
            raise ConfigurationError("batch_size must be positive, got %r" % (self.batch_size,))
        if self.evaluation_order not in ('fast', 'fixed'):
            raise ConfigurationError("evaluation_order must be 'fast' or 'fixed', got %r" % (self.evaluation_order,))


class ExperimentConfig(ConfigRecord):
    """
    The three sections of an experiment file, each validated by its own record.
    """

    DEFAULTS = {
        'model': {},
        'train': {},
        'offsets': {},
    }

    def validate(self):
        self['model'] = ModelConfig.from_dict(self.model)
        self['train'] = TrainConfig.from_dict(self.train)
        self['offsets'] = OffsetSpec.from_dict(self.offsets)

    @classmethod
    def load(cls, path=None, overrides=None):
        """
        Read a TOML experiment file, apply `section.key=value` overrides,
        then MUTOR_SEED.

        @param path:        TOML file, or None for defaults
        @param overrides:   List of override strings
        """
        values = load_toml(path) if path else {}
        apply_overrides(values, overrides)
        train = values.setdefault('train', {})
        train['seed'] = seed_from_env(train.get('seed', TrainConfig.DEFAULTS['seed']))
        config = cls(values)
        logger.debug("Experiment config:\n%s", config.pretty_string())
        return config
