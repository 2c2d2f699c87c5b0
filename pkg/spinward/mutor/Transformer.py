"""
Decoder-only transformer with rotary positions and register embeddings.

Blocks are pre-norm (RMS) with a GELU MLP. The embedding table holds the
task vocabulary followed by the register row(s); the unembedding is tied
to the vocabulary rows only, so a register can never be decoded.

Parameter names:
    embed.weight
    layers.<i>.attn_norm.weight, layers.<i>.attn.{wq,wk,wv,wo}
    layers.<i>.mlp_norm.weight, layers.<i>.mlp.{w_in,w_out}
    final_norm.weight
    heads.<j>.*                 extra-head blocks (multi-token baseline)

Weights are stored (in, out), so a projection is x @ W.
"""
import collections
import copy
import logging
import math

import numpy as np

from . import tensor_ops as ops
from .Tensor import Tensor
from .augment import RawSequence, build_mask, plain
from .checkpoint import load_checkpoint
from .config import ModelConfig
from .errors import CheckpointError, ConfigurationError, ContextError, InputError
from .rng import derive

logger = logging.getLogger(__name__)

# logits: Tensor[rows x vocab_size], rows in batch-major order
ForwardOutput = collections.namedtuple('ForwardOutput', 'logits head_logits')

ParamCount = collections.namedtuple('ParamCount', 'total register heads')


def parameter_shapes(config):
    """
    @return OrderedDict name -> shape, in canonical order
    """
    d = int(config.d_model)
    hidden = int(config.mlp_ratio) * d
    shapes = collections.OrderedDict()
    shapes['embed.weight'] = (int(config.vocab_size) + config.register_rows, d)

    def add_block(prefix):
        shapes[prefix + '.attn_norm.weight'] = (d,)
        for proj in ('wq', 'wk', 'wv', 'wo'):
            shapes['%s.attn.%s' % (prefix, proj)] = (d, d)
        shapes[prefix + '.mlp_norm.weight'] = (d,)
        shapes[prefix + '.mlp.w_in'] = (d, hidden)
        shapes[prefix + '.mlp.w_out'] = (hidden, d)

    for i in range(int(config.n_layers)):
        add_block('layers.%d' % i)
    shapes['final_norm.weight'] = (d,)
    for j in range(int(config.baseline_heads)):
        add_block('heads.%d' % j)
    return shapes


def count_params(config):
    """
    @return ParamCount(total, register, heads): register = rows reserved
            for registers times d_model; heads = the extra-head blocks
    """
    shapes = parameter_shapes(config)
    sizes = dict((name, int(np.prod(shape))) for name, shape in shapes.items())
    return ParamCount(
        total=sum(sizes.values()),
        register=config.register_rows * int(config.d_model),
        heads=sum(size for name, size in sizes.items() if name.startswith('heads.')),
    )


def init_params(config, seed=0):
    """
    Fresh parameters: N(0, init_std) matrices, residual output
    projections scaled by 1/sqrt(2 * n_layers), unit norm gains. With
    per-offset register embeddings every register row starts equal.

    @return OrderedDict name -> Tensor (requires_grad)
    """
    if int(config.vocab_size) < 1:
        raise ConfigurationError("model.vocab_size must be set before building a model")
    rng = derive(seed, 'init')
    std = float(config.init_std)
    residual_std = std / math.sqrt(2.0 * int(config.n_layers))
    params = collections.OrderedDict()
    for name, shape in parameter_shapes(config).items():
        if name.endswith('norm.weight'):
            data = np.ones(shape)
        elif name.endswith(('attn.wo', 'mlp.w_out')):
            data = rng.normal(0.0, residual_std, size=shape)
        else:
            data = rng.normal(0.0, std, size=shape)
        if name == 'embed.weight' and config.per_offset:
            base = int(config.vocab_size)
            data[base + 1:] = data[base]
        params[name] = Tensor(data, requires_grad=True, name=name)
    return params


def check_params(params, config):
    """
    @raise CheckpointError if names or shapes differ from the config's
    """
    expected = parameter_shapes(config)
    missing = sorted(set(expected) - set(params))
    extra = sorted(set(params) - set(expected))
    if missing or extra:
        raise CheckpointError("Parameters do not match model config (missing %s, unexpected %s)"
                              % (missing, extra))
    for name, shape in expected.items():
        if tuple(params[name].data.shape) != tuple(shape):
            raise CheckpointError("Parameter %s has shape %s, model config expects %s"
                                  % (name, tuple(params[name].data.shape), tuple(shape)))


class Transformer(object):
    """
    Model weights plus the computations over them. The same weights and
    unembedding serve regular and register positions.
    """

    def __init__(self, config, params=None, seed=0):
        self.config = ModelConfig.from_dict(config)
        self.params = params if params is not None else init_params(self.config, seed)
        check_params(self.params, self.config)


    @classmethod
    def from_checkpoint(cls, path):
        header, arrays = load_checkpoint(path)
        logger.info("Loaded model from %s (step %s)", path, header.get('step'))
        return cls.from_arrays(header, arrays)


    @classmethod
    def from_arrays(cls, header, arrays):
        if 'model_config' not in header:
            raise CheckpointError("Checkpoint header has no model_config")
        config = ModelConfig.from_dict(header['model_config'])
        params = collections.OrderedDict(
            (name, Tensor(array, requires_grad=True, name=name)) for name, array in arrays.items())
        return cls(config, params)


    @property
    def vocab_size(self):
        return int(self.config.vocab_size)


    @property
    def register_base(self):
        return self.config.register_base


    def register_rows_replaced(self, value=0.0):
        """
        @return a copy of the model whose register embedding rows are set to value
        """
        params = collections.OrderedDict(self.params)
        table = params['embed.weight'].data.copy()
        table[self.register_base:] = value
        params['embed.weight'] = Tensor(table, requires_grad=True, name='embed.weight')
        return Transformer(copy.deepcopy(self.config), params)


    def _block(self, prefix, x, position_ids, mask, shape):
        p = self.params
        batch, length = shape
        heads, d_head = int(self.config.n_heads), int(self.config.d_head)
        eps = float(self.config.norm_eps)
        theta = float(self.config.theta)

        h = ops.rms_norm(x, p[prefix + '.attn_norm.weight'], eps)
        q = ops.reshape(ops.matmul(h, p[prefix + '.attn.wq']), (batch, length, heads, d_head))
        k = ops.reshape(ops.matmul(h, p[prefix + '.attn.wk']), (batch, length, heads, d_head))
        v = ops.reshape(ops.matmul(h, p[prefix + '.attn.wv']), (batch, length, heads, d_head))
        q = ops.rope_apply(q, position_ids, theta)
        k = ops.rope_apply(k, position_ids, theta)
        attended = ops.reshape(ops.masked_attention(q, k, v, mask), (batch * length, heads * d_head))
        x = ops.add(x, ops.matmul(attended, p[prefix + '.attn.wo']))

        h = ops.rms_norm(x, p[prefix + '.mlp_norm.weight'], eps)
        h = ops.gelu(ops.matmul(h, p[prefix + '.mlp.w_in']))
        return ops.add(x, ops.matmul(h, p[prefix + '.mlp.w_out']))


    def forward(self, tokens, position_ids, mask):
        """
        @param tokens:          int [batch, n] (or [n]); ids below
                                vocab_size + register rows
        @param position_ids:    int, same shape as tokens
        @param mask:            bool [batch, n, n] (or [n, n]) from augment

        @return ForwardOutput(logits Tensor[batch*n x vocab_size],
                              list of per-extra-head logits of the same shape)
        """
        tokens = np.asarray(tokens, dtype=np.int64)
        position_ids = np.asarray(position_ids, dtype=np.int64)
        mask = np.asarray(mask, dtype=bool)
        if tokens.ndim == 1:
            tokens, position_ids, mask = tokens[None], position_ids[None], mask[None]
        if tokens.ndim != 2 or position_ids.shape != tokens.shape:
            raise InputError("forward: tokens %s and position ids %s must be [batch, n]"
                             % (tokens.shape, position_ids.shape))
        if tokens.shape[1] > int(self.config.max_seq_len):
            raise ContextError("forward: sequence length %d exceeds max_seq_len %d"
                               % (tokens.shape[1], self.config.max_seq_len))
        rows = self.params['embed.weight'].data.shape[0]
        if tokens.size and (tokens.min() < 0 or tokens.max() >= rows):
            raise InputError("forward: token id out of range [0, %d)" % rows)
        shape = tokens.shape

        x = ops.embedding(self.params['embed.weight'], tokens.reshape(-1))
        for i in range(int(self.config.n_layers)):
            x = self._block('layers.%d' % i, x, position_ids, mask, shape)

        unembed = ops.transpose(ops.take_rows(self.params['embed.weight'], self.vocab_size))
        final_norm = self.params['final_norm.weight']
        eps = float(self.config.norm_eps)
        logits = ops.matmul(ops.rms_norm(x, final_norm, eps), unembed)
        head_logits = []
        for j in range(int(self.config.baseline_heads)):
            h = self._block('heads.%d' % j, x, position_ids, mask, shape)
            head_logits.append(ops.matmul(ops.rms_norm(h, final_norm, eps), unembed))
        return ForwardOutput(logits, head_logits)


    def forward_batch(self, batch_):
        """
        @param batch_:  augment.Batch
        """
        return self.forward(batch_.tokens, batch_.position_ids, batch_.mask)


    def attention_mask(self, length, prefix_len=0, batch_size=1):
        """
        Mask of a register-free sequence under the training rule: causal,
        plus full attention within the prefix when the model was trained
        with bidirectional_prefix.

        @return bool [batch_size, length, length]
        """
        seq = plain(RawSequence(np.zeros(length, dtype=np.int64), int(prefix_len)))
        allow = build_mask(seq, bidirectional_prefix=bool(self.config.bidirectional_prefix)).allow
        return np.broadcast_to(allow, (batch_size, length, length))


    def decode_greedy(self, prompt, max_new, stop_id=None, prefix_len=None):
        """
        Greedy continuation of one prompt; see decode_greedy_batch.

        @return list of generated token ids (stop_id excluded)
        """
        return self.decode_greedy_batch([prompt], max_new, stop_id, prefix_len)[0]


    def decode_greedy_batch(self, prompts, max_new, stop_id=None, prefix_len=None):
        """
        Greedy decoding of equal-length prompts, one argmax per step. Only
        task-vocabulary logits exist, so a register is never emitted. A row
        stops at stop_id (not included) or after max_new tokens.

        @param prompts:     Sequence of non-empty int sequences of one length
        @param max_new:     Maximum tokens to generate
        @param stop_id:     Token id ending a continuation, or None
        @param prefix_len:  Length of the training prefix (default: the
                            whole prompt); selects the attention mask

        @return list of continuations (lists of int)
        """
        prompts = [np.asarray(p, dtype=np.int64).reshape(-1) for p in prompts]
        if not prompts:
            return []
        length = prompts[0].shape[0]
        for prompt in prompts:
            if prompt.shape[0] == 0:
                raise InputError("decode: empty prompt")
            if prompt.shape[0] != length:
                raise InputError("decode: batched prompts must share one length")
            if prompt.min() < 0 or prompt.max() >= self.vocab_size:
                raise InputError("decode: prompt ids must lie in the task vocabulary [0, %d)" % self.vocab_size)
        if length > int(self.config.max_seq_len):
            raise ContextError("decode: prompt length %d exceeds max_seq_len %d"
                               % (length, self.config.max_seq_len))
        prefix_len = length if prefix_len is None else int(prefix_len)
        if not 0 <= prefix_len <= length:
            raise InputError("decode: prefix_len %d outside [0, %d]" % (prefix_len, length))

        size = len(prompts)
        seqs = np.stack(prompts)
        outputs = [[] for _ in range(size)]
        done = np.zeros(size, dtype=bool)
        for _ in range(int(max_new)):
            n = seqs.shape[1]
            if n > int(self.config.max_seq_len):
                logger.debug("decode: context full at %d tokens", n)
                break
            positions = np.broadcast_to(np.arange(n, dtype=np.int64), (size, n))
            logits = self.forward(seqs, positions, self.attention_mask(n, prefix_len, size)).logits.data
            chosen = np.argmax(logits.reshape(size, n, -1)[:, -1, :], axis=-1)
            for row in range(size):
                if done[row]:
                    continue
                if stop_id is not None and chosen[row] == stop_id:
                    done[row] = True
                else:
                    outputs[row].append(int(chosen[row]))
            if done.all():
                break
            seqs = np.concatenate([seqs, chosen[:, None]], axis=1)
        return outputs
