"""
Register augmentation.

Turns raw token sequences into training sequences with interleaved
register tokens: register placement, position ids, loss targets, the
attention mask, padding into batches, and the inverse (stripping
registers for inference).

Indexing is 0-based. A register inserted after original token i with
offset d targets token i + d and gets position id i + d - 1, the
position of the regular token that predicts the same target.
"""
import json
import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .OffsetSampler import Offset
from .errors import InputError
from .kinds import IGNORE, TargetKind, TokenKind

logger = logging.getLogger(__name__)

WARN_EMPTY_ANSWER = 'empty answer region'


@dataclass
class RawSequence:
    tokens: np.ndarray
    prefix_len: int = 0
    grid_width: Optional[int] = None

    def __post_init__(self):
        self.tokens = np.asarray(self.tokens, dtype=np.int64).reshape(-1)
        length = self.tokens.shape[0]
        if not 0 <= self.prefix_len <= length:
            raise InputError("prefix_len %d outside [0, %d]" % (self.prefix_len, length))
        if self.grid_width is not None and (length - self.prefix_len) % self.grid_width:
            raise InputError("answer length %d is not a multiple of grid width %d"
                             % (length - self.prefix_len, self.grid_width))

    def __len__(self):
        return self.tokens.shape[0]


@dataclass
class AugmentedSequence:
    tokens: np.ndarray
    kind: np.ndarray
    position_ids: np.ndarray
    targets: np.ndarray
    target_kind: np.ndarray
    # original index of a regular token, insertion index of a register
    anchor: np.ndarray
    offset_d: Optional[int]
    prefix_len: int = 0
    grid_width: Optional[int] = None
    offset: Optional[Offset] = None
    warning: Optional[str] = None

    def __len__(self):
        return self.tokens.shape[0]

    @property
    def register_count(self):
        return int((self.kind == TokenKind.Register).sum())

    @property
    def original_length(self):
        return int((self.kind == TokenKind.Regular).sum())

    def as_record(self):
        """
        @return JSON-ready dict for the debug dump
        """
        return {
            'tokens': self.tokens.tolist(),
            'kind': [TokenKind[int(k)] for k in self.kind],
            'position_ids': self.position_ids.tolist(),
            'targets': self.targets.tolist(),
            'target_kind': [TargetKind[int(k)] for k in self.target_kind],
            'offset_d': self.offset_d,
        }


@dataclass
class AttentionMask:
    allow: np.ndarray

    def allowed(self, row):
        return [int(col) for col in np.flatnonzero(self.allow[row])]


@dataclass
class Batch:
    tokens: np.ndarray
    kind: np.ndarray
    position_ids: np.ndarray
    targets: np.ndarray
    target_kind: np.ndarray
    mask: np.ndarray
    valid: np.ndarray
    prefix_lens: np.ndarray
    original_lengths: np.ndarray
    offsets_d: list = field(default_factory=list)

    @property
    def size(self):
        return self.tokens.shape[0]

    @property
    def length(self):
        return self.tokens.shape[1]

    @property
    def token_count(self):
        """Real (non-pad) cells, registers included."""
        return int(self.valid.sum())

    @property
    def register_count(self):
        return int(((self.kind == TokenKind.Register) & self.valid).sum())


def ntp_targets(tokens, prefix_len):
    """
    Next-token targets of a register-free sequence: position i predicts
    token i+1 when that token lies in the answer region.

    @return (targets, target_kind)
    """
    length = tokens.shape[0]
    targets = np.full(length, IGNORE, dtype=np.int64)
    target_kind = np.full(length, TargetKind.NoLoss, dtype=np.int8)
    if length > 1:
        idx = np.arange(length - 1)
        live = idx + 1 >= prefix_len
        targets[idx[live]] = tokens[idx[live] + 1]
        target_kind[idx[live]] = TargetKind.NtpLoss
    return targets, target_kind


def plain(seq):
    """
    @return AugmentedSequence with no registers (next-token training and inference)
    """
    length = len(seq)
    targets, target_kind = ntp_targets(seq.tokens, seq.prefix_len)
    index = np.arange(length, dtype=np.int64)
    return AugmentedSequence(
        tokens=seq.tokens.copy(),
        kind=np.full(length, TokenKind.Regular, dtype=np.int8),
        position_ids=index.copy(),
        targets=targets,
        target_kind=target_kind,
        anchor=index,
        offset_d=None,
        prefix_len=seq.prefix_len,
        grid_width=seq.grid_width,
    )


def eligible_slots(seq, spec, offset):
    """
    Insertion points: after each answer-region token except the last.
    With skip_wrapped_2d, TwoD slots whose target crosses the right grid
    edge are dropped.

    @return sorted int array of original indices
    """
    slots = np.arange(seq.prefix_len, len(seq) - 1, dtype=np.int64)
    if spec.get('skip_wrapped_2d') and offset.d_w is not None and seq.grid_width:
        column = (slots - seq.prefix_len) % seq.grid_width
        keep = column + offset.d_w - 1 < seq.grid_width
        if not keep.all():
            logger.debug("Skipping %d wrapped 2D registers", int((~keep).sum()))
        slots = slots[keep]
    return slots


def choose_slots(slots, density, rng):
    """
    Keep round(density * len(slots)) slots, chosen uniformly without replacement.
    """
    density = float(density)
    if density >= 1.0 or slots.size == 0:
        return slots
    count = int(round(density * slots.size))
    if count <= 0:
        return slots[:0]
    picked = rng.choice(slots.size, size=count, replace=False)
    return np.sort(slots[picked])


def interleave(seq, spec, offset, rng, register_base, per_offset=False):
    """
    Insert registers into a raw sequence.

    @param seq:             RawSequence
    @param spec:            OffsetSpec (density, 2D skip flag)
    @param offset:          Offset sampled for this sequence
    @param rng:             numpy Generator for slot selection
    @param register_base:   Token id of the (first) register embedding row
    @param per_offset:      Use register id register_base + offset.slot

    @return AugmentedSequence
    """
    length = len(seq)
    if length - seq.prefix_len == 0:
        logger.warning("Sequence has an empty answer region; no registers inserted")
        aug = plain(seq)
        aug.warning = WARN_EMPTY_ANSWER
        return aug
    d = int(offset.d)
    slots = choose_slots(eligible_slots(seq, spec, offset), spec.register_density, rng)
    reg_count = slots.size
    total = length + reg_count

    original = np.arange(length, dtype=np.int64)
    regular_at = original + np.searchsorted(slots, original, side='left')
    register_at = slots + np.arange(reg_count, dtype=np.int64) + 1

    tokens = np.empty(total, dtype=np.int64)
    kind = np.empty(total, dtype=np.int8)
    position_ids = np.empty(total, dtype=np.int64)
    targets = np.empty(total, dtype=np.int64)
    target_kind = np.empty(total, dtype=np.int8)
    anchor = np.empty(total, dtype=np.int64)

    ntp, ntp_kind = ntp_targets(seq.tokens, seq.prefix_len)
    tokens[regular_at] = seq.tokens
    kind[regular_at] = TokenKind.Regular
    position_ids[regular_at] = original
    targets[regular_at] = ntp
    target_kind[regular_at] = ntp_kind
    anchor[regular_at] = original

    register_id = register_base + (offset.slot if per_offset else 0)
    target_index = slots + d
    in_range = target_index < length
    tokens[register_at] = register_id
    kind[register_at] = TokenKind.Register
    position_ids[register_at] = slots + d - 1
    targets[register_at] = np.where(in_range, seq.tokens[np.minimum(target_index, length - 1)], IGNORE)
    target_kind[register_at] = TargetKind.RegLoss
    anchor[register_at] = slots

    return AugmentedSequence(
        tokens=tokens,
        kind=kind,
        position_ids=position_ids,
        targets=targets,
        target_kind=target_kind,
        anchor=anchor,
        offset_d=d,
        prefix_len=seq.prefix_len,
        grid_width=seq.grid_width,
        offset=offset,
    )


def build_mask(aug, prefix_len=None, bidirectional_prefix=False):
    """
    Attention mask of an augmented sequence:
      - regular tokens attend to earlier (and their own) regular tokens only
      - a register attends to the regular tokens up to its insertion
        point and to itself, never to another register
      - with bidirectional_prefix, regular prefix tokens also attend to
        every regular prefix token

    @return AttentionMask
    """
    if prefix_len is None:
        prefix_len = aug.prefix_len
    regular = aug.kind == TokenKind.Regular
    anchor = aug.anchor
    allow = regular[None, :] & (anchor[None, :] <= anchor[:, None])
    if bidirectional_prefix and prefix_len:
        in_prefix = regular & (anchor < prefix_len)
        allow |= in_prefix[:, None] & in_prefix[None, :]
    np.fill_diagonal(allow, True)
    return AttentionMask(allow)


def strip_registers(aug):
    """
    @return the RawSequence with every register removed
    """
    regular = aug.kind == TokenKind.Regular
    return RawSequence(aug.tokens[regular].copy(), aug.prefix_len, aug.grid_width)


def batch(seqs, pad_id, bidirectional_prefix=False):
    """
    Right-pad augmented sequences into one batch.

    Pad cells carry NoLoss, an IGNORE target, position id 0 and a mask
    row that allows only the cell itself; real rows never see pads.

    @return Batch
    """
    seqs = list(seqs)
    if not seqs:
        raise InputError("Cannot batch an empty list of sequences")
    size = len(seqs)
    length = max(len(s) for s in seqs)
    tokens = np.full((size, length), pad_id, dtype=np.int64)
    kind = np.full((size, length), TokenKind.Regular, dtype=np.int8)
    position_ids = np.zeros((size, length), dtype=np.int64)
    targets = np.full((size, length), IGNORE, dtype=np.int64)
    target_kind = np.full((size, length), TargetKind.NoLoss, dtype=np.int8)
    mask = np.zeros((size, length, length), dtype=bool)
    valid = np.zeros((size, length), dtype=bool)
    idx = np.arange(length)
    mask[:, idx, idx] = True
    for row, seq in enumerate(seqs):
        n = len(seq)
        tokens[row, :n] = seq.tokens
        kind[row, :n] = seq.kind
        position_ids[row, :n] = seq.position_ids
        targets[row, :n] = seq.targets
        target_kind[row, :n] = seq.target_kind
        mask[row, :n, :n] = build_mask(seq, bidirectional_prefix=bidirectional_prefix).allow
        valid[row, :n] = True
    return Batch(
        tokens=tokens,
        kind=kind,
        position_ids=position_ids,
        targets=targets,
        target_kind=target_kind,
        mask=mask,
        valid=valid,
        prefix_lens=np.asarray([s.prefix_len for s in seqs], dtype=np.int64),
        original_lengths=np.asarray([s.original_length for s in seqs], dtype=np.int64),
        offsets_d=[s.offset_d for s in seqs],
    )


def shifted_targets(batch_, shift):
    """
    Targets `shift` tokens ahead for a register-free batch: the cell at
    original index t gets token t + shift when that index exists and lies
    in the answer region, else IGNORE.

    @return int array [batch, length]
    """
    if batch_.register_count:
        raise InputError("shifted_targets needs a batch without registers")
    out = np.full(batch_.tokens.shape, IGNORE, dtype=np.int64)
    for row in range(batch_.size):
        n = int(batch_.original_lengths[row])
        if n <= shift:
            continue
        src = np.arange(n - shift)
        live = src + shift >= batch_.prefix_lens[row]
        out[row, src[live]] = batch_.tokens[row, src[live] + shift]
    return out


def dump_jsonl(seqs, fout):
    """
    Write augmented sequences as JSON lines for debugging.

    @param seqs:    AugmentedSequence iterable
    @param fout:    Text file object
    """
    count = 0
    for seq in seqs:
        fout.write(json.dumps(seq.as_record()) + '\n')
        count += 1
    return count
