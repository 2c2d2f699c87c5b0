"""
Training losses over model logits and augmentation metadata.

Each term is a mean over its own contributing positions:

    l_ntp     regular positions flagged NtpLoss
    l_reg     register positions with a real (non-IGNORE) target
    l_total   (1 - a) * l_ntp + a * l_reg

The extra-head baseline replaces l_reg by the mean over heads of the
offset-shifted cross-entropy (head j predicts the token j + 2 ahead).
"""
import logging
from dataclasses import dataclass, field, fields
from typing import Any

import numpy as np

from .augment import shifted_targets
from .errors import ConfigurationError
from .kinds import IGNORE, TargetKind
from .tensor_ops import linear_combination, softmax_cross_entropy

logger = logging.getLogger(__name__)


@dataclass
class LossBreakdown:
    l_ntp: float
    l_reg: float
    l_total: float
    a: float
    ntp_count: int
    reg_count: int
    # differentiable total, for backward()
    loss: Any = field(default=None, repr=False, compare=False)

    def as_record(self):
        return dict((f.name, getattr(self, f.name)) for f in fields(self) if f.name != 'loss')


def check_coefficient(a):
    a = float(a)
    if not 0.0 <= a <= 1.0:
        raise ConfigurationError("Loss coefficient a must lie in [0, 1], got %r" % (a,))
    return a


def _flat(aug, attr):
    return np.asarray(getattr(aug, attr)).reshape(-1)


def _term(logits, aug, kind):
    targets = _flat(aug, 'targets')
    selected = (_flat(aug, 'target_kind') == kind) & (targets != IGNORE)
    loss = softmax_cross_entropy(logits, targets, selected)
    return loss, int(selected.sum())


def ntp_loss(logits, aug):
    """
    Mean next-token cross-entropy over NtpLoss positions. Prefix, pad
    and register positions are excluded; no positions gives 0.

    @param logits:  Tensor[rows x vocab] from Transformer.forward
    @param aug:     AugmentedSequence or Batch with matching rows

    @return 1-element Tensor
    """
    return _term(logits, aug, TargetKind.NtpLoss)[0]


def reg_loss(logits, aug):
    """
    Mean cross-entropy of register positions against their offset targets.
    Registers with an IGNORE target are excluded; none gives 0.
    """
    return _term(logits, aug, TargetKind.RegLoss)[0]


def combined_loss(logits, aug, a):
    """
    @param a:   Register loss weight in [0, 1]

    @return LossBreakdown; .loss is the differentiable total
    """
    a = check_coefficient(a)
    ntp, ntp_count = _term(logits, aug, TargetKind.NtpLoss)
    reg, reg_count = _term(logits, aug, TargetKind.RegLoss)
    total = linear_combination([(1.0 - a, ntp), (a, reg)])
    return LossBreakdown(
        l_ntp=ntp.item(),
        l_reg=reg.item(),
        l_total=total.item(),
        a=a,
        ntp_count=ntp_count,
        reg_count=reg_count,
        loss=total,
    )


def baseline_mtp_loss(trunk_logits, head_logits, batch_, a):
    """
    Multi-token baseline: (1 - a) * ntp + a * mean_j(head_j loss), where
    head j is scored against targets shifted j + 2 ahead.

    @param trunk_logits:    Tensor[rows x vocab]
    @param head_logits:     List of k Tensors[rows x vocab]
    @param batch_:          Register-free augment.Batch
    @param a:               Head loss weight in [0, 1]

    @return LossBreakdown (l_reg holds the mean head loss)
    """
    a = check_coefficient(a)
    heads = len(head_logits)
    if heads == 0 and a > 0.0:
        raise ConfigurationError("Multi-token baseline with a > 0 needs at least one extra head")
    ntp, ntp_count = _term(trunk_logits, batch_, TargetKind.NtpLoss)
    terms = [(1.0 - a, ntp)]
    head_values = []
    reg_count = 0
    for j, logits in enumerate(head_logits):
        targets = shifted_targets(batch_, j + 2).reshape(-1)
        head = softmax_cross_entropy(logits, targets)
        terms.append((a / heads, head))
        head_values.append(head.item())
        reg_count += int((targets != IGNORE).sum())
    total = linear_combination(terms)
    return LossBreakdown(
        l_ntp=ntp.item(),
        l_reg=float(np.mean(head_values)) if head_values else 0.0,
        l_total=total.item(),
        a=a,
        ntp_count=ntp_count,
        reg_count=reg_count,
        loss=total,
    )
