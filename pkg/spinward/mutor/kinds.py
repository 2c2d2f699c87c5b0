"""
Shared enumerations and reserved token ids.
"""
from .EnumType import EnumType

# Target id for positions that carry no loss.
IGNORE = -100

TokenKind = EnumType('Regular', 'Register')

TargetKind = EnumType('NoLoss', 'NtpLoss', 'RegLoss')

RegisterEmbeddingMode = EnumType('Shared', 'PerOffset')

RunState = EnumType('Idle', 'Running', 'Finished', 'Aborted')

RunEvent = EnumType('start', 'checkpoint', 'diverge', 'finish')
