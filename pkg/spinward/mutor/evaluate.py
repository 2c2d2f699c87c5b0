"""
Held-out evaluation by greedy decoding and exact match.

Prompts are the task's prefixes without registers; each continuation is
decoded for exactly as many tokens as the gold answer holds and compared
token by token.
"""
import collections
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import List

import numpy as np

from .Transformer import Transformer
from .checkpoint import load_checkpoint
from .errors import CheckpointError, InputError
from .rng import derive
from .tasks import task_for

logger = logging.getLogger(__name__)


@dataclass
class EvalReport:
    solve_rate: float
    count: int
    solved: int
    # fraction correct at each answer position
    position_accuracy: List[float] = field(default_factory=list)
    wall_clock_s: float = field(default=0.0, compare=False)
    tokens_per_s: float = field(default=0.0, compare=False)

    def as_record(self):
        return asdict(self)

    def write(self, path):
        with open(path, 'w', encoding='utf-8') as fout:
            json.dump(self.as_record(), fout, indent=2, sort_keys=True)
            fout.write('\n')


def evaluate(model, task, instances, batch_size=32, seed=0):
    """
    @param model:       Transformer (anything with decode_greedy_batch)
    @param task:        Task adapter of the instances
    @param instances:   Held-out instances
    @param batch_size:  Prompts decoded together
    @param seed:        Seed of the prompt serialisation streams

    @return EvalReport
    """
    if batch_size < 1:
        raise InputError("batch_size must be positive, got %r" % (batch_size,))
    started = time.perf_counter()
    groups = collections.OrderedDict()
    for index, inst in enumerate(instances):
        prompt, answer = task.prompt_and_answer(inst, derive(seed, 'shuffle', index, 0))
        groups.setdefault((len(prompt), len(answer)), []).append((prompt, answer))

    count = solved = generated = 0
    width = max([key[1] for key in groups] or [0])
    hits = np.zeros(width, dtype=np.int64)
    seen = np.zeros(width, dtype=np.int64)
    for (_, answer_len), pairs in groups.items():
        for lo in range(0, len(pairs), batch_size):
            chunk = pairs[lo:lo + batch_size]
            outputs = model.decode_greedy_batch([p for p, _ in chunk], answer_len)
            for (_, answer), output in zip(chunk, outputs):
                correct = [k < len(output) and output[k] == token for k, token in enumerate(answer)]
                hits[:answer_len] += correct
                seen[:answer_len] += 1
                solved += all(correct)
                count += 1
                generated += len(output)

    elapsed = time.perf_counter() - started
    report = EvalReport(
        solve_rate=solved / count if count else 0.0,
        count=count,
        solved=solved,
        position_accuracy=[float(h) / s if s else 0.0 for h, s in zip(hits, seen)],
        wall_clock_s=elapsed,
        tokens_per_s=generated / elapsed if elapsed > 0 else 0.0,
    )
    logger.info("Evaluated %d instances: solve rate %.4f", count, report.solve_rate)
    return report


def load_for_eval(checkpoint_path, task):
    """
    Load a checkpoint and check that it was trained on this task.

    @raise CheckpointError on a vocabulary or task mismatch
    """
    header, arrays = load_checkpoint(checkpoint_path)
    model = Transformer.from_arrays(header, arrays)
    trained = header.get('task')
    if trained is not None:
        trained_task = task_for(trained['kind'], trained['params'])
        if trained_task._PLUGIN_NAME != task._PLUGIN_NAME or trained_task.vocabulary != task.vocabulary:
            raise CheckpointError("%s was trained on %s data with a different vocabulary"
                                  % (checkpoint_path, trained['kind']))
    if model.vocab_size != len(task.vocabulary):
        raise CheckpointError("%s has vocab_size %d, task vocabulary has %d tokens"
                              % (checkpoint_path, model.vocab_size, len(task.vocabulary)))
    return model


def evaluate_checkpoint(checkpoint_path, task, instances, batch_size=32, seed=0):
    """
    @return EvalReport of a saved model on held-out instances
    """
    model = load_for_eval(checkpoint_path, task)
    return evaluate(model, task, instances, batch_size=batch_size, seed=seed)
