"""
Training loop.

A run directory receives:
    metrics.jsonl   config header line, one line per step, eval lines
    last.ckpt       latest checkpoint (+ last.ckpt.optim)
    best.ckpt       best held-out solve rate so far, when evaluating
    vocab.txt       task vocabulary

Metrics lines carry no wall-clock values, so a (config, seed) pair
reproduces the file byte for byte. Throughput goes to the log instead.
"""
import collections
import contextlib
import json
import logging
import math
import os
import time

from tqdm import tqdm

from .AdamW import AdamW
from .OffsetSampler import register_slot_count
from .StateMachine import StateMachine
from .Tensor import ComputationTape, evaluation_order
from .Transformer import Transformer, count_params
from .augment import batch, dump_jsonl
from .checkpoint import load_checkpoint, load_optimizer_state, save_checkpoint
from .config import ExperimentConfig, ModelConfig
from .errors import CheckpointError, InputError, NonFiniteGradientError, TrainingAborted
from .evaluate import evaluate
from .kinds import RunEvent, RunState
from .methods import TrainingMethod
from .rng import derive

logger = logging.getLogger(__name__)

METRICS_FILE = 'metrics.jsonl'
LAST_CHECKPOINT = 'last.ckpt'
BEST_CHECKPOINT = 'best.ckpt'
VOCAB_FILE = 'vocab.txt'

RunSummary = collections.namedtuple('RunSummary', 'steps final_checkpoint best_checkpoint metrics_path best_solve_rate')


def lr_at(step, cfg):
    """
    Linear warmup from 0 to lr_peak over warmup_steps, then linear decay
    to 0 at total_steps.

    @param step:    0 <= step <= total_steps
    @param cfg:     TrainConfig
    """
    total, warmup, peak = int(cfg.total_steps), int(cfg.warmup_steps), float(cfg.lr_peak)
    if not 0 <= step <= total:
        raise InputError("step %r outside [0, %d]" % (step, total))
    if step < warmup:
        return peak * step / warmup
    if total == warmup:
        return peak
    return peak * (total - step) / (total - warmup)


def resolve_model_config(experiment, vocab_size):
    """
    The experiment's model config with the task vocabulary size, and as
    many per-offset register rows as the offset sampler has slots.
    """
    model = experiment.model.replace(vocab_size=int(vocab_size))
    if model.per_offset:
        slots = register_slot_count(experiment.offsets)
        if slots != int(model.register_slots):
            logger.info("Using %d per-offset register rows for %s offsets", slots, experiment.offsets.mode)
            model = model.replace(register_slots=slots)
    return model


class Trainer(StateMachine):
    """
    One training run, with lifecycle Idle -> Running -> Finished | Aborted.

    @param experiment:      ExperimentConfig (or plain dict)
    @param task:            Task adapter of the dataset
    @param instances:       Training instances
    @param run_dir:         Output directory
    @param eval_instances:  Held-out instances for periodic evaluation
    @param progress:        Show a tqdm progress bar
    @param resume:          Checkpoint to continue from (parameters, AdamW
                            moments and completed-step count)
    @param dump_path:       JSONL file receiving every augmented training sequence
    """

    def __init__(self, experiment, task, instances, run_dir, eval_instances=None, progress=False,
                 resume=None, dump_path=None):
        super(Trainer, self).__init__()
        self.instances = list(instances)
        if not self.instances:
            raise InputError("Training dataset is empty")
        self.experiment = ExperimentConfig.from_dict(experiment)
        self.config = self.experiment.train
        self.task = task
        self.eval_instances = list(eval_instances or [])
        self.run_dir = str(run_dir)
        self.progress = progress
        self.resume = resume
        self.dump_path = dump_path

        self.model_config = resolve_model_config(self.experiment, len(task.vocabulary))
        self.method = TrainingMethod.get_plugin_by_name(
            self.config.method, self.model_config, self.experiment.offsets, self.config.a)

        self.state = RunState.Idle
        self.step = 0
        self.completed = 0
        self.tokens_seen = 0
        self.last_good = None
        self.best_checkpoint = None
        self.best_solve_rate = None
        self._orders = {}

        if resume:
            self.model = self._restore(resume)
        else:
            self.model = Transformer(self.model_config, seed=self.config.seed)
        self.optimizer = AdamW(self.model.params, beta1=self.config.beta1, beta2=self.config.beta2,
                               eps=self.config.eps, weight_decay=self.config.weight_decay,
                               grad_clip=self.config.grad_clip)
        if resume:
            self.optimizer.load_state(load_optimizer_state(resume))


    def _restore(self, path):
        header, arrays = load_checkpoint(path)
        if ModelConfig.from_dict(header.get('model_config', {})) != self.model_config:
            raise CheckpointError("%s: model config differs from the experiment's" % path)
        completed = int(header.get('step', 0))
        if completed > int(self.config.total_steps):
            raise CheckpointError("%s: step %d is past total_steps %d" % (path, completed, self.config.total_steps))
        self.step = self.completed = completed
        self.tokens_seen = int(header.get('tokens_seen', 0))
        self.best_solve_rate = header.get('best_solve_rate')
        if self.best_solve_rate is not None and os.path.exists(self.path(BEST_CHECKPOINT)):
            self.best_checkpoint = self.path(BEST_CHECKPOINT)
        logger.info("Resuming from %s after %d steps", path, completed)
        return Transformer.from_arrays(header, arrays)


    def path(self, name):
        return os.path.join(self.run_dir, name)


    def _get_current_state(self):
        return self.state


    def _get_state_string(self, state):
        return RunState[state]


    def _get_event_string(self, event):
        return RunEvent[event]


    def state_Idle_start(self):
        os.makedirs(self.run_dir, exist_ok=True)
        self.task.vocabulary.write(self.path(VOCAB_FILE))
        counts = count_params(self.model_config)
        logger.info("Training %s for %d steps: %d parameters (%d register, %d extra-head)",
                    self.config.method, self.config.total_steps, counts.total, counts.register, counts.heads)
        self.state = RunState.Running


    def state_Running_checkpoint(self):
        path = self.path(LAST_CHECKPOINT)
        self._save(path)
        self.last_good = path
        return path


    def state_Running_diverge(self, reason):
        self.state = RunState.Aborted
        logger.error("Aborting at step %d: %s (last good checkpoint: %s)", self.step, reason, self.last_good)
        return TrainingAborted(self.step, reason, self.last_good)


    def state_Running_finish(self):
        self.state = RunState.Finished


    def _save(self, path):
        extra = {
            'task': {'kind': self.task._PLUGIN_NAME, 'params': self.task.params},
            'method': self.config.method,
            'tokens_seen': self.tokens_seen,
            'best_solve_rate': self.best_solve_rate,
        }
        save_checkpoint(path, self.model.params, self.model_config, step=self.completed,
                        optimizer_state=self.optimizer.state, extra=extra)


    def _order(self, epoch):
        order = self._orders.get(epoch)
        if order is None:
            order = derive(self.config.seed, 'order', epoch).permutation(len(self.instances))
            self._orders = dict((e, o) for e, o in self._orders.items() if e >= epoch - 1)
            self._orders[epoch] = order
        return order


    def make_batch(self, step, dump=None):
        """
        Batch for a step. Sample k = step * batch_size + j is position
        k mod N of the epoch-(k div N) permutation; serialisation and
        augmentation draw from streams keyed by (instance, epoch).

        @param dump:    Text file receiving the augmented sequences, or None

        @return augment.Batch
        """
        size = int(self.config.batch_size)
        count = len(self.instances)
        seed = self.config.seed
        seqs = []
        for k in range(step * size, (step + 1) * size):
            epoch, slot = divmod(k, count)
            index = int(self._order(epoch)[slot])
            raw = self.task.serialize(self.instances[index], derive(seed, 'shuffle', index, epoch))
            seqs.append(self.method.prepare(raw, derive(seed, 'augment', index, epoch)))
        if dump is not None:
            dump_jsonl(seqs, dump)
        return batch(seqs, self.task.vocabulary.pad_id, bidirectional_prefix=self.model_config.bidirectional_prefix)


    def header_record(self):
        config = self.experiment.as_dict()
        config['model'] = self.model_config.as_dict()
        return {
            'event': 'config',
            'config': config,
            'task': {'kind': self.task._PLUGIN_NAME, 'params': self.task.params},
            'param_count': count_params(self.model_config)._asdict(),
        }


    def _write(self, fout, record):
        fout.write(json.dumps(record, sort_keys=True) + '\n')


    def earlier_metrics(self, start):
        """
        Records of an existing metrics file that a run resumed after start
        completed steps keeps: step lines before start and eval lines up
        to it. The config header is rewritten, not kept.

        @return list of records
        """
        path = self.path(METRICS_FILE)
        if not os.path.exists(path):
            logger.warning("No metrics file in %s; resumed metrics begin at step %d", self.run_dir, start)
            return []
        kept = []
        with open(path, encoding='utf-8') as fin:
            fin.readline()
            for line in fin:
                try:
                    record = json.loads(line)
                except ValueError:
                    # torn final line of an interrupted run
                    break
                limit = start + 1 if record.get('event') == 'eval' else start
                if record.get('step', limit) < limit:
                    kept.append(record)
        return kept


    def _evaluate(self, metrics, done):
        report = evaluate(self.model, self.task, self.eval_instances,
                          batch_size=int(self.config.eval_batch_size), seed=self.config.seed)
        self._write(metrics, {'event': 'eval', 'step': done, 'solve_rate': report.solve_rate})
        if self.best_solve_rate is None or report.solve_rate > self.best_solve_rate:
            self.best_solve_rate = report.solve_rate
            self.best_checkpoint = self.path(BEST_CHECKPOINT)
            self._save(self.best_checkpoint)
        return report


    def train_step(self, step, dump=None):
        """
        @return (LossBreakdown, lr, gradient norm or None, batch)
        """
        lr = lr_at(step, self.config)
        batch_ = self.make_batch(step, dump)
        self.optimizer.zero_grad()
        with ComputationTape() as tape:
            breakdown = self.method.loss(self.model.forward_batch(batch_), batch_)
        if not math.isfinite(breakdown.l_total):
            raise self.state_machine_event(RunEvent.diverge, "non-finite loss %r" % breakdown.l_total)
        tape.backward(breakdown.loss)
        try:
            grad_norm = self.optimizer.step(lr)
        except NonFiniteGradientError as exc:
            raise self.state_machine_event(RunEvent.diverge, str(exc))
        return breakdown, lr, grad_norm, batch_


    def run(self):
        """
        Train from the current step (0, or the resumed one) to total_steps.
        An eval at a checkpointed step runs before the checkpoint is
        written, so a resumed run repeats neither.

        @return RunSummary
        @raise TrainingAborted on a non-finite loss or gradient
        """
        start = self.completed
        kept = self.earlier_metrics(start) if self.resume else []
        self.state_machine_event(RunEvent.start)
        total = int(self.config.total_steps)
        log_every = int(self.config.log_every)
        evaluated_at = start if any(r.get('event') == 'eval' and r['step'] == start for r in kept) else None
        with contextlib.ExitStack() as stack:
            stack.enter_context(evaluation_order(self.config.evaluation_order))
            metrics = stack.enter_context(open(self.path(METRICS_FILE), 'w', encoding='utf-8'))
            dump = None
            if self.dump_path:
                dump = stack.enter_context(open(self.dump_path, 'a' if self.resume else 'w', encoding='utf-8'))
            self._write(metrics, self.header_record())
            for record in kept:
                self._write(metrics, record)
            window_start = time.perf_counter()
            window_tokens = 0
            steps = range(start, total)
            for step in tqdm(steps, initial=start, total=total, disable=not self.progress, desc='train', unit='step'):
                self.step = step
                breakdown, lr, grad_norm, batch_ = self.train_step(step, dump)
                self.tokens_seen += batch_.token_count
                window_tokens += batch_.token_count
                record = breakdown.as_record()
                record.update({'step': step, 'lr': lr, 'tokens_seen': self.tokens_seen, 'grad_norm': grad_norm})
                self._write(metrics, record)
                self.completed = done = step + 1

                if log_every and (done % log_every == 0 or done == total):
                    elapsed = time.perf_counter() - window_start
                    logger.info("step %d/%d l_total %.4f l_ntp %.4f l_reg %.4f lr %.3g tok/s %.0f",
                                done, total, breakdown.l_total, breakdown.l_ntp, breakdown.l_reg, lr,
                                window_tokens / elapsed if elapsed > 0 else 0.0)
                    window_start = time.perf_counter()
                    window_tokens = 0
                if self.config.eval_every and self.eval_instances and done % int(self.config.eval_every) == 0:
                    self._evaluate(metrics, done)
                    evaluated_at = done
                if self.config.checkpoint_every and done % int(self.config.checkpoint_every) == 0 and done < total:
                    self.state_machine_event(RunEvent.checkpoint)
            self.step = total
            if self.eval_instances and evaluated_at != total:
                self._evaluate(metrics, total)
            final = self.state_machine_event(RunEvent.checkpoint)
        self.state_machine_event(RunEvent.finish)
        return RunSummary(steps=total, final_checkpoint=final, best_checkpoint=self.best_checkpoint,
                          metrics_path=self.path(METRICS_FILE), best_solve_rate=self.best_solve_rate)


def train(experiment, task, instances, run_dir, eval_instances=None, progress=False, resume=None, dump_path=None):
    """
    Train a model on task instances.

    @return RunSummary
    """
    return Trainer(experiment, task, instances, run_dir, eval_instances, progress, resume, dump_path).run()
