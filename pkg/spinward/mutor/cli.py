"""
Command-line front end.

    mutor gen-stargraph --n 5 --l 5 --count 50000 --seed 0 --out train.jsonl
    mutor gen-grid --h 8 --w 8 --count 20000 --out grids.jsonl
    mutor train --config configs/stargraph_g55_mutor.toml --data train.jsonl \
                --eval-data test.jsonl --run-dir runs/mutor [--set train.a=0.3]
                [--resume runs/mutor/last.ckpt] [--dump-augmented batches.jsonl]
    mutor eval --checkpoint runs/mutor/best.ckpt --data test.jsonl
    mutor compare runs/*/metrics.jsonl --out summary.csv

Library errors end the process with exit status 2.
"""
import argparse
import json
import logging
import sys

from .Trainer import train
from .config import ExperimentConfig
from .config_util import seed_from_env
from .errors import MutorError
from .evaluate import evaluate_checkpoint
from .compare import compare_runs
from .tasks import load_dataset, task_for

logger = logging.getLogger(__name__)


def _gen_stargraph(args):
    task = task_for('star_graph', {'n': args.n, 'l': args.l, 'num_nodes': args.num_nodes})
    task.write(args.out, args.count, seed_from_env(args.seed), workers=args.workers)
    if args.vocab_out:
        task.vocabulary.write(args.vocab_out)
    return 0


def _gen_grid(args):
    params = {
        'h': args.h,
        'w': args.w,
        'pattern_vocab': args.pattern_vocab,
        'num_classes': args.num_classes,
        'table_seed': args.table_seed,
    }
    task = task_for('grid', params)
    task.write(args.out, args.count, seed_from_env(args.seed), workers=args.workers)
    if args.vocab_out:
        task.vocabulary.write(args.vocab_out)
    return 0


def _train(args):
    experiment = ExperimentConfig.load(args.config, args.overrides)
    task, instances = load_dataset(args.data)
    eval_instances = None
    if args.eval_data:
        eval_task, eval_instances = load_dataset(args.eval_data)
        if eval_task.vocabulary != task.vocabulary:
            raise MutorError("Eval data %s does not share the training vocabulary" % args.eval_data)
    summary = train(experiment, task, instances, args.run_dir, eval_instances, progress=args.progress,
                    resume=args.resume, dump_path=args.dump_augmented)
    logger.info("Finished: %s", summary.final_checkpoint)
    if summary.best_solve_rate is not None:
        logger.info("Best solve rate %.4f (%s)", summary.best_solve_rate, summary.best_checkpoint)
    return 0


def _eval(args):
    task, instances = load_dataset(args.data)
    report = evaluate_checkpoint(args.checkpoint, task, instances, batch_size=args.batch_size)
    if args.out:
        report.write(args.out)
    print(json.dumps(report.as_record(), sort_keys=True))
    return 0


def _compare(args):
    table = compare_runs(args.metrics, args.out)
    if not args.out:
        for row in table:
            print(json.dumps(row, sort_keys=True))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog='mutor', description="Register-token multi-token prediction lab")
    parser.add_argument('--log-level', default='INFO', help="Logging level (default INFO)")
    sub = parser.add_subparsers(dest='command')
    sub.required = True

    gen = sub.add_parser('gen-stargraph', help="Generate star-graph path-finding instances")
    gen.add_argument('--n', type=int, default=5, help="Paths leaving the start node")
    gen.add_argument('--l', type=int, default=5, help="Edges per path")
    gen.add_argument('--num-nodes', type=int, default=None, help="Node-label vocabulary size (default 2*n*l)")
    gen.add_argument('--count', type=int, required=True)
    gen.add_argument('--seed', type=int, default=0)
    gen.add_argument('--workers', type=int, default=1)
    gen.add_argument('--out', required=True)
    gen.add_argument('--vocab-out', default=None, help="Also write the vocabulary file")
    gen.set_defaults(handler=_gen_stargraph)

    grid = sub.add_parser('gen-grid', help="Generate synthetic 2D token grids")
    grid.add_argument('--h', type=int, default=8)
    grid.add_argument('--w', type=int, default=8)
    grid.add_argument('--pattern-vocab', type=int, default=8)
    grid.add_argument('--num-classes', type=int, default=4)
    grid.add_argument('--table-seed', type=int, default=0)
    grid.add_argument('--count', type=int, required=True)
    grid.add_argument('--seed', type=int, default=0)
    grid.add_argument('--workers', type=int, default=1)
    grid.add_argument('--out', required=True)
    grid.add_argument('--vocab-out', default=None)
    grid.set_defaults(handler=_gen_grid)

    trainer = sub.add_parser('train', help="Train a model")
    trainer.add_argument('--config', default=None, help="TOML experiment file")
    trainer.add_argument('--data', required=True)
    trainer.add_argument('--eval-data', default=None)
    trainer.add_argument('--run-dir', required=True)
    trainer.add_argument('--set', dest='overrides', action='append', default=[], metavar='SECTION.KEY=VALUE',
                         help="Override a config value (repeatable)")
    trainer.add_argument('--progress', action='store_true', help="Show a progress bar")
    trainer.add_argument('--resume', default=None, metavar='CHECKPOINT',
                         help="Continue from a checkpoint (parameters, optimizer moments, step)")
    trainer.add_argument('--dump-augmented', default=None, metavar='PATH',
                         help="Write every augmented training sequence to a JSONL file")
    trainer.set_defaults(handler=_train)

    evaluator = sub.add_parser('eval', help="Greedy-decode held-out instances")
    evaluator.add_argument('--checkpoint', required=True)
    evaluator.add_argument('--data', required=True)
    evaluator.add_argument('--batch-size', type=int, default=32)
    evaluator.add_argument('--out', default=None, help="Write the report as JSON")
    evaluator.set_defaults(handler=_eval)

    comparer = sub.add_parser('compare', help="Summarise metrics files")
    comparer.add_argument('metrics', nargs='+')
    comparer.add_argument('--out', default=None, help="CSV destination")
    comparer.set_defaults(handler=_compare)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.INFO),
                        format='%(asctime)s %(levelname)s %(name)s: %(message)s')
    try:
        return args.handler(args)
    except MutorError as exc:
        logger.error("%s", exc)
        return 2


if __name__ == '__main__':
    sys.exit(main())
