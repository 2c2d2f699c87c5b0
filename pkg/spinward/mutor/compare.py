"""
Summaries across training runs.

Runs are grouped by method. Within a group, loss columns are aligned on
a common step grid (the coarsest grid among the runs, with linear
interpolation when grids differ) and reduced to mean and population
standard deviation across runs. Eval solve rates are aligned the same
way on their own grid.
"""
import collections
import csv
import json
import logging

import numpy as np

from .errors import InputError

logger = logging.getLogger(__name__)

LOSS_COLUMNS = ('l_total', 'l_ntp', 'l_reg', 'tokens_seen')

RunMetrics = collections.namedtuple('RunMetrics', 'path method steps losses eval_steps solve_rate')


def read_metrics(path):
    """
    @return RunMetrics with numpy columns
    """
    method = None
    steps, evals = [], []
    losses = dict((name, []) for name in LOSS_COLUMNS)
    with open(path, encoding='utf-8') as fin:
        for line_number, line in enumerate(fin, 1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except ValueError as exc:
                raise InputError("%s:%d: invalid JSON (%s)" % (path, line_number, exc))
            event = record.get('event')
            if event == 'config':
                method = record['config']['train']['method']
            elif event == 'eval':
                evals.append((record['step'], record['solve_rate']))
            else:
                steps.append(record['step'])
                for name in LOSS_COLUMNS:
                    losses[name].append(record.get(name, 0.0))
    if not steps:
        raise InputError("%s holds no step records" % path)
    return RunMetrics(
        path=path,
        method=method or 'unknown',
        steps=np.asarray(steps, dtype=np.float64),
        losses=dict((name, np.asarray(values, dtype=np.float64)) for name, values in losses.items()),
        eval_steps=np.asarray([s for s, _ in evals], dtype=np.float64),
        solve_rate=np.asarray([r for _, r in evals], dtype=np.float64),
    )


def align(grids, columns, label):
    """
    Put every run's values on one step grid.

    @param grids:   Per-run step arrays
    @param columns: Per-run value arrays (same lengths as grids)
    @param label:   Name used in the resampling warning

    @return (grid, 2-D array runs x grid points)
    """
    if all(g.shape == grids[0].shape and np.array_equal(g, grids[0]) for g in grids):
        return grids[0], np.stack(columns)
    coarse = min(grids, key=lambda g: (len(g), -float(g[-1]) if len(g) else 0.0))
    logger.warning("Step grids of %s differ; resampling %d runs onto a %d-point grid",
                   label, len(grids), len(coarse))
    return coarse, np.stack([np.interp(coarse, g, c) for g, c in zip(grids, columns)])


def summarize_group(runs):
    """
    @return dict step -> row dict of mean/std columns for one method
    """
    rows = collections.OrderedDict()
    grids = [run.steps for run in runs]
    for name in LOSS_COLUMNS:
        grid, values = align(grids, [run.losses[name] for run in runs], name)
        for k, step in enumerate(grid):
            row = rows.setdefault(float(step), {})
            row[name + '_mean'] = float(np.mean(values[:, k]))
            row[name + '_std'] = float(np.std(values[:, k]))
    with_eval = [run for run in runs if run.eval_steps.size]
    if len(with_eval) == len(runs):
        grid, values = align([run.eval_steps for run in runs], [run.solve_rate for run in runs], 'solve_rate')
        for k, step in enumerate(grid):
            row = rows.setdefault(float(step), {})
            row['solve_rate_mean'] = float(np.mean(values[:, k]))
            row['solve_rate_std'] = float(np.std(values[:, k]))
    elif with_eval:
        logger.warning("Only %d of %d %s runs have eval lines; solve rate omitted",
                       len(with_eval), len(runs), runs[0].method)
    return rows


def compare_runs(paths, out_path=None):
    """
    @param paths:       Metrics files (at least one)
    @param out_path:    Optional CSV destination

    @return list of row dicts: method, step, runs, <column>_mean, <column>_std
    """
    paths = list(paths)
    if not paths:
        raise InputError("compare_runs needs at least one metrics file")
    groups = collections.OrderedDict()
    for path in paths:
        run = read_metrics(path)
        groups.setdefault(run.method, []).append(run)

    table = []
    for method, runs in groups.items():
        for step, values in sorted(summarize_group(runs).items()):
            row = {'method': method, 'step': int(step) if float(step).is_integer() else step, 'runs': len(runs)}
            row.update(values)
            table.append(row)
    if out_path:
        write_csv(table, out_path)
    return table


def write_csv(table, path):
    fields = ['method', 'step', 'runs']
    for name in LOSS_COLUMNS + ('solve_rate',):
        fields.extend((name + '_mean', name + '_std'))
    with open(path, 'w', newline='', encoding='utf-8') as fout:
        writer = csv.DictWriter(fout, fieldnames=fields, restval='')
        writer.writeheader()
        for row in table:
            writer.writerow(row)
    logger.info("Wrote %d summary rows to %s", len(table), path)
