import csv
import json
import os
import tempfile
import unittest

import numpy as np

from spinward.mutor.compare import align, compare_runs, read_metrics
from spinward.mutor.errors import InputError


class CompareTest(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def metrics(self, name, method, totals, steps=None, evals=()):
        path = os.path.join(self.tmp.name, name)
        steps = list(range(len(totals))) if steps is None else steps
        with open(path, 'w', encoding='utf-8') as fout:
            fout.write(json.dumps({'event': 'config', 'config': {'train': {'method': method}}}) + '\n')
            for step, total in zip(steps, totals):
                fout.write(json.dumps({'step': step, 'l_total': total, 'l_ntp': total, 'l_reg': 0.0,
                                       'tokens_seen': 10 * (step + 1)}) + '\n')
            for step, rate in evals:
                fout.write(json.dumps({'event': 'eval', 'step': step, 'solve_rate': rate}) + '\n')
        return path


    def test_read_metrics(self):
        run = read_metrics(self.metrics('a.jsonl', 'MuToR', [3.0, 2.0], evals=[(2, 0.25)]))
        self.assertEqual(run.method, 'MuToR')
        self.assertEqual(run.steps.tolist(), [0.0, 1.0])
        self.assertEqual(run.losses['l_total'].tolist(), [3.0, 2.0])
        self.assertEqual(run.solve_rate.tolist(), [0.25])


    def test_read_metrics_errors(self):
        empty = self.metrics('empty.jsonl', 'MuToR', [])
        with self.assertRaises(InputError):
            read_metrics(empty)
        broken = os.path.join(self.tmp.name, 'broken.jsonl')
        with open(broken, 'w', encoding='utf-8') as fout:
            fout.write('{"step": 0}\n{oops\n')
        with self.assertRaises(InputError):
            read_metrics(broken)


    def test_mean_and_std_per_method(self):
        paths = [
            self.metrics('a.jsonl', 'MuToR', [1.0, 2.0, 3.0], evals=[(3, 0.5)]),
            self.metrics('b.jsonl', 'MuToR', [3.0, 4.0, 5.0], evals=[(3, 1.0)]),
            self.metrics('c.jsonl', 'NextToken', [7.0, 7.0, 7.0]),
        ]
        out = os.path.join(self.tmp.name, 'summary.csv')
        table = compare_runs(paths, out)
        mutor = [row for row in table if row['method'] == 'MuToR']
        self.assertEqual([row['step'] for row in mutor], [0, 1, 2, 3])
        self.assertEqual([row.get('l_total_mean') for row in mutor[:3]], [2.0, 3.0, 4.0])
        self.assertEqual([row.get('l_total_std') for row in mutor[:3]], [1.0, 1.0, 1.0])
        self.assertEqual(mutor[3]['solve_rate_mean'], 0.75)
        self.assertEqual(mutor[3]['solve_rate_std'], 0.25)
        self.assertEqual(mutor[0]['runs'], 2)
        ntp = [row for row in table if row['method'] == 'NextToken']
        self.assertEqual([row['l_total_std'] for row in ntp], [0.0, 0.0, 0.0])
        self.assertNotIn('solve_rate_mean', ntp[0])

        with open(out, newline='', encoding='utf-8') as fin:
            rows = list(csv.DictReader(fin))
        self.assertEqual(len(rows), len(table))
        self.assertEqual(rows[0]['method'], 'MuToR')
        self.assertEqual(float(rows[0]['l_total_mean']), 2.0)
        self.assertEqual(rows[-1]['solve_rate_mean'], '')


    def test_differing_grids_resample(self):
        fine = self.metrics('fine.jsonl', 'MuToR', [0.0, 1.0, 2.0, 3.0, 4.0])
        coarse = self.metrics('coarse.jsonl', 'MuToR', [10.0, 20.0, 30.0], steps=[0, 2, 4])
        with self.assertLogs('spinward.mutor.compare', level='WARNING'):
            table = compare_runs([fine, coarse])
        self.assertEqual([row['step'] for row in table], [0, 2, 4])
        self.assertEqual([row['l_total_mean'] for row in table], [5.0, 11.0, 17.0])


    def test_align_interpolates(self):
        grid, values = align([np.array([0.0, 1.0, 2.0]), np.array([0.0, 2.0])],
                             [np.array([0.0, 1.0, 2.0]), np.array([4.0, 8.0])], 'l_total')
        self.assertEqual(grid.tolist(), [0.0, 2.0])
        self.assertEqual(values.tolist(), [[0.0, 2.0], [4.0, 8.0]])


    def test_no_paths(self):
        with self.assertRaises(InputError):
            compare_runs([])


if __name__ == '__main__':
    unittest.main()
