import json
import os
import tempfile
import unittest

from spinward.mutor.Transformer import Transformer
from spinward.mutor.checkpoint import save_checkpoint
from spinward.mutor.config import ModelConfig
from spinward.mutor.errors import CheckpointError, InputError
from spinward.mutor.evaluate import EvalReport, evaluate, evaluate_checkpoint
from spinward.mutor.star_graph import enumerate_paths, parse_prefix
from spinward.mutor.tasks import task_for


class PathSolver(object):
    """Decodes by searching the graph in the prompt; optionally spoils chosen rows."""

    def __init__(self, task, spoil=()):
        self.vocab = task.vocabulary
        self.spoil = set(spoil)
        self.calls = []
        self.rows = 0

    def decode_greedy_batch(self, prompts, max_new):
        self.calls.append((len(prompts), max_new))
        outputs = []
        for prompt in prompts:
            edges, start, end = parse_prefix(prompt, self.vocab)
            path = enumerate_paths(edges, start, end)[0]
            output = self.vocab.encode([str(node) for node in path]) + [self.vocab.eos_id]
            if self.rows in self.spoil:
                output[1] = self.vocab.eos_id
            outputs.append(output[:max_new])
            self.rows += 1
        return outputs


class FirstBranch(object):
    """Always follows the start node's lowest-numbered branch to its leaf."""

    def __init__(self, task):
        self.vocab = task.vocabulary

    def decode_greedy_batch(self, prompts, max_new):
        outputs = []
        for prompt in prompts:
            edges, start, _ = parse_prefix(prompt, self.vocab)
            successors = {}
            for u, v in edges:
                successors.setdefault(u, []).append(v)
            path = [start]
            node = min(successors[start])
            while True:
                path.append(node)
                if node not in successors:
                    break
                node = successors[node][0]
            output = self.vocab.encode([str(n) for n in path]) + [self.vocab.eos_id]
            outputs.append(output[:max_new])
        return outputs


class Silent(object):

    def decode_greedy_batch(self, prompts, max_new):
        return [[] for _ in prompts]


class EvaluateTest(unittest.TestCase):

    @classmethod
    def setUpClass(cls):
        cls.task = task_for('star_graph', {'n': 2, 'l': 3})
        cls.instances = cls.task.generate(5, seed=4)


    def test_solver_solves_all(self):
        model = PathSolver(self.task)
        report = evaluate(model, self.task, self.instances, batch_size=2)
        self.assertEqual((report.count, report.solved, report.solve_rate), (5, 5, 1.0))
        self.assertEqual(report.position_accuracy, [1.0] * 5)
        self.assertEqual(model.calls, [(2, 5), (2, 5), (1, 5)])


    def test_position_accuracy(self):
        report = evaluate(PathSolver(self.task, spoil=[0, 3]), self.task, self.instances)
        self.assertEqual((report.count, report.solved), (5, 3))
        self.assertAlmostEqual(report.solve_rate, 0.6)
        self.assertEqual(report.position_accuracy, [1.0, 0.6, 1.0, 1.0, 1.0])


    def test_fixed_first_choice_solves_one_in_n(self):
        task = task_for('star_graph', {'n': 5, 'l': 3})
        report = evaluate(FirstBranch(task), task, task.generate(1000, seed=7), batch_size=64)
        # binomial(1000, 1/5): mean 200, sd about 12.6
        self.assertEqual(report.count, 1000)
        self.assertTrue(150 <= report.solved <= 250, report.solved)
        self.assertEqual(report.position_accuracy[0], 1.0)
        self.assertAlmostEqual(report.position_accuracy[1], report.solve_rate)


    def test_short_output_is_wrong(self):
        report = evaluate(Silent(), self.task, self.instances)
        self.assertEqual(report.solve_rate, 0.0)
        self.assertEqual(report.position_accuracy, [0.0] * 5)


    def test_empty_and_bad_batch(self):
        report = evaluate(Silent(), self.task, [])
        self.assertEqual((report.count, report.solve_rate, report.position_accuracy), (0, 0.0, []))
        with self.assertRaises(InputError):
            evaluate(Silent(), self.task, self.instances, batch_size=0)


    def test_report_file(self):
        report = EvalReport(solve_rate=0.5, count=2, solved=1, position_accuracy=[1.0, 0.5])
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'report.json')
            report.write(path)
            with open(path, encoding='utf-8') as fin:
                self.assertEqual(json.load(fin)['position_accuracy'], [1.0, 0.5])
        self.assertEqual(report, EvalReport(solve_rate=0.5, count=2, solved=1, position_accuracy=[1.0, 0.5],
                                            wall_clock_s=3.0))


    def test_checkpoint_task_checked(self):
        config = ModelConfig(n_layers=1, n_heads=1, d_model=8, d_head=8, vocab_size=len(self.task.vocabulary))
        model = Transformer(config, seed=0)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'model.ckpt')
            save_checkpoint(path, model.params, config,
                            extra={'task': {'kind': 'star_graph', 'params': self.task.params}})
            report = evaluate_checkpoint(path, self.task, self.instances[:2])
            self.assertEqual(report.count, 2)
            self.assertEqual(len(report.position_accuracy), 5)

            other = task_for('star_graph', {'n': 2, 'l': 2})
            with self.assertRaises(CheckpointError):
                evaluate_checkpoint(path, other, other.generate(1, seed=0))


if __name__ == '__main__':
    unittest.main()
