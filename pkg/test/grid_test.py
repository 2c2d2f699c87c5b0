import unittest

import numpy as np
from parameterized import parameterized

from spinward.mutor.errors import ConfigurationError, InputError
from spinward.mutor.grid import GridInstance, gen_grid, grid_tables, grid_vocabulary, serialize_grid
from spinward.mutor.rng import derive


def mutual_information(x, y, vocab):
    joint = np.zeros((vocab, vocab))
    np.add.at(joint, (x, y), 1.0)
    joint /= joint.sum()
    px = joint.sum(axis=1, keepdims=True)
    py = joint.sum(axis=0, keepdims=True)
    mask = joint > 0
    return float((joint[mask] * np.log(joint[mask] / (px @ py)[mask])).sum())


class GridTest(unittest.TestCase):

    def test_tables(self):
        tables = grid_tables(5, num_classes=3, table_seed=2)
        self.assertEqual(tables.shape, (3, 6, 6, 5))
        np.testing.assert_allclose(tables.sum(axis=-1), 1.0)
        np.testing.assert_array_equal(tables, grid_tables(5, num_classes=3, table_seed=2))
        self.assertFalse(np.array_equal(tables, grid_tables(5, num_classes=3, table_seed=3)))


    def test_deterministic(self):
        tables = grid_tables(8, num_classes=4)
        first = gen_grid(8, 8, 8, derive(1, 'grid', 3), tables)
        again = gen_grid(8, 8, 8, derive(1, 'grid', 3), tables)
        self.assertEqual(first, again)
        self.assertEqual(first.grid.shape, (8, 8))
        self.assertTrue(np.all((first.grid >= 0) & (first.grid < 8)))
        self.assertIn(first.class_label, range(4))


    def test_boundary_uses_no_neighbour_index(self):
        vocab = 5
        tables = grid_tables(vocab, num_classes=1, table_seed=9)
        # first row: left -> left + 1; first column: up -> up + 2; corner -> 0
        for left in range(vocab):
            tables[0, left, vocab] = np.eye(vocab)[(left + 1) % vocab]
        for up in range(vocab):
            tables[0, vocab, up] = np.eye(vocab)[(up + 2) % vocab]
        tables[0, vocab, vocab] = np.eye(vocab)[0]
        for index in range(5):
            inst = gen_grid(6, 7, vocab, derive(0, 'boundary', index), tables, class_label=0)
            self.assertEqual(inst.grid[0].tolist(), [k % vocab for k in range(7)])
            self.assertEqual(inst.grid[:, 0].tolist(), [(2 * k) % vocab for k in range(6)])


    def test_vertical_dependence(self):
        vocab = 8
        tables = grid_tables(vocab, num_classes=1)
        upper, lower = [], []
        for index in range(400):
            grid = gen_grid(8, 8, vocab, derive(0, 'mi', index), tables, class_label=0).grid
            upper.append(grid[:-1].reshape(-1))
            lower.append(grid[1:].reshape(-1))
        upper, lower = np.concatenate(upper), np.concatenate(lower)
        self.assertGreater(upper.size, 10000)
        mi = mutual_information(upper, lower, vocab)
        shuffled = mutual_information(upper, derive(0, 'perm').permutation(lower), vocab)
        self.assertGreater(mi, 0.05)
        self.assertGreater(mi, 5 * shuffled)


    @parameterized.expand([   # h, w, pattern_vocab
        (3, 8, 8),
        (8, 2, 8),
    ])
    def test_bad_shape(self, h, w, pattern_vocab):
        with self.assertRaises(ConfigurationError):
            gen_grid(h, w, pattern_vocab, derive(0, 'test'))


    def test_bad_tables(self):
        with self.assertRaises(ConfigurationError):
            grid_tables(1)
        with self.assertRaises(ConfigurationError):
            gen_grid(4, 4, 6, derive(0, 'test'), grid_tables(5))


    def test_instance(self):
        inst = GridInstance(grid=[[1, 2], [3, 4]], class_label=1)
        self.assertEqual((inst.h, inst.w), (2, 2))
        self.assertEqual(inst.raster().tolist(), [1, 2, 3, 4])
        self.assertEqual(GridInstance.from_record(inst.as_record()), inst)
        self.assertNotEqual(GridInstance(grid=[[1, 2], [3, 4]], class_label=0), inst)
        with self.assertRaises(InputError):
            GridInstance(grid=[1, 2, 3], class_label=0)


    def test_vocabulary_and_serialize(self):
        vocab = grid_vocabulary(8, 4)
        self.assertEqual(vocab.tokens, ['p%d' % i for i in range(8)] + ['c%d' % i for i in range(4)]
                         + ['<eos>', '<pad>'])
        inst = gen_grid(4, 5, 8, derive(0, 'test'), grid_tables(8, num_classes=4), class_label=2)
        raw = serialize_grid(inst, vocab)
        self.assertEqual(raw.prefix_len, 1)
        self.assertEqual(raw.grid_width, 5)
        self.assertEqual(raw.tokens[0], vocab.id('c2'))
        self.assertEqual(raw.tokens[1:].tolist(), inst.raster().tolist())


if __name__ == '__main__':
    unittest.main()
