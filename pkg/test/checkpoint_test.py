import os
import tempfile
import unittest

import numpy as np
from parameterized import parameterized

from spinward.mutor.AdamW import init_state
from spinward.mutor.Tensor import Tensor
from spinward.mutor.checkpoint import (load_checkpoint, load_optimizer_state, optimizer_path, read_tensor_file,
                                       save_checkpoint, write_tensor_file)
from spinward.mutor.config import ModelConfig
from spinward.mutor.errors import CheckpointError


class CheckpointTest(unittest.TestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.dir = self._tmp.name
        rng = np.random.default_rng(0)
        self.params = {
            'embed': Tensor(rng.normal(size=(7, 4))),
            'norm_f': Tensor(np.ones(4)),
        }


    def tearDown(self):
        self._tmp.cleanup()


    def test_save_and_load(self):
        path = os.path.join(self.dir, 'model.ckpt')
        config = ModelConfig(n_heads=1, d_head=4, d_model=4, vocab_size=6)
        save_checkpoint(path, self.params, config, step=12, extra={'method': 'MuToR'})
        header, arrays = load_checkpoint(path)
        self.assertEqual(header['step'], 12)
        self.assertEqual(header['method'], 'MuToR')
        self.assertEqual(ModelConfig(header['model_config']), config)
        self.assertEqual(sorted(arrays), ['embed', 'norm_f'])
        np.testing.assert_array_equal(arrays['embed'], self.params['embed'].data)
        self.assertFalse(os.path.exists(path + '.tmp'))
        self.assertFalse(os.path.exists(optimizer_path(path)))


    def test_optimizer_state(self):
        path = os.path.join(self.dir, 'model.ckpt')
        state = init_state(self.params)
        state['step'] = 5
        state['m']['embed'] += 0.25
        save_checkpoint(path, self.params, ModelConfig(), optimizer_state=state)
        loaded = load_optimizer_state(path)
        self.assertEqual(loaded['step'], 5)
        np.testing.assert_array_equal(loaded['m']['embed'], state['m']['embed'])
        np.testing.assert_array_equal(loaded['v']['norm_f'], np.zeros(4))


    def test_empty_tensor(self):
        path = os.path.join(self.dir, 'odd.bin')
        write_tensor_file(path, {}, {'empty': np.zeros((0, 3))})
        header, arrays = read_tensor_file(path)
        self.assertEqual(header, {})
        self.assertEqual(arrays['empty'].shape, (0, 3))


    @parameterized.expand([   # corruption
        ('truncated', lambda data: data[:-3]),
        ('trailing', lambda data: data + b'\0'),
        ('magic', lambda data: b'NOTME1' + data[6:]),
        ('version', lambda data: data[:6] + b'\x09\x00\x00\x00' + data[10:]),
    ])
    def test_corrupt_file(self, _, corrupt):
        path = os.path.join(self.dir, 'model.ckpt')
        save_checkpoint(path, self.params, ModelConfig())
        with open(path, 'rb') as fin:
            data = fin.read()
        with open(path, 'wb') as fout:
            fout.write(corrupt(data))
        with self.assertRaises(CheckpointError):
            load_checkpoint(path)


    def test_missing_file(self):
        with self.assertRaises(CheckpointError):
            load_checkpoint(os.path.join(self.dir, 'absent.ckpt'))


    def test_failed_write_leaves_no_temp_file(self):
        path = os.path.join(self.dir, 'model.ckpt')
        write_tensor_file(path, {'step': 1}, {'w': np.ones(3)})
        with self.assertRaises(TypeError):
            write_tensor_file(path, {'step': object()}, {'w': np.zeros(3)})
        with self.assertRaises(ValueError):
            write_tensor_file(path, {'step': 2}, {'w': np.array(['not a number'])})
        self.assertEqual(os.listdir(self.dir), ['model.ckpt'])
        header, arrays = read_tensor_file(path)
        self.assertEqual(header, {'step': 1})
        np.testing.assert_array_equal(arrays['w'], np.ones(3))


if __name__ == '__main__':
    unittest.main()
