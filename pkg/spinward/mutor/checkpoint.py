"""
Checkpoint files.

Layout (all integers little-endian u32):

    b"MUTOR1" | version
    header:  count, then per entry (key-length, key, value-length, value)
             values are JSON text
    tensors: count, then per entry (name-length, name, rank, shape..., f32 payload)

Parameters go to <path>; optimizer state goes to the sibling
<path>.optim with the same layout (tensors m.<name> and v.<name>, step
count in the header). Files are written to a temporary name and renamed,
so an interrupted write never replaces a good checkpoint.
"""
import json
import logging
import os
import struct

import numpy as np

from .errors import CheckpointError

logger = logging.getLogger(__name__)

MAGIC = b"MUTOR1"
VERSION = 1
OPTIM_SUFFIX = '.optim'

_U32 = struct.Struct('<I')


def optimizer_path(path):
    return str(path) + OPTIM_SUFFIX


def _write_bytes(fout, data):
    fout.write(_U32.pack(len(data)))
    fout.write(data)


def write_tensor_file(path, header, tensors):
    """
    Write one MUTOR1 file atomically.

    @param path:        Destination
    @param header:      dict of JSON-serialisable values
    @param tensors:     dict name -> numpy array (stored as float32)
    """
    tmp_path = str(path) + '.tmp'
    try:
        with open(tmp_path, 'wb') as fout:
            fout.write(MAGIC)
            fout.write(_U32.pack(VERSION))
            fout.write(_U32.pack(len(header)))
            for key in sorted(header):
                _write_bytes(fout, key.encode('utf-8'))
                _write_bytes(fout, json.dumps(header[key], sort_keys=True).encode('utf-8'))
            fout.write(_U32.pack(len(tensors)))
            for name, array in tensors.items():
                array = np.ascontiguousarray(array, dtype='<f4')
                _write_bytes(fout, name.encode('utf-8'))
                fout.write(_U32.pack(array.ndim))
                for dim in array.shape:
                    fout.write(_U32.pack(dim))
                fout.write(array.tobytes())
        os.replace(tmp_path, str(path))
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


class _Reader(object):

    def __init__(self, path, data):
        self.path = path
        self.data = data
        self.pos = 0


    def take(self, count):
        if self.pos + count > len(self.data):
            raise CheckpointError("%s: truncated at byte %d" % (self.path, self.pos))
        chunk = self.data[self.pos:self.pos + count]
        self.pos += count
        return chunk


    def u32(self):
        return _U32.unpack(self.take(4))[0]


    def text(self):
        return self.take(self.u32()).decode('utf-8')


def read_tensor_file(path):
    """
    @return (header dict, tensors dict name -> float32 array)
    """
    try:
        with open(path, 'rb') as fin:
            data = fin.read()
    except OSError as exc:
        raise CheckpointError("Cannot read checkpoint %s: %s" % (path, exc))
    reader = _Reader(path, data)
    if reader.take(len(MAGIC)) != MAGIC:
        raise CheckpointError("%s is not a MUTOR1 checkpoint" % path)
    version = reader.u32()
    if version != VERSION:
        raise CheckpointError("%s: unsupported version %d" % (path, version))
    header = {}
    for _ in range(reader.u32()):
        key = reader.text()
        header[key] = json.loads(reader.text())
    tensors = {}
    for _ in range(reader.u32()):
        name = reader.text()
        rank = reader.u32()
        shape = tuple(reader.u32() for _ in range(rank))
        count = int(np.prod(shape, dtype=np.int64))
        payload = reader.take(4 * count)
        tensors[name] = np.frombuffer(payload, dtype='<f4').reshape(shape).astype(np.float32)
    if reader.pos != len(data):
        raise CheckpointError("%s: %d trailing bytes" % (path, len(data) - reader.pos))
    return header, tensors


def save_checkpoint(path, params, model_config, step=0, optimizer_state=None, extra=None):
    """
    Save parameters (and optionally optimizer state) for a model.

    @param path:                Checkpoint path
    @param params:              dict name -> Tensor
    @param model_config:        ModelConfig, stored in the header
    @param step:                Training step
    @param optimizer_state:     AdamW state dict, written to <path>.optim
    @param extra:               Additional header values
    """
    header = {'model_config': model_config.as_dict(), 'step': int(step)}
    header.update(extra or {})
    write_tensor_file(path, header, dict((name, p.data) for name, p in params.items()))
    if optimizer_state is not None:
        moments = {}
        for name in params:
            moments['m.' + name] = optimizer_state['m'][name]
            moments['v.' + name] = optimizer_state['v'][name]
        write_tensor_file(optimizer_path(path), {'step': int(optimizer_state['step'])}, moments)
    logger.info("Saved checkpoint %s (step %d)", path, step)


def load_checkpoint(path):
    """
    @return (header dict, params dict name -> float32 array)
    """
    return read_tensor_file(path)


def load_optimizer_state(path):
    """
    @return AdamW state dict read from <path>.optim
    """
    header, tensors = read_tensor_file(optimizer_path(path))
    state = {'step': int(header['step']), 'm': {}, 'v': {}}
    for key, array in tensors.items():
        kind, name = key.split('.', 1)
        state[kind][name] = array.copy()
    return state
