"""
Synthetic 2D token grids.

Cells are drawn in raster order from a class-conditional Markov table:
each cell depends on its left and upper neighbours, with a reserved
"no neighbour" index on the first row and column. The tables come from
a Dirichlet draw keyed by table_seed, so a dataset is determined by
(table_seed, seed, shape).
"""
import logging
from dataclasses import dataclass

import numpy as np

from .TaskVocabulary import TaskVocabulary
from .augment import RawSequence
from .errors import ConfigurationError, InputError
from .rng import derive

logger = logging.getLogger(__name__)


@dataclass
class GridInstance:
    grid: np.ndarray
    class_label: int

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=np.int64)
        if self.grid.ndim != 2:
            raise InputError("Grid must be 2-D, got shape %s" % (self.grid.shape,))

    @property
    def h(self):
        return self.grid.shape[0]

    @property
    def w(self):
        return self.grid.shape[1]

    def raster(self):
        return self.grid.reshape(-1)

    def as_record(self):
        return {'class_label': int(self.class_label), 'grid': self.grid.tolist()}

    @classmethod
    def from_record(cls, record):
        return cls(grid=np.asarray(record['grid'], dtype=np.int64), class_label=int(record['class_label']))

    def __eq__(self, other):
        return (isinstance(other, GridInstance) and self.class_label == other.class_label
                and np.array_equal(self.grid, other.grid))


def grid_tables(pattern_vocab, num_classes=1, table_seed=0, concentration=0.3):
    """
    @return probabilities [num_classes, V+1 (left), V+1 (up), V]; index V
            means "no neighbour"
    """
    if int(pattern_vocab) < 2:
        raise ConfigurationError("pattern_vocab must be >= 2, got %r" % (pattern_vocab,))
    vocab = int(pattern_vocab)
    rng = derive(table_seed, 'grid-table')
    alpha = np.full(vocab, float(concentration))
    return rng.dirichlet(alpha, size=(int(num_classes), vocab + 1, vocab + 1))


def gen_grid(h, w, pattern_vocab, rng, tables=None, class_label=None):
    """
    @param h, w:            Grid shape (both >= 4)
    @param pattern_vocab:   Number of cell values V
    @param rng:             Generator for this grid
    @param tables:          From grid_tables (default: one class, table_seed 0)
    @param class_label:     Conditioning class (default: drawn uniformly)

    @return GridInstance
    """
    h, w = int(h), int(w)
    if h < 4 or w < 4:
        raise ConfigurationError("Grids need h, w >= 4, got %dx%d" % (h, w))
    if tables is None:
        tables = grid_tables(pattern_vocab)
    vocab = int(pattern_vocab)
    if tables.shape[1:] != (vocab + 1, vocab + 1, vocab):
        raise ConfigurationError("Grid tables %s do not match pattern_vocab %d" % (tables.shape, vocab))
    if class_label is None:
        class_label = int(rng.integers(tables.shape[0]))
    cumulative = np.cumsum(tables[class_label], axis=-1)
    draws = rng.random((h, w))
    grid = np.empty((h, w), dtype=np.int64)
    for r in range(h):
        for c in range(w):
            left = grid[r, c - 1] if c else vocab
            up = grid[r - 1, c] if r else vocab
            cell = int(np.searchsorted(cumulative[left, up], draws[r, c], side='right'))
            grid[r, c] = min(cell, vocab - 1)
    return GridInstance(grid=grid, class_label=int(class_label))


def grid_vocabulary(pattern_vocab, num_classes=1):
    """
    Cell values 'p0'.., class labels 'c0'.., then EOS and PAD.
    """
    return TaskVocabulary(['p%d' % i for i in range(int(pattern_vocab))]
                          + ['c%d' % i for i in range(int(num_classes))])


def serialize_grid(inst, vocab):
    """
    @return RawSequence: class token prefix, raster answer, grid_width = w
    """
    label = vocab.id('c%d' % inst.class_label)
    tokens = np.concatenate([[label], inst.raster()]).astype(np.int64)
    return RawSequence(tokens, prefix_len=1, grid_width=inst.w)
