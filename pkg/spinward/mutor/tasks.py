"""
Task adapters: generation, serialisation and evaluation prompts for
each dataset kind, registered by name.
"""
import concurrent.futures
import logging

from .PluginGroup import PluginGroup
from .dataset_io import iter_records, read_header, write_dataset
from .errors import ConfigurationError
from .grid import GridInstance, gen_grid, grid_tables, grid_vocabulary, serialize_grid
from .rng import derive
from .star_graph import StarGraphInstance, gen_star_graph, serialize_star_graph, star_graph_vocabulary

logger = logging.getLogger(__name__)


def task_for(kind, params):
    """
    @return Task plugin instance for a dataset kind and its parameters
    """
    return Task.get_plugin_by_name(kind, params)


def open_dataset(path):
    """
    @return (Task, generator of instances) streaming from a dataset file
    """
    header = read_header(path)
    task = task_for(header['kind'], header['params'])
    return task, iter_records(path, task.instance_from_record)


def load_dataset(path):
    """
    @return (Task, list of instances)
    """
    task, instances = open_dataset(path)
    instances = list(instances)
    logger.info("Loaded %d %s instances from %s", len(instances), task._PLUGIN_NAME, path)
    return task, instances


class Task(object, metaclass=PluginGroup):
    """
    Mount point for task adapters.

    @param params:  Generator parameters (dataset header 'params')
    """

    PARAM_DEFAULTS = {}

    def __init__(self, params):
        unknown = sorted(set(params) - set(self.PARAM_DEFAULTS) - {'count', 'seed'})
        if unknown:
            raise ConfigurationError("Unknown %s parameters: %s" % (self._PLUGIN_NAME, ', '.join(unknown)))
        self.params = dict(self.PARAM_DEFAULTS)
        self.params.update(params)
        self.resolve()
        self._vocab = None


    def resolve(self):
        """
        Fill derived parameters and check ranges.
        """


    @property
    def vocabulary(self):
        if self._vocab is None:
            self._vocab = self.build_vocabulary()
        return self._vocab


    def build_vocabulary(self):
        raise NotImplementedError()


    def generate_one(self, rng):
        raise NotImplementedError()


    def instance_from_record(self, record):
        raise NotImplementedError()


    def serialize(self, inst, rng):
        """
        @return RawSequence for training
        """
        raise NotImplementedError()


    def prompt_and_answer(self, inst, rng):
        """
        @return (prompt token ids, answer token ids) for evaluation
        """
        raw = self.serialize(inst, rng)
        tokens = raw.tokens.tolist()
        return tokens[:raw.prefix_len], tokens[raw.prefix_len:]


    def generate(self, count, seed, workers=1):
        """
        Instances 0..count-1, instance i drawn from its own stream, so the
        result does not depend on the number of worker threads.

        @return list of instances
        """
        def make(index):
            return self.generate_one(derive(seed, 'generate-' + self._PLUGIN_NAME, index))

        if workers <= 1:
            return [make(index) for index in range(int(count))]
        with concurrent.futures.ThreadPoolExecutor(max_workers=int(workers)) as pool:
            return list(pool.map(make, range(int(count))))


    def write(self, path, count, seed, workers=1):
        """
        Generate and write a dataset file.

        @return number of instances
        """
        params = dict(self.params)
        params.update({'count': int(count), 'seed': int(seed)})
        instances = self.generate(count, seed, workers)
        return write_dataset(path, self._PLUGIN_NAME, params, (inst.as_record() for inst in instances))


class StarGraphTask(Task):
    _PLUGIN_NAME = 'star_graph'

    PARAM_DEFAULTS = {
        'n': 5,
        'l': 5,
        'num_nodes': None,
    }

    def resolve(self):
        n, l = int(self.params['n']), int(self.params['l'])
        if self.params['num_nodes'] is None:
            self.params['num_nodes'] = 2 * n * l
        if int(self.params['num_nodes']) < n * l + 1:
            raise ConfigurationError("G(%d,%d) needs num_nodes >= %d" % (n, l, n * l + 1))

    def build_vocabulary(self):
        return star_graph_vocabulary(int(self.params['num_nodes']))

    def generate_one(self, rng):
        return gen_star_graph(self.params['n'], self.params['l'], self.params['num_nodes'], rng)

    def instance_from_record(self, record):
        return StarGraphInstance.from_record(record)

    def serialize(self, inst, rng):
        return serialize_star_graph(inst, self.vocabulary, rng)


class GridTask(Task):
    _PLUGIN_NAME = 'grid'

    PARAM_DEFAULTS = {
        'h': 8,
        'w': 8,
        'pattern_vocab': 8,
        'num_classes': 4,
        'table_seed': 0,
        'concentration': 0.3,
    }

    def resolve(self):
        self.tables = grid_tables(self.params['pattern_vocab'], self.params['num_classes'],
                                  self.params['table_seed'], self.params['concentration'])

    def build_vocabulary(self):
        return grid_vocabulary(self.params['pattern_vocab'], self.params['num_classes'])

    def generate_one(self, rng):
        return gen_grid(self.params['h'], self.params['w'], self.params['pattern_vocab'], rng, self.tables)

    def instance_from_record(self, record):
        inst = GridInstance.from_record(record)
        if inst.grid.shape != (int(self.params['h']), int(self.params['w'])):
            raise ValueError("grid shape %s does not match header" % (inst.grid.shape,))
        return inst

    def serialize(self, inst, rng):
        return serialize_grid(inst, self.vocabulary)
