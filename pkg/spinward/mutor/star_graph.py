"""
Star-graph path finding.

G(n, l) is n disjoint directed paths of l edges leaving one start node.
Serialised form, one token per item:

    u v , u v , ... , u v | start end = start ... end <eos>
    |<----------- prefix ------------>| |<---- answer --->|

Edges appear in a random order drawn per sample; the answer is the gold
path followed by EOS.
"""
import logging
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .TaskVocabulary import TaskVocabulary
from .augment import RawSequence
from .errors import ConfigurationError, InputError

logger = logging.getLogger(__name__)

EDGE_SEP = ','
QUERY_SEP = '|'
ANSWER_MARK = '='


@dataclass
class StarGraphInstance:
    n: int
    l: int
    num_nodes: int
    start: int
    end: int
    edges: List[Tuple[int, int]] = field(default_factory=list)
    gold_path: List[int] = field(default_factory=list)

    def validate(self):
        """
        @raise InputError if the instance is not a star graph G(n, l) with
               a consistent gold path
        """
        if len(self.edges) != self.n * self.l:
            raise InputError("G(%d,%d) needs %d edges, got %d" % (self.n, self.l, self.n * self.l, len(self.edges)))
        successors = {}
        for u, v in self.edges:
            if u in successors and u != self.start:
                raise InputError("Node %d has two outgoing edges" % u)
            successors.setdefault(u, []).append(v)
        if len(successors.get(self.start, [])) != self.n:
            raise InputError("Start node %d must have %d outgoing edges" % (self.start, self.n))
        nodes = set(u for u, _ in self.edges) | set(v for _, v in self.edges)
        if len(nodes) != self.n * self.l + 1:
            raise InputError("G(%d,%d) needs %d distinct nodes, got %d"
                             % (self.n, self.l, self.n * self.l + 1, len(nodes)))
        paths = enumerate_paths(self.edges, self.start, self.end)
        if paths != [list(self.gold_path)] or len(self.gold_path) != self.l + 1:
            raise InputError("Gold path is not the unique start-to-end path")

    def as_record(self):
        return {
            'n': self.n,
            'l': self.l,
            'num_nodes': self.num_nodes,
            'start': self.start,
            'end': self.end,
            'edges': [list(e) for e in self.edges],
            'gold_path': list(self.gold_path),
        }

    @classmethod
    def from_record(cls, record):
        inst = cls(
            n=int(record['n']),
            l=int(record['l']),
            num_nodes=int(record['num_nodes']),
            start=int(record['start']),
            end=int(record['end']),
            edges=[(int(u), int(v)) for u, v in record['edges']],
            gold_path=[int(node) for node in record['gold_path']],
        )
        inst.validate()
        return inst


def star_graph_vocabulary(num_nodes):
    """
    Node labels '0'..'num_nodes-1', then the separators, EOS and PAD.
    """
    return TaskVocabulary([str(i) for i in range(num_nodes)] + [EDGE_SEP, QUERY_SEP, ANSWER_MARK])


def gen_star_graph(n, l, num_nodes, rng):
    """
    @param n:           Paths leaving the start node (>= 2)
    @param l:           Edges per path (>= 2)
    @param num_nodes:   Size of the node-label vocabulary (>= n*l + 1)
    @param rng:         numpy Generator

    @return StarGraphInstance; labels drawn without replacement, end
            uniform over the n leaves
    """
    n, l, num_nodes = int(n), int(l), int(num_nodes)
    if n < 2 or l < 2:
        raise ConfigurationError("Star graphs need n >= 2 and l >= 2, got G(%d,%d)" % (n, l))
    if num_nodes < n * l + 1:
        raise ConfigurationError("G(%d,%d) needs at least %d node labels, vocabulary has %d"
                                 % (n, l, n * l + 1, num_nodes))
    labels = rng.choice(num_nodes, size=n * l + 1, replace=False)
    start = int(labels[0])
    paths = labels[1:].reshape(n, l)
    edges = []
    for path in paths:
        previous = start
        for node in path:
            edges.append((previous, int(node)))
            previous = int(node)
    branch = int(rng.integers(n))
    return StarGraphInstance(
        n=n,
        l=l,
        num_nodes=num_nodes,
        start=start,
        end=int(paths[branch, -1]),
        edges=edges,
        gold_path=[start] + [int(node) for node in paths[branch]],
    )


def serialize_star_graph(inst, vocab, rng):
    """
    @param inst:    StarGraphInstance
    @param vocab:   TaskVocabulary from star_graph_vocabulary
    @param rng:     Generator for the edge order

    @return RawSequence with the prefix/answer split
    """
    order = rng.permutation(len(inst.edges))
    prefix = []
    for k, index in enumerate(order):
        if k:
            prefix.append(EDGE_SEP)
        u, v = inst.edges[int(index)]
        prefix.extend((str(u), str(v)))
    prefix.extend((QUERY_SEP, str(inst.start), str(inst.end), ANSWER_MARK))
    answer = [str(node) for node in inst.gold_path]
    tokens = vocab.encode(prefix + answer) + [vocab.eos_id]
    return RawSequence(np.asarray(tokens, dtype=np.int64), prefix_len=len(prefix))


def parse_prefix(token_ids, vocab):
    """
    Inverse of the prefix serialisation.

    @return (edges as a list of (u, v), start, end)
    """
    items = vocab.decode(token_ids)
    try:
        bar = items.index(QUERY_SEP)
    except ValueError:
        raise InputError("Star-graph prefix has no '%s'" % QUERY_SEP)
    query = items[bar + 1:]
    if len(query) != 3 or query[2] != ANSWER_MARK:
        raise InputError("Malformed star-graph query %r" % (query,))
    edges = []
    body = items[:bar]
    for k in range(0, len(body), 3):
        chunk = body[k:k + 3]
        if len(chunk) == 3 and chunk[2] != EDGE_SEP:
            raise InputError("Expected '%s' after edge %d" % (EDGE_SEP, k // 3))
        if len(chunk) < 2 or not (chunk[0].isdigit() and chunk[1].isdigit()):
            raise InputError("Malformed edge at item %d" % k)
        edges.append((int(chunk[0]), int(chunk[1])))
    if query[0].isdigit() and query[1].isdigit():
        return edges, int(query[0]), int(query[1])
    raise InputError("Malformed star-graph query %r" % (query,))


def enumerate_paths(edges, start, end):
    """
    Every simple directed path from start to end, by exhaustive search.

    @return list of node lists
    """
    successors = {}
    for u, v in edges:
        successors.setdefault(u, []).append(v)
    found = []
    stack = [(start, [start])]
    while stack:
        node, path = stack.pop()
        if node == end:
            found.append(path)
            continue
        for nxt in successors.get(node, []):
            if nxt not in path:
                stack.append((nxt, path + [nxt]))
    return found
