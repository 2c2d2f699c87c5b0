"""
Task vocabulary: ordered token strings, id lookup and the vocabulary file.
"""
import logging

from .errors import InputError

logger = logging.getLogger(__name__)

EOS = '<eos>'
PAD = '<pad>'


class TaskVocabulary(object):
    """
    Token strings in id order. Ids are list positions; EOS and PAD are
    always present.
    """

    def __init__(self, tokens):
        tokens = [str(t) for t in tokens]
        for special in (EOS, PAD):
            if special not in tokens:
                tokens.append(special)
        if len(set(tokens)) != len(tokens):
            raise InputError("Vocabulary has duplicate tokens")
        self.tokens = tokens
        self._ids = dict((token, i) for i, token in enumerate(tokens))


    def __len__(self):
        return len(self.tokens)


    def __contains__(self, token):
        return token in self._ids


    def __eq__(self, other):
        return isinstance(other, TaskVocabulary) and self.tokens == other.tokens


    def __repr__(self):
        return "TaskVocabulary(%d tokens)" % len(self.tokens)


    @property
    def eos_id(self):
        return self._ids[EOS]


    @property
    def pad_id(self):
        return self._ids[PAD]


    def id(self, token):
        try:
            return self._ids[str(token)]
        except KeyError:
            raise InputError("Token %r is not in the vocabulary" % (token,))


    def encode(self, tokens):
        return [self.id(t) for t in tokens]


    def decode(self, ids):
        try:
            return [self.tokens[int(i)] for i in ids]
        except IndexError:
            raise InputError("Token id outside vocabulary of %d" % len(self.tokens))


    def write(self, path):
        """
        Write `id<TAB>token` lines.
        """
        with open(path, 'w', encoding='utf-8') as fout:
            for i, token in enumerate(self.tokens):
                fout.write("%d\t%s\n" % (i, token))


    @classmethod
    def read(cls, path):
        tokens = []
        with open(path, encoding='utf-8') as fin:
            for line_number, line in enumerate(fin, 1):
                line = line.rstrip('\n')
                if not line:
                    continue
                index, _, token = line.partition('\t')
                if not index.isdigit() or int(index) != len(tokens):
                    raise InputError("%s:%d: expected id %d" % (path, line_number, len(tokens)))
                tokens.append(token)
        return cls(tokens)
