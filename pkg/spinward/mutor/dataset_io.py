"""
JSONL dataset files.

Line 1 is a header {"format_version", "kind", "params"}; params hold the
generator parameters including count and seed. Every further line is
one instance record. Reading streams line by line.
"""
import json
import logging
import os

from .errors import DatasetParseError, InputError

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


def write_dataset(path, kind, params, records):
    """
    Write a dataset atomically.

    @param path:        Destination file
    @param kind:        Task name, e.g. 'star_graph'
    @param params:      Generator parameters (JSON-serialisable)
    @param records:     Iterable of JSON-ready instance dicts

    @return number of instances written
    """
    header = {'format_version': FORMAT_VERSION, 'kind': kind, 'params': params}
    tmp_path = str(path) + '.tmp'
    count = 0
    try:
        with open(tmp_path, 'w', encoding='utf-8') as fout:
            fout.write(json.dumps(header, sort_keys=True) + '\n')
            for record in records:
                fout.write(json.dumps(record, sort_keys=True) + '\n')
                count += 1
        os.replace(tmp_path, str(path))
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
    logger.info("Wrote %d %s instances to %s", count, kind, path)
    return count


def _parse_line(path, line_number, line):
    try:
        value = json.loads(line)
    except ValueError as exc:
        raise DatasetParseError(path, line_number, "invalid JSON (%s)" % exc)
    if not isinstance(value, dict):
        raise DatasetParseError(path, line_number, "expected a JSON object")
    return value


def _check_header(path, header):
    for key in ('format_version', 'kind', 'params'):
        if key not in header:
            raise DatasetParseError(path, 1, "header has no %r" % key)
    if header['format_version'] != FORMAT_VERSION:
        raise DatasetParseError(path, 1, "unsupported format_version %r" % (header['format_version'],))
    return header


def read_header(path):
    with open(path, encoding='utf-8') as fin:
        first = fin.readline()
    if not first.strip():
        raise DatasetParseError(path, 1, "missing header")
    return _check_header(path, _parse_line(path, 1, first))


def iter_records(path, parse=None):
    """
    Yield instance records one line at a time.

    @param path:    Dataset file
    @param parse:   Optional callable record -> instance; its ValueError,
                    KeyError, TypeError and InputError become DatasetParseError

    @return generator of (parsed) records
    """
    with open(path, encoding='utf-8') as fin:
        header_line = fin.readline()
        if not header_line.strip():
            raise DatasetParseError(path, 1, "missing header")
        _check_header(path, _parse_line(path, 1, header_line))
        for line_number, line in enumerate(fin, 2):
            if not line.strip():
                continue
            record = _parse_line(path, line_number, line)
            if parse is None:
                yield record
                continue
            try:
                yield parse(record)
            except (ValueError, KeyError, TypeError, InputError) as exc:
                raise DatasetParseError(path, line_number, "bad instance (%s: %s)" % (exc.__class__.__name__, exc))
