import io
import itertools
import json
import unittest
from unittest import mock

import numpy as np
from parameterized import parameterized

from spinward.mutor import augment
from spinward.mutor.OffsetSampler import Offset, OffsetSpec, sample_offset, sampler_for
from spinward.mutor.augment import (WARN_EMPTY_ANSWER, RawSequence, batch, build_mask, choose_slots, dump_jsonl,
                                    interleave, plain, shifted_targets, strip_registers)
from spinward.mutor.errors import InputError
from spinward.mutor.kinds import IGNORE, TargetKind, TokenKind
from spinward.mutor.rng import derive

REG = 100


def _offset(d, slot=None):
    return Offset(d, None, None, d - 1 if slot is None else slot)


def _interleave_at(tokens, prefix_len, d, slots):
    """Interleave with an explicit insertion pattern."""
    seq = RawSequence(tokens, prefix_len)
    with mock.patch.object(augment, 'choose_slots', return_value=np.asarray(slots, dtype=np.int64)):
        return interleave(seq, OffsetSpec(d_max=8), _offset(d), derive(0, 'test'), REG)


def _layout(length, slots):
    """(is_register, original index or insertion index) in interleaved order."""
    cells = []
    for i in range(length):
        cells.append((False, i))
        if i in slots:
            cells.append((True, i))
    return cells


def _mask_oracle(cells, prefix_len, bidirectional_prefix):
    size = len(cells)
    allow = np.zeros((size, size), dtype=bool)
    for r, (row_reg, i) in enumerate(cells):
        for c, (col_reg, j) in enumerate(cells):
            if r == c:
                allow[r, c] = True
            elif col_reg:
                allow[r, c] = False
            elif row_reg:
                allow[r, c] = j <= i
            else:
                allow[r, c] = j <= i or (bidirectional_prefix and i < prefix_len and j < prefix_len)
    return allow


class InterleaveTest(unittest.TestCase):

    def test_four_tokens_offset_two(self):
        aug = interleave(RawSequence([10, 11, 12, 13]), OffsetSpec(d_max=4), _offset(2), derive(0, 'test'), REG)
        self.assertEqual(aug.tokens.tolist(), [10, REG, 11, REG, 12, REG, 13])
        self.assertEqual(aug.kind.tolist(), [TokenKind.Regular, TokenKind.Register] * 3 + [TokenKind.Regular])
        self.assertEqual(aug.targets.tolist(), [11, 12, 12, 13, 13, IGNORE, IGNORE])
        self.assertEqual(aug.target_kind.tolist(), [
            TargetKind.NtpLoss, TargetKind.RegLoss, TargetKind.NtpLoss, TargetKind.RegLoss,
            TargetKind.NtpLoss, TargetKind.RegLoss, TargetKind.NoLoss])
        self.assertEqual(aug.position_ids.tolist(), [0, 1, 1, 2, 2, 3, 3])
        self.assertEqual(aug.offset_d, 2)
        self.assertEqual(aug.register_count, 3)
        self.assertEqual(aug.original_length, 4)


    def test_register_position_matches_regular_predictor(self):
        aug = _interleave_at([1, 2, 3, 4, 5, 6], 0, 3, [1])
        register = int(np.flatnonzero(aug.kind == TokenKind.Register)[0])
        self.assertEqual(aug.position_ids[register], 3)
        # the regular token at original index 3 predicts the same target
        predictor = int(np.flatnonzero((aug.kind == TokenKind.Regular) & (aug.position_ids == 3))[0])
        self.assertEqual(aug.targets[predictor], aug.targets[register])
        self.assertEqual(aug.targets[register], 5)


    def test_offset_one_duplicates_next_token(self):
        aug = interleave(RawSequence([4, 7, 1, 9, 3]), OffsetSpec(d_max=1), _offset(1), derive(0, 'test'), REG)
        registers = np.flatnonzero(aug.kind == TokenKind.Register)
        for idx in registers:
            self.assertEqual(aug.targets[idx], aug.tokens[idx + 1])


    def test_prefix_gets_no_registers(self):
        aug = _interleave_at([1, 2, 3, 4, 5], 2, 1, [2, 3])
        self.assertEqual(aug.tokens.tolist(), [1, 2, 3, REG, 4, REG, 5])
        self.assertEqual(aug.targets.tolist(), [IGNORE, 3, 4, 4, 5, 5, IGNORE])
        self.assertEqual(aug.target_kind[0], TargetKind.NoLoss)


    def test_eligible_slots_follow_answer_region(self):
        seq = RawSequence([1, 2, 3, 4, 5], prefix_len=2)
        slots = augment.eligible_slots(seq, OffsetSpec(), _offset(1))
        self.assertEqual(slots.tolist(), [2, 3])


    def test_per_offset_register_id(self):
        aug = interleave(RawSequence([1, 2, 3]), OffsetSpec(d_max=4), _offset(3), derive(0, 'test'), REG,
                         per_offset=True)
        self.assertEqual(set(aug.tokens[aug.kind == TokenKind.Register].tolist()), {REG + 2})


    def test_empty_answer_region(self):
        aug = interleave(RawSequence([1, 2, 3], prefix_len=3), OffsetSpec(), _offset(2), derive(0, 'test'), REG)
        self.assertEqual(aug.warning, WARN_EMPTY_ANSWER)
        self.assertEqual(aug.register_count, 0)
        self.assertEqual(aug.tokens.tolist(), [1, 2, 3])


    @parameterized.expand([   # density, expected register count
        (1.0, 10),
        (0.5, 5),
        (0.26, 3),
        (0.0, 0),
    ])
    def test_density(self, density, expected):
        seq = RawSequence(np.arange(11))
        aug = interleave(seq, OffsetSpec(register_density=density), _offset(2), derive(3, 'test'), REG)
        self.assertEqual(aug.register_count, expected)
        np.testing.assert_array_equal(strip_registers(aug).tokens, seq.tokens)


    def test_choose_slots_sorted_subset(self):
        slots = np.arange(3, 40)
        picked = choose_slots(slots, 0.3, derive(1, 'test'))
        self.assertEqual(picked.size, 11)
        self.assertTrue(np.all(np.diff(picked) > 0))
        self.assertTrue(set(picked.tolist()) <= set(slots.tolist()))


    def test_strip_round_trip(self):
        rng = np.random.default_rng(11)
        for trial in range(300):
            length = int(rng.integers(1, 65))
            prefix_len = int(rng.integers(0, length + 1))
            seq = RawSequence(rng.integers(0, 50, size=length), prefix_len)
            spec = OffsetSpec(d_max=6, register_density=float(rng.choice([0.3, 0.7, 1.0])))
            aug = interleave(seq, spec, sample_offset(spec, derive(trial, 'augment', 0, 0)),
                             derive(trial, 'slots'), REG)
            stripped = strip_registers(aug)
            np.testing.assert_array_equal(stripped.tokens, seq.tokens)
            self.assertEqual(stripped.prefix_len, prefix_len)
            np.testing.assert_array_equal(aug.position_ids[aug.kind == TokenKind.Regular], np.arange(length))


    def test_strip_without_registers(self):
        seq = RawSequence([5, 6, 7], prefix_len=1)
        stripped = strip_registers(plain(seq))
        self.assertEqual(stripped.tokens.tolist(), [5, 6, 7])
        self.assertEqual(stripped.prefix_len, 1)


    def test_position_and_target_laws(self):
        rng = np.random.default_rng(12)
        spec = OffsetSpec(d_max=6, register_density=0.8)
        for trial in range(10000):
            length = int(rng.integers(2, 24))
            prefix_len = int(rng.integers(0, length))
            tokens = rng.integers(0, REG, size=length)
            offset = sample_offset(spec, rng)
            aug = interleave(RawSequence(tokens, prefix_len), spec, offset, rng, REG)
            registers = np.flatnonzero(aug.kind == TokenKind.Register)
            regular_positions = dict((int(p), int(idx)) for idx, p in enumerate(aug.position_ids)
                                     if aug.kind[idx] == TokenKind.Regular)
            for idx in registers:
                target_index = aug.anchor[idx] + offset.d
                self.assertEqual(aug.position_ids[idx], aug.anchor[idx] + offset.d - 1)
                if target_index < length:
                    self.assertEqual(aug.targets[idx], tokens[target_index])
                    # the regular token at the same position predicts the same token
                    self.assertEqual(aug.targets[regular_positions[int(aug.position_ids[idx])]], aug.targets[idx])
                else:
                    self.assertEqual(aug.targets[idx], IGNORE)
                self.assertLess(aug.targets[idx], REG)


    def test_two_d_targets_match_grid_cells(self):
        h, w, prefix_len = 4, 5, 1
        grid = np.arange(h * w).reshape(h, w) + 10
        tokens = np.concatenate([[3], grid.reshape(-1)])
        seq = RawSequence(tokens, prefix_len, grid_width=w)
        spec = OffsetSpec(mode='TwoD', d_max_2d=3)
        for offset in sampler_for(spec).offsets(grid_width=w):
            aug = interleave(seq, spec, offset, derive(0, 'test'), REG)
            checked = 0
            for idx in np.flatnonzero(aug.kind == TokenKind.Register):
                row, col = divmod(int(aug.anchor[idx]) - prefix_len, w)
                if col + offset.d_w - 1 >= w:
                    continue
                r2, c2 = row + offset.d_h - 1, col + offset.d_w - 1
                expected = grid[r2, c2] if r2 < h else IGNORE
                self.assertEqual(aug.targets[idx], expected, "offset %r cell %r" % (offset, (row, col)))
                checked += 1
            self.assertGreater(checked, 0)


    def test_two_d_skip_wrapped(self):
        w = 4
        seq = RawSequence(np.arange(16), 0, grid_width=w)
        spec = OffsetSpec(mode='TwoD', d_max_2d=3, skip_wrapped_2d=True)
        offset = [o for o in sampler_for(spec).offsets(grid_width=w) if (o.d_h, o.d_w) == (2, 3)][0]
        aug = interleave(seq, spec, offset, derive(0, 'test'), REG)
        columns = aug.anchor[aug.kind == TokenKind.Register] % w
        self.assertTrue(np.all(columns + offset.d_w - 1 < w))
        self.assertEqual(aug.register_count, 8)


    @parameterized.expand([   # tokens, prefix_len, grid_width
        ([1, 2], 3, None),
        ([1, 2], -1, None),
        ([1, 2, 3, 4, 5], 0, 2),
    ])
    def test_raw_sequence_invariants(self, tokens, prefix_len, grid_width):
        with self.assertRaises(InputError):
            RawSequence(tokens, prefix_len, grid_width)


class MaskTest(unittest.TestCase):

    def test_single_register(self):
        mask = build_mask(_interleave_at([1, 2], 0, 1, [0]))
        self.assertEqual([mask.allowed(row) for row in range(3)], [[0], [0, 1], [0, 2]])


    def test_no_registers_is_causal(self):
        mask = build_mask(plain(RawSequence([1, 2, 3, 4, 5])))
        np.testing.assert_array_equal(mask.allow, np.tril(np.ones((5, 5), dtype=bool)))


    def test_register_columns_only_diagonal(self):
        aug = _interleave_at(list(range(8)), 0, 2, [0, 2, 3, 6])
        allow = build_mask(aug).allow
        for col in np.flatnonzero(aug.kind == TokenKind.Register):
            self.assertEqual(np.flatnonzero(allow[:, col]).tolist(), [col])


    def test_bidirectional_prefix(self):
        aug = _interleave_at([1, 2, 3, 4, 5], 3, 1, [3])
        allow = build_mask(aug, bidirectional_prefix=True).allow
        self.assertTrue(allow[0, 2])
        self.assertFalse(allow[0, 3])
        self.assertFalse(build_mask(aug).allow[0, 2])


    def test_exhaustive_oracle(self):
        checked = 0
        for length in range(1, 9):
            for prefix_len in sorted({0, min(2, length - 1)}):
                eligible = list(range(prefix_len, length - 1))
                for count in range(len(eligible) + 1):
                    for slots in itertools.combinations(eligible, count):
                        cells = _layout(length, slots)
                        for d in range(1, 5):
                            aug = _interleave_at(list(range(length)), prefix_len, d, list(slots))
                            self.assertEqual(aug.kind.tolist(),
                                             [TokenKind.Register if reg else TokenKind.Regular for reg, _ in cells])
                            for bidirectional in (False, True):
                                allow = build_mask(aug, bidirectional_prefix=bidirectional).allow
                                np.testing.assert_array_equal(allow, _mask_oracle(cells, prefix_len, bidirectional))
                                checked += 1
        self.assertGreater(checked, 2000)


class BatchTest(unittest.TestCase):

    def _seqs(self):
        first = interleave(RawSequence([1, 2, 3]), OffsetSpec(), _offset(1), derive(0, 'test'), REG)
        second = interleave(RawSequence([4, 5, 6, 7]), OffsetSpec(), _offset(2), derive(0, 'test'), REG)
        return first, second


    def test_padding(self):
        first, second = self._seqs()
        self.assertEqual((len(first), len(second)), (5, 7))
        out = batch([first, second], pad_id=0)
        self.assertEqual((out.size, out.length), (2, 7))
        self.assertEqual(out.token_count, 12)
        self.assertEqual(out.register_count, 5)
        self.assertEqual(out.tokens[0, 5:].tolist(), [0, 0])
        self.assertEqual(out.targets[0, 5:].tolist(), [IGNORE, IGNORE])
        self.assertEqual(out.target_kind[0, 5:].tolist(), [TargetKind.NoLoss] * 2)
        self.assertEqual(out.position_ids[0, 5:].tolist(), [0, 0])
        for row in (5, 6):
            self.assertEqual(np.flatnonzero(out.mask[0, row]).tolist(), [row])
        self.assertFalse(out.mask[0, :5, 5:].any())
        np.testing.assert_array_equal(out.mask[1], build_mask(second).allow)
        self.assertEqual(out.original_lengths.tolist(), [3, 4])
        self.assertEqual(out.offsets_d, [1, 2])


    def test_empty(self):
        with self.assertRaises(InputError):
            batch([], pad_id=0)


    def test_shifted_targets(self):
        out = batch([plain(RawSequence([1, 2, 3, 4, 5], 1)), plain(RawSequence([6, 7]))], pad_id=0)
        shifted = shifted_targets(out, 2)
        self.assertEqual(shifted.tolist(), [[3, 4, 5, IGNORE, IGNORE], [IGNORE] * 5])


    def test_shifted_targets_rejects_registers(self):
        with self.assertRaises(InputError):
            shifted_targets(batch(self._seqs(), pad_id=0), 2)


    def test_dump_jsonl(self):
        first, second = self._seqs()
        out = io.StringIO()
        self.assertEqual(dump_jsonl([first, second], out), 2)
        lines = out.getvalue().splitlines()
        record = json.loads(lines[0])
        self.assertEqual(sorted(record), ['kind', 'offset_d', 'position_ids', 'target_kind', 'targets', 'tokens'])
        self.assertEqual(record['kind'][:2], ['Regular', 'Register'])
        self.assertEqual(record['target_kind'][-1], 'NoLoss')


if __name__ == '__main__':
    unittest.main()
