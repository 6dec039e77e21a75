import pytest

from temt.data import save_dataset, dataset_checksums
from temt.errors import SplitError
from temt.inductive import SplitConfig, make_inductive_split

from synth import make_dataset, make_ring_dataset


def cycle_dataset(n=6):
    rows = [(i, 0, (i + 1) % n, 2000 + i, 2001 + i) for i in range(n)]
    return make_dataset([f"n{i}" for i in range(n)], ["r"], rows)


def train_entities(dataset):
    out = set()
    for q in dataset.train:
        out.add(q.subject)
        out.add(q.object)
    return out


class TestToyGraphs:
    def test_cycle_removal_moves_edges_to_test(self):
        dataset = cycle_dataset()
        config = SplitConfig(valid_entities=0, test_entities=1, min_relation_edges=1, seed=5)
        split, report = make_inductive_split(dataset, config)
        assert len(report.removed_test) == 1
        removed = report.removed_test[0]
        assert len(split.test) == 2  # both incident edges follow the entity
        assert all(removed in (q.subject, q.object) for q in split.test)
        assert len(split.train) == 4
        # no isolated node: every remaining entity keeps at least one edge
        remaining = train_entities(split)
        assert removed not in remaining
        degrees = {e: 0 for e in remaining}
        for q in split.train:
            degrees[q.subject] += 1
            degrees[q.object] += 1
        assert min(degrees.values()) >= 1

    def test_isolating_removal_is_rejected(self):
        # chain a-b-c: removing b would isolate both neighbors, so only
        # endpoint removals are possible.
        rows = [(0, 0, 1, 2000, 2001), (1, 0, 2, 2002, 2003)]
        chain = make_dataset(["a", "b", "c"], ["r"], rows)
        config = SplitConfig(valid_entities=0, test_entities=1, min_relation_edges=1, seed=0)
        split, report = make_inductive_split(chain, config)
        assert report.removed_test[0] in (0, 2)
        assert len(split.train) == 1

    def test_threshold_equal_to_relation_count_blocks_all_removals(self):
        dataset = cycle_dataset()
        config = SplitConfig(valid_entities=0, test_entities=1, min_relation_edges=6, seed=0)
        with pytest.raises(SplitError) as excinfo:
            make_inductive_split(dataset, config)
        assert excinfo.value.achieved_test == 0
        assert excinfo.value.achieved_valid == 0

    def test_unreachable_targets_report_achieved_counts(self):
        dataset = cycle_dataset()
        # removing 3 of 6 cycle entities eventually isolates someone
        config = SplitConfig(valid_entities=3, test_entities=3, min_relation_edges=1, seed=1)
        with pytest.raises(SplitError) as excinfo:
            make_inductive_split(dataset, config)
        assert excinfo.value.achieved_valid + excinfo.value.achieved_test >= 1

    def test_targets_validated(self):
        with pytest.raises(ValueError):
            SplitConfig(valid_entities=0, test_entities=0)
        with pytest.raises(ValueError):
            SplitConfig(valid_entities=-1, test_entities=2)
        with pytest.raises(ValueError):
            SplitConfig(valid_entities=1, test_entities=1, min_relation_edges=0)


class TestMediumGraph:
    def split(self, seed=3):
        dataset = make_ring_dataset(num_entities=200)
        config = SplitConfig(
            valid_entities=10, test_entities=10, min_relation_edges=50, seed=seed
        )
        return dataset, *make_inductive_split(dataset, config)

    def test_every_heldout_triple_has_unseen_entity(self):
        _, split, report = self.split()
        seen = train_entities(split)
        removed = set(report.removed_valid) | set(report.removed_test)
        assert not (removed & seen)
        for q in split.valid + split.test:
            assert q.subject not in seen or q.object not in seen

    def test_relation_counts_and_degrees(self):
        _, split, _ = self.split()
        relation_counts = {}
        degrees = {}
        triples = {q.triple for q in split.train}
        for s, r, o in triples:
            relation_counts[r] = relation_counts.get(r, 0) + 1
            degrees[s] = degrees.get(s, 0) + 1
            degrees[o] = degrees.get(o, 0) + 1
        assert min(relation_counts.values()) >= 50
        assert min(degrees.values()) >= 1

    def test_total_quadruples_preserved(self):
        dataset, split, _ = self.split()
        before = len(dataset.all_quadruples())
        after = len(split.all_quadruples())
        assert before == after

    def test_alternation_balances_assignment(self):
        _, _, report = self.split()
        assert len(report.removed_valid) == 10
        assert len(report.removed_test) == 10

    def test_same_seed_byte_identical_output(self, tmp_path):
        _, split_a, report_a = self.split(seed=9)
        _, split_b, report_b = self.split(seed=9)
        dir_a, dir_b = str(tmp_path / "a"), str(tmp_path / "b")
        save_dataset(split_a, dir_a)
        save_dataset(split_b, dir_b)
        assert dataset_checksums(dir_a) == dataset_checksums(dir_b)
        assert report_a.to_text() == report_b.to_text()

    def test_different_seed_changes_split(self, tmp_path):
        _, _, report_a = self.split(seed=1)
        _, _, report_b = self.split(seed=2)
        assert report_a.removed_test != report_b.removed_test
