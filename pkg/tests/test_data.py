import os

import pytest

from temt.data import (
    DatasetFormat,
    IntervalCategory,
    TimeInterval,
    TimeRange,
    dataset_checksums,
    expand_training_points,
    filter_evaluable,
    load_dataset,
    normalize_granularity,
    save_dataset,
    write_manifest,
)
from temt.errors import IngestionError, ResolutionError

from synth import make_dataset


def write_lines(path, lines):
    with open(path, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")


def write_dataset_dir(
    root,
    train,
    valid=("1\t0\t2\t1995\t1999",),
    test=("2\t0\t0\t2001\t2003",),
    entities=("0\tAlice", "1\tBob", "2\tCarol"),
    relations=("0\tworks_with",),
    descriptions=("0\tan engineer", "2\ta painter"),
):
    os.makedirs(root, exist_ok=True)
    write_lines(os.path.join(root, "train.tsv"), train)
    write_lines(os.path.join(root, "valid.tsv"), valid)
    write_lines(os.path.join(root, "test.tsv"), test)
    write_lines(os.path.join(root, "entities.tsv"), entities)
    write_lines(os.path.join(root, "relations.tsv"), relations)
    write_lines(os.path.join(root, "descriptions.tsv"), descriptions)
    return str(root)


class TestNormalizeGranularity:
    def test_full_date_drops_month_and_day(self):
        assert normalize_granularity("2009-01-20") == 2009

    def test_year_only(self):
        assert normalize_granularity("1871") == 1871

    def test_year_month(self):
        assert normalize_granularity("1955-11") == 1955

    def test_negative_year(self):
        assert normalize_granularity("-431") == -431

    def test_no_year_component(self):
        with pytest.raises(IngestionError):
            normalize_granularity("20-Jan")

    def test_empty(self):
        with pytest.raises(IngestionError):
            normalize_granularity("  ")


class TestTimeInterval:
    def test_categories(self):
        assert TimeInterval.from_endpoints(2009, 2017).category is IntervalCategory.CLOSED
        assert TimeInterval.from_endpoints(2009, None).category is IntervalCategory.RIGHT_OPEN
        assert TimeInterval.from_endpoints(None, 2017).category is IntervalCategory.LEFT_OPEN

    def test_both_absent_rejected(self):
        with pytest.raises(ValueError):
            TimeInterval.from_endpoints(None, None)

    def test_inverted_rejected(self):
        with pytest.raises(ValueError):
            TimeInterval.from_endpoints(2017, 2009)


class TestLoadDataset:
    def test_closed_row(self, tmp_path):
        root = write_dataset_dir(tmp_path, train=["0\t0\t1\t2009\t2017"])
        dataset = load_dataset(root)
        quad = dataset.train[0]
        assert quad.interval.category is IntervalCategory.CLOSED
        assert (quad.interval.start, quad.interval.end) == (2009, 2017)

    def test_right_open_row(self, tmp_path):
        root = write_dataset_dir(tmp_path, train=["0\t0\t1\t2009\t-", "0\t0\t2\t1990\t2000"])
        dataset = load_dataset(root)
        quad = dataset.train[0]
        assert quad.interval.category is IntervalCategory.RIGHT_OPEN
        assert quad.interval.start == 2009
        assert quad.interval.end is None

    def test_both_endpoints_absent_rejected(self, tmp_path):
        root = write_dataset_dir(tmp_path, train=["0\t0\t1\t-\t-"])
        with pytest.raises(IngestionError, match="train.tsv:1"):
            load_dataset(root)

    def test_wrong_column_count_names_file_and_line(self, tmp_path):
        root = write_dataset_dir(tmp_path, train=["0\t0\t1\t2000\t2001", "0\t0\t1\t2000"])
        with pytest.raises(IngestionError, match="train.tsv:2"):
            load_dataset(root)

    def test_unparsable_year(self, tmp_path):
        root = write_dataset_dir(tmp_path, train=["0\t0\t1\tsoon\t2001"])
        with pytest.raises(IngestionError, match="train.tsv:1"):
            load_dataset(root)

    def test_inverted_interval_rejected(self, tmp_path):
        root = write_dataset_dir(tmp_path, train=["0\t0\t1\t2010\t2001"])
        with pytest.raises(IngestionError, match="train.tsv:1"):
            load_dataset(root)

    def test_dangling_entity(self, tmp_path):
        root = write_dataset_dir(tmp_path, train=["0\t0\t9\t2000\t2001"])
        with pytest.raises(ResolutionError, match="entity id 9"):
            load_dataset(root)

    def test_dangling_relation(self, tmp_path):
        root = write_dataset_dir(tmp_path, train=["0\t7\t1\t2000\t2001"])
        with pytest.raises(ResolutionError, match="relation id 7"):
            load_dataset(root)

    def test_dates_normalized_to_years(self, tmp_path):
        root = write_dataset_dir(tmp_path, train=["0\t0\t1\t2009-01-20\t2017-06"])
        dataset = load_dataset(root)
        interval = dataset.train[0].interval
        assert (interval.start, interval.end) == (2009, 2017)

    def test_ids_remapped_in_first_occurrence_order(self, tmp_path):
        root = write_dataset_dir(
            tmp_path,
            train=["30\t5\t10\t2000\t2001"],
            valid=["10\t5\t30\t2002\t2003"],
            test=["30\t5\t10\t2004\t2005"],
            entities=["30\tZoe", "10\tAbe"],
            relations=["5\tknows"],
            descriptions=["10\tfirst person"],
        )
        dataset = load_dataset(root)
        assert [e.name for e in dataset.entities] == ["Zoe", "Abe"]
        assert dataset.train[0].subject == 0  # Zoe listed first
        assert dataset.train[0].object == 1

    def test_descriptions_attached_and_optional(self, tmp_path):
        root = write_dataset_dir(tmp_path, train=["0\t0\t1\t2000\t2001"])
        dataset = load_dataset(root)
        assert dataset.entity_description(0) == "an engineer"
        assert dataset.entity_description(1) == ""

    def test_time_range_from_train_only(self, tmp_path):
        root = write_dataset_dir(
            tmp_path,
            train=["0\t0\t1\t1990\t2000"],
            valid=["1\t0\t2\t1950\t1960"],
            test=["2\t0\t0\t2005\t2010"],
        )
        dataset = load_dataset(root)
        assert (dataset.time_range.t_min, dataset.time_range.t_max) == (1990, 2000)
        assert dataset.load_report["out_of_range_endpoints"] == 4

    def test_duplicate_quadruple_across_splits_rejected(self, tmp_path):
        root = write_dataset_dir(
            tmp_path,
            train=["0\t0\t1\t2000\t2001"],
            valid=["0\t0\t1\t2000\t2001"],
        )
        with pytest.raises(IngestionError, match="both train and valid"):
            load_dataset(root)

    def test_empty_entity_name_rejected(self, tmp_path):
        root = write_dataset_dir(
            tmp_path, train=["0\t0\t1\t2000\t2001"], entities=["0\t  ", "1\tBob"]
        )
        with pytest.raises(IngestionError, match="empty entity name"):
            load_dataset(root)


class TestRoundTrip:
    def test_save_then_load_is_identical(self, tmp_path):
        root = write_dataset_dir(
            tmp_path / "raw",
            train=["30\t5\t10\t2000-01-02\t2001", "10\t5\t30\t1995\t-"],
            valid=["30\t5\t10\t1996\t1997"],
            test=["10\t5\t30\t-\t1999"],
            entities=["30\tZoe", "10\tAbe"],
            relations=["5\tknows"],
            descriptions=["10\tfirst person"],
        )
        first = load_dataset(root)
        out = str(tmp_path / "normalized")
        save_dataset(first, out)
        second = load_dataset(out)
        assert first.entities == second.entities
        assert first.relations == second.relations
        assert first.train == second.train
        assert first.valid == second.valid
        assert first.test == second.test
        assert first.time_range == second.time_range
        # Saving again reproduces the files byte for byte.
        out2 = str(tmp_path / "again")
        save_dataset(second, out2)
        assert dataset_checksums(out) == dataset_checksums(out2)

    def test_manifest_contents(self, tmp_path):
        root = write_dataset_dir(tmp_path / "raw", train=["0\t0\t1\t1990\t2000"])
        dataset = load_dataset(root)
        out = str(tmp_path / "norm")
        save_dataset(dataset, out)
        manifest = write_manifest(dataset, out)
        body = open(manifest, encoding="utf-8").read()
        assert "granularity = year" in body
        assert "t_min = 1990" in body
        assert "t_max = 2000" in body
        assert "checksum.train.tsv" in body


class TestExpandTrainingPoints:
    def make(self, rows):
        names = [f"e{i}" for i in range(4)]
        return make_dataset(names, ["r"], rows)

    def test_closed_interval_gives_two_points(self):
        dataset = self.make([(0, 0, 1, 2009, 2017)])
        points = expand_training_points(dataset.train)
        assert [(p.year, p.endpoint) for p in points] == [(2009, "start"), (2017, "end")]

    def test_degenerate_closed_interval_gives_one_point(self):
        dataset = self.make([(0, 0, 1, 2009, 2009), (0, 0, 2, 2000, 2010)])
        points = expand_training_points(dataset.train)
        assert [(p.year, p.endpoint) for p in points[:1]] == [(2009, "start")]
        assert len(points) == 3

    def test_open_interval_gives_one_point(self):
        dataset = self.make([(0, 0, 1, 1871, None), (0, 0, 2, 1800, 1900)])
        points = expand_training_points(dataset.train)
        assert (points[0].year, points[0].endpoint) == (1871, "start")

    def test_size_accounting(self):
        rows = [
            (0, 0, 1, 2000, 2005),
            (1, 0, 2, 2001, None),
            (2, 0, 3, None, 2002),
            (3, 0, 0, 1999, 2004),
        ]
        dataset = self.make(rows)
        points = expand_training_points(dataset.train)
        assert len(points) == 2 * 2 + 1 * 2  # two closed, two open

    def test_clamping_into_range(self):
        dataset = self.make([(0, 0, 1, 2000, 2010)])
        points = expand_training_points(
            [dataset.train[0], dataset.train[0]], TimeRange(2002, 2005)
        )
        assert all(2002 <= p.year <= 2005 for p in points)


class TestFilterEvaluable:
    def test_keeps_only_closed(self):
        rows = [
            (0, 0, 1, 2000, 2005),
            (1, 0, 2, 2001, None),
            (2, 0, 3, None, 2002),
            (3, 0, 0, 1999, 1999),
        ]
        dataset = self.make_dataset(rows)
        kept = filter_evaluable(dataset.train)
        assert len(kept) == 2
        assert all(q.interval.is_closed for q in kept)

    def test_identity_on_all_closed(self):
        dataset = self.make_dataset([(0, 0, 1, 2000, 2005), (1, 0, 2, 2001, 2002)])
        assert filter_evaluable(dataset.train) == dataset.train

    def test_all_open_set_warns_and_empties(self, caplog):
        dataset = self.make_dataset([(0, 0, 1, 2000, 2005), (1, 0, 2, 2001, None)])
        with caplog.at_level("WARNING", logger="temt.data"):
            result = filter_evaluable(dataset.train[1:])
        assert result == []
        assert any("empty" in rec.message for rec in caplog.records)

    @staticmethod
    def make_dataset(rows):
        names = [f"e{i}" for i in range(4)]
        return make_dataset(names, ["r"], rows)


def test_format_override(tmp_path):
    fmt = DatasetFormat(train_file="tr.tsv", valid_file="va.tsv", test_file="te.tsv")
    root = tmp_path / "alt"
    os.makedirs(root)
    write_lines(os.path.join(root, "tr.tsv"), ["0\t0\t1\t2000\t2001"])
    write_lines(os.path.join(root, "va.tsv"), ["1\t0\t0\t2000\t2001"])
    write_lines(os.path.join(root, "te.tsv"), ["0\t0\t1\t2002\t2003"])
    write_lines(os.path.join(root, "entities.tsv"), ["0\tA", "1\tB"])
    write_lines(os.path.join(root, "relations.tsv"), ["0\tr"])
    write_lines(os.path.join(root, "descriptions.tsv"), ["0\tsomething"])
    dataset = load_dataset(str(root), fmt)
    assert len(dataset.train) == 1
