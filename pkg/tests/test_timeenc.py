import math

import numpy as np
import pytest

from temt.data import TimeRange
from temt.errors import ConfigError
from temt.timeenc import encode_time, time_embedding_table


RANGE = TimeRange(1400, 2000)


def test_origin_year_alternates_zero_one():
    emb = encode_time(RANGE.t_min, RANGE, 8)
    assert np.array_equal(emb, np.array([0.0, 1.0] * 4))


def test_two_dim_offset_one_matches_scalar_evaluation():
    emb = encode_time(RANGE.t_min + 1, RANGE, 2)
    assert emb == pytest.approx([math.sin(1.0), math.cos(1.0)], abs=1e-12)


def test_component_layout_matches_definition():
    d_prime = 6
    year = RANGE.t_min + 42
    emb = encode_time(year, RANGE, d_prime)
    for i in range(d_prime // 2):
        angle = 42 / 10000 ** (i / d_prime)
        assert emb[2 * i] == pytest.approx(math.sin(angle), abs=1e-12)
        assert emb[2 * i + 1] == pytest.approx(math.cos(angle), abs=1e-12)


def test_components_bounded():
    emb = encode_time(1999, RANGE, 64)
    assert np.all(np.abs(emb) <= 1.0)


def test_odd_dimension_rejected():
    with pytest.raises(ConfigError):
        encode_time(1500, RANGE, 7)
    with pytest.raises(ConfigError):
        encode_time(1500, RANGE, 0)


def test_distinct_years_distinct_vectors():
    years = list(range(1400, 1900, 13))
    embs = [encode_time(y, RANGE, 64) for y in years]
    for i in range(len(years)):
        for j in range(i + 1, len(years)):
            assert not np.allclose(embs[i], embs[j])


def test_inner_product_depends_only_on_offset():
    for t, k in [(1400, 3), (1500, 3), (1700, 50), (1410, 250)]:
        a = encode_time(t, RANGE, 64) @ encode_time(t + k, RANGE, 64)
        b = encode_time(t + 123, RANGE, 64) @ encode_time(t + 123 + k, RANGE, 64)
        assert a == pytest.approx(b, abs=1e-9)


def test_inner_product_decays_over_small_offsets():
    base = encode_time(1600, RANGE, 64)
    products = [base @ encode_time(1600 + k, RANGE, 64) for k in range(11)]
    assert all(earlier > later for earlier, later in zip(products, products[1:]))


def test_table_matches_per_year_encoding():
    table = time_embedding_table(RANGE, 32)
    assert table.shape == (len(RANGE), 32)
    for year in (1400, 1567, 2000):
        assert np.array_equal(table[year - RANGE.t_min], encode_time(year, RANGE, 32))
