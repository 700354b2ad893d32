import pytest

from iclens import DataError, Role, TokenSegmentation, canonical_segmentation


def test_canonical_layout_sets():
    seg = canonical_segmentation(2, context_per_ice=2)
    # BOS + 2*(image, c, c, period, delim) + image + 2 cue tokens
    assert len(seg) == 1 + 2 * 5 + 3
    assert seg.n_ices == 2
    assert seg.query_set == (len(seg) - 2, len(seg) - 1)
    assert set(seg.anchor_set).isdisjoint(seg.context_set)
    assert set(seg.anchor_set).isdisjoint(seg.query_set)
    assert seg.ice_context_tokens(0) == (2, 3)
    assert seg.ice_tokens(0) == (1, 2, 3, 4, 5)


def test_last_two_must_be_query():
    with pytest.raises(DataError, match="query"):
        TokenSegmentation((Role.BOS, Role.QUERY, Role.PERIOD), (None, None, 0))


def test_context_requires_ice_index():
    with pytest.raises(DataError, match="ice_index"):
        TokenSegmentation(
            (Role.BOS, Role.CONTEXT_TEXT, Role.QUERY, Role.QUERY),
            (None, None, None, None),
        )


def test_non_contiguous_ice_rejected():
    roles = (Role.BOS, Role.CONTEXT_TEXT, Role.CONTEXT_TEXT, Role.CONTEXT_TEXT, Role.QUERY, Role.QUERY)
    with pytest.raises(DataError, match="contiguous"):
        TokenSegmentation(roles, (None, 0, 1, 0, None, None))


def test_ice_indices_must_start_at_zero():
    roles = (Role.BOS, Role.CONTEXT_TEXT, Role.QUERY, Role.QUERY)
    with pytest.raises(DataError, match="indices"):
        TokenSegmentation(roles, (None, 1, None, None))


def test_query_role_cannot_carry_ice():
    roles = (Role.BOS, Role.QUERY, Role.QUERY)
    with pytest.raises(DataError, match="ICE"):
        TokenSegmentation(roles, (None, 0, None))


def test_records_roundtrip():
    seg = canonical_segmentation(3, context_per_ice=2)
    back = TokenSegmentation.from_records(seg.to_records())
    assert back == seg


def test_record_index_mismatch():
    seg = canonical_segmentation(1)
    records = seg.to_records()
    records[1]["index"] = 5
    with pytest.raises(DataError, match="index"):
        TokenSegmentation.from_records(records)


def test_unknown_role_rejected():
    seg = canonical_segmentation(1)
    records = seg.to_records()
    records[0]["role"] = "mystery"
    with pytest.raises(DataError, match="role"):
        TokenSegmentation.from_records(records)
