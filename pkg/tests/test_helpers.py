"""(c) 2025, hybrid-sape authors.
"""

import gzip

from app.utils.helpers import (
    file_checksum,
    generate_hash,
    init,
    parallel_map,
    read_gzip_lines,
    write_gzip_lines,
    write_lines,
)


def test_generate_hash():
    # Test with a simple dictionary
    test_data = {"key": "value", "number": 123}
    hash_result = generate_hash(test_data)

    # Test that the hash is a string
    assert isinstance(hash_result, str)

    # Test that the hash has the correct length (MD5 produces 32 character hashes)
    assert len(hash_result) == 32

    # Test that the same input produces the same hash
    assert generate_hash(test_data) == hash_result

    # Test that key order does not matter
    assert generate_hash({"number": 123, "key": "value"}) == hash_result

    # Test that different inputs produce different hashes
    different_data = {"key": "different", "number": 456}
    assert generate_hash(different_data) != hash_result


def test_init_creates_directory(tmp_path):
    target = tmp_path / "a" / "b"
    init(str(target))
    assert target.is_dir()
    # second call is a no-op
    init(str(target))


def test_write_lines_and_checksum(tmp_path):
    path = str(tmp_path / "out.txt")
    write_lines(path, ["a b", "c"])
    with open(path, encoding="utf-8") as handle:
        assert handle.read() == "a b\nc\n"
    assert len(file_checksum(path)) == 64

    other = str(tmp_path / "other.txt")
    write_lines(other, ["a b", "c"])
    assert file_checksum(other) == file_checksum(path)


def test_gzip_lines_are_byte_stable(tmp_path):
    first, second = str(tmp_path / "1.gz"), str(tmp_path / "2.gz")
    write_gzip_lines(first, ["x ||| y", "ñ"])
    write_gzip_lines(second, ["x ||| y", "ñ"])
    with open(first, "rb") as a, open(second, "rb") as b:
        assert a.read() == b.read()
    assert read_gzip_lines(first) == ["x ||| y", "ñ"]
    with gzip.open(first, "rt", encoding="utf-8") as handle:
        assert handle.read() == "x ||| y\nñ\n"


def _square(x):
    return x * x


def test_parallel_map_keeps_order():
    items = list(range(20))
    assert parallel_map(_square, items) == [x * x for x in items]
    assert parallel_map(_square, items, threads=2) == [x * x for x in items]
    assert parallel_map(_square, []) == []


def test_parallel_map_runs_initializer_in_process(mocker):
    initializer = mocker.Mock()
    parallel_map(_square, [1, 2], threads=1, initializer=initializer, initargs=(5,))
    initializer.assert_called_once_with(5)
