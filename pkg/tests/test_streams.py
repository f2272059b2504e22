import numpy as np

from imfid.streams import BLOCK, block_sizes, run_blocks, uniforms


def test_block_sizes_cover_request():
    assert block_sizes(10) == [10]
    sizes = block_sizes(3 * BLOCK + 7)
    assert sum(sizes) == 3 * BLOCK + 7 and all(s <= BLOCK for s in sizes)


def test_uniforms_independent_of_worker_count():
    a = uniforms(5, 3 * BLOCK + 11, workers=1)
    b = uniforms(5, 3 * BLOCK + 11, workers=4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, uniforms(6, 3 * BLOCK + 11))


def test_offset_continues_the_stream():
    full = run_blocks(lambda rng, n: rng.random(n), 1, [BLOCK] * 3, workers=2)
    tail = run_blocks(lambda rng, n: rng.random(n), 1, [BLOCK], workers=1, offset=2)
    assert np.array_equal(full[2], tail[0])
