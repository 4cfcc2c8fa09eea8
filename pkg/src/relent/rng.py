"""Counter-based random streams.

Draw ``t`` of stream ``(seed, stream)`` is a pure function of those three
integers, so any batch split of the index range reproduces the serial result.
"""
import numpy as np

# Philox emits four 64-bit words per counter step
_WORDS_PER_STEP = 4


def uniforms(seed: int, stream: int, start: int, count: int) -> np.ndarray:
    """Uniform doubles number ``start .. start+count-1`` of the keyed stream."""
    bg = np.random.Philox(key=[int(seed) & 0xFFFFFFFFFFFFFFFF, int(stream) & 0xFFFFFFFFFFFFFFFF])
    skip, offset = divmod(int(start), _WORDS_PER_STEP)
    if skip:
        bg.advance(skip)
    return np.random.Generator(bg).random(offset + count)[offset:]


def uniform_rows(seed: int, stream: int, first_row: int, n_rows: int, width: int) -> np.ndarray:
    """Rows of ``width`` uniforms; row ``i`` belongs to sample index ``i``."""
    return uniforms(seed, stream, first_row * width, n_rows * width).reshape(n_rows, width)


# stream identifiers; kept distinct so experiments never share draws
STREAM_PATH = 1
STREAM_FACTOR = 2
STREAM_FIRST = 3
STREAM_SECOND = 4
STREAM_SWITCH = 5
STREAM_BOOTSTRAP = 6
STREAM_OMEGA = 7
STREAM_ITINERARY = 8
