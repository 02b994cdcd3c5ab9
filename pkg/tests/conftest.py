import numpy as np
import pytest

from recap import CaptureMatrix

# (history, g rounded to 3 decimals, k=1 interval, k=2 interval) for t=5
T5_TABLE = [
    ("", "0", "[0,0.5]", "[0,0.25]"),
    ("0", "0", "[0,0.5]", "[0,0.25]"),
    ("1", "1", "(0.5,1]", "(0.75,1]"),
    ("00", "0", "[0,0.5]", "[0,0.25]"),
    ("10", "0.333", "[0,0.5]", "(0.25,0.5]"),
    ("01", "0.667", "(0.5,1]", "(0.5,0.75]"),
    ("11", "1", "(0.5,1]", "(0.75,1]"),
    ("000", "0", "[0,0.5]", "[0,0.25]"),
    ("100", "0.143", "[0,0.5]", "[0,0.25]"),
    ("010", "0.286", "[0,0.5]", "(0.25,0.5]"),
    ("110", "0.429", "[0,0.5]", "(0.25,0.5]"),
    ("001", "0.571", "(0.5,1]", "(0.5,0.75]"),
    ("101", "0.714", "(0.5,1]", "(0.5,0.75]"),
    ("011", "0.857", "(0.5,1]", "(0.75,1]"),
    ("111", "1", "(0.5,1]", "(0.75,1]"),
    ("0000", "0", "[0,0.5]", "[0,0.25]"),
    ("1000", "0.067", "[0,0.5]", "[0,0.25]"),
    ("0100", "0.133", "[0,0.5]", "[0,0.25]"),
    ("1100", "0.200", "[0,0.5]", "[0,0.25]"),
    ("0010", "0.267", "[0,0.5]", "(0.25,0.5]"),
    ("1010", "0.333", "[0,0.5]", "(0.25,0.5]"),
    ("0110", "0.400", "[0,0.5]", "(0.25,0.5]"),
    ("1110", "0.467", "[0,0.5]", "(0.25,0.5]"),
    ("0001", "0.533", "(0.5,1]", "(0.5,0.75]"),
    ("1001", "0.600", "(0.5,1]", "(0.5,0.75]"),
    ("0101", "0.667", "(0.5,1]", "(0.5,0.75]"),
    ("1101", "0.733", "(0.5,1]", "(0.5,0.75]"),
    ("0011", "0.800", "(0.5,1]", "(0.75,1]"),
    ("1011", "0.867", "(0.5,1]", "(0.75,1]"),
    ("0111", "0.933", "(0.5,1]", "(0.75,1]"),
    ("1111", "1", "(0.5,1]", "(0.75,1]"),
]

INTERVAL_INDEX = {
    "[0,0.5]": 1, "(0.5,1]": 2,
    "[0,0.25]": 1, "(0.25,0.5]": 2, "(0.5,0.75]": 3, "(0.75,1]": 4,
}

TABLE1_ROW = (0, 0, 1, 0, 0, 1, 1, 0, 0, 1)
TABLE1_Z = ["0", "0", "0", "4/7", "4/15", "4/31", "36/63", "100/127", "100/255", "100/511"]


def bits(s: str) -> tuple:
    return tuple(int(c) for c in s)


def random_capture_matrix(rng, m, t, p=0.35):
    rows = []
    while len(rows) < m:
        row = (rng.random(t) < p).astype(int)
        if row.any():
            rows.append(row)
    return CaptureMatrix(np.array(rows).reshape(m, t), t)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
