"""Core raster types.

Images are stored as 2-D numpy arrays in raster order (row 0 is the top
scanline).  All geometry elsewhere in the package uses mathematical
Cartesian coordinates: x is the column index and y grows upward, so
``y = (height - 1) - row``.  The converters at the bottom of this module
are the only place that mapping is written out.
"""

from __future__ import annotations

from typing import Iterable, NamedTuple

import numpy as np


class Point(NamedTuple):
    """Sub-pixel image location in Cartesian coordinates (y up)."""

    x: float
    y: float

    def shifted(self, dx: float, dy: float) -> "Point":
        return Point(self.x + dx, self.y + dy)

    def distance_to(self, other: "Point") -> float:
        return float(np.hypot(self.x - other.x, self.y - other.y))


class GrayImage:
    """8-bit grayscale raster.

    ``pixels`` is a read-only (height, width) uint8 array.  Instances are
    immutable; operations return new images, so values can be shared
    freely across threads.
    """

    __slots__ = ("pixels",)

    def __init__(self, pixels: np.ndarray):
        arr = np.asarray(pixels)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError("expected a non-empty 2-D pixel array")
        if arr.dtype != np.uint8:
            if arr.min() < 0 or arr.max() > 255:
                raise ValueError("intensities must lie in [0, 255]")
            arr = arr.astype(np.uint8)
        else:
            arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    def __setattr__(self, name, value):
        raise AttributeError("GrayImage is immutable")

    @classmethod
    def from_flat(cls, width: int, height: int, values: Iterable[int]) -> "GrayImage":
        data = np.fromiter(values, dtype=np.int64)
        if data.size != width * height:
            raise ValueError(
                f"expected {width * height} samples, got {data.size}"
            )
        return cls(data.reshape(height, width))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def flat(self) -> bytes:
        """Row-major samples as raw bytes."""
        return self.pixels.tobytes()

    def __eq__(self, other) -> bool:
        return isinstance(other, GrayImage) and np.array_equal(self.pixels, other.pixels)

    def __hash__(self):
        return hash((self.width, self.height, self.flat()))

    def __repr__(self) -> str:
        return f"GrayImage({self.width}x{self.height})"


class BinaryImage:
    """Raster of {0, 1}, same layout conventions as :class:`GrayImage`."""

    __slots__ = ("pixels",)

    def __init__(self, pixels: np.ndarray):
        arr = np.asarray(pixels)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError("expected a non-empty 2-D pixel array")
        if arr.dtype != np.bool_:
            if not np.isin(arr, (0, 1)).all():
                raise ValueError("binary image values must be 0 or 1")
            arr = arr.astype(bool)
        else:
            arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "pixels", arr)

    def __setattr__(self, name, value):
        raise AttributeError("BinaryImage is immutable")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def count(self) -> int:
        """Number of foreground (1) pixels."""
        return int(self.pixels.sum())

    def __eq__(self, other) -> bool:
        return isinstance(other, BinaryImage) and np.array_equal(self.pixels, other.pixels)

    def __hash__(self):
        return hash((self.width, self.height, self.pixels.tobytes()))

    def __repr__(self) -> str:
        return f"BinaryImage({self.width}x{self.height}, on={self.count()})"


def row_to_y(row, height: int):
    """Raster row index to Cartesian y (works elementwise on arrays)."""
    return (height - 1) - row


def y_to_row(y, height: int):
    """Cartesian y to raster row index (works elementwise on arrays)."""
    return (height - 1) - y
