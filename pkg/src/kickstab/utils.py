"""
Utility functions for kickstab
"""

import csv
import functools
import hashlib
import json
import math
from collections.abc import Iterable, Sequence
from typing import TYPE_CHECKING, Any

import numpy

from kickstab.types import ConfigurationError, InputError

if TYPE_CHECKING:
	from kickstab.types import FloatArray

# kicks and orbit chunks are produced in blocks of this many indices
BLOCK_SIZE = 4096


def reduce_mod1(x: 'FloatArray | float') -> 'FloatArray':
	"""
	x - floor(x), folded into [0, 1).

	A tiny negative input rounds to 1.0 under this formula, so that value is mapped back to 0.
	"""
	arr = numpy.asarray(x, dtype=numpy.float64)
	r = arr - numpy.floor(arr)
	return numpy.where(r >= 1.0, 0.0, r)


def circle_distance(a: 'FloatArray | float', b: 'FloatArray | float') -> 'FloatArray':
	"""
	coordinatewise distance on R/Z
	"""
	d = reduce_mod1(numpy.asarray(a) - numpy.asarray(b))
	return numpy.minimum(d, 1.0 - d)


def compensated_cumsum(values: 'FloatArray') -> 'FloatArray':
	"""
	Prefix sums along axis 0.

	Inside a block of BLOCK_SIZE rows plain float64 cumsum is used; the block
	offsets are accumulated with math.fsum so the error does not grow with the
	number of blocks.
	"""
	arr = numpy.asarray(values, dtype=numpy.float64)
	if arr.shape[0] == 0:
		return arr.copy()
	flat = arr.reshape(arr.shape[0], -1)
	out = numpy.empty_like(flat)
	for col in range(flat.shape[1]):
		totals: list[float] = []
		for start in range(0, flat.shape[0], BLOCK_SIZE):
			block = flat[start : start + BLOCK_SIZE, col]
			offset = math.fsum(totals)
			out[start : start + BLOCK_SIZE, col] = offset + numpy.cumsum(block)
			totals.append(math.fsum(block))
	return out.reshape(arr.shape)


@functools.lru_cache(maxsize=64)
def block_uniforms(seed: int, block: int, width: int) -> 'FloatArray':
	"""
	Uniform draws for one block of indices.

	The stream of block b depends on (seed, b) only, so any index can be
	regenerated without replaying the ones before it.
	"""
	rng = numpy.random.default_rng(numpy.random.SeedSequence([seed, block]))
	draws = rng.random((BLOCK_SIZE, width))
	draws.setflags(write=False)
	return draws


def indexed_uniforms(seed: int, start: int, stop: int, width: int = 1) -> 'FloatArray':
	"""
	uniform rows for the zero-based indices start..stop-1
	"""
	if stop <= start:
		return numpy.empty((0, width))
	first, last = start // BLOCK_SIZE, (stop - 1) // BLOCK_SIZE
	rows = numpy.concatenate([block_uniforms(seed, b, width) for b in range(first, last + 1)])
	offset = first * BLOCK_SIZE
	return rows[start - offset : stop - offset]


def parse_grid(text: str) -> 'FloatArray':
	"""
	'a:b:n' -> n points from a to b inclusive
	"""
	parts = text.split(':')
	if len(parts) != 3:
		raise ConfigurationError(f'grid must look like a:b:n, got {text!r}')
	try:
		a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
	except ValueError as e:
		raise ConfigurationError(f'cannot parse grid {text!r}: {e}') from e
	if n < 1:
		raise ConfigurationError('grid needs at least one point')
	if n == 1:
		return numpy.array([a])
	return numpy.linspace(a, b, n)


def parse_window(text: str) -> tuple[int, int]:
	parts = text.split(':')
	if len(parts) != 2:
		raise ConfigurationError(f'window must look like nmin:nmax, got {text!r}')
	try:
		lo, hi = int(parts[0]), int(parts[1])
	except ValueError as e:
		raise ConfigurationError(f'cannot parse window {text!r}: {e}') from e
	check_window((lo, hi))
	return lo, hi


def check_window(window: Sequence[int]) -> tuple[int, int]:
	lo, hi = int(window[0]), int(window[1])
	if lo < 1 or hi < lo:
		raise InputError(f'empty or invalid window [{lo}, {hi}]')
	return lo, hi


def sha256_file(path: str) -> str:
	h = hashlib.sha256()
	with open(path, 'rb') as f:
		for chunk in iter(lambda: f.read(1 << 16), b''):
			h.update(chunk)
	return h.hexdigest()


def format_value(value: Any) -> str:
	# repr gives the shortest round-tripping form, which keeps outputs byte-stable
	if isinstance(value, bool):
		return 'true' if value else 'false'
	if isinstance(value, (float, numpy.floating)):
		return repr(float(value))
	if isinstance(value, (int, numpy.integer)):
		return str(int(value))
	return str(value)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
	"""
	UTF-8, RFC-4180 quoting and CRLF line endings; header first, field order fixed.
	"""
	with open(path, 'w', encoding='utf-8', newline='') as f:
		writer = csv.writer(f, lineterminator='\r\n', quoting=csv.QUOTE_MINIMAL)
		writer.writerow(header)
		for row in rows:
			if len(row) != len(header):
				raise ValueError(f'row has {len(row)} fields, header has {len(header)}')
			writer.writerow([format_value(v) for v in row])


def to_jsonable(value: Any) -> Any:
	if isinstance(value, dict):
		return {str(k): to_jsonable(v) for k, v in value.items()}
	if isinstance(value, (list, tuple)):
		return [to_jsonable(v) for v in value]
	if isinstance(value, numpy.ndarray):
		return [to_jsonable(v) for v in value.tolist()]
	if isinstance(value, (numpy.bool_, bool)):
		return bool(value)
	if isinstance(value, (numpy.integer,)):
		return int(value)
	if isinstance(value, (numpy.floating, float)):
		v = float(value)
		# keep the files strict JSON
		if math.isnan(v) or math.isinf(v):
			return str(v)
		return v
	return value


def write_json(path: str, data: Any) -> None:
	with open(path, 'w', encoding='utf-8', newline='\n') as f:
		json.dump(to_jsonable(data), f, sort_keys=True, indent=2, allow_nan=False)
		f.write('\n')
