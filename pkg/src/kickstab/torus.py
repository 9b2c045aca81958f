"""
Kicked Kronecker flows on the d-torus: closed-form evolutions, Weyl sums,
their mean square over the period, star discrepancy and the valuation
schedule that breaks equidistribution.
"""

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

import numpy
import scipy.special

from kickstab.core import Arena, KickedSystem, KickSchedule, indexed_schedule, random_schedule
from kickstab.types import ConfigurationError, InputError, UnsupportedError
from kickstab.utils import circle_distance, compensated_cumsum, reduce_mod1

if TYPE_CHECKING:
	from kickstab.types import FloatArray, Observable

logger = logging.getLogger(__name__)

DISCREPANCY_THRESHOLD = 0.05
HIT_TOLERANCE = 1e-9


@dataclass(frozen=True)
class FrequencyVector:
	"""
	Frequency of the Kronecker flow.

	Irrationality cannot be certified in floating point, so float input is only
	*asserted* generic. Rational input keeps its integer numerators over a common
	denominator so resonances h . omega = 0 are decided exactly.
	"""

	values: tuple[float, ...]
	certified: bool = False
	numerators: tuple[int, ...] | None = None
	denominator: int | None = None

	def __post_init__(self) -> None:
		if len(self.values) < 1:
			raise InputError('a frequency vector needs at least one component')

	@classmethod
	def asserted_generic(cls, values: Sequence[float]) -> 'FrequencyVector':
		return cls(tuple(float(v) for v in values))

	@classmethod
	def rational(cls, numerators: Sequence[int], denominator: int) -> 'FrequencyVector':
		if denominator <= 0:
			raise InputError('the common denominator must be positive')
		nums = tuple(int(n) for n in numerators)
		return cls(tuple(n / denominator for n in nums), True, nums, int(denominator))

	@property
	def dim(self) -> int:
		return len(self.values)

	@property
	def array(self) -> 'FloatArray':
		return numpy.array(self.values)

	def resonant(self, h: Sequence[int]) -> bool:
		"""
		exact test of h . omega = 0; always False for asserted-generic vectors
		"""
		if not self.certified:
			return False
		assert self.numerators is not None
		return sum(int(a) * b for a, b in zip(h, self.numerators)) == 0


def as_frequency(omega: 'FrequencyVector | Sequence[float] | float') -> FrequencyVector:
	if isinstance(omega, FrequencyVector):
		return omega
	return FrequencyVector.asserted_generic(numpy.atleast_1d(numpy.asarray(omega, dtype=float)).tolist())


class TorusArena(Arena):
	"""
	R^d/Z^d with the Kronecker flow x -> x + t omega; kicks are translation vectors.
	"""

	name = 'torus'

	def __init__(self, omega: 'FrequencyVector | Sequence[float] | float') -> None:
		self.omega = as_frequency(omega)
		self.dim = self.omega.dim

	def flow(self, t: float, points: 'FloatArray') -> 'FloatArray':
		return reduce_mod1(points + t * self.omega.array)

	def act(self, kick: Any, points: 'FloatArray') -> 'FloatArray':
		return reduce_mod1(points + numpy.asarray(kick))

	def identity(self) -> 'FloatArray':
		return numpy.zeros(self.dim)

	def inverse(self, kick: Any) -> 'FloatArray':
		return reduce_mod1(-numpy.asarray(kick, dtype=float))

	def validate(self, points: Any) -> 'FloatArray':
		return reduce_mod1(super().validate(points))

	def normalize(self, points: 'FloatArray') -> 'FloatArray':
		return reduce_mod1(points)

	def distance(self, p: 'FloatArray', q: 'FloatArray') -> 'FloatArray':
		return numpy.linalg.norm(circle_distance(p, q), axis=-1)

	def sample_uniform(self, rng: numpy.random.Generator, n: int) -> 'FloatArray':
		return rng.random((n, self.dim))

	def grid(self, resolution: int) -> tuple['FloatArray', 'FloatArray']:
		# midpoint rule, exact for trigonometric polynomials of degree below m
		m = resolution if self.dim == 1 else max(64, int(resolution ** (1.0 / self.dim)))
		axis = (numpy.arange(m) + 0.5) / m
		mesh = numpy.meshgrid(*([axis] * self.dim), indexing='ij')
		nodes = numpy.stack([g.ravel() for g in mesh], axis=-1)
		return nodes, numpy.full(nodes.shape[0], 1.0 / nodes.shape[0])

	def ball_measure(self, radius: float) -> float:
		if not 0 < radius <= 0.5:
			raise InputError('balls on the unit torus need a radius in (0, 1/2]')
		d = self.dim
		return float(math.pi ** (d / 2) / scipy.special.gamma(d / 2 + 1) * radius**d)


def translation_schedule(seed: int, dim: int = 1, scale: float = 1.0) -> KickSchedule:
	"""
	independent uniform translations by scale * U[0,1)^d
	"""

	def translate(u: 'FloatArray') -> 'FloatArray':
		return reduce_mod1(scale * u)

	return random_schedule(seed, sampler=translate, width=dim, name=f'random-translations(seed={seed})')


def _kick_array(kicks: KickSchedule, k: int, dim: int) -> 'FloatArray':
	if k == 0:
		return numpy.zeros((0, dim))
	return numpy.asarray(kicks.kicks(1, k + 1), dtype=numpy.float64).reshape(k, dim)


def kick_prefix_sums(kicks: KickSchedule, k: int, dim: int) -> 'FloatArray':
	"""
	rows alpha_0 .. alpha_k of the kick prefix sums, reduced mod 1
	"""
	alpha = numpy.zeros((k + 1, dim))
	if k:
		steps = _kick_array(kicks, k, dim)
		# integer parts do not matter mod 1; centred steps keep the partial sums small
		alpha[1:] = compensated_cumsum(steps - numpy.round(steps))
	return reduce_mod1(alpha)


def torus_evolution_point(
	omega: 'FrequencyVector | Sequence[float] | float',
	tau: float,
	kicks: KickSchedule,
	k: int,
	x0: Any,
) -> 'FloatArray':
	"""
	f^(k)(x0) = x0 + alpha_k + k tau omega mod 1, alpha_k = beta_1 + ... + beta_k.
	"""
	if k < 0:
		raise InputError(f'k must be nonnegative, got {k}')
	w = as_frequency(omega)
	x = reduce_mod1(numpy.atleast_1d(numpy.asarray(x0, dtype=float)))
	if k == 0:
		return x
	alpha = kick_prefix_sums(kicks, k, w.dim)[-1]
	return reduce_mod1(x + alpha + reduce_mod1(k * tau * w.array))


def _torus_parts(system: KickedSystem) -> TorusArena:
	if not isinstance(system.arena, TorusArena):
		raise UnsupportedError('closed-form torus evolutions need a TorusArena system')
	return system.arena


def torus_orbit(system: KickedSystem, x0: Any, N: int) -> 'FloatArray':
	"""
	rows f^(0)(x0) .. f^(N)(x0) from the closed form, vectorized
	"""
	arena = _torus_parts(system)
	if N < 1:
		raise InputError(f'horizon must be at least 1, got {N}')
	x = reduce_mod1(numpy.atleast_1d(numpy.asarray(x0, dtype=float)))
	alpha = kick_prefix_sums(system.kicks, N, arena.dim)
	drift = reduce_mod1(numpy.outer(numpy.arange(N + 1) * system.tau, arena.omega.array))
	return reduce_mod1(x + alpha + drift)


@dataclass
class WeylSumResult:
	h: tuple[int, ...]
	N: int
	tau: float
	value: complex

	@property
	def modulus(self) -> float:
		return abs(self.value)


def _check_h(h: Sequence[int] | int, dim: int) -> 'numpy.ndarray':
	harr = numpy.atleast_1d(numpy.asarray(h, dtype=numpy.int64))
	if harr.shape != (dim,):
		raise InputError(f'h must have {dim} integer components')
	if not numpy.any(harr):
		raise InputError('h must be a nonzero integer vector')
	return harr


def weyl_sum(h: Sequence[int] | int, system: KickedSystem, x0: Any, N: int) -> WeylSumResult:
	"""
	S_h(N, tau) = (1/N) sum_{k=1}^N exp(2 pi i h . f^(k)(x0)).
	"""
	arena = _torus_parts(system)
	harr = _check_h(h, arena.dim)
	orbit = torus_orbit(system, x0, N)[1:]
	phases = reduce_mod1(orbit @ harr)
	value = complex(numpy.mean(numpy.exp(2j * numpy.pi * phases)))
	return WeylSumResult(tuple(int(v) for v in harr), N, system.tau, value)


def mean_square_weyl(
	h: Sequence[int] | int,
	kicks: KickSchedule,
	omega: 'FrequencyVector | Sequence[float] | float',
	interval: Sequence[float],
	N: int,
	grid_size: int = 10_000,
	diagonal_only: bool = False,
	chunk: int = 256,
) -> float:
	"""
	Composite midpoint rule for the integral of |S_h(N, tau)|^2 over tau in [a, b].

	|S_h| does not depend on the starting point, so x0 = 0 is used.
	With @diagonal_only the cross terms k != l are dropped, which leaves (b - a)/N.
	"""
	w = as_frequency(omega)
	harr = _check_h(h, w.dim)
	a, b = float(interval[0]), float(interval[1])
	if not a < b:
		raise InputError(f'empty interval [{a}, {b}]')
	if grid_size < 2:
		raise InputError('the quadrature grid needs at least two points')
	if N < 1:
		raise InputError(f'N must be at least 1, got {N}')
	if w.resonant(harr.tolist()):
		raise ConfigurationError(f'h . omega = 0 for h={harr.tolist()}; the mean-square bound does not apply')
	kick_phase = numpy.exp(2j * numpy.pi * reduce_mod1(kick_prefix_sums(kicks, N, w.dim)[1:] @ harr))
	freq = float(harr @ w.array)
	width = (b - a) / grid_size
	taus = a + (numpy.arange(grid_size) + 0.5) * width
	ks = numpy.arange(1, N + 1)
	total = 0.0
	for start in range(0, grid_size, chunk):
		block = taus[start : start + chunk]
		terms = numpy.exp(2j * numpy.pi * reduce_mod1(numpy.outer(block * freq, ks))) * kick_phase
		if diagonal_only:
			sq = numpy.sum(numpy.abs(terms) ** 2, axis=1) / N**2
		else:
			sq = numpy.abs(numpy.sum(terms, axis=1) / N) ** 2
		total += math.fsum(sq)
	return total * width


def mean_square_weyl_analytic(
	h: Sequence[int] | int,
	omega: 'FrequencyVector | Sequence[float] | float',
	interval: Sequence[float],
	N: int,
) -> float:
	"""
	Exact integral of |S_h(N, tau)|^2 over [a, b] for a kick-free system:
	(1/N^2) [N (b - a) + 2 sum_{m=1}^{N-1} (N - m) (sin 2 pi m w b - sin 2 pi m w a)/(2 pi m w)], w = h . omega.
	"""
	w = as_frequency(omega)
	harr = _check_h(h, w.dim)
	a, b = float(interval[0]), float(interval[1])
	freq = float(harr @ w.array)
	if freq == 0.0:
		return b - a
	m = numpy.arange(1, N)
	cross = (N - m) * (numpy.sin(2 * numpy.pi * m * freq * b) - numpy.sin(2 * numpy.pi * m * freq * a)) / (2 * numpy.pi * m * freq)
	return (N * (b - a) + 2.0 * math.fsum(cross)) / N**2


def discrepancy_1d(points: Any, N: int | None = None) -> float:
	"""
	Star discrepancy of the first N points of a one-dimensional sequence in [0, 1):
	D* = max_i max(i/N - x_(i), x_(i) - (i-1)/N) over the sorted points.
	"""
	arr = numpy.asarray(points, dtype=float)
	if arr.ndim == 2:
		if arr.shape[1] != 1:
			raise UnsupportedError('star discrepancy is only computed for d = 1; use Weyl sums in higher dimension')
		arr = arr[:, 0]
	elif arr.ndim != 1:
		raise UnsupportedError('star discrepancy is only computed for d = 1')
	if N is not None:
		arr = arr[:N]
	n = arr.shape[0]
	if n == 0:
		raise InputError('no points')
	xs = numpy.sort(reduce_mod1(arr))
	i = numpy.arange(1, n + 1)
	return float(max(numpy.max(i / n - xs), numpy.max(xs - (i - 1) / n)))


def equidistribution_verdict(points: Any, threshold: float = DISCREPANCY_THRESHOLD) -> bool:
	return discrepancy_1d(points) < threshold


def one_plus_valuation(k: int) -> int:
	"""
	1 + (2-adic valuation of k); the preimage of n has density 2^-n
	"""
	if k < 1:
		raise InputError('the valuation is taken of positive integers')
	return (k & -k).bit_length()


def burago_kicks(
	omega: 'FrequencyVector | Sequence[float] | float',
	u: Callable[[int], int] | None = None,
) -> KickSchedule:
	"""
	Kicks beta_k = alpha_k - alpha_{k-1} with alpha_k = -u(k) k omega mod 1.

	The evolution becomes f^(k)(tau) = k (tau - u(k)) omega mod 1, so for an
	integer period tau the orbit of 0 sits exactly at 0 whenever u(k) = tau.
	"""
	w = as_frequency(omega)
	valuation = u if u is not None else one_plus_valuation

	def alpha(k: int) -> 'FloatArray':
		if k == 0:
			return numpy.zeros(w.dim)
		return reduce_mod1(-float(valuation(k) * k) * w.array)

	def beta(k: int) -> 'FloatArray':
		return reduce_mod1(alpha(k) - alpha(k - 1))

	return indexed_schedule(beta, name='burago')


def burago_evolution(omega: 'FrequencyVector | Sequence[float] | float', tau: float, ks: Any, u: Callable[[int], int] | None = None) -> 'FloatArray':
	"""
	closed form k (tau - u(k)) omega mod 1 for an array of indices
	"""
	w = as_frequency(omega)
	valuation = u if u is not None else one_plus_valuation
	karr = numpy.atleast_1d(numpy.asarray(ks, dtype=numpy.int64))
	us = numpy.array([valuation(int(k)) for k in karr], dtype=float)
	return reduce_mod1(numpy.outer(karr * (tau - us), w.array))


@dataclass
class BuragoReport:
	tau: float
	N: int
	hits: int
	discrepancy: float

	@property
	def frequency(self) -> float:
		return self.hits / self.N

	@property
	def equidistributed(self) -> bool:
		return self.discrepancy < DISCREPANCY_THRESHOLD


def burago_hit_frequency(
	omega: 'FrequencyVector | Sequence[float] | float',
	tau: float,
	N: int,
	u: Callable[[int], int] | None = None,
	tolerance: float = HIT_TOLERANCE,
) -> BuragoReport:
	"""
	Counts k in 1..N with f^(k)(0) within @tolerance of 0, replaying the kicks.
	"""
	arena = TorusArena(omega)
	system = KickedSystem(arena, tau, burago_kicks(arena.omega, u))
	orbit = torus_orbit(system, numpy.zeros(arena.dim), N)[1:]
	near = numpy.all(circle_distance(orbit, 0.0) <= tolerance, axis=1)
	disc = discrepancy_1d(orbit[:, :1])
	report = BuragoReport(tau, N, int(numpy.count_nonzero(near)), disc)
	logger.info('burago tau=%g: hit frequency %.5f, discrepancy %.4f', tau, report.frequency, disc)
	return report


def interval_indicator(center: float, half_width: float) -> 'Callable[[FloatArray], numpy.ndarray]':
	"""
	predicate for the arc (center - half_width, center + half_width) on the circle
	"""

	def inside(points: 'FloatArray') -> numpy.ndarray:
		return numpy.asarray(circle_distance(points[..., 0], center) < half_width)

	return inside


def character(h: Sequence[int] | int) -> 'Observable':
	"""
	real part of exp(2 pi i h . x), a zero-mean observable
	"""
	harr = numpy.atleast_1d(numpy.asarray(h, dtype=float))

	def F(points: 'FloatArray') -> 'FloatArray':
		return numpy.cos(2 * numpy.pi * (points @ harr))

	return F
