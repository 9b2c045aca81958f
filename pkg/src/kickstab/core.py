"""
Core classes for kickstab: kick schedules, kicked systems, orbits and orbit statistics
"""

import logging
import math
from collections.abc import Callable, Iterator, Sequence
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any

import numpy

from kickstab.types import InputError
from kickstab.utils import BLOCK_SIZE, block_uniforms, check_window

if TYPE_CHECKING:
	from kickstab.types import (
		FloatArray,
		Kick,
		KickSampler,
		Observable,
		Predicate,
		ScheduleRule,
	)

logger = logging.getLogger(__name__)

DEFAULT_MARGIN = 0.01
ZERO_MEAN_TOLERANCE = 1e-6


class Arena:
	"""
	Phase space of a kicked system.

	Points are float arrays whose last axis has length ``dim``; every method
	accepts any number of leading axes so samples are evolved together.
	Subclasses supply the flow, the action of kicks and a measure oracle.
	"""

	dim = 1
	tolerance = 1e-12
	name = 'arena'

	def flow(self, t: float, points: 'FloatArray') -> 'FloatArray':
		raise NotImplementedError

	def act(self, kick: 'Kick', points: 'FloatArray') -> 'FloatArray':
		raise NotImplementedError

	def identity(self) -> 'Kick':
		raise NotImplementedError

	def inverse(self, kick: 'Kick') -> 'Kick':
		raise NotImplementedError

	def validate(self, points: Any) -> 'FloatArray':
		arr = numpy.array(points, dtype=numpy.float64)
		if arr.ndim == 0 or arr.shape[-1] != self.dim:
			raise InputError(f'{self.name} points have {self.dim} coordinates, got shape {arr.shape}')
		if not numpy.all(numpy.isfinite(arr)):
			raise InputError('points must be finite')
		return arr

	def normalize(self, points: 'FloatArray') -> 'FloatArray':
		return points

	def distance(self, p: 'FloatArray', q: 'FloatArray') -> 'FloatArray':
		return numpy.linalg.norm(numpy.asarray(p) - numpy.asarray(q), axis=-1)

	def sample_uniform(self, rng: numpy.random.Generator, n: int) -> 'FloatArray':
		raise NotImplementedError

	def grid(self, resolution: int) -> tuple['FloatArray', 'FloatArray']:
		"""
		quadrature nodes and weights (summing to one) for the invariant measure
		"""
		raise NotImplementedError

	def mean(self, F: 'Observable', resolution: int = 2000) -> float:
		nodes, weights = self.grid(resolution)
		return float(numpy.dot(F(nodes), weights))

	def maximum(self, F: 'Observable', resolution: int = 2000) -> float:
		nodes, _ = self.grid(resolution)
		return float(numpy.max(F(nodes)))

	def ball_measure(self, radius: float) -> float:
		raise NotImplementedError

	def test_points(self) -> 'FloatArray':
		return self.sample_uniform(numpy.random.default_rng(0), 8)


@dataclass(frozen=True)
class KickSchedule:
	"""
	Produces the i-th kick, i >= 1.

	cycled: ``elements`` repeated in order.
	indexed: ``func(i)``.
	random: uniforms drawn from the (seed, block) stream of index i, mapped
	to a kick by choosing among ``elements`` or by ``sampler``.
	"""

	rule: 'ScheduleRule'
	elements: tuple[Any, ...] = ()
	func: 'Callable[[int], Kick] | None' = None
	sampler: 'KickSampler | None' = None
	seed: int | None = None
	width: int = 1
	name: str = ''

	def __post_init__(self) -> None:
		if self.rule == 'cycled' and not self.elements:
			raise InputError('a cycled schedule needs at least one element')
		if self.rule == 'indexed' and self.func is None:
			raise InputError('an indexed schedule needs a function of the index')
		if self.rule == 'random':
			if self.seed is None:
				raise InputError('a random schedule needs a seed')
			if not self.elements and self.sampler is None:
				raise InputError('a random schedule needs a generator set or a sampler')

	def kick(self, i: int) -> 'Kick':
		if i < 1:
			raise InputError(f'kicks are indexed from 1, got {i}')
		if self.rule == 'cycled':
			return self.elements[(i - 1) % len(self.elements)]
		if self.rule == 'indexed':
			assert self.func is not None
			return self.func(i)
		assert self.seed is not None
		u = block_uniforms(self.seed, (i - 1) // BLOCK_SIZE, self.width)[(i - 1) % BLOCK_SIZE]
		if self.elements:
			return self.elements[min(int(u[0] * len(self.elements)), len(self.elements) - 1)]
		assert self.sampler is not None
		return self.sampler(u)

	def kicks(self, start: int, stop: int) -> list['Kick']:
		"""
		kicks start..stop-1
		"""
		return [self.kick(i) for i in range(start, stop)]

	def describe(self) -> str:
		if self.name:
			return self.name
		if self.rule == 'random':
			return f'random(seed={self.seed})'
		return self.rule


def cycled_schedule(elements: Sequence['Kick'], name: str = '') -> KickSchedule:
	return KickSchedule('cycled', elements=tuple(elements), name=name)


def indexed_schedule(func: 'Callable[[int], Kick]', name: str = '') -> KickSchedule:
	return KickSchedule('indexed', func=func, name=name)


def random_schedule(
	seed: int,
	choices: Sequence['Kick'] = (),
	sampler: 'KickSampler | None' = None,
	width: int = 1,
	name: str = '',
) -> KickSchedule:
	return KickSchedule('random', elements=tuple(choices), sampler=sampler, seed=seed, width=width, name=name)


def identity_schedule(arena: Arena) -> KickSchedule:
	return cycled_schedule([arena.identity()], name='identity')


def time_reversal_schedule(arena: Arena, theta: 'Kick') -> KickSchedule:
	"""
	The 2-periodic schedule theta^-1, theta, theta^-1, ...

	When theta conjugates the flow to its reverse the evolution returns to the
	identity at every even step.
	"""
	return cycled_schedule([arena.inverse(theta), theta], name='time-reversal')


@dataclass(frozen=True)
class KickedSystem:
	"""
	The sequential system f_i = phi_i h^tau.
	"""

	arena: Arena
	tau: float
	kicks: KickSchedule

	def __post_init__(self) -> None:
		if not self.tau > 0:
			raise InputError(f'the period must be positive, got {self.tau}')
		pts = self.arena.test_points()
		drift = float(numpy.max(self.arena.distance(self.arena.flow(0.0, pts), pts)))
		if drift > 1e3 * self.arena.tolerance:
			raise InputError(f'flow(0) moves test points by {drift:g}')

	def step(self, i: int, points: 'FloatArray') -> 'FloatArray':
		"""
		x_i = phi_i h^tau x_{i-1}
		"""
		moved = self.arena.flow(self.tau, points)
		return self.arena.normalize(self.arena.act(self.kicks.kick(i), moved))


@dataclass
class Orbit:
	x0: 'FloatArray'
	points: 'FloatArray'
	horizon: int

	def __len__(self) -> int:
		return self.horizon + 1

	def replay(self, system: KickedSystem) -> float:
		"""
		largest distance between a stored point and one step applied to its predecessor
		"""
		worst = 0.0
		for i in range(1, self.horizon + 1):
			d = system.arena.distance(system.step(i, self.points[i - 1]), self.points[i])
			worst = max(worst, float(numpy.max(d)))
		return worst


def evolve(system: KickedSystem, x0: Any, N: int) -> Orbit:
	"""
	Orbit x_0 = x0, x_i = phi_i h^tau x_{i-1} for i = 1..N.

	@x0 may carry leading sample axes; they are evolved together.
	"""
	if N < 1:
		raise InputError(f'horizon must be at least 1, got {N}')
	x = system.arena.validate(x0)
	points = numpy.empty((N + 1,) + x.shape)
	points[0] = x
	for i in range(1, N + 1):
		points[i] = system.step(i, points[i - 1])
	return Orbit(x0=x, points=points, horizon=N)


def iter_orbit(system: KickedSystem, samples: Any, N: int, chunk: int = BLOCK_SIZE) -> Iterator[tuple[int, 'FloatArray']]:
	"""
	Yields (start, block) with block[j] = x_{start+j} for all indices below N,
	keeping at most ``chunk`` steps in memory.
	"""
	if N < 1:
		raise InputError(f'horizon must be at least 1, got {N}')
	x = system.arena.validate(samples)
	start = 0
	while start < N:
		m = min(chunk, N - start)
		block = numpy.empty((m,) + x.shape)
		for j in range(m):
			block[j] = x
			x = system.step(start + j + 1, x)
		yield start, block
		start += m


@dataclass
class CountingStats:
	"""
	counts[..., N - N_min] = nu_{N,A}(x) for N in the window
	"""

	window: tuple[int, int]
	counts: numpy.ndarray
	descriptor: str
	samples: 'FloatArray'

	@property
	def horizons(self) -> numpy.ndarray:
		return numpy.arange(self.window[0], self.window[1] + 1)

	@property
	def ratios(self) -> 'FloatArray':
		return self.counts / self.horizons


def counting_function(orbit: Orbit, A: 'Predicate', window: Sequence[int], descriptor: str = 'A') -> CountingStats:
	"""
	nu_{N,A}(x0) = #{i in [0, N-1] : x_i in A} for each N in the window.
	"""
	lo, hi = check_window(window)
	if hi > orbit.horizon:
		raise InputError(f'window end {hi} exceeds the orbit horizon {orbit.horizon}')
	inside = numpy.asarray(A(orbit.points[:hi]), dtype=numpy.int64)
	counts = numpy.cumsum(inside, axis=0)[lo - 1 : hi]
	if counts.ndim > 1:
		counts = numpy.moveaxis(counts, 0, -1)
	return CountingStats(window=(lo, hi), counts=counts, descriptor=descriptor, samples=orbit.x0)


@dataclass(frozen=True)
class OrbitStatistics:
	"""
	Running maximum over (sample, horizon) pairs.

	merge is associative and commutative: ties keep the smaller sample id, then
	the smaller horizon, so partial results combine the same way in any order.
	"""

	value: float = -math.inf
	sample: int = -1
	horizon: int = -1
	count: int = 0

	def merge(self, other: 'OrbitStatistics') -> 'OrbitStatistics':
		mine = (-self.value, self.sample, self.horizon)
		theirs = (-other.value, other.sample, other.horizon)
		best = self if mine <= theirs else other
		return OrbitStatistics(best.value, best.sample, best.horizon, self.count + other.count)

	@classmethod
	def from_table(cls, table: 'FloatArray', window: tuple[int, int], sample_offset: int = 0) -> 'OrbitStatistics':
		table = numpy.atleast_2d(table)
		flat = int(numpy.argmax(table))
		s, n = divmod(flat, table.shape[1])
		return cls(float(table[s, n]), sample_offset + s, window[0] + n, table.shape[0])


@dataclass
class BirkhoffProfile:
	"""
	averages[s, N - N_min] = I_N(x_s); maxima[N - N_min] = H_N = max_s I_N(x_s).
	"""

	window: tuple[int, int]
	averages: 'FloatArray'
	counts: numpy.ndarray | None = None
	best: OrbitStatistics = field(default_factory=OrbitStatistics)

	@property
	def horizons(self) -> numpy.ndarray:
		return numpy.arange(self.window[0], self.window[1] + 1)

	@property
	def maxima(self) -> 'FloatArray':
		return numpy.max(self.averages, axis=0)


def _profile(
	system: KickedSystem,
	samples: Any,
	window: Sequence[int],
	F: 'Observable | None' = None,
	A: 'Predicate | None' = None,
) -> tuple['FloatArray | None', numpy.ndarray | None]:
	"""
	streams the orbits once and keeps only the windowed partial sums
	"""
	lo, hi = check_window(window)
	x = system.arena.validate(samples)
	if x.ndim == 1:
		x = x[None, :]
	if x.shape[0] == 0:
		raise InputError('at least one sample point is needed')
	S, W = x.shape[0], hi - lo + 1
	sums = numpy.zeros((S, W)) if F is not None else None
	counts = numpy.zeros((S, W), dtype=numpy.int64) if A is not None else None
	f_offset = numpy.zeros(S)
	a_offset = numpy.zeros(S, dtype=numpy.int64)
	for start, block in iter_orbit(system, x, hi):
		m = block.shape[0]
		# partial sum at index j covers x_0..x_j, i.e. N = j + 1
		first = max(lo - 1, start)
		last = min(hi - 1, start + m - 1)
		if F is not None:
			assert sums is not None
			cum = f_offset + numpy.cumsum(F(block), axis=0)
			if first <= last:
				sums[:, first - lo + 1 : last - lo + 2] = cum[first - start : last - start + 1].T
			f_offset = cum[-1]
		if A is not None:
			assert counts is not None
			cnt = a_offset + numpy.cumsum(numpy.asarray(A(block), dtype=numpy.int64), axis=0)
			if first <= last:
				counts[:, first - lo + 1 : last - lo + 2] = cnt[first - start : last - start + 1].T
			a_offset = cnt[-1]
	averages = sums / numpy.arange(lo, hi + 1) if sums is not None else None
	return averages, counts


@dataclass
class RecurrenceReport:
	"""
	Finite-horizon lower approximation of the limsup over N of max over x of nu_{N,A}(x)/N.

	R_hat only sees the N-window and the sample set recorded here.
	"""

	R_hat: float
	mu_A: float
	margin: float
	window: tuple[int, int]
	n_samples: int
	best_sample: int
	best_horizon: int

	@property
	def verdict(self) -> bool:
		return self.R_hat - self.mu_A > self.margin

	def to_dict(self) -> dict[str, Any]:
		return {
			'R_hat': self.R_hat,
			'mu_A': self.mu_A,
			'margin': self.margin,
			'verdict': self.verdict,
			'window': list(self.window),
			'n_samples': self.n_samples,
			'best_sample': self.best_sample,
			'best_horizon': self.best_horizon,
		}


def recurrence_statistics(system: KickedSystem, A: 'Predicate', samples: Any, window: Sequence[int], sample_offset: int = 0) -> OrbitStatistics:
	"""
	partial maximum of nu/N for one batch of samples; batches merge with OrbitStatistics.merge
	"""
	lo, hi = check_window(window)
	_, counts = _profile(system, samples, (lo, hi), A=A)
	assert counts is not None
	return OrbitStatistics.from_table(counts / numpy.arange(lo, hi + 1), (lo, hi), sample_offset)


def recurrence_ratio(
	system: KickedSystem,
	A: 'Predicate',
	samples: Any,
	window: Sequence[int],
	mu_A: float,
	margin: float = DEFAULT_MARGIN,
) -> RecurrenceReport:
	if not 0.0 <= mu_A <= 1.0:
		raise InputError(f'mu_A must lie in [0, 1], got {mu_A}')
	lo, hi = check_window(window)
	stats = recurrence_statistics(system, A, samples, (lo, hi))
	report = RecurrenceReport(
		R_hat=stats.value,
		mu_A=mu_A,
		margin=margin,
		window=(lo, hi),
		n_samples=stats.count,
		best_sample=stats.sample,
		best_horizon=stats.horizon,
	)
	logger.debug('tau=%g R_hat=%.6f mu_A=%.6f', system.tau, report.R_hat, mu_A)
	return report


def birkhoff_profile(
	system: KickedSystem,
	F: 'Observable',
	samples: Any,
	window: Sequence[int],
	count_set: 'Predicate | None' = None,
) -> BirkhoffProfile:
	"""
	I_N(x) = (1/N) sum_{i<N} F(x_i) for every sample and every N in the window.

	@count_set optionally counts visits to a set along the same orbits.
	"""
	lo, hi = check_window(window)
	averages, counts = _profile(system, samples, (lo, hi), F=F, A=count_set)
	assert averages is not None
	return BirkhoffProfile(
		window=(lo, hi),
		averages=averages,
		counts=counts,
		best=OrbitStatistics.from_table(averages, (lo, hi)),
	)


@dataclass
class QuasiIntegralLevel:
	alpha_hat: float
	max_value: float
	mean: float


def quasi_integral_level(
	F: 'Observable',
	profile: BirkhoffProfile,
	arena: Arena,
	max_value: float | None = None,
	tolerance: float = ZERO_MEAN_TOLERANCE,
) -> QuasiIntegralLevel:
	"""
	alpha_hat = max over the profile of I_N divided by max F.

	F counts as alpha-quasi-integral evidence for every alpha <= alpha_hat.
	The zero mean of F is checked with the arena's measure oracle.
	"""
	if max_value is None:
		max_value = arena.maximum(F)
	if not max_value > 0:
		raise InputError(f'max F must be positive, got {max_value}')
	mean = arena.mean(F)
	if abs(mean) > tolerance:
		raise InputError(f'F has mean {mean:g}, not zero within {tolerance:g}')
	return QuasiIntegralLevel(float(numpy.max(profile.averages)) / max_value, max_value, mean)


@dataclass
class LemmaCheck:
	c: float
	checked: int
	violations: int
	worst: float
	profile: BirkhoffProfile

	@property
	def passed(self) -> bool:
		return self.violations == 0


def counting_bound_violations(profile: BirkhoffProfile, max_value: float, c: float, slack: float = 1e-12) -> tuple[int, float]:
	"""
	Counts failures of N I_N <= c max F (N - nu_N) + max F nu_N, where nu counts
	visits to A_c = {F >= c max F} along the profile's own orbits.

	Returns (violations, largest excess).
	"""
	if profile.counts is None:
		raise InputError('the profile was computed without visit counts')
	bound = max_value * (c + (1.0 - c) * profile.counts / profile.horizons)
	excess = profile.averages - bound
	return int(numpy.count_nonzero(excess > slack * max_value)), float(numpy.max(excess))


def lemma_c_check(
	system: KickedSystem,
	F: 'Observable',
	samples: Any,
	window: Sequence[int],
	max_value: float,
	c: float,
) -> LemmaCheck:
	"""
	Finite form of the counting lemma: whenever I_N >= (alpha - eps) max F the
	visit frequency of A_c is at least (alpha - c - eps)/(1 - c).

	Checked through the pointwise inequality it follows from, on every (x, N) of the profile.
	"""
	if not 0.0 < c < 1.0:
		raise InputError(f'c must lie in (0, 1), got {c}')
	if not max_value > 0:
		raise InputError(f'max F must be positive, got {max_value}')
	level = c * max_value

	def in_level_set(points: 'FloatArray') -> numpy.ndarray:
		return F(points) >= level

	profile = birkhoff_profile(system, F, samples, window, count_set=in_level_set)
	violations, worst = counting_bound_violations(profile, max_value, c)
	if violations:
		logger.warning('counting inequality failed %d times (worst excess %g)', violations, worst)
	return LemmaCheck(c, int(profile.averages.size), violations, worst, profile)


@dataclass
class Thresholds:
	alpha: float
	c: float
	gamma: float
	R_lower: float
	mu_upper: float
	window_ok: bool
	gamma_ok: bool

	@property
	def delta(self) -> float:
		return self.R_lower - self.mu_upper


def super_recurrence_thresholds(alpha: float, c: float, gamma: float) -> Thresholds:
	"""
	R_lower = (alpha - c)/(1 - c) bounds the visit frequency of A_c from below,
	mu_upper = gamma/(c + gamma) bounds its measure from above.

	Also evaluates the admissible window |c - alpha/2| < sqrt(alpha^2 + 4 alpha gamma - 4 gamma)/2
	and the hypothesis gamma < alpha^2/(4 - 4 alpha).
	"""
	if not 0.0 < alpha <= 1.0:
		raise InputError(f'alpha must lie in (0, 1], got {alpha}')
	if not 0.0 < c < alpha or c >= 1.0:
		raise InputError(f'c must lie in (0, alpha) = (0, {alpha}), got {c}')
	if gamma < 0:
		raise InputError(f'gamma must be nonnegative, got {gamma}')
	R_lower = (alpha - c) / (1.0 - c)
	mu_upper = gamma / (c + gamma)
	disc = alpha * alpha + 4.0 * alpha * gamma - 4.0 * gamma
	window_ok = disc > 0 and abs(c - alpha / 2.0) < 0.5 * math.sqrt(disc)
	gamma_ok = alpha == 1.0 or gamma < alpha * alpha / (4.0 - 4.0 * alpha)
	return Thresholds(alpha, c, gamma, R_lower, mu_upper, window_ok, gamma_ok)


def tau_density(reports: Sequence[RecurrenceReport]) -> float:
	"""
	fraction of scanned periods whose report carries a positive verdict
	"""
	if not reports:
		raise InputError('no reports to summarize')
	return sum(1 for r in reports if r.verdict) / len(reports)
