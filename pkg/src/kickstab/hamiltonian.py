"""
The kicked top on the sphere and the flat-torus system with a time-reversing
shift: flows, measure oracles, level sets of the Hamiltonian, recurrence
scans over the period and the schedules built from time reversals.
"""

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any

import numpy
import scipy.linalg
import scipy.optimize
from scipy.spatial.transform import Rotation

from kickstab.core import (
	DEFAULT_MARGIN,
	Arena,
	KickedSystem,
	KickSchedule,
	RecurrenceReport,
	cycled_schedule,
	random_schedule,
	recurrence_ratio,
	tau_density,
)
from kickstab.torus import TorusArena
from kickstab.types import ConfigurationError, InputError
from kickstab.utils import reduce_mod1

if TYPE_CHECKING:
	from kickstab.types import BoolArray, FloatArray, Predicate

logger = logging.getLogger(__name__)

UNIT_TOLERANCE = 1e-9
ORTHOGONAL_TOLERANCE = 1e-12
REVERSAL_TOLERANCE = 1e-9
FIXED_POINT_TOLERANCE = 1e-10
RENORMALIZE_EVERY = 10_000
# |min H / max H| for H = -z^2 + 1/3
TOP_GAMMA = 2.0
FLAT_GAMMA = 1.0

# the kicked top map (x, y, z) -> (-z, y, x)
PHI = numpy.array([[0.0, 0.0, -1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]])
# rotation by pi about the x-axis
THETA = numpy.diag([1.0, -1.0, -1.0])
REFLECT_XY = numpy.diag([1.0, 1.0, -1.0])
REFLECT_Y = numpy.diag([1.0, -1.0, 1.0])
FLAT_SHIFT = numpy.array([0.5, 0.0])


def sphere_kick(matrix: Any) -> 'FloatArray':
	"""
	validates a 3x3 orthogonal matrix as a kick
	"""
	m = numpy.asarray(matrix, dtype=float)
	if m.shape != (3, 3):
		raise InputError(f'sphere kicks are 3x3 matrices, got shape {m.shape}')
	if numpy.max(numpy.abs(m.T @ m - numpy.eye(3))) > ORTHOGONAL_TOLERANCE:
		raise InputError('sphere kicks must be orthogonal (isometries of the sphere)')
	return m


def z_rotation(angle: float) -> 'FloatArray':
	return Rotation.from_euler('z', angle).as_matrix()


def rotation_about(axis: Sequence[float], angle: float) -> 'FloatArray':
	v = numpy.asarray(axis, dtype=float)
	return Rotation.from_rotvec(angle * v / numpy.linalg.norm(v)).as_matrix()


def nearest_orthogonal(m: 'FloatArray') -> 'FloatArray':
	"""
	orthogonal factor of the polar decomposition, the closest orthogonal matrix in Frobenius norm
	"""
	u, _ = scipy.linalg.polar(m)
	return u


def compose_kicks(kicks: Sequence['FloatArray'], every: int = RENORMALIZE_EVERY) -> 'FloatArray':
	"""
	kicks[-1] ... kicks[0], projected back onto the orthogonal group every @every factors
	"""
	product = numpy.eye(3)
	for i, k in enumerate(kicks, 1):
		product = numpy.asarray(k) @ product
		if i % every == 0:
			fixed = nearest_orthogonal(product)
			logger.debug('orthogonal drift %.3g after %d factors', numpy.max(numpy.abs(fixed - product)), i)
			product = fixed
	return product


def random_rotation_kicks(seed: int, max_angle: float = math.pi) -> KickSchedule:
	"""
	rotations about a uniform axis by a uniform angle in [0, max_angle]
	"""

	def sample(u: 'FloatArray') -> 'FloatArray':
		z = 2.0 * u[0] - 1.0
		r = math.sqrt(max(0.0, 1.0 - z * z))
		axis = (r * math.cos(2 * math.pi * u[1]), r * math.sin(2 * math.pi * u[1]), z)
		return Rotation.from_rotvec(max_angle * u[2] * numpy.array(axis)).as_matrix()

	return random_schedule(seed, sampler=sample, width=3, name=f'rotations(seed={seed})')


class SphereArena(Arena):
	"""
	The unit sphere with normalized area.

	The top flow turns each point about the z-axis by the angle 2 pi t z, so
	every height is an invariant circle; with ``rigid`` the whole sphere
	turns at the constant angular speed 2 pi instead.
	"""

	dim = 3
	name = 'sphere'

	def __init__(self, rigid: bool = False) -> None:
		self.rigid = rigid

	def flow(self, t: float, points: 'FloatArray') -> 'FloatArray':
		p = numpy.asarray(points, dtype=float)
		angle = 2.0 * math.pi * t * (numpy.ones_like(p[..., 2]) if self.rigid else p[..., 2])
		c, s = numpy.cos(angle), numpy.sin(angle)
		out = numpy.empty_like(p)
		out[..., 0] = c * p[..., 0] - s * p[..., 1]
		out[..., 1] = s * p[..., 0] + c * p[..., 1]
		out[..., 2] = p[..., 2]
		return out

	def act(self, kick: Any, points: 'FloatArray') -> 'FloatArray':
		return points @ numpy.asarray(kick).T

	def identity(self) -> 'FloatArray':
		return numpy.eye(3)

	def inverse(self, kick: Any) -> 'FloatArray':
		return numpy.asarray(kick).T

	def validate(self, points: Any) -> 'FloatArray':
		arr = super().validate(points)
		norms = numpy.linalg.norm(arr, axis=-1)
		if numpy.any(numpy.abs(norms - 1.0) > UNIT_TOLERANCE):
			raise InputError('sphere points must be unit vectors')
		return arr / norms[..., None]

	def normalize(self, points: 'FloatArray') -> 'FloatArray':
		return points / numpy.linalg.norm(points, axis=-1, keepdims=True)

	def sample_uniform(self, rng: numpy.random.Generator, n: int) -> 'FloatArray':
		# z uniform on [-1, 1] and the angle uniform give the area measure
		z = rng.uniform(-1.0, 1.0, n)
		phi = rng.uniform(0.0, 2.0 * math.pi, n)
		r = numpy.sqrt(1.0 - z * z)
		return numpy.stack([r * numpy.cos(phi), r * numpy.sin(phi), z], axis=-1)

	def grid(self, resolution: int) -> tuple['FloatArray', 'FloatArray']:
		m = max(8, int(math.sqrt(resolution)))
		z = -1.0 + (numpy.arange(m) + 0.5) * 2.0 / m
		phi = (numpy.arange(2 * m) + 0.5) * math.pi / m
		zz, pp = numpy.meshgrid(z, phi, indexing='ij')
		r = numpy.sqrt(1.0 - zz * zz)
		nodes = numpy.stack([r * numpy.cos(pp), r * numpy.sin(pp), zz], axis=-1).reshape(-1, 3)
		return nodes, numpy.full(nodes.shape[0], 1.0 / nodes.shape[0])

	def ball_measure(self, radius: float) -> float:
		"""
		normalized area of a cap of chordal radius r, (1 - cos delta)/2 = r^2/4
		"""
		if not 0 < radius <= 2.0:
			raise InputError('chordal radii on the unit sphere lie in (0, 2]')
		return radius * radius / 4.0


def top_flow(t: float, p: Any) -> 'FloatArray':
	return SphereArena().flow(t, numpy.asarray(p, dtype=float))


def uniform_rotation_flow(t: float, p: Any) -> 'FloatArray':
	return SphereArena(rigid=True).flow(t, numpy.asarray(p, dtype=float))


def hamiltonian_H(p: Any) -> 'FloatArray':
	"""
	H = -z^2 + 1/3, maximal on the equator and of zero mean
	"""
	z = numpy.asarray(p, dtype=float)[..., 2]
	return -(z * z) + 1.0 / 3.0


def measure_of_Ac(c: float) -> float:
	"""
	area of A_c = {H > c max H} = {|z| < sqrt((1 - c)/3)}, which is its height range over 2
	"""
	if not 0.0 < c < 1.0:
		raise InputError(f'c must lie in (0, 1), got {c}')
	return math.sqrt((1.0 - c) / 3.0)


def level_set(c: float) -> 'Predicate':
	"""
	indicator of A_c for the top Hamiltonian
	"""
	half = math.sqrt((1.0 - c) / 3.0)

	def inside(points: 'FloatArray') -> 'BoolArray':
		return numpy.abs(numpy.asarray(points)[..., 2]) < half

	return inside


@dataclass
class LemmaDScan:
	c: 'FloatArray'
	measure: 'FloatArray'
	bound: 'FloatArray'

	@property
	def violations(self) -> int:
		return int(numpy.count_nonzero(self.measure > self.bound))


def lemma_d_scan(points: int = 99, gamma: float = TOP_GAMMA) -> LemmaDScan:
	"""
	mu(A_c) against gamma/(c + gamma) on the grid c = k/(points + 1)
	"""
	c = numpy.arange(1, points + 1) / (points + 1)
	measure = numpy.sqrt((1.0 - c) / 3.0)
	return LemmaDScan(c, measure, gamma / (c + gamma))


@dataclass
class ReversalCheck:
	deviation: float

	@property
	def passed(self) -> bool:
		return self.deviation <= REVERSAL_TOLERANCE


def time_reversal_check(arena: Arena, theta: Any, t_samples: Sequence[float], points: Any) -> ReversalCheck:
	"""
	largest distance between theta h^t theta^-1 and h^-t over the sampled times and points
	"""
	pts = arena.validate(points)
	inv = arena.inverse(theta)
	worst = 0.0
	for t in t_samples:
		conj = arena.normalize(arena.act(theta, arena.flow(t, arena.normalize(arena.act(inv, pts)))))
		worst = max(worst, float(numpy.max(arena.distance(conj, arena.flow(-t, pts)))))
	return ReversalCheck(worst)


@dataclass
class TopScan:
	eps: float
	half_width: float
	reports: list[tuple[float, RecurrenceReport]]

	@property
	def density(self) -> float:
		"""
		observed fraction of super-recurrent verdicts; exploratory, not a measure of the period set
		"""
		return tau_density([r for _, r in self.reports])

	def rows(self) -> list[tuple[float, float, int, float, float, bool]]:
		return [(tau, self.eps, r.window[1], r.R_hat, r.mu_A, r.verdict) for tau, r in self.reports]


def kicked_top_scan(
	kicks: KickSchedule,
	taus: Sequence[float],
	eps: float,
	samples: Any,
	window: Sequence[int],
	margin: float = DEFAULT_MARGIN,
	arena: SphereArena | None = None,
) -> TopScan:
	"""
	Recurrence report for A_eps = {H > (1 - eps) max H} = {|z| < sqrt(eps/3)} at every period.
	"""
	if not 0.0 < eps < 1.0:
		raise InputError(f'eps must lie in (0, 1), got {eps}')
	arena = arena or SphereArena()
	pts = arena.validate(samples)
	A = level_set(1.0 - eps)
	if not numpy.any(A(pts)):
		raise InputError('no sample point lies in A_eps')
	mu = measure_of_Ac(1.0 - eps)
	reports = []
	for tau in taus:
		system = KickedSystem(arena, float(tau), kicks)
		reports.append((float(tau), recurrence_ratio(system, A, pts, window, mu, margin)))
	scan = TopScan(eps, mu, reports)
	logger.info('top scan: %d periods, density %.3f', len(reports), scan.density)
	return scan


@dataclass
class FixedPoint:
	point: 'FloatArray'
	residual: float


def _spherical(angles: 'FloatArray') -> 'FloatArray':
	theta, phi = angles
	return numpy.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])


def find_top_fixed_points(tau: float, kick: Any = PHI, starts: int = 16, tol: float = FIXED_POINT_TOLERANCE) -> list[FixedPoint]:
	"""
	Fixed points of kick o h^tau found by Levenberg-Marquardt from equally spaced
	starts on the equator, deduplicated and reported with their residuals.
	"""
	k = sphere_kick(kick)
	arena = SphereArena()

	def residual(angles: 'FloatArray') -> 'FloatArray':
		p = _spherical(angles)
		return arena.act(k, arena.flow(tau, p)) - p

	found: list[FixedPoint] = []
	for j in range(starts):
		sol = scipy.optimize.root(residual, numpy.array([math.pi / 2, 2 * math.pi * j / starts]), method='lm', options={'xtol': 1e-14})
		p = _spherical(sol.x)
		res = float(numpy.linalg.norm(residual(sol.x)))
		if res > tol:
			continue
		if any(numpy.linalg.norm(p - f.point) < 1e-6 for f in found):
			continue
		found.append(FixedPoint(p, res))
	if not found:
		logger.warning('no fixed point of the kicked top found for tau=%g', tau)
	return found


@dataclass
class PushforwardCheck:
	empirical: float
	expected: float
	sigma: float

	@property
	def passed(self) -> bool:
		return abs(self.empirical - self.expected) <= 5.0 * self.sigma


def pushforward_measure_check(
	arena: Arena,
	kick: Any,
	A: 'Predicate',
	expected: float,
	samples: int = 10**6,
	seed: int = 0,
) -> PushforwardCheck:
	"""
	frequency of kick(x) in A for uniform x, against mu(A); a measure-preserving kick keeps them equal
	"""
	x = arena.sample_uniform(numpy.random.default_rng(seed), samples)
	hit = float(numpy.mean(A(arena.normalize(arena.act(kick, x)))))
	sigma = math.sqrt(max(expected * (1.0 - expected), 1e-300) / samples)
	return PushforwardCheck(hit, expected, sigma)


class FlatTorusArena(TorusArena):
	"""
	R^2/Z^2 with the shear flow (x, y) -> (x, y - t sin 2 pi x) generated by
	H = cos(2 pi x)/(2 pi); the shift by (1/2, 0) reverses it.
	"""

	name = 'flat-torus'

	def __init__(self) -> None:
		super().__init__((0.0, 0.0))

	def flow(self, t: float, points: 'FloatArray') -> 'FloatArray':
		p = numpy.asarray(points, dtype=float)
		out = p.copy()
		out[..., 1] = p[..., 1] - t * numpy.sin(2.0 * math.pi * p[..., 0])
		return reduce_mod1(out)


def flat_hamiltonian(p: Any) -> 'FloatArray':
	return numpy.cos(2.0 * math.pi * numpy.asarray(p, dtype=float)[..., 0]) / (2.0 * math.pi)


def flat_measure_of_Ac(c: float) -> float:
	"""
	{cos 2 pi x > c} has measure arccos(c)/pi
	"""
	if not 0.0 < c < 1.0:
		raise InputError(f'c must lie in (0, 1), got {c}')
	return math.acos(c) / math.pi


@dataclass
class MonteCarloMean:
	mean: float
	sigma: float

	@property
	def zero(self) -> bool:
		return abs(self.mean) <= 5.0 * self.sigma


def flat_torus_mean(samples: int = 10**6, seed: int = 0) -> MonteCarloMean:
	"""
	Monte-Carlo mean of the flat-torus Hamiltonian
	"""
	x = FlatTorusArena().sample_uniform(numpy.random.default_rng(seed), samples)
	values = flat_hamiltonian(x)
	return MonteCarloMean(float(numpy.mean(values)), float(numpy.std(values)) / math.sqrt(samples))


@dataclass
class FlatLemmaD:
	c: 'FloatArray'
	analytic: 'FloatArray'
	empirical: 'FloatArray'
	bound: 'FloatArray'
	sigma: float

	@property
	def violations(self) -> int:
		return int(numpy.count_nonzero(numpy.maximum(self.analytic, self.empirical - 5.0 * self.sigma) > self.bound))


def flat_torus_lemma_d(points: int = 99, samples: int = 10**6, seed: int = 0) -> FlatLemmaD:
	"""
	mu(A_c) <= gamma/(c + gamma) with gamma = 1 for F = H, analytically and by Monte-Carlo
	"""
	c = numpy.arange(1, points + 1) / (points + 1)
	x = FlatTorusArena().sample_uniform(numpy.random.default_rng(seed), samples)
	values = numpy.sort(flat_hamiltonian(x) * 2.0 * math.pi)
	# fraction of samples with cos 2 pi x > c
	empirical = 1.0 - numpy.searchsorted(values, c, side='right') / samples
	return FlatLemmaD(c, numpy.arccos(c) / math.pi, empirical, FLAT_GAMMA / (c + FLAT_GAMMA), 0.5 / math.sqrt(samples))


def randomizing_schedule(gamma: Sequence[float], theta: Any = FLAT_SHIFT) -> KickSchedule:
	"""
	phi_i = theta^-1 for odd i and phi_2k = psi theta, psi the translation by @gamma.

	Since theta h^tau theta^-1 = h^-tau, the evolution is f^(2k) = translation by
	k gamma and f^(2k+1) = theta^-1 h^tau f^(2k).
	"""
	g = numpy.asarray(gamma, dtype=float)
	t = numpy.asarray(theta, dtype=float)
	if g.shape != t.shape:
		raise InputError(f'gamma must have {t.shape[0]} components')
	return cycled_schedule([reduce_mod1(-t), reduce_mod1(g + t)], name='randomizing')


def two_step_return(system: KickedSystem, points: Any, pairs: int = 4) -> float:
	"""
	largest distance between x and f^(2k)(x) for k = 1..pairs
	"""
	x0 = system.arena.validate(points)
	x = x0
	worst = 0.0
	for i in range(1, 2 * pairs + 1):
		x = system.step(i, x)
		if i % 2 == 0:
			worst = max(worst, float(numpy.max(system.arena.distance(x, x0))))
	return worst


@dataclass
class NonMixingWitness:
	center: 'FloatArray'
	radius: float
	measure: float
	correlations: 'FloatArray'
	samples: int

	@property
	def even(self) -> float:
		return float(numpy.mean(self.correlations[1::2]))

	@property
	def odd(self) -> float:
		return float(numpy.mean(self.correlations[0::2]))

	@property
	def mixing_limit(self) -> float:
		return self.measure**2

	@property
	def sigma(self) -> float:
		return math.sqrt(self.measure * (1.0 - self.measure) / self.samples)

	@property
	def separation(self) -> float:
		"""
		distance of the even correlations from the mixing value, in Monte-Carlo standard deviations
		"""
		return abs(self.even - self.mixing_limit) / self.sigma


def _is_two_periodic(kicks: KickSchedule) -> bool:
	return all(numpy.allclose(numpy.asarray(kicks.kick(i)), numpy.asarray(kicks.kick(i + 2))) for i in range(1, 5))


def nonmixing_witness(
	system: KickedSystem,
	radius: float,
	samples: int = 10**6,
	seed: int = 0,
	max_index: int = 6,
	candidates: int = 64,
) -> NonMixingWitness:
	"""
	Correlations mu(U and f^(-i) U) of a ball U displaced off itself by f^(1).

	For a 2-periodic time-reversal schedule they alternate between mu(U) and 0,
	while mixing would drive them to mu(U)^2.
	"""
	arena = system.arena
	if not _is_two_periodic(system.kicks):
		raise InputError('the schedule is not 2-periodic')
	if two_step_return(system, arena.test_points(), 1) > 1e-9:
		raise InputError('f^(2) is not the identity; the schedule does not reverse the flow')
	rng = numpy.random.default_rng(seed)
	points = arena.sample_uniform(rng, 20_000)
	moved = system.step(1, points)
	center = None
	for c in arena.sample_uniform(rng, candidates):
		inside = arena.distance(points, c) < radius
		if not numpy.any(inside):
			continue
		if not numpy.any(arena.distance(moved[inside], c) < radius):
			center = c
			break
	if center is None:
		raise ConfigurationError(f'no ball of radius {radius} is displaced off itself; use a smaller radius')
	x0 = arena.sample_uniform(rng, samples)
	in_u = arena.distance(x0, center) < radius
	x = x0
	correlations = numpy.empty(max_index)
	for i in range(1, max_index + 1):
		x = system.step(i, x)
		correlations[i - 1] = numpy.mean(in_u & (arena.distance(x, center) < radius))
	return NonMixingWitness(center, radius, arena.ball_measure(radius), correlations, samples)
