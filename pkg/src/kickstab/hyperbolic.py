"""
Upper half-plane geometry and bounded one-forms.

A form alpha on the hyperbolic plane is built from a tile form alpha_0 that is
already invariant under <g>, summed over representatives of the cosets
<g>\\G. Since every term is a pullback by an isometry, the integral of a term
over an arc equals the integral of alpha_0 over the image arc, so all
quadrature happens on images of geodesics. The quasi-morphism
r_x(g) = int over the geodesic from x to gx of alpha has defect at most pi C,
where C bounds |d alpha / area|.
"""

import cmath
import functools
import logging
import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field, replace
from typing import TYPE_CHECKING, Any

import numpy
import scipy.integrate

from kickstab.moebius import INVOLUTION, Mat2, classify_element, hyperbolic_diag, spectral_radius
from kickstab.types import ConfigurationError, InputError, TimeReversingSymmetryError

if TYPE_CHECKING:
	from kickstab.types import BoolArray, FloatArray, GeodesicKind

logger = logging.getLogger(__name__)

DEFAULT_WORD_LENGTH = 8
QUAD_TOLERANCE = 1e-8
# hyperbolic length of one quadrature piece
PIECE_LENGTH = 0.25
DEDUP_DIGITS = 10
ENDPOINT_DIGITS = 12
HOROBALL_LOW = 2.5
HOROBALL_HIGH = 3.0
PARABOLIC_BASE = 3.0
MAX_TUBE = 0.5
MIN_TUBE = 1e-3
SEGMENT_SHRINK = 0.25
# largest slope of the smootherstep 6t^5 - 15t^4 + 10t^3
SMOOTHERSTEP_SLOPE = 15.0 / 8.0


@dataclass(frozen=True)
class UHPoint:
	x: float
	y: float

	def __post_init__(self) -> None:
		if not (math.isfinite(self.x) and math.isfinite(self.y)):
			raise InputError(f'point ({self.x}, {self.y}) is not finite')
		if not self.y > 0:
			raise InputError(f'points of the upper half-plane need y > 0, got {self.y}')

	@classmethod
	def from_complex(cls, z: complex) -> 'UHPoint':
		return cls(z.real, z.imag)

	@property
	def z(self) -> complex:
		return complex(self.x, self.y)


def mobius_apply(g: Mat2, z: UHPoint) -> UHPoint:
	"""
	(az + b)/(cz + d), the height computed as y/|cz + d|^2 so it stays positive.
	"""
	den = g.c * z.z + g.d
	w = (g.a * z.z + g.b) / den
	return UHPoint(w.real, z.y / abs(den) ** 2)


def boundary_image(g: Mat2, x: float) -> float:
	"""
	action on the boundary R u {inf}
	"""
	if math.isinf(x):
		return g.a / g.c if g.c else math.inf
	den = g.c * x + g.d
	if den == 0:
		return math.inf
	return (g.a * x + g.b) / den


def hyperbolic_distance(p: UHPoint, q: UHPoint) -> float:
	return math.acosh(1.0 + abs(p.z - q.z) ** 2 / (2.0 * p.y * q.y))


@dataclass(frozen=True)
class Geodesic:
	"""
	Oriented geodesic arc.

	vertical: abscissa ``center``, heights ``start`` -> ``stop``.
	semicircle: ``center`` on the real axis, ``radius``, angles ``start`` -> ``stop`` in (0, pi).

	Both are parametrized by arclength sigma: log y on vertical lines and
	log tan(theta/2) on semicircles.
	"""

	kind: 'GeodesicKind'
	center: float
	radius: float
	start: float
	stop: float

	@property
	def sigma_range(self) -> tuple[float, float]:
		if self.kind == 'vertical':
			return math.log(self.start), math.log(self.stop)
		return math.log(math.tan(self.start / 2.0)), math.log(math.tan(self.stop / 2.0))

	@property
	def length(self) -> float:
		s0, s1 = self.sigma_range
		return abs(s1 - s0)

	def point(self, sigma: float) -> complex:
		if self.kind == 'vertical':
			return complex(self.center, math.exp(sigma))
		theta = 2.0 * math.atan(math.exp(sigma))
		return self.center + self.radius * cmath.exp(1j * theta)

	def velocity(self, sigma: float) -> complex:
		if self.kind == 'vertical':
			return 1j * math.exp(sigma)
		theta = 2.0 * math.atan(math.exp(sigma))
		return 1j * self.radius * cmath.exp(1j * theta) * math.sin(theta)

	def _at(self, value: float) -> UHPoint:
		if self.kind == 'vertical':
			return UHPoint(self.center, value)
		return UHPoint(self.center + self.radius * math.cos(value), self.radius * math.sin(value))

	@property
	def endpoints(self) -> tuple[UHPoint, UHPoint]:
		return self._at(self.start), self._at(self.stop)

	@property
	def min_height(self) -> float:
		p, q = self.endpoints
		return min(p.y, q.y)

	def reversed(self) -> 'Geodesic':
		return replace(self, start=self.stop, stop=self.start)


def geodesic_between(p: UHPoint, q: UHPoint) -> Geodesic:
	"""
	The oriented geodesic from @p to @q: a vertical line when p.x = q.x, otherwise
	the semicircle centered at (|q|^2 - |p|^2)/(2(q.x - p.x)).
	"""
	scale = max(1.0, abs(p.x), abs(q.x))
	if abs(p.x - q.x) <= 1e-14 * scale:
		if abs(p.y - q.y) <= 1e-15 * max(p.y, q.y):
			raise InputError('the geodesic between a point and itself is degenerate')
		return Geodesic('vertical', p.x, math.inf, p.y, q.y)
	center = (abs(q.z) ** 2 - abs(p.z) ** 2) / (2.0 * (q.x - p.x))
	radius = math.hypot(p.x - center, p.y)
	return Geodesic(
		'semicircle',
		center,
		radius,
		math.atan2(p.y, p.x - center),
		math.atan2(q.y, q.x - center),
	)


def smootherstep(t: Any) -> Any:
	t = numpy.clip(t, 0.0, 1.0)
	return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


def smootherstep_slope(t: Any) -> Any:
	t = numpy.clip(t, 0.0, 1.0)
	return 30.0 * t * t * (1.0 - t) ** 2


@functools.cache
def _bump_mass() -> float:
	value, _ = scipy.integrate.quad(lambda t: math.exp(-1.0 / (1.0 - t * t)), -1.0, 1.0, epsabs=1e-14)
	return float(value)


def _bump(t: float) -> float:
	if abs(t) >= 1.0:
		return 0.0
	return math.exp(-1.0 / (1.0 - t * t))


def fermi_coordinates(z: UHPoint, normalizer: Mat2) -> tuple[float, float]:
	"""
	(s, d) relative to the axis sent to the imaginary axis by @normalizer:
	s = log |w| is the position along the axis and d = asinh(Re w / Im w) the
	signed distance to it, w the image of z.
	"""
	w = mobius_apply(normalizer, z)
	return math.log(abs(w.z)), math.asinh(w.x / w.y)


def axis_normalizer(g: Mat2) -> tuple[Mat2, float]:
	"""
	N with N g N^-1 = diag(lambda, 1/lambda), lambda > 1, and the translation length 2 log lambda.

	N sends the repelling fixed point of g to 0 and the attracting one to infinity.
	"""
	if classify_element(g).kind != 'hyperbolic':
		raise InputError(f'{g!r} is not hyperbolic')
	a, b, c, d = g.entries
	length = 2.0 * math.log(spectral_radius(g))
	if c == 0:
		x0 = b / (d - a)
		if abs(a) > abs(d):
			return Mat2(1.0, -x0, 0.0, 1.0), length
		return Mat2(0.0, -1.0, 1.0, -x0), length
	root = math.sqrt((a + d) ** 2 - 4.0)
	z1, z2 = ((a - d) + root) / (2.0 * c), ((a - d) - root) / (2.0 * c)
	attracting, repelling = (z1, z2) if abs(c * z1 + d) > abs(c * z2 + d) else (z2, z1)
	if repelling > attracting:
		m = numpy.array([[1.0, -repelling], [1.0, -attracting]])
	else:
		m = numpy.array([[-1.0, repelling], [1.0, -attracting]])
	m /= math.sqrt(numpy.linalg.det(m))
	return Mat2.from_array(m), length


@dataclass
class _Arcs:
	"""
	images of one arc under a stack of transforms, in vectorized form
	"""

	P: numpy.ndarray
	Q: numpy.ndarray
	vertical: 'BoolArray'
	center: 'FloatArray'
	radius: 'FloatArray'
	theta_p: 'FloatArray'
	theta_q: 'FloatArray'


def _stack(mats: Sequence[Mat2]) -> 'FloatArray':
	if not mats:
		return numpy.empty((0, 2, 2))
	return numpy.array([m.array for m in mats])


def _image_arcs(transforms: 'FloatArray', p: complex, q: complex) -> _Arcs:
	a, b, c, d = transforms[:, 0, 0], transforms[:, 0, 1], transforms[:, 1, 0], transforms[:, 1, 1]
	with numpy.errstate(all='ignore'):
		dp, dq = c * p + d, c * q + d
		P = ((a * p + b) / dp).real + 1j * (p.imag / numpy.abs(dp) ** 2)
		Q = ((a * q + b) / dq).real + 1j * (q.imag / numpy.abs(dq) ** 2)
		scale = numpy.maximum(1.0, numpy.maximum(numpy.abs(P.real), numpy.abs(Q.real)))
		vertical = numpy.abs(P.real - Q.real) <= 1e-14 * scale
		center = numpy.where(vertical, P.real, (numpy.abs(Q) ** 2 - numpy.abs(P) ** 2) / (2.0 * (Q.real - P.real)))
		radius = numpy.abs(P - center)
		theta_p = numpy.angle(P - center)
		theta_q = numpy.angle(Q - center)
	return _Arcs(P, Q, vertical, center, radius, theta_p, theta_q)


def _above_horoball(arcs: _Arcs, level: float) -> 'BoolArray':
	"""
	whether the highest point of each arc lies above y = level
	"""
	top = numpy.maximum(arcs.P.imag, arcs.Q.imag)
	lo, hi = numpy.minimum(arcs.theta_p, arcs.theta_q), numpy.maximum(arcs.theta_p, arcs.theta_q)
	crest = ~arcs.vertical & (lo <= math.pi / 2) & (hi >= math.pi / 2)
	top = numpy.where(crest, arcs.radius, top)
	return ~numpy.isfinite(top) | (top > level)


def _meets_tube(arcs: _Arcs, half_width: float) -> 'BoolArray':
	"""
	whether each arc enters {|d| < half_width} around the imaginary axis, i.e. |u/v| < sinh(half_width)

	u/v is monotone along vertical lines; on a semicircle its only interior
	critical point is at cos(theta) = -radius/center.
	"""
	k = math.sinh(half_width)
	with numpy.errstate(all='ignore'):
		fp = arcs.P.real / arcs.P.imag
		fq = arcs.Q.real / arcs.Q.imag
		lo, hi = numpy.minimum(fp, fq), numpy.maximum(fp, fq)
		c, r = arcs.center, arcs.radius
		has_critical = ~arcs.vertical & (numpy.abs(c) > r)
		crit = numpy.arccos(numpy.clip(-r / numpy.where(has_critical, c, 1.0), -1.0, 1.0))
		tmin, tmax = numpy.minimum(arcs.theta_p, arcs.theta_q), numpy.maximum(arcs.theta_p, arcs.theta_q)
		inside = has_critical & (crit > tmin) & (crit < tmax)
		fc = (c + r * numpy.cos(crit)) / (r * numpy.sin(crit))
		lo = numpy.where(inside, numpy.minimum(lo, fc), lo)
		hi = numpy.where(inside, numpy.maximum(hi, fc), hi)
		hit = (lo < k) & (hi > -k)
	return hit | numpy.isnan(lo) | numpy.isnan(hi)


def word_matrix(word: str, generators: Mapping[str, Mat2]) -> Mat2:
	"""
	Product of the letters of @word from left to right; a lowercase letter is
	the inverse of its uppercase generator.
	"""
	g = Mat2.identity()
	for letter in word:
		gen = generators.get(letter.upper())
		if gen is None:
			raise InputError(f'unknown generator {letter!r} in {word!r}')
		g = g @ (gen if letter.isupper() else gen.inverse())
	return g


def _element_key(g: Mat2) -> tuple[float, ...]:
	n = g.norm
	return tuple(round(x / n, DEDUP_DIGITS) + 0.0 for x in g.entries)


def enumerate_words(generators: Mapping[str, Mat2], depth: int) -> list[list[tuple[str, Mat2]]]:
	"""
	Reduced words by length, 0..@depth, each group element kept once.

	Elements are compared projectively after scaling by their norm, so
	relations such as S^2 = 1 are found numerically.
	"""
	for name in generators:
		if len(name) != 1 or not name.isupper():
			raise InputError(f'generator names are single uppercase letters, got {name!r}')
	letters = [x for name in generators for x in (name, name.lower())]
	seen = {_element_key(Mat2.identity())}
	layers: list[list[tuple[str, Mat2]]] = [[('', Mat2.identity())]]
	for _ in range(depth):
		layer = []
		for word, m in layers[-1]:
			for x in letters:
				if word and word[-1] == x.swapcase():
					continue
				g = m @ (generators[x] if x.isupper() else generators[x.upper()].inverse())
				key = _element_key(g)
				if key in seen:
					continue
				seen.add(key)
				layer.append((word + x, g))
		layers.append(layer)
	return layers


@dataclass
class CosetEnumeration:
	"""
	Representatives Phi of the cosets <g>\\G reached within ``depth``.

	The tile of Phi is Phi^-1 applied to the support of the tile form. Arcs that
	come near tiles beyond the enumeration are flagged, either through the
	next layer of representatives (``frontier``) or, for the modular group,
	through the height and window outside which cusps were not listed.
	"""

	generators: dict[str, Mat2]
	depth: int
	words: list[str]
	reps: list[Mat2]
	frontier: list[Mat2] = field(default_factory=list)
	window: tuple[float, float] | None = None
	min_height: float = 0.0

	def __len__(self) -> int:
		return len(self.reps)


def _round_point(x: float) -> float:
	if math.isinf(x) or abs(x) > 1e15:
		return math.inf
	return float(f'{x:.{ENDPOINT_DIGITS}e}') + 0.0


def _cosets(
	generators: Mapping[str, Mat2],
	layers: list[list[tuple[str, Mat2]]],
	depth: int,
	key: Callable[[Mat2], Any],
) -> CosetEnumeration:
	seen: set[Any] = set()
	words, reps = [], []
	for layer in layers[: depth + 1]:
		for word, m in layer:
			k = key(m)
			if k in seen:
				continue
			seen.add(k)
			words.append(word)
			reps.append(m)
	frontier = []
	if len(layers) > depth + 1:
		for _, m in layers[depth + 1]:
			k = key(m)
			if k not in seen:
				seen.add(k)
				frontier.append(m)
	return CosetEnumeration(dict(generators), depth, words, reps, frontier)


def cusp_enumeration(generators: Mapping[str, Mat2], W: int = DEFAULT_WORD_LENGTH) -> CosetEnumeration:
	"""
	cosets of the stabilizer of infinity, keyed by the cusp Phi^-1(inf)
	"""
	layers = enumerate_words(generators, W + 1)
	return _cosets(generators, layers, W, lambda m: _round_point(boundary_image(m.inverse(), math.inf)))


def modular_group() -> dict[str, Mat2]:
	return {'S': INVOLUTION, 'T': Mat2(1.0, 1.0, 0.0, 1.0)}


def schottky_group(a: float = 2.0, b: float = 1.5) -> dict[str, Mat2]:
	"""
	Ping-pong group with A of axis |z| = 1 and B = diag(e^b, e^-b) of axis the imaginary axis.
	"""
	return {'A': Mat2(math.cosh(a), math.sinh(a), math.sinh(a), math.cosh(a)), 'B': hyperbolic_diag(b)}


def dihedral_group(b: float = 1.5) -> dict[str, Mat2]:
	"""
	<B, S> with S B S^-1 = B^-1: the axis of B has an orientation-reversing stabilizer
	"""
	return {'B': hyperbolic_diag(b), 'S': INVOLUTION}


def modular_cusp_enumeration(c_max: int = 8, x_window: tuple[float, float] = (-5.0, 35.0), y0: float = HOROBALL_LOW) -> CosetEnumeration:
	"""
	Cosets of <T> in PSL(2,Z) from coprime bottom rows (c, d), 1 <= c <= @c_max,
	with cusp -d/c inside @x_window.

	Missing cusps have horoballs below height 1/(y0 (c_max+1)^2) or lie outside the window.
	"""
	if c_max < 1:
		raise InputError(f'c_max must be at least 1, got {c_max}')
	lo, hi = x_window
	words, reps = ['1'], [Mat2.identity()]
	for c in range(1, c_max + 1):
		for d in range(math.floor(-hi * c) - c, math.ceil(-lo * c) + c + 1):
			if math.gcd(c, d) != 1:
				continue
			a = pow(d, -1, c)
			b = (a * d - 1) // c
			words.append(f'{c},{d}')
			reps.append(Mat2(a, b, c, d))
	return CosetEnumeration(
		modular_group(),
		c_max,
		words,
		reps,
		window=(lo, hi),
		min_height=1.0 / (y0 * (c_max + 1) ** 2),
	)


@dataclass
class BoundedOneForm:
	"""
	Periodized one-form alpha = sum over coset representatives Phi of (N Phi)^* alpha_tile.

	``density(w, dw)`` evaluates alpha_tile at w on the tangent vector dw, in the
	coordinates where the tile form is written; ``normalizer`` N maps into them.
	``C`` bounds |d alpha / area| over the whole plane as long as the tiles are
	disjoint, which construction checks on the enumeration.
	"""

	kind: str
	density: Callable[[complex, complex], float]
	meets_support: Callable[[_Arcs], 'BoolArray']
	cosets: CosetEnumeration
	normalizer: Mat2
	C: float
	base: UHPoint
	usable: bool = True
	segment_integral: float = 1.0
	details: dict[str, Any] = field(default_factory=dict)

	def __post_init__(self) -> None:
		n = self.normalizer.array
		self.transforms = n @ _stack(self.cosets.reps) if self.cosets.reps else numpy.empty((0, 2, 2))
		self.frontier_transforms = n @ _stack(self.cosets.frontier) if self.cosets.frontier else numpy.empty((0, 2, 2))

	def truncated(self, p: complex, q: complex) -> bool:
		"""
		whether the arc from p to q comes near tiles the enumeration does not contain
		"""
		if self.cosets.window is not None:
			lo, hi = self.cosets.window
			margin = 1.0 / HOROBALL_LOW
			if min(p.real, q.real) < lo + margin or max(p.real, q.real) > hi - margin:
				return True
			if min(p.imag, q.imag) < self.cosets.min_height:
				return True
		if self.frontier_transforms.shape[0]:
			return bool(numpy.any(self.meets_support(_image_arcs(self.frontier_transforms, p, q))))
		return False


def zero_form() -> BoundedOneForm:
	return BoundedOneForm(
		'zero',
		lambda w, dw: 0.0,
		lambda arcs: numpy.zeros(arcs.P.shape[0], dtype=bool),
		CosetEnumeration({}, 0, [], []),
		Mat2.identity(),
		0.0,
		UHPoint(0.0, 1.0),
		segment_integral=0.0,
	)


def _check_horoballs_disjoint(reps: Sequence[Mat2], y0: float) -> None:
	"""
	Phi^-1 of {y > y0} is the disk tangent at -d/c of diameter 1/(c^2 y0); two such
	disks are disjoint iff (x1 - x2)^2 >= 4 r1 r2, and a disk misses the base
	horoball iff its diameter is below y0.
	"""
	cs = numpy.array([m.c for m in reps])
	ds = numpy.array([m.d for m in reps])
	at_infinity = numpy.abs(cs) < 1e-12
	if numpy.count_nonzero(at_infinity) != 1:
		raise ConfigurationError('the enumeration must contain exactly one representative of the stabilizer of infinity')
	cs, ds = cs[~at_infinity], ds[~at_infinity]
	cusps = -ds / cs
	radii = 1.0 / (2.0 * cs * cs * y0)
	if numpy.any(2.0 * radii >= y0):
		raise ConfigurationError(f'a cusp horoball reaches the base horoball y > {y0}')
	gap = (cusps[:, None] - cusps[None, :]) ** 2 - 4.0 * radii[:, None] * radii[None, :]
	numpy.fill_diagonal(gap, numpy.inf)
	if numpy.any(gap < -1e-12):
		i, j = numpy.unravel_index(int(numpy.argmin(gap)), gap.shape)
		raise ConfigurationError(f'horoball tiles at {cusps[i]:g} and {cusps[j]:g} overlap; enumerate more words or raise y0')


def parabolic_form(
	y0: float = HOROBALL_LOW,
	y1: float = HOROBALL_HIGH,
	enumeration: CosetEnumeration | None = None,
) -> BoundedOneForm:
	"""
	alpha_tile = u(y) dx with u a smootherstep from 0 at @y0 to 1 at @y1, which is
	invariant under z -> z + 1, periodized over the cusps of the enumeration.

	d alpha_tile / area = -y^2 u'(y), so C = max y^2 u'(y) over [y0, y1].
	"""
	if not 0 < y0 < y1:
		raise InputError(f'need 0 < y0 < y1, got {y0}, {y1}')
	if enumeration is None:
		enumeration = modular_cusp_enumeration(y0=y0)
	_check_horoballs_disjoint(enumeration.reps, y0)
	width = y1 - y0
	ys = numpy.linspace(y0, y1, 10_001)
	C = float(numpy.max(ys * ys * smootherstep_slope((ys - y0) / width) / width))

	def density(w: complex, dw: complex) -> float:
		if w.imag <= y0:
			return 0.0
		return float(smootherstep((w.imag - y0) / width)) * dw.real

	return BoundedOneForm(
		'parabolic',
		density,
		lambda arcs: _above_horoball(arcs, y0),
		enumeration,
		Mat2.identity(),
		C,
		UHPoint(0.0, PARABOLIC_BASE),
		segment_integral=1.0,
		details={'y0': y0, 'y1': y1},
	)


def _axis_distances(elements: Sequence[Mat2], normalizer: Mat2) -> tuple['FloatArray', list[int]]:
	"""
	Distance from the imaginary axis to its image under each N gamma N^-1,
	NaN for stabilizing elements; also the indices of orientation-reversing ones.
	"""
	n, n_inv = normalizer.array, normalizer.inverse().array
	M = n @ _stack(elements) @ n_inv
	a, b, c, d = M[:, 0, 0], M[:, 0, 1], M[:, 1, 0], M[:, 1, 1]
	scale = numpy.sqrt(numpy.sum(M * M, axis=(1, 2)))
	with numpy.errstate(all='ignore'):
		# images of 0 and of infinity
		p_inf = numpy.abs(d) <= 1e-9 * scale
		q_inf = numpy.abs(c) <= 1e-9 * scale
		p = numpy.where(p_inf, numpy.inf, b / d)
		q = numpy.where(q_inf, numpy.inf, a / c)
		p_zero = ~p_inf & (numpy.abs(b) <= 1e-9 * scale)
		q_zero = ~q_inf & (numpy.abs(a) <= 1e-9 * scale)
		preserving = p_zero & q_inf
		reversing = p_inf & q_zero
		shares_end = (p_zero | p_inf | q_zero | q_inf) & ~preserving & ~reversing
		cosh = numpy.abs(q + p) / numpy.abs(q - p)
		dist = numpy.where(p * q <= 0, 0.0, numpy.arccosh(numpy.maximum(cosh, 1.0)))
	dist = numpy.where(shares_end, 0.0, dist)
	dist = numpy.where(preserving | reversing, numpy.nan, dist)
	return dist, [int(i) for i in numpy.flatnonzero(reversing)]


def hyperbolic_form(
	g: Mat2,
	generators: Mapping[str, Mat2],
	W: int = DEFAULT_WORD_LENGTH,
	strict: bool = True,
) -> BoundedOneForm:
	"""
	Bump form along the axis L of the hyperbolic element @g.

	In coordinates w = N z with L the imaginary axis, alpha_tile = psi(s) chi(d) ds,
	s = log |w| the arclength along L and d the signed distance to it. psi is a
	normalized bump on the middle quarter of [0, translation length], repeated
	with that period, and chi cuts off at |d| = eps. The tube half-width eps is
	a third of the smallest distance from L to gamma L over the enumerated
	gamma outside the stabilizer, capped at 1/2.

	An enumerated element reversing L conjugates g to its inverse; with @strict
	this raises TimeReversingSymmetryError, otherwise the form is returned
	marked unusable, with its overlapping tiles kept and C doubled.
	"""
	if W < 1:
		raise InputError(f'W must be at least 1, got {W}')
	normalizer, length = axis_normalizer(g)
	layers = enumerate_words(generators, W + 1)
	elements = [m for layer in layers[1 : W + 1] for _, m in layer]
	words = [w for layer in layers[1 : W + 1] for w, _ in layer]
	usable = True
	min_dist = math.inf
	if elements:
		dist, reversing = _axis_distances(elements, normalizer)
		if reversing:
			conj = elements[reversing[0]]
			message = f'{words[reversing[0]]} reverses the axis of g and conjugates g to its inverse'
			if strict:
				raise TimeReversingSymmetryError(message, conjugator=conj)
			logger.warning('%s; the form cannot separate g from g^-1', message)
			usable = False
		finite = dist[~numpy.isnan(dist)]
		if finite.size:
			min_dist = float(numpy.min(finite))
	eps = min(MAX_TUBE, min_dist / 3.0)
	if eps < MIN_TUBE:
		raise ConfigurationError(
			f'translates of the axis come within {min_dist:.3g} of it; no tube of half-width >= {MIN_TUBE} is disjoint from them'
		)
	n_inv = normalizer.inverse()
	ends = (boundary_image(n_inv, 0.0), boundary_image(n_inv, math.inf))

	def axis_key(m: Mat2) -> tuple[float, float]:
		inv = m.inverse()
		return _round_point(boundary_image(inv, ends[0])), _round_point(boundary_image(inv, ends[1]))

	cosets = _cosets(generators, layers, W, axis_key)
	half = SEGMENT_SHRINK * length / 2.0
	mid = length / 2.0
	mass = _bump_mass() * half
	peak = math.exp(-1.0) / mass
	C = peak * SMOOTHERSTEP_SLOPE / (eps / 2.0)
	if not usable:
		C *= 2.0

	def density(w: complex, dw: complex) -> float:
		if w.imag <= 0:
			return 0.0
		d = abs(math.asinh(w.real / w.imag))
		if d >= eps:
			return 0.0
		s = math.log(abs(w)) % length
		bump = _bump((s - mid) / half)
		if bump == 0.0:
			return 0.0
		cut = 1.0 - float(smootherstep((d - eps / 2.0) / (eps / 2.0)))
		return bump / mass * cut * (dw / w).real

	logger.debug('hyperbolic form: length=%g eps=%g cosets=%d C=%g', length, eps, len(cosets), C)
	return BoundedOneForm(
		'hyperbolic',
		density,
		lambda arcs: _meets_tube(arcs, eps),
		cosets,
		normalizer,
		C,
		mobius_apply(n_inv, UHPoint(0.0, 1.0)),
		usable=usable,
		segment_integral=1.0,
		details={'eps': eps, 'translation_length': length, 'segment': (mid - half, mid + half)},
	)


@dataclass
class FormIntegral:
	value: float
	error: float
	truncated: bool
	tiles: int

	def __float__(self) -> float:
		return self.value


def _integrate_arc(density: Callable[[complex, complex], float], geod: Geodesic, tol: float) -> tuple[float, float]:
	s0, s1 = geod.sigma_range
	pieces = max(1, math.ceil(abs(s1 - s0) / PIECE_LENGTH))
	edges = numpy.linspace(s0, s1, pieces + 1)

	def integrand(sigma: float) -> float:
		return density(geod.point(sigma), geod.velocity(sigma))

	total, error = 0.0, 0.0
	for lo, hi in zip(edges[:-1], edges[1:]):
		value, err = scipy.integrate.quad(integrand, lo, hi, epsabs=tol / pieces, epsrel=0.0, limit=100)
		total += value
		error += err
	return total, error


def integrate_form(form: BoundedOneForm, geod: Geodesic, tol: float = QUAD_TOLERANCE) -> FormIntegral:
	"""
	Integral of the periodized form along @geod.

	Each tile whose support the image arc can meet is integrated by adaptive
	Gauss-Kronrod quadrature on pieces of bounded hyperbolic length; the others
	contribute nothing. ``truncated`` is set when the arc approaches tiles
	the enumeration left out, in which case the value is that of the truncated sum.
	"""
	if not tol > 0:
		raise InputError(f'tolerance must be positive, got {tol}')
	p, q = (pt.z for pt in geod.endpoints)
	if not form.transforms.shape[0]:
		return FormIntegral(0.0, 0.0, False, 0)
	arcs = _image_arcs(form.transforms, p, q)
	hits = numpy.flatnonzero(form.meets_support(arcs))
	share = tol / max(1, len(hits))
	total, error = 0.0, 0.0
	for j in hits:
		image = geodesic_between(UHPoint.from_complex(complex(arcs.P[j])), UHPoint.from_complex(complex(arcs.Q[j])))
		value, err = _integrate_arc(form.density, image, share)
		total += value
		error += err
	truncated = form.truncated(p, q)
	if truncated:
		logger.warning('arc from %s to %s reaches the truncation boundary of the periodization', p, q)
	return FormIntegral(total, error, truncated, len(hits))


def r_value(form: BoundedOneForm, g: Mat2, base: UHPoint | None = None, tol: float = QUAD_TOLERANCE) -> FormIntegral:
	"""
	r_x(g), the integral of the form over the geodesic from x to gx; zero when g fixes x
	"""
	x = base or form.base
	gx = mobius_apply(g, x)
	if hyperbolic_distance(x, gx) < 1e-12:
		return FormIntegral(0.0, 0.0, False, 0)
	return integrate_form(form, geodesic_between(x, gx), tol)


@dataclass
class RInfinity:
	estimate: float
	error: float
	n_max: int

	def to_dict(self) -> dict[str, Any]:
		return {'estimate': self.estimate, 'error': self.error, 'n_max': self.n_max}


def r_infinity(values: Sequence[float], defect: float | None = None) -> RInfinity:
	"""
	Least-squares slope of r(g^n) against n over the upper half n >= n_max/2, for
	values given at n = 1..n_max.

	The error bar is 2 defect / n_max; without a defect bound the largest
	residual of the fit stands in for it.
	"""
	vals = numpy.asarray(values, dtype=float)
	n_max = vals.shape[0]
	if n_max < 4:
		raise InputError(f'r_infinity needs n_max >= 4, got {n_max}')
	ns = numpy.arange(1, n_max + 1)
	top = ns >= math.ceil(n_max / 2)
	slope, intercept = numpy.polyfit(ns[top], vals[top], 1)
	if defect is None:
		defect = float(numpy.max(numpy.abs(vals[top] - slope * ns[top] - intercept)))
	return RInfinity(float(slope), 2.0 * defect / n_max, n_max)


def defect_bound(form: BoundedOneForm, tol: float = QUAD_TOLERANCE) -> float:
	"""
	a geodesic triangle has area at most pi
	"""
	return math.pi * form.C + 3.0 * tol


@dataclass
class Homogenization:
	word: str
	values: list[FormIntegral]
	estimate: RInfinity

	@property
	def truncation_warnings(self) -> int:
		return sum(v.truncated for v in self.values)


def homogenization(form: BoundedOneForm, word: str, n_max: int = 30, tol: float = QUAD_TOLERANCE) -> Homogenization:
	"""
	r(g^n) for n = 1..n_max and the resulting r_infinity(g), g the element spelled by @word.
	"""
	if n_max < 4:
		raise InputError(f'n_max must be at least 4, got {n_max}')
	g = word_matrix(word, form.cosets.generators)
	values = []
	gn = Mat2.identity()
	for n in range(1, n_max + 1):
		gn = gn @ g
		values.append(r_value(form, gn, tol=tol))
	estimate = r_infinity([v.value for v in values], defect_bound(form, tol))
	logger.info('r_infinity(%s) = %.6f +- %.2g', word, estimate.estimate, estimate.error)
	return Homogenization(word, values, estimate)


def conjugates_to_inverse(g: Mat2, a: Mat2, tol: float = 1e-9) -> bool:
	"""
	a g a^-1 = g^-1 up to sign
	"""
	return (a @ g @ a.inverse()).close_to(g.inverse(), tol)


def _random_word(rng: numpy.random.Generator, alphabet: str, max_length: int) -> str:
	n = int(rng.integers(1, max_length + 1))
	return ''.join(alphabet[int(i)] for i in rng.integers(0, len(alphabet), size=n))


@dataclass
class DefectSamples:
	words: list[tuple[str, str]]
	values: 'FloatArray'
	bound: float
	truncated: int

	@property
	def maximum(self) -> float:
		return float(numpy.max(numpy.abs(self.values))) if self.values.size else 0.0

	@property
	def within_bound(self) -> bool:
		return self.maximum <= self.bound


def defect_samples(
	form: BoundedOneForm,
	pairs: int = 200,
	max_length: int = 3,
	seed: int = 0,
	tol: float = QUAD_TOLERANCE,
) -> DefectSamples:
	"""
	r(g) + r(h) - r(gh) over random pairs of words of length at most @max_length.
	"""
	gens = form.cosets.generators
	alphabet = ''.join(x for name in gens for x in (name, name.lower()))
	rng = numpy.random.default_rng(seed)
	cache: dict[str, FormIntegral] = {}

	def r(word: str) -> FormIntegral:
		if word not in cache:
			cache[word] = r_value(form, word_matrix(word, gens), tol=tol)
		return cache[word]

	words, values, truncated = [], [], 0
	for _ in range(pairs):
		u, v = _random_word(rng, alphabet, max_length), _random_word(rng, alphabet, max_length)
		ru, rv, ruv = r(u), r(v), r(u + v)
		words.append((u, v))
		values.append(ru.value + rv.value - ruv.value)
		truncated += ru.truncated or rv.truncated or ruv.truncated
	return DefectSamples(words, numpy.array(values), defect_bound(form, tol), truncated)


@dataclass
class BasepointShift:
	maximum: float
	bound: float
	pairs: int

	@property
	def within_bound(self) -> bool:
		return self.maximum <= self.bound


def basepoint_shift(
	form: BoundedOneForm,
	g: Mat2,
	pairs: int = 20,
	seed: int = 0,
	box: tuple[tuple[float, float], tuple[float, float]] = ((-0.5, 0.5), (1.0, 3.0)),
	tol: float = QUAD_TOLERANCE,
) -> BasepointShift:
	"""
	largest |r_x(g) - r_y(g)| over random base points in @box; bounded by 2 pi C
	"""
	rng = numpy.random.default_rng(seed)
	(x0, x1), (y0, y1) = box
	worst = 0.0
	for _ in range(pairs):
		x = UHPoint(float(rng.uniform(x0, x1)), float(rng.uniform(y0, y1)))
		y = UHPoint(float(rng.uniform(x0, x1)), float(rng.uniform(y0, y1)))
		worst = max(worst, abs(r_value(form, g, x, tol).value - r_value(form, g, y, tol).value))
	return BasepointShift(worst, 2.0 * math.pi * form.C + 2.0 * tol, pairs)


@dataclass
class QuasiMorphismEstimate:
	generators: dict[str, Mat2]
	W: int
	C: float
	word: str
	r_values: list[tuple[str, int, float]]
	defect_max: float
	r_infinity: RInfinity
	truncation_warnings: int
	usable: bool = True

	def to_json(self) -> dict[str, Any]:
		return {
			'generators': {name: list(m.entries) for name, m in sorted(self.generators.items())},
			'W': self.W,
			'C': self.C,
			'word': self.word,
			'r_values': [{'word': w, 'n': n, 'value': v} for w, n, v in self.r_values],
			'defect_max': self.defect_max,
			'r_infinity': self.r_infinity.to_dict(),
			'truncation_warnings': self.truncation_warnings,
			'usable': self.usable,
		}


def estimate_quasi_morphism(
	form: BoundedOneForm,
	word: str,
	n_max: int = 30,
	pairs: int = 200,
	seed: int = 0,
	tol: float = QUAD_TOLERANCE,
) -> QuasiMorphismEstimate:
	hom = homogenization(form, word, n_max, tol)
	defects = defect_samples(form, pairs, seed=seed, tol=tol) if pairs else None
	return QuasiMorphismEstimate(
		generators=form.cosets.generators,
		W=form.cosets.depth,
		C=form.C,
		word=word,
		r_values=[(word, n, v.value) for n, v in enumerate(hom.values, 1)],
		defect_max=defects.maximum if defects else 0.0,
		r_infinity=hom.estimate,
		truncation_warnings=hom.truncation_warnings + (defects.truncated if defects else 0),
		usable=form.usable,
	)
