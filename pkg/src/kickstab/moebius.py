"""
Kicked horocycle evolutions in PSL(2,R).

Evolutions f^(k)(tau) = phi_k h^tau ... phi_1 h^tau with h^t = (1, t; 0, 1),
their norm growth and escape, the entry recursions and the equivalent
three-term (discrete Schroedinger) recursion, closed forms for
upper-triangular kicks, exact trace polynomials in tau, sub-additive gauges
and the interval-cover schedule.
"""

import bisect
import logging
import math
import sys
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import TYPE_CHECKING, Any, Union

import numpy
import scipy.special

from kickstab.core import KickSchedule, indexed_schedule, random_schedule
from kickstab.types import InputError, NumericalGuardError, UnsupportedError

if TYPE_CHECKING:
	from kickstab.types import ElementKind, FloatArray

logger = logging.getLogger(__name__)

ESCAPE_THRESHOLD = 1e6
ESCAPE_STEPS = 10_000
DET_TOLERANCE = 1e-12
# relative rounding bound on a*d - b*c for entries produced by a few float products
DET_NOISE = 16.0 * sys.float_info.epsilon
CLASSIFY_TOLERANCE = 1e-9
EXACT_DEGREE_LIMIT = 64
NOT_A_PROOF = 'bounded through K is not a proof of boundedness'

Scalar = Union[int, float, Fraction]


@dataclass(frozen=True)
class Mat2:
	"""
	Element (a, b; c, d) of PSL(2,R).

	The representative is normalized to a > 0, or a = 0 and b > 0. When the
	determinant drifts from 1 by more than DET_TOLERANCE it is rescaled by
	1/sqrt(det). Determinants that are not positive are rejected at every size
	until the rounding in a*d - b*c reaches 1; beyond that the sign cannot be
	read and products of escaping orbits are taken as given.
	"""

	a: float
	b: float
	c: float
	d: float

	def __post_init__(self) -> None:
		a, b, c, d = float(self.a), float(self.b), float(self.c), float(self.d)
		det = a * d - b * c
		# rounding in a*d - b*c; once it reaches 1 the sign of det is no longer known
		noise = DET_NOISE * (abs(a * d) + abs(b * c))
		if noise < 1.0:
			if not det > noise:
				raise InputError(f'({a}, {b}; {c}, {d}) has determinant {det}, not in SL(2,R)')
			if abs(det - 1.0) > max(DET_TOLERANCE, noise):
				logger.debug('renormalizing determinant drift %.3g', det - 1.0)
				s = 1.0 / math.sqrt(det)
				a, b, c, d = a * s, b * s, c * s, d * s
		else:
			logger.debug('norm %.3g too large to check the determinant', math.sqrt(a * a + b * b + c * c + d * d))
		if a < 0 or (a == 0 and b < 0):
			a, b, c, d = -a, -b, -c, -d
		object.__setattr__(self, 'a', a)
		object.__setattr__(self, 'b', b)
		object.__setattr__(self, 'c', c)
		object.__setattr__(self, 'd', d)

	@classmethod
	def identity(cls) -> 'Mat2':
		return cls(1.0, 0.0, 0.0, 1.0)

	@classmethod
	def from_array(cls, arr: Any) -> 'Mat2':
		m = numpy.asarray(arr, dtype=float)
		return cls(m[0, 0], m[0, 1], m[1, 0], m[1, 1])

	@property
	def entries(self) -> tuple[float, float, float, float]:
		return self.a, self.b, self.c, self.d

	@property
	def array(self) -> 'FloatArray':
		return numpy.array([[self.a, self.b], [self.c, self.d]])

	@property
	def det(self) -> float:
		return self.a * self.d - self.b * self.c

	@property
	def trace(self) -> float:
		return self.a + self.d

	@property
	def norm(self) -> float:
		return math.sqrt(self.a * self.a + self.b * self.b + self.c * self.c + self.d * self.d)

	def __matmul__(self, other: 'Mat2') -> 'Mat2':
		return Mat2(
			self.a * other.a + self.b * other.c,
			self.a * other.b + self.b * other.d,
			self.c * other.a + self.d * other.c,
			self.c * other.b + self.d * other.d,
		)

	def inverse(self) -> 'Mat2':
		return Mat2(self.d, -self.b, -self.c, self.a)

	def power(self, n: int) -> 'Mat2':
		base = self if n >= 0 else self.inverse()
		n = abs(n)
		result = Mat2.identity()
		while n:
			if n & 1:
				result = result @ base
			base = base @ base
			n >>= 1
		return result

	def close_to(self, other: 'Mat2', tol: float = 1e-10) -> bool:
		"""
		projective equality, entries compared relative to max(1, norm)
		"""
		scale = max(1.0, self.norm, other.norm)
		same = max(abs(x - y) for x, y in zip(self.entries, other.entries))
		flipped = max(abs(x + y) for x, y in zip(self.entries, other.entries))
		return min(same, flipped) <= tol * scale

	def __repr__(self) -> str:
		return f'Mat2({self.a!r}, {self.b!r}, {self.c!r}, {self.d!r})'


def horocycle(t: float) -> Mat2:
	return Mat2(1.0, t, 0.0, 1.0)


def hyperbolic_diag(t: float) -> Mat2:
	return Mat2(math.exp(t), 0.0, 0.0, math.exp(-t))


def rotation(theta: float) -> Mat2:
	"""
	(cos, -sin; sin, cos), trace 2 cos(theta)
	"""
	return Mat2(math.cos(theta), -math.sin(theta), math.sin(theta), math.cos(theta))


def lower_unipotent(c: float) -> Mat2:
	return Mat2(1.0, 0.0, c, 1.0)


def upper_kick(a: float, b: float) -> Mat2:
	if a == 0:
		raise InputError('upper-triangular kicks need a nonzero diagonal')
	return Mat2(a, b, 0.0, 1.0 / a)


INVOLUTION = Mat2(0.0, -1.0, 1.0, 0.0)


def matrix_norm(g: Mat2) -> float:
	"""
	Euclidean norm sqrt(tr g g^T); at least sqrt(2) on SL(2,R)
	"""
	return g.norm


def constant_schedule(kick: Mat2, name: str = '') -> KickSchedule:
	return indexed_schedule(lambda i: kick, name=name or 'constant')


def sign_kicks(seed: int, magnitude: float = 1.0) -> KickSchedule:
	"""
	lower-unipotent kicks with c_i = +-magnitude, signs drawn from the seed
	"""
	return random_schedule(
		seed,
		choices=(lower_unipotent(magnitude), lower_unipotent(-magnitude)),
		name=f'signs(seed={seed})',
	)


def random_unipotent_kicks(seed: int, low: float = -1.0, high: float = 1.0) -> KickSchedule:
	def sample(u: 'FloatArray') -> Mat2:
		return lower_unipotent(low + (high - low) * float(u[0]))

	return random_schedule(seed, sampler=sample, name=f'unipotent(seed={seed})')


def decaying_kicks(exponent: float = 2.0, scale: float = 1.0) -> KickSchedule:
	"""
	c_i = scale * i^-exponent, a potential tending to zero
	"""
	return indexed_schedule(lambda i: lower_unipotent(scale * i**-exponent), name=f'decaying({exponent})')


def evolve_matrix(kicks: KickSchedule, tau: float, k: int, flow: Callable[[float], Mat2] = horocycle) -> Mat2:
	"""
	f^(k)(tau) = phi_k h^tau ... phi_1 h^tau, f^(0) the identity.
	"""
	if k < 0:
		raise InputError(f'k must be nonnegative, got {k}')
	step = flow(tau)
	g = Mat2.identity()
	for i in range(1, k + 1):
		g = kicks.kick(i) @ (step @ g)
	return g


@dataclass
class MatrixSweep:
	"""
	norms[t, k] and traces[t, k] of f^(k)(taus[t]) for k = 0..K
	"""

	taus: 'FloatArray'
	norms: 'FloatArray'
	traces: 'FloatArray'

	@property
	def log_norms(self) -> 'FloatArray':
		with numpy.errstate(divide='ignore'):
			return numpy.log(self.norms)


def evolve_matrix_grid(kicks: KickSchedule, taus: Any, K: int) -> MatrixSweep:
	"""
	Same products as evolve_matrix for a whole tau grid at once (SL(2,R) representatives).
	"""
	tarr = numpy.atleast_1d(numpy.asarray(taus, dtype=float))
	T = tarr.shape[0]
	M = numpy.broadcast_to(numpy.eye(2), (T, 2, 2)).copy()
	H = numpy.broadcast_to(numpy.eye(2), (T, 2, 2)).copy()
	H[:, 0, 1] = tarr
	norms = numpy.empty((T, K + 1))
	traces = numpy.empty((T, K + 1))
	norms[:, 0] = math.sqrt(2.0)
	traces[:, 0] = 2.0
	with numpy.errstate(over='ignore', invalid='ignore'):
		for i in range(1, K + 1):
			M = kicks.kick(i).array @ (H @ M)
			norms[:, i] = numpy.sqrt(numpy.sum(M * M, axis=(1, 2)))
			traces[:, i] = M[:, 0, 0] + M[:, 1, 1]
	return MatrixSweep(tarr, norms, traces)


@dataclass
class EscapeVerdict:
	escaped: bool
	step: int | None
	max_norm: float
	argmax: int
	K: int
	threshold: float

	@property
	def note(self) -> str:
		if self.escaped:
			return f'norm exceeded {self.threshold:g} at step {self.step}'
		return NOT_A_PROOF


def escape_detector(
	kicks: KickSchedule,
	tau: float,
	K: int = ESCAPE_STEPS,
	threshold: float = ESCAPE_THRESHOLD,
	flow: Callable[[float], Mat2] = horocycle,
) -> EscapeVerdict:
	"""
	First k with |f^(k)(tau)| > threshold, with the running maximum so far.

	Escape along a subsequence is quasi-mixing evidence; staying below the
	threshold through K proves nothing.
	"""
	if K < 1:
		raise InputError(f'K must be at least 1, got {K}')
	if not threshold > math.sqrt(2.0):
		raise InputError(f'threshold must exceed sqrt(2), got {threshold}')
	step = flow(tau)
	g = Mat2.identity()
	best, argmax = -math.inf, 0
	for k in range(1, K + 1):
		g = kicks.kick(k) @ (step @ g)
		n = g.norm
		if n > best:
			best, argmax = n, k
		if n > threshold:
			return EscapeVerdict(True, k, best, argmax, K, threshold)
	return EscapeVerdict(False, None, best, argmax, K, threshold)


def qm_scan(
	kicks: KickSchedule,
	taus: Sequence[float],
	K: int = ESCAPE_STEPS,
	threshold: float = ESCAPE_THRESHOLD,
) -> list[EscapeVerdict]:
	"""
	escape verdict per period; the periods that never escape are the candidates for boundedness
	"""
	verdicts = [escape_detector(kicks, float(t), K, threshold) for t in taus]
	escaped = sum(v.escaped for v in verdicts)
	logger.info('escape scan: %d of %d periods escaped', escaped, len(verdicts))
	return verdicts


def _potential(c: 'Sequence[float] | KickSchedule', K: int) -> 'FloatArray':
	"""
	c_1..c_K from a number sequence or from a schedule of lower-unipotent kicks
	"""
	if isinstance(c, KickSchedule):
		values = []
		for i, g in enumerate(c.kicks(1, K + 1), 1):
			if abs(g.a - 1.0) > 1e-12 or abs(g.d - 1.0) > 1e-12 or abs(g.b) > 1e-12:
				raise UnsupportedError(f'kick {i} is not lower unipotent: {g!r}')
			values.append(g.c)
		return numpy.array(values, dtype=float)
	arr = numpy.asarray(c, dtype=float)
	if arr.shape[0] < K:
		raise InputError(f'need {K} potential values, got {arr.shape[0]}')
	return arr[:K]


@dataclass
class EntrySequences:
	"""
	f^(k)(tau) = (alpha_k, beta_k; gamma_k, delta_k) for k = 0..K
	"""

	alpha: 'FloatArray'
	beta: 'FloatArray'
	gamma: 'FloatArray'
	delta: 'FloatArray'

	def matrix(self, k: int) -> Mat2:
		return Mat2(self.alpha[k], self.beta[k], self.gamma[k], self.delta[k])

	@property
	def norms(self) -> 'FloatArray':
		with numpy.errstate(over='ignore'):
			return numpy.sqrt(self.alpha**2 + self.beta**2 + self.gamma**2 + self.delta**2)

	def nondecreasing(self) -> bool:
		return all(bool(numpy.all(s[1:] >= s[:-1])) for s in (self.alpha, self.beta, self.gamma, self.delta))


def entry_recursion(c: 'Sequence[float] | KickSchedule', tau: float, K: int) -> EntrySequences:
	"""
	For lower-unipotent kicks (1, 0; c_k, 1):
	alpha_k = alpha_{k-1} + tau gamma_{k-1}, gamma_k = gamma_{k-1} + c_k alpha_k,
	beta_k = beta_{k-1} + tau delta_{k-1}, delta_k = delta_{k-1} + c_k beta_k.
	"""
	cs = _potential(c, K)
	alpha, beta, gamma, delta = (numpy.empty(K + 1) for _ in range(4))
	alpha[0], beta[0], gamma[0], delta[0] = 1.0, 0.0, 0.0, 1.0
	with numpy.errstate(over='ignore', invalid='ignore'):
		for k in range(1, K + 1):
			alpha[k] = alpha[k - 1] + tau * gamma[k - 1]
			gamma[k] = gamma[k - 1] + cs[k - 1] * alpha[k]
			beta[k] = beta[k - 1] + tau * delta[k - 1]
			delta[k] = delta[k - 1] + cs[k - 1] * beta[k]
	return EntrySequences(alpha, beta, gamma, delta)


@dataclass
class SchrodingerState:
	"""
	(q_{k-1}, q_k) together with the parameters of q_{k+1} = (2 + tau c_k) q_k - q_{k-1}.

	``c`` holds c_1, c_2, ... at positions 0, 1, ...; works with Fractions for exact replay.
	"""

	q_prev: Scalar
	q: Scalar
	k: int
	tau: Scalar
	c: Sequence[Scalar] = field(default_factory=tuple)

	def advance(self) -> 'SchrodingerState':
		nxt = (2 + self.tau * self.c[self.k - 1]) * self.q - self.q_prev
		return SchrodingerState(self.q, nxt, self.k + 1, self.tau, self.c)

	def retreat(self) -> 'SchrodingerState':
		prev = (2 + self.tau * self.c[self.k - 2]) * self.q_prev - self.q
		return SchrodingerState(prev, self.q_prev, self.k - 1, self.tau, self.c)


def schrodinger_solve(c: 'Sequence[float] | KickSchedule', tau: float, q0: float, q1: float, K: int) -> 'FloatArray':
	"""
	q_0..q_K of q_{k+1} = (2 + tau c_k) q_k - q_{k-1}.

	With q_0 = (2 - u) q_1 these are the kernel vectors of K_{u,tau} = tau L + Delta_u,
	L the second difference and Delta_u the potential with boundary weight u.
	"""
	if K < 1:
		raise InputError(f'K must be at least 1, got {K}')
	cs = _potential(c, max(K - 1, 1))
	q = numpy.empty(K + 1)
	q[0], q[1] = q0, q1
	with numpy.errstate(over='ignore', invalid='ignore'):
		for k in range(1, K):
			q[k + 1] = (2.0 + tau * cs[k - 1]) * q[k] - q[k - 1]
	return q


def boundary_solution(c: 'Sequence[float] | KickSchedule', tau: float, u: float, K: int) -> 'FloatArray':
	"""
	the solution with q_1 = 1 and the boundary rule q_0 = (2 - u) q_1
	"""
	return schrodinger_solve(c, tau, 2.0 - u, 1.0, K)


def entries_from_schrodinger(c: 'Sequence[float] | KickSchedule', tau: float, K: int) -> EntrySequences:
	"""
	alpha solves the recursion from (1, 1) and beta from (0, tau);
	gamma and delta are their forward differences divided by tau.
	"""
	if not tau:
		raise InputError('the reconstruction divides by tau')
	cs = _potential(c, K)
	alpha = schrodinger_solve(cs, tau, 1.0, 1.0, K + 1)
	beta = schrodinger_solve(cs, tau, 0.0, tau, K + 1)
	return EntrySequences(
		alpha[:-1],
		beta[:-1],
		numpy.diff(alpha) / tau,
		numpy.diff(beta) / tau,
	)


@dataclass
class BoundednessLink:
	q_max: float
	norm_max: float
	bound: float

	@property
	def q_bounded(self) -> bool:
		return self.q_max <= self.bound

	@property
	def norm_bounded(self) -> bool:
		return self.norm_max <= self.bound

	@property
	def agree(self) -> bool:
		return self.q_bounded == self.norm_bounded


def boundedness_link_check(c: 'Sequence[float] | KickSchedule', tau: float, K: int, bound: float = ESCAPE_THRESHOLD) -> BoundednessLink:
	"""
	Finite-horizon form of: all solutions q are bounded iff the evolution is bounded.

	The two fundamental solutions are the alpha and beta entry sequences.
	"""
	seq = entry_recursion(c, tau, K)
	q_max = float(numpy.max(numpy.abs(numpy.concatenate([seq.alpha, seq.beta]))))
	return BoundednessLink(q_max, float(numpy.max(seq.norms)), bound)


def upper_triangular_closed_form(a: Sequence[float], b: Sequence[float], tau: float, k: int) -> Mat2:
	"""
	Evolution for kicks (a_i, b_i; 0, 1/a_i):
	diagonal (A, 1/A) with A = a_1...a_k and upper entry w_k + tau z_k,
	z_k = sum_i (a_k...a_i)^2 / A and w_k the upper entry at tau = 0.
	"""
	aa = numpy.asarray(a, dtype=float)[:k]
	bb = numpy.asarray(b, dtype=float)[:k]
	if aa.shape[0] < k or bb.shape[0] < k:
		raise InputError(f'need {k} kick entries')
	if numpy.any(aa == 0):
		raise InputError('every a_i must be nonzero')
	if k == 0:
		return horocycle(0.0)
	logs = numpy.log(numpy.abs(aa))
	# log |a_k ... a_i| for i = 1..k
	suffix = numpy.cumsum(logs[::-1])[::-1]
	log_A = suffix[0]
	sign_A = -1.0 if numpy.count_nonzero(aa < 0) % 2 else 1.0
	z = sign_A * math.fsum(numpy.exp(2.0 * suffix - log_A))
	P, w = 1.0, 0.0
	for ai, bi in zip(aa, bb):
		P, w = ai * P, ai * w + bi / P
	return Mat2(P, w + tau * z, 0.0, 1.0 / P)


def _is_exact(x: Any) -> bool:
	return isinstance(x, (int, Fraction)) and not isinstance(x, bool)


def _padd(p: list[Any], q: list[Any]) -> list[Any]:
	n = max(len(p), len(q))
	return [(p[i] if i < len(p) else 0) + (q[i] if i < len(q) else 0) for i in range(n)]


def _pscale(s: Any, p: list[Any]) -> list[Any]:
	return [s * x for x in p]


def _pshift(p: list[Any]) -> list[Any]:
	return [0, *p]


@dataclass(frozen=True)
class TauPolynomial:
	"""
	Polynomial in the period tau, coefficients in ascending order.

	Exact polynomials keep Fractions; evaluation is Horner in exact
	arithmetic and converted to float at the end.
	"""

	coeffs: tuple[Any, ...]
	exact: bool = True
	k: int = 0
	prod_c: Any = None

	def __post_init__(self) -> None:
		cs = list(self.coeffs) or [0]
		while len(cs) > 1 and cs[-1] == 0:
			cs.pop()
		object.__setattr__(self, 'coeffs', tuple(cs))

	@property
	def degree(self) -> int:
		if len(self.coeffs) == 1 and self.coeffs[0] == 0:
			return -1
		return len(self.coeffs) - 1

	@property
	def leading(self) -> Any:
		return self.coeffs[-1]

	def __call__(self, tau: Scalar) -> float:
		x: Any = Fraction(tau) if self.exact else float(tau)
		acc: Any = 0
		for coef in reversed(self.coeffs):
			acc = acc * x + coef
		return float(acc)

	def __add__(self, other: 'TauPolynomial') -> 'TauPolynomial':
		return TauPolynomial(tuple(_padd(list(self.coeffs), list(other.coeffs))), self.exact and other.exact)

	def __mul__(self, other: 'TauPolynomial') -> 'TauPolynomial':
		out: list[Any] = [0] * (len(self.coeffs) + len(other.coeffs) - 1)
		for i, x in enumerate(self.coeffs):
			for j, y in enumerate(other.coeffs):
				out[i + j] += x * y
		return TauPolynomial(tuple(out), self.exact and other.exact)

	def __str__(self) -> str:
		terms = [f'{c}*tau^{i}' for i, c in enumerate(self.coeffs) if c != 0]
		return ' + '.join(terms) or '0'

	def to_json(self) -> dict[str, Any]:
		return {
			'k': self.k,
			'coeffs': [str(c) for c in self.coeffs],
			'leading': str(self.leading),
			'prod_c': str(self.prod_c),
		}


def _kick_entries(kick: Any, exact: bool) -> tuple[Any, Any, Any, Any]:
	if isinstance(kick, Mat2):
		if exact:
			raise InputError('exact trace polynomials need rational kick entries, got a float matrix')
		return kick.entries
	a, b, c, d = kick
	if exact:
		if not all(_is_exact(x) for x in (a, b, c, d)):
			raise InputError(f'exact mode needs int or Fraction entries, got {kick!r}')
		a, b, c, d = (Fraction(x) for x in (a, b, c, d))
		if a * d - b * c != 1:
			raise InputError(f'kick {kick!r} does not have determinant 1')
	return a, b, c, d


def trace_polynomial(kicks: 'Sequence[Any] | KickSchedule', k: int, exact: bool = True) -> TauPolynomial:
	"""
	p_k(tau) = trace f^(k)(tau) as a polynomial in tau.

	When every c_i is nonzero the degree is k and the leading coefficient c_1...c_k.
	Kicks are 4-tuples (a, b, c, d); exact mode wants int or Fraction entries.
	"""
	if k < 0:
		raise InputError(f'k must be nonnegative, got {k}')
	if exact and k > EXACT_DEGREE_LIMIT:
		raise NumericalGuardError(f'exact trace polynomials are limited to k <= {EXACT_DEGREE_LIMIT}, got {k}')
	seq = kicks.kicks(1, k + 1) if isinstance(kicks, KickSchedule) else list(kicks)[:k]
	if len(seq) < k:
		raise InputError(f'need {k} kicks, got {len(seq)}')
	one: Any = Fraction(1) if exact else 1.0
	zero: Any = Fraction(0) if exact else 0.0
	m11, m12, m21, m22 = [one], [zero], [zero], [one]
	prod_c: Any = one
	for kick in seq:
		a, b, c, d = _kick_entries(kick, exact)
		prod_c *= c
		# h^tau M
		t11, t12 = _padd(m11, _pshift(m21)), _padd(m12, _pshift(m22))
		t21, t22 = m21, m22
		m11 = _padd(_pscale(a, t11), _pscale(b, t21))
		m12 = _padd(_pscale(a, t12), _pscale(b, t22))
		m21 = _padd(_pscale(c, t11), _pscale(d, t21))
		m22 = _padd(_pscale(c, t12), _pscale(d, t22))
	return TauPolynomial(tuple(_padd(m11, m22)), exact, k, prod_c)


def random_rational_kicks(seed: int, k: int, denominator: int = 4, height: int = 8) -> list[tuple[Fraction, ...]]:
	"""
	k kicks (1, p; q, 1 + pq) with p, q random nonzero fractions n/denominator, |n| <= height
	"""
	rng = numpy.random.default_rng(seed)
	numerators = [n for n in range(-height, height + 1) if n]
	kicks = []
	for _ in range(k):
		p = Fraction(int(rng.choice(numerators)), denominator)
		q = Fraction(int(rng.choice(numerators)), denominator)
		kicks.append((Fraction(1), p, q, 1 + p * q))
	return kicks


def trace_growth_radius(p: TauPolynomial) -> float:
	"""
	R with |p(tau)| >= |lead| |tau|^deg / 2 for all |tau| >= R.
	"""
	if p.degree < 1:
		raise InputError('growth needs a nonconstant polynomial')
	lead = abs(float(p.leading))
	M = max(abs(float(c)) / lead for c in p.coeffs[:-1])
	return 1.0 + 2.0 * M


def gauge(g: Mat2) -> float:
	"""
	rho(g) = log max(|g|_E, 1); equals log sqrt(2) at the identity since |g|_E >= sqrt(2)
	"""
	return math.log(max(g.norm, 1.0))


@dataclass
class Gauge:
	"""
	Sampled certificate of sub-additivity for rho.

	``constant`` is the largest observed rho(gh) - rho(g) - rho(h) (clamped at 0);
	``conjugation`` the largest |rho(a g a^-1) - rho(g)| - 2 log |a|_E, which
	submultiplicativity keeps at or below 0.
	"""

	constant: float
	conjugation: float
	samples: int


def random_sl2(rng: numpy.random.Generator, spread: float = 2.0) -> Mat2:
	"""
	rotation . diag(e^t, e^-t) . rotation with t uniform in [0, spread]
	"""
	t1, t2 = rng.uniform(0.0, 2.0 * math.pi, size=2)
	t = rng.uniform(0.0, spread)
	return rotation(t1) @ hyperbolic_diag(t) @ rotation(t2)


def certify_gauge(samples: int = 10_000, seed: int = 0, spread: float = 2.0) -> Gauge:
	rng = numpy.random.default_rng(seed)
	worst_sub, worst_conj = 0.0, -math.inf
	for _ in range(samples):
		g, h, a = (random_sl2(rng, spread) for _ in range(3))
		worst_sub = max(worst_sub, gauge(g @ h) - gauge(g) - gauge(h))
		worst_conj = max(worst_conj, abs(gauge(a @ g @ a.inverse()) - gauge(g)) - 2.0 * math.log(a.norm))
	return Gauge(worst_sub, worst_conj, samples)


def spectral_radius(g: Mat2) -> float:
	t = abs(g.trace)
	if t <= 2.0:
		return 1.0
	return (t + math.sqrt(t * t - 4.0)) / 2.0


def rho_infinity(g: Mat2) -> float:
	"""
	lim rho(g^n)/n = log of the spectral radius
	"""
	return math.log(spectral_radius(g))


@dataclass
class GaugeGrowth:
	rho: 'FloatArray'
	slope: float


def gauge_growth(kicks: KickSchedule, tau: float, K: int, flow: Callable[[float], Mat2] = horocycle) -> GaugeGrowth:
	"""
	rho(f^(k)(tau)) for k = 0..K and the largest C2 with rho(f^(k)) >= C2 k on [K/2, K].

	The product is rescaled every step and the scale kept as a logarithm, so
	exponential growth does not overflow.
	"""
	if K < 2:
		raise InputError(f'K must be at least 2, got {K}')
	step = flow(tau).array
	M = numpy.eye(2)
	log_scale = 0.0
	rho = numpy.empty(K + 1)
	rho[0] = math.log(math.sqrt(2.0))
	for k in range(1, K + 1):
		M = kicks.kick(k).array @ (step @ M)
		s = float(numpy.max(numpy.abs(M)))
		M /= s
		log_scale += math.log(s)
		rho[k] = max(log_scale + math.log(float(numpy.sqrt(numpy.sum(M * M)))), 0.0)
	ks = numpy.arange(K // 2, K + 1)
	ks = ks[ks > 0]
	return GaugeGrowth(rho, float(numpy.min(rho[ks] / ks)))


@dataclass
class Classification:
	kind: 'ElementKind'
	conjugate_to_inverse: bool
	trace: float
	# an elliptic element of order two is its own inverse
	involution: bool = False


def classify_element(g: Mat2, tol: float = CLASSIFY_TOLERANCE) -> Classification:
	"""
	Classification by |tr g| against 2.

	conjugate_to_inverse is the PSL(2,R) statement only: true for hyperbolic
	elements and the identity. Conjugacy inside a given discrete subgroup is not decided.
	"""
	t = abs(g.trace)
	if g.close_to(Mat2.identity(), tol):
		return Classification('identity', True, g.trace)
	if t > 2.0 + tol:
		return Classification('hyperbolic', True, g.trace)
	if t >= 2.0 - tol:
		return Classification('parabolic', False, g.trace)
	return Classification('elliptic', False, g.trace, involution=t <= tol)


def conjugates_symmetric_to_inverse(g: Mat2, tol: float = 1e-10) -> bool:
	"""
	The involution (0, -1; 1, 0) of PSL(2,Z) conjugates a symmetric matrix to its inverse.
	"""
	if abs(g.b - g.c) > tol * max(1.0, g.norm):
		raise InputError(f'{g!r} is not symmetric')
	return (INVOLUTION @ g @ INVOLUTION.inverse()).close_to(g.inverse(), tol)


def harmonic(n: Any) -> Any:
	"""
	H(n) = 1 + 1/2 + ... + 1/n through the digamma function, H(0) = 0
	"""
	return scipy.special.digamma(numpy.asarray(n, dtype=float) + 1.0) + numpy.euler_gamma


@dataclass(frozen=True)
class CoverBlock:
	"""
	Indices start..stop of one block of the harmonic series, sum >= 1,
	laid end to end as the n-th block of subsequence m starting at ``offset``.
	"""

	j: int
	start: int
	stop: int
	m: int
	n: int
	offset: float
	total: float


def unpair(j: int) -> tuple[int, int]:
	"""
	inverse of the Cantor pairing j = (m + n)(m + n + 1)/2 + n
	"""
	w = (math.isqrt(8 * j + 1) - 1) // 2
	n = j - w * (w + 1) // 2
	return w - n, n


class IntervalCover:
	"""
	Intervals I_k = [r_k, r_k + 1/k] covering every tau >= 0 infinitely many times.

	The harmonic series is cut into consecutive blocks of sum >= 1; block j goes
	to subsequence m, where (m, n) = unpair(j), and each subsequence lays its
	blocks end to end from 0. Kicks h^beta_k with beta_k = (k-1) r_{k-1} - k r_k
	give the evolution f^(k)(tau) = h^{k(tau - r_k)}.

	Blocks grow geometrically, so indices are handled through harmonic numbers
	and never enumerated one by one.
	"""

	def __init__(self) -> None:
		self._blocks: list[CoverBlock] = []
		self._starts: list[int] = []
		self._ends: dict[int, float] = {}

	def block(self, j: int) -> CoverBlock:
		while len(self._blocks) <= j:
			self._extend()
		return self._blocks[j]

	def _extend(self) -> None:
		j = len(self._blocks)
		start = self._blocks[-1].stop + 1 if self._blocks else 1
		base = float(harmonic(start - 1))
		hi = start
		while float(harmonic(hi)) - base < 1.0:
			hi *= 2
		lo = start
		# smallest stop with H(stop) - H(start - 1) >= 1
		while lo < hi:
			mid = (lo + hi) // 2
			if float(harmonic(mid)) - base >= 1.0:
				hi = mid
			else:
				lo = mid + 1
		m, n = unpair(j)
		offset = self._ends.get(m, 0.0)
		total = float(harmonic(lo)) - base
		self._ends[m] = offset + total
		self._blocks.append(CoverBlock(j, start, lo, m, n, offset, total))
		self._starts.append(start)

	def _block_of(self, k: int) -> CoverBlock:
		if k < 1:
			raise InputError(f'interval indices start at 1, got {k}')
		while not self._blocks or self._blocks[-1].stop < k:
			self._extend()
		return self._blocks[bisect.bisect_right(self._starts, k) - 1]

	def r(self, k: int) -> float:
		if k == 0:
			return 0.0
		blk = self._block_of(k)
		return blk.offset + float(harmonic(k - 1) - harmonic(blk.start - 1))

	def interval(self, k: int) -> tuple[float, float]:
		rk = self.r(k)
		return rk, rk + 1.0 / k

	def beta(self, k: int) -> float:
		return (k - 1) * self.r(k - 1) - k * self.r(k)

	def kicks(self) -> KickSchedule:
		return indexed_schedule(lambda k: horocycle(self.beta(k)), name='interval-cover')

	def covering(self, tau: float, count: int = 3, max_blocks: int = 200) -> list[int]:
		"""
		the first @count indices k (in block order) with tau in I_k
		"""
		if tau < 0:
			raise InputError('the cover only reaches tau >= 0')
		found: list[int] = []
		for j in range(max_blocks):
			blk = self.block(j)
			if not blk.offset <= tau <= blk.offset + blk.total:
				continue
			target = tau - blk.offset + float(harmonic(blk.start - 1))
			lo, hi = blk.start, blk.stop
			# largest k in the block with r_k <= tau
			while lo < hi:
				mid = (lo + hi + 1) // 2
				if float(harmonic(mid - 1)) <= target:
					lo = mid
				else:
					hi = mid - 1
			found.append(lo)
			if len(found) == count:
				return sorted(found)
		raise InputError(f'tau={tau} is covered fewer than {count} times within {max_blocks} blocks')

	def cover_counts(self, taus: Sequence[float], K: int) -> numpy.ndarray:
		"""
		number of k <= K with tau in I_k, one per block since a block's intervals tile a segment
		"""
		counts = numpy.zeros(len(taus), dtype=numpy.int64)
		tarr = numpy.asarray(taus, dtype=float)
		j = 0
		while self.block(j).start <= K:
			blk = self.block(j)
			last = min(blk.stop, K)
			end = self.r(last) + 1.0 / last
			counts += (tarr >= blk.offset) & (tarr <= end)
			j += 1
		return counts
