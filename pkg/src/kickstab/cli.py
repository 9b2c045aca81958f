"""
Command-line interface: one subcommand per experiment family.

Every run writes its tables into --out together with manifest.json, which
echoes the configuration and records the sha256 digest of each file. Running
with --check-manifest re-executes a recorded configuration in canonical mode
and compares digests.
"""

import argparse
import concurrent.futures
import dataclasses
import itertools
import json
import logging
import math
import os
import sys
import tempfile
import time
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from fractions import Fraction
from typing import TYPE_CHECKING, Any

import numpy

from kickstab import __version__
from kickstab.core import (
	KickedSystem,
	KickSchedule,
	birkhoff_profile,
	cycled_schedule,
	identity_schedule,
	lemma_c_check,
	recurrence_ratio,
	time_reversal_schedule,
)
from kickstab.hamiltonian import (
	FLAT_SHIFT,
	PHI,
	REFLECT_XY,
	REFLECT_Y,
	THETA,
	FlatTorusArena,
	SphereArena,
	flat_torus_lemma_d,
	flat_torus_mean,
	hamiltonian_H,
	kicked_top_scan,
	lemma_d_scan,
	nonmixing_witness,
	random_rotation_kicks,
	randomizing_schedule,
	time_reversal_check,
	two_step_return,
)
from kickstab.hyperbolic import (
	basepoint_shift,
	conjugates_to_inverse,
	defect_bound,
	dihedral_group,
	estimate_quasi_morphism,
	homogenization,
	hyperbolic_form,
	modular_cusp_enumeration,
	modular_group,
	parabolic_form,
	schottky_group,
	word_matrix,
)
from kickstab.moebius import (
	IntervalCover,
	Mat2,
	boundedness_link_check,
	constant_schedule,
	decaying_kicks,
	entries_from_schrodinger,
	entry_recursion,
	escape_detector,
	evolve_matrix_grid,
	gauge_growth,
	horocycle,
	random_rational_kicks,
	random_unipotent_kicks,
	sign_kicks,
	trace_growth_radius,
	trace_polynomial,
)
from kickstab.torus import (
	DISCREPANCY_THRESHOLD,
	TorusArena,
	burago_hit_frequency,
	character,
	discrepancy_1d,
	mean_square_weyl,
	mean_square_weyl_analytic,
	torus_orbit,
	translation_schedule,
	weyl_sum,
)
from kickstab.types import ConfigurationError, KickStabError, NumericalGuardError
from kickstab.utils import parse_grid, parse_window, sha256_file, write_csv, write_json

if TYPE_CHECKING:
	from kickstab.types import FloatArray, OutputFormat, RunMode

logger = logging.getLogger(__name__)

MANIFEST_NAME = 'manifest.json'
TOP_SAMPLE_POINT = (1.0, 0.0, 0.0)
REVERSAL_TIMES = (0.1, 0.37, 1.0, 2.5)
TORUS_HAMILTONIAN_TAUS = (0.3, 0.8, 1.7)
WITNESS_RADIUS = math.sqrt(0.01 / math.pi)
PSL2_KICKS = ('identity', 'signs', 'unipotent', 'monotone', 'decaying', 'reverse', 'cover')
TOP_KICKS = ('identity', 'phi', 'rotations', 'reversal')


@dataclass(frozen=True)
class RunConfig:
	"""
	Everything a run depends on; ``to_dict`` is what the manifest records.

	Vector-valued parameters (omega, h, gamma) are comma-separated strings so
	the record stays flat.
	"""

	command: str = ''
	tau: float = 1.0
	tau_grid: str | None = None
	steps: int = 1000
	window: str = '100:1000'
	seed: int = 0
	out: str = '.'
	format: 'OutputFormat' = 'csv'
	strict: bool = False
	mode: 'RunMode' = 'canonical'
	workers: int | None = None
	kicks: str = 'random'
	omega: str = repr(math.sqrt(2.0))
	h: str = '1'
	threshold: float = 1e6
	samples: int = 1
	eps: float = 0.1
	n_max: int = 30
	pairs: int = 200
	c_max: int = 8
	group: str = 'schottky'
	word: str = 'B'
	word_length: int = 8
	gamma: str = f'{math.sqrt(2.0) / 10!r},{math.sqrt(3.0) / 10!r}'
	radius: float = WITNESS_RADIUS

	def to_dict(self) -> dict[str, Any]:
		return dataclasses.asdict(self)

	@property
	def taus(self) -> list[float]:
		if self.tau_grid:
			return [float(t) for t in parse_grid(self.tau_grid)]
		return [float(self.tau)]


CONFIG_KEYS = frozenset(f.name for f in dataclasses.fields(RunConfig)) - {'command'}

COMMAND_DEFAULTS: dict[str, dict[str, Any]] = {
	'torus-weyl': {'steps': 1000, 'seed': 7},
	'torus-meansquare': {'tau_grid': '1:2:10000', 'steps': 10_000, 'kicks': 'zero,random', 'seed': 42},
	'torus-burago': {'steps': 100_000},
	'psl2-evolve': {'kicks': 'signs', 'steps': 100},
	'psl2-schrodinger': {'kicks': 'unipotent', 'tau': 1.5, 'steps': 1000, 'seed': 11},
	'psl2-trace': {'steps': 30},
	'psl2-escape-scan': {'kicks': 'signs', 'tau_grid': '0.5:10:20', 'steps': 10_000},
	'psl2-intervals': {'tau_grid': '0:3:7', 'steps': 100_000},
	'qm-parabolic': {'word': 'T', 'n_max': 30},
	'qm-hyperbolic': {'word': 'B', 'n_max': 30},
	'top-scan': {'kicks': 'identity', 'tau_grid': '0.1:2:20', 'samples': 32},
	'top-timereversal': {'tau': 0.7, 'steps': 10_000, 'window': '1:1000'},
	'torus-hamiltonian': {'steps': 100_000, 'samples': 1_000_000},
}


@dataclass
class Table:
	name: str
	header: tuple[str, ...]
	rows: list[tuple[Any, ...]]


@dataclass
class RunOutput:
	"""
	what a subcommand produced; ``warnings`` counts truncation warnings
	"""

	tables: list[Table] = field(default_factory=list)
	documents: dict[str, Any] = field(default_factory=dict)
	checks: dict[str, bool] = field(default_factory=dict)
	warnings: int = 0


@dataclass
class RunManifest:
	config: dict[str, Any]
	version: str
	wall_time: float
	checks: dict[str, str]
	files: dict[str, str]

	def to_dict(self) -> dict[str, Any]:
		return dataclasses.asdict(self)


def _floats(text: str) -> list[float]:
	try:
		return [float(v) for v in text.split(',') if v.strip()]
	except ValueError as e:
		raise ConfigurationError(f'expected comma-separated numbers, got {text!r}') from e


def _ints(text: str) -> list[int]:
	try:
		return [int(v) for v in text.split(',') if v.strip()]
	except ValueError as e:
		raise ConfigurationError(f'expected comma-separated integers, got {text!r}') from e


def _bool(text: str) -> bool:
	value = text.strip().lower()
	if value in ('1', 'true', 'yes', 'on'):
		return True
	if value in ('0', 'false', 'no', 'off'):
		return False
	raise ConfigurationError(f'expected a boolean, got {text!r}')


def _optional_int(text: str) -> int | None:
	return None if text.strip().lower() in ('', 'none') else int(text)


def _optional_str(text: str) -> str | None:
	return None if text.strip().lower() in ('', 'none') else text


CONVERTERS: dict[str, Callable[[str], Any]] = {
	'tau': float,
	'tau_grid': _optional_str,
	'steps': int,
	'window': str,
	'seed': int,
	'out': str,
	'format': str,
	'strict': _bool,
	'mode': str,
	'workers': _optional_int,
	'kicks': str,
	'omega': str,
	'h': str,
	'threshold': float,
	'samples': int,
	'eps': float,
	'n_max': int,
	'pairs': int,
	'c_max': int,
	'group': str,
	'word': str,
	'word_length': int,
	'gamma': str,
	'radius': float,
}


def read_config_file(path: str) -> dict[str, Any]:
	"""
	Flat key=value lines, '#' starts a comment. Keys are the flag names
	without leading dashes, '-' and '_' interchangeable.
	"""
	try:
		with open(path, encoding='utf-8') as f:
			lines = f.readlines()
	except (OSError, UnicodeDecodeError) as e:
		raise ConfigurationError(f'cannot read config file {path!r}: {e}') from e
	values: dict[str, Any] = {}
	for lineno, raw in enumerate(lines, 1):
		line = raw.split('#', 1)[0].strip()
		if not line:
			continue
		if '=' not in line:
			raise ConfigurationError(f'{path}:{lineno}: expected key=value, got {line!r}')
		key, value = (s.strip() for s in line.split('=', 1))
		key = key.replace('-', '_')
		if key not in CONFIG_KEYS:
			raise ConfigurationError(f'{path}:{lineno}: unknown key {key!r}')
		try:
			values[key] = CONVERTERS[key](value)
		except ValueError as e:
			raise ConfigurationError(f'{path}:{lineno}: bad value for {key}: {e}') from e
	return values


def resolve_config(command: str, flags: dict[str, Any], config_path: str | None = None) -> RunConfig:
	"""
	built-in defaults < per-command defaults < config file < explicit flags
	"""
	values: dict[str, Any] = dict(COMMAND_DEFAULTS.get(command, {}))
	if config_path:
		values.update(read_config_file(config_path))
	values.update({k: v for k, v in flags.items() if v is not None and k in CONFIG_KEYS})
	config = RunConfig(command=command, **values)
	if config.format not in ('csv', 'json'):
		raise ConfigurationError(f'format must be csv or json, got {config.format!r}')
	if config.mode not in ('canonical', 'fast'):
		raise ConfigurationError(f'mode must be canonical or fast, got {config.mode!r}')
	return config


def _map(config: RunConfig, func: Callable[[RunConfig, Any], Any], items: Sequence[Any]) -> list[Any]:
	"""
	ordered map over scan items; fast mode spreads them over worker processes
	"""
	if config.mode == 'fast' and len(items) > 1:
		with concurrent.futures.ProcessPoolExecutor(max_workers=config.workers) as executor:
			return list(executor.map(func, itertools.repeat(config), items))
	return [func(config, item) for item in items]


# torus


def _torus_kicks(name: str, seed: int, dim: int) -> KickSchedule:
	if name == 'zero':
		return cycled_schedule([numpy.zeros(dim)], name='zero')
	if name == 'random':
		return translation_schedule(seed, dim)
	raise ConfigurationError(f'unknown torus kicks {name!r}; expected zero or random')


def _weyl_row(config: RunConfig, tau: float) -> tuple[tuple[Any, ...], float | None]:
	arena = TorusArena(_floats(config.omega))
	system = KickedSystem(arena, tau, _torus_kicks(config.kicks, config.seed, arena.dim))
	h = _ints(config.h)
	res = weyl_sum(h, system, numpy.zeros(arena.dim), config.steps)
	disc = None
	if arena.dim == 1:
		disc = discrepancy_1d(torus_orbit(system, numpy.zeros(1), config.steps)[1:])
	row = (tau, config.steps, ';'.join(str(v) for v in h), res.value.real, res.value.imag, res.modulus)
	return row, disc


def run_torus_weyl(config: RunConfig) -> RunOutput:
	results = _map(config, _weyl_row, config.taus)
	out = RunOutput()
	out.tables.append(Table('weyl', ('tau', 'N', 'h', 're', 'im', 'abs'), [row for row, _ in results]))
	discrepancies = [d for _, d in results if d is not None]
	if discrepancies:
		# majority verdict over the scanned periods
		good = sum(d < DISCREPANCY_THRESHOLD for d in discrepancies)
		out.checks['equidistributed'] = good >= math.ceil(0.9 * len(discrepancies))
		out.documents['discrepancy'] = {'tau': config.taus, 'discrepancy': discrepancies}
	return out


def _decades(N: int) -> list[int]:
	if N < 2:
		raise ConfigurationError(f'the mean-square scan needs N >= 2, got {N}')
	Ns = [10**e for e in range(2, int(math.log10(N)) + 1)]
	return Ns if Ns else [N]


def run_torus_meansquare(config: RunConfig) -> RunOutput:
	grid = parse_grid(config.tau_grid or '1:2:10000')
	if grid.shape[0] < 2:
		raise ConfigurationError('the quadrature grid needs at least two points')
	interval = (float(grid[0]), float(grid[-1]))
	omega = _floats(config.omega)
	h = _ints(config.h)
	width = interval[1] - interval[0]
	out = RunOutput()
	rows = []
	scaling_ok, diagonal_ok = True, True
	for name in config.kicks.split(','):
		kicks = _torus_kicks(name.strip(), config.seed, len(omega))
		first = None
		for N in _decades(config.steps):
			M = mean_square_weyl(h, kicks, omega, interval, N, grid_size=grid.shape[0])
			diag = mean_square_weyl(h, kicks, omega, interval, N, grid_size=grid.shape[0], diagonal_only=True)
			analytic = mean_square_weyl_analytic(h, omega, interval, N) if name.strip() == 'zero' else math.nan
			scaled = M * N / math.log(N)
			first = scaled if first is None else first
			scaling_ok &= scaled <= 3.0 * first
			diagonal_ok &= abs(diag - width / N) <= 0.01 * width / N
			rows.append((name.strip(), N, M, scaled, diag, width / N, analytic))
	out.tables.append(
		Table('meansquare', ('kicks', 'N', 'mean_square', 'scaled', 'diagonal', 'diagonal_expected', 'analytic'), rows)
	)
	out.checks['log_scaling'] = scaling_ok
	out.checks['diagonal'] = diagonal_ok
	return out


def _burago_row(config: RunConfig, tau: float) -> tuple[Any, ...]:
	report = burago_hit_frequency(_floats(config.omega), tau, config.steps)
	expected = 2.0**-tau if tau >= 1 and float(tau).is_integer() else 0.0
	return (tau, config.steps, report.hits, report.frequency, expected, report.discrepancy, report.equidistributed)


def run_torus_burago(config: RunConfig) -> RunOutput:
	rows = _map(config, _burago_row, config.taus)
	out = RunOutput()
	out.tables.append(
		Table('burago', ('tau', 'N', 'hits', 'frequency', 'expected', 'discrepancy', 'equidistributed'), rows)
	)
	out.checks['hit_frequency'] = all(
		abs(r[3] - r[4]) <= (0.01 * r[4] if r[4] else 0.01) for r in rows
	)
	out.checks['not_equidistributed'] = not any(r[6] for r in rows)
	return out


# PSL(2,R)


def _psl2_kicks(config: RunConfig) -> KickSchedule:
	name = config.kicks
	if name == 'identity':
		return constant_schedule(Mat2.identity(), 'identity')
	if name == 'signs':
		return sign_kicks(config.seed)
	if name == 'unipotent':
		return random_unipotent_kicks(config.seed)
	if name == 'monotone':
		return random_unipotent_kicks(config.seed, 0.0, 1e-3)
	if name == 'decaying':
		return decaying_kicks()
	if name == 'reverse':
		return constant_schedule(horocycle(-config.tau), 'reverse')
	if name == 'cover':
		return IntervalCover().kicks()
	raise ConfigurationError(f'unknown kicks {name!r}; expected one of {", ".join(PSL2_KICKS)}')


def run_psl2_evolve(config: RunConfig) -> RunOutput:
	K = config.steps
	sweep = evolve_matrix_grid(_psl2_kicks(config), config.taus, K)
	rows = []
	ks = numpy.arange(K + 1)
	for t, tau in enumerate(sweep.taus):
		for k in range(K + 1):
			rows.append((float(tau), k, sweep.norms[t, k], sweep.log_norms[t, k], sweep.traces[t, k]))
	out = RunOutput()
	out.tables.append(Table('evolve', ('tau', 'k', 'norm', 'log_norm', 'trace'), rows))
	if config.kicks == 'identity':
		expected = numpy.sqrt(2.0 + numpy.outer(sweep.taus, ks) ** 2)
		out.checks['identity_closed_form'] = bool(numpy.allclose(sweep.norms, expected, rtol=1e-12, atol=0.0))
	if config.kicks == 'reverse':
		shift = numpy.outer(sweep.taus - config.tau, ks) ** 2
		excess = sweep.norms**2 - 2.0
		out.checks['sharpness_closed_form'] = bool(numpy.all(numpy.abs(excess - shift) <= 1e-9 * numpy.maximum(1.0, shift)))
		bounded = numpy.max(sweep.norms, axis=1) <= math.sqrt(2.0) + 1e-9
		# the row at tau0 when the grid holds it, no row otherwise
		at_tau0 = numpy.abs(sweep.taus - config.tau) <= 1e-12 * max(1.0, abs(config.tau))
		out.checks['bounded_only_at_tau0'] = bool(numpy.array_equal(bounded, at_tau0))
	return out


def _rel_error(x: 'FloatArray', y: 'FloatArray', scale: 'FloatArray') -> 'FloatArray':
	return numpy.abs(x - y) / numpy.maximum(scale, 1.0)


def run_psl2_schrodinger(config: RunConfig) -> RunOutput:
	K = config.steps
	kicks = _psl2_kicks(config)
	cs = numpy.array([kicks.kick(i).c for i in range(1, K + 1)])
	out = RunOutput()
	rows = []
	agreement, monotone, linked = True, True, True
	for tau in config.taus:
		rec = entry_recursion(kicks, tau, K)
		schr = entries_from_schrodinger(kicks, tau, K)
		# plain SL(2,R) products, no projective sign normalization
		H = horocycle(tau).array
		M = numpy.eye(2)
		prod = numpy.empty((K + 1, 4))
		prod[0] = M.ravel()
		for k in range(1, K + 1):
			M = kicks.kick(k).array @ (H @ M)
			prod[k] = M.ravel()
		norms = rec.norms
		versions = (
			(rec.alpha, rec.beta, rec.gamma, rec.delta),
			(schr.alpha, schr.beta, schr.gamma, schr.delta),
			tuple(prod[:, j] for j in range(4)),
		)
		errors = numpy.zeros(K + 1)
		for left, right in itertools.combinations(versions, 2):
			for x, y in zip(left, right):
				errors = numpy.maximum(errors, _rel_error(x, y, norms))
		agreement &= bool(numpy.max(errors) < 1e-9)
		if numpy.all(cs >= 0) and tau > 0:
			monotone &= rec.nondecreasing()
		linked &= boundedness_link_check(kicks, tau, K, config.threshold).agree
		for k in range(K + 1):
			rows.append((tau, k, rec.alpha[k], rec.beta[k], rec.gamma[k], rec.delta[k], errors[k]))
	out.tables.append(Table('schrodinger', ('tau', 'k', 'alpha', 'beta', 'gamma', 'delta', 'rel_error'), rows))
	out.checks['triple_agreement'] = agreement
	out.checks['boundedness_link'] = linked
	if numpy.all(cs >= 0):
		out.checks['monotone_entries'] = monotone
	return out


def run_psl2_trace(config: RunConfig) -> RunOutput:
	k = config.steps
	kicks = random_rational_kicks(config.seed, k)
	poly = trace_polynomial(kicks, k)
	rng = numpy.random.default_rng(config.seed)
	rows = []
	for tau in rng.uniform(-2.0, 2.0, 20):
		M = numpy.eye(2)
		H = numpy.array([[1.0, tau], [0.0, 1.0]])
		for kick in kicks:
			M = numpy.array(kick, dtype=float).reshape(2, 2) @ (H @ M)
		numeric = float(numpy.trace(M))
		exact = poly(float(tau))
		rows.append((float(tau), exact, numeric, abs(exact - numeric) / max(1.0, float(numpy.linalg.norm(M)))))
	radius = trace_growth_radius(poly)
	# past the growth radius |p(tau)| >= |lead| |tau|^k / 2; compared exactly, the values overflow floats
	growth = True
	for t in (Fraction(radius), -Fraction(radius), 2 * Fraction(radius)):
		value = sum(Fraction(c) * t**i for i, c in enumerate(poly.coeffs))
		growth &= abs(value) >= abs(Fraction(poly.leading)) * abs(t) ** k / 2
	out = RunOutput()
	out.tables.append(Table('trace_check', ('tau', 'exact', 'numeric', 'rel_error'), rows))
	out.documents['trace_polynomial'] = {**poly.to_json(), 'growth_radius': radius}
	out.checks['leading_equals_prod_c'] = poly.degree == k and poly.leading == poly.prod_c
	out.checks['numeric_agreement'] = all(r[3] < 1e-9 for r in rows)
	out.checks['trace_growth'] = growth
	return out


def _escape_row(config: RunConfig, item: tuple[int, float]) -> tuple[Any, ...]:
	seed, tau = item
	kicks = _psl2_kicks(dataclasses.replace(config, seed=seed))
	verdict = escape_detector(kicks, tau, config.steps, config.threshold)
	slope = gauge_growth(kicks, tau, min(config.steps, 1000)).slope
	step = verdict.step if verdict.step is not None else ''
	return (seed, tau, config.steps, config.threshold, verdict.escaped, step, verdict.max_norm, slope)


def run_psl2_escape_scan(config: RunConfig) -> RunOutput:
	items = [(config.seed + s, tau) for s in range(config.samples) for tau in config.taus]
	rows = _map(config, _escape_row, items)
	out = RunOutput()
	out.tables.append(
		Table('escape', ('seed', 'tau', 'K', 'threshold', 'escaped', 'step', 'max_norm', 'gauge_slope'), rows)
	)
	out.checks['all_escaped'] = all(r[4] for r in rows)
	out.checks['gauge_slope_positive'] = all(r[7] > 0 for r in rows if r[4])
	return out


def run_psl2_intervals(config: RunConfig) -> RunOutput:
	cover = IntervalCover()
	taus = config.taus
	counts = cover.cover_counts(taus, config.steps)
	rows = []
	for tau, count in zip(taus, counts):
		k1, k2, k3 = cover.covering(tau)
		rows.append((tau, config.steps, int(count), k1, k2, k3))
	out = RunOutput()
	out.tables.append(Table('intervals', ('tau', 'K', 'count', 'k1', 'k2', 'k3'), rows))
	out.checks['intervals_contain_tau'] = all(
		cover.interval(k)[0] - 1e-12 <= r[0] <= cover.interval(k)[1] + 1e-12 for r in rows for k in r[3:]
	)
	return out


# quasi-morphisms


def run_qm_parabolic(config: RunConfig) -> RunOutput:
	enumeration = modular_cusp_enumeration(config.c_max, (-5.0, config.n_max + 5.0))
	form = parabolic_form(enumeration=enumeration)
	estimate = estimate_quasi_morphism(form, config.word, config.n_max, config.pairs, config.seed)
	g = word_matrix(config.word, form.cosets.generators)
	shift = basepoint_shift(form, g, seed=config.seed)
	out = RunOutput(warnings=estimate.truncation_warnings)
	out.tables.append(Table('r_values', ('word', 'n', 'value'), estimate.r_values))
	out.documents['quasi_morphism'] = {
		**estimate.to_json(),
		'basepoint_shift': {'maximum': shift.maximum, 'bound': shift.bound, 'pairs': shift.pairs},
	}
	out.checks['defect_bound'] = estimate.defect_max <= defect_bound(form)
	out.checks['basepoint_shift'] = shift.within_bound
	if config.word == 'T':
		out.checks['r_equals_n'] = all(abs(v - n) <= 1e-6 for _, n, v in estimate.r_values)
		out.checks['r_infinity'] = abs(estimate.r_infinity.estimate - 1.0) <= 1e-3
	return out


GROUPS: dict[str, Callable[[], dict[str, Mat2]]] = {
	'schottky': schottky_group,
	'dihedral': dihedral_group,
	'modular': modular_group,
}


def run_qm_hyperbolic(config: RunConfig) -> RunOutput:
	if config.group not in GROUPS:
		raise ConfigurationError(f'unknown group {config.group!r}; expected one of {", ".join(GROUPS)}')
	generators = GROUPS[config.group]()
	g = word_matrix(config.word, generators)
	form = hyperbolic_form(g, generators, config.word_length, strict=config.strict)
	estimate = estimate_quasi_morphism(form, config.word, config.n_max, config.pairs, config.seed)
	square = homogenization(form, config.word * 2, config.n_max)
	r1, r2 = estimate.r_infinity, square.estimate
	out = RunOutput(warnings=estimate.truncation_warnings + square.truncation_warnings)
	out.tables.append(Table('r_values', ('word', 'n', 'value'), estimate.r_values))
	out.documents['quasi_morphism'] = {**estimate.to_json(), 'r_infinity_square': r2.to_dict()}
	out.checks['homogeneity'] = abs(r2.estimate - 2.0 * r1.estimate) <= 0.02 * abs(2.0 * r1.estimate) + r2.error + 2.0 * r1.error
	if form.usable:
		# the bump integrates to one over each period of the axis
		out.checks['axis_integral'] = abs(r1.estimate - 1.0) <= 0.02
	else:
		conjugators = [m for m in generators.values() if conjugates_to_inverse(g, m)]
		out.documents['quasi_morphism']['conjugator'] = list(conjugators[0].entries) if conjugators else None
		out.checks['conjugator_forces_zero'] = abs(r1.estimate) <= r1.error
	return out


# kicked top and flat torus


def _top_kicks(config: RunConfig, arena: SphereArena) -> KickSchedule:
	if config.kicks == 'identity':
		return identity_schedule(arena)
	if config.kicks == 'phi':
		return cycled_schedule([PHI], name='phi')
	if config.kicks == 'rotations':
		return random_rotation_kicks(config.seed)
	if config.kicks == 'reversal':
		return time_reversal_schedule(arena, REFLECT_XY)
	raise ConfigurationError(f'unknown top kicks {config.kicks!r}; expected one of {", ".join(TOP_KICKS)}')


def _top_samples(config: RunConfig) -> 'FloatArray':
	rng = numpy.random.default_rng(config.seed)
	extra = SphereArena().sample_uniform(rng, max(config.samples - 1, 0))
	return numpy.vstack([numpy.array([TOP_SAMPLE_POINT]), extra])


def _top_rows(config: RunConfig, tau: float) -> list[tuple[Any, ...]]:
	arena = SphereArena()
	scan = kicked_top_scan(_top_kicks(config, arena), [tau], config.eps, _top_samples(config), parse_window(config.window), arena=arena)
	return scan.rows()


def run_top_scan(config: RunConfig) -> RunOutput:
	window = parse_window(config.window)
	rows = [row for rows in _map(config, _top_rows, config.taus) for row in rows]
	arena = SphereArena()
	system = KickedSystem(arena, config.taus[0], _top_kicks(config, arena))
	lemma = lemma_c_check(system, hamiltonian_H, _top_samples(config), window, 1.0 / 3.0, 0.5)
	out = RunOutput()
	out.tables.append(Table('top_scan', ('tau', 'eps', 'N', 'R_hat', 'mu_A', 'verdict'), rows))
	out.documents['summary'] = {
		'eps': config.eps,
		'window': list(window),
		'density': sum(1 for r in rows if r[5]) / len(rows),
		'lemma_c': {'c': lemma.c, 'checked': lemma.checked, 'violations': lemma.violations},
	}
	out.checks['counting_inequality'] = lemma.passed
	out.checks['level_set_measure'] = lemma_d_scan().violations == 0
	return out


def run_top_timereversal(config: RunConfig) -> RunOutput:
	rng = numpy.random.default_rng(config.seed)
	cases = (
		('top', 'reflect_xy', SphereArena(), REFLECT_XY, True),
		('top', 'reflect_y', SphereArena(), REFLECT_Y, True),
		('top', 'theta', SphereArena(), THETA, False),
		('rigid', 'theta', SphereArena(rigid=True), THETA, True),
		('flat', 'shift', FlatTorusArena(), FLAT_SHIFT, True),
	)
	rows = []
	pattern = True
	for system_name, theta_name, arena, theta, expected in cases:
		check = time_reversal_check(arena, theta, REVERSAL_TIMES, arena.sample_uniform(rng, 64))
		rows.append((system_name, theta_name, check.deviation, check.passed))
		pattern &= check.passed == expected
	arena = SphereArena()
	x0 = numpy.array([0.6, 0.0, 0.8])
	system = KickedSystem(arena, config.tau, time_reversal_schedule(arena, REFLECT_XY))
	ret = two_step_return(system, x0[None, :], pairs=8)
	radius = 0.1

	def near_x0(points: 'FloatArray') -> numpy.ndarray:
		return arena.distance(points, x0) < radius

	report = recurrence_ratio(system, near_x0, x0[None, :], parse_window(config.window), arena.ball_measure(radius))
	still = KickedSystem(arena, config.tau, identity_schedule(arena))
	x = x0[None, :]
	for i in range(1, config.steps + 1):
		x = still.step(i, x)
	drift = float(abs(x[0, 2] - x0[2]))
	out = RunOutput()
	out.tables.append(Table('timereversal', ('system', 'theta', 'deviation', 'passed'), rows))
	out.documents['two_periodic'] = {
		'tau': config.tau,
		'x0': x0,
		'return_deviation': ret,
		'recurrence': report.to_dict(),
		'identity_kicks_z_drift': drift,
		'steps': config.steps,
	}
	out.checks['reversal_pattern'] = pattern
	out.checks['two_step_identity'] = ret <= 1e-12
	out.checks['recurrence_half'] = report.R_hat >= 0.5 - 1e-5
	out.checks['height_conserved'] = drift <= 1e-9
	return out


def _randomizing_row(config: RunConfig, tau: float) -> tuple[Any, ...]:
	arena = FlatTorusArena()
	system = KickedSystem(arena, tau, randomizing_schedule(_floats(config.gamma)))
	N = config.steps - config.steps % 2
	pts = arena.sample_uniform(numpy.random.default_rng(config.seed), 16)
	profile = birkhoff_profile(system, character((0, 1)), pts, (N, N))
	return (tau, N, float(numpy.max(numpy.abs(profile.averages))))


def run_torus_hamiltonian(config: RunConfig) -> RunOutput:
	taus = config.taus if config.tau_grid else list(TORUS_HAMILTONIAN_TAUS)
	rows = _map(config, _randomizing_row, taus)
	arena = FlatTorusArena()
	reversal = KickedSystem(arena, taus[0], time_reversal_schedule(arena, FLAT_SHIFT))
	witness = nonmixing_witness(reversal, config.radius, config.samples, config.seed)
	mean = flat_torus_mean(min(config.samples, 10**6), config.seed)
	lemma = flat_torus_lemma_d(samples=min(config.samples, 10**6), seed=config.seed)
	out = RunOutput()
	out.tables.append(Table('randomizing', ('tau', 'N', 'I_N'), rows))
	out.documents['nonmixing'] = {
		'tau': taus[0],
		'center': witness.center,
		'radius': witness.radius,
		'measure': witness.measure,
		'correlations': witness.correlations,
		'even': witness.even,
		'odd': witness.odd,
		'mixing_limit': witness.mixing_limit,
		'sigma': witness.sigma,
		'separation': witness.separation,
		'samples': witness.samples,
	}
	out.checks['birkhoff_small'] = all(r[2] < 0.01 for r in rows)
	out.checks['nonmixing_separation'] = witness.separation >= 10.0
	out.checks['zero_mean'] = mean.zero
	out.checks['level_set_measure'] = lemma.violations == 0
	return out


COMMANDS: dict[str, tuple[Callable[[RunConfig], RunOutput], str]] = {
	'torus-weyl': (run_torus_weyl, 'Weyl sums S_h(N, tau) along kicked torus orbits'),
	'torus-meansquare': (run_torus_meansquare, 'mean square of Weyl sums over a period interval'),
	'torus-burago': (run_torus_burago, 'hit frequency of the valuation kick schedule'),
	'psl2-evolve': (run_psl2_evolve, 'norm and trace of f^(k)(tau) in PSL(2,R)'),
	'psl2-schrodinger': (run_psl2_schrodinger, 'entry recursion against products and Schrodinger solutions'),
	'psl2-trace': (run_psl2_trace, 'exact trace polynomial for rational kicks'),
	'psl2-escape-scan': (run_psl2_escape_scan, 'escape to infinity over a period grid'),
	'psl2-intervals': (run_psl2_intervals, 'harmonic interval cover of the period axis'),
	'qm-parabolic': (run_qm_parabolic, 'quasi-morphism from a cusp form on PSL(2,Z)'),
	'qm-hyperbolic': (run_qm_hyperbolic, 'quasi-morphism from a bump form along an axis'),
	'top-scan': (run_top_scan, 'super-recurrence scan for the kicked top'),
	'top-timereversal': (run_top_timereversal, 'time-reversing symmetries and 2-periodic schedules'),
	'torus-hamiltonian': (run_torus_hamiltonian, 'randomizing schedule and non-mixing witness on the flat torus'),
}

EXTRA_FLAGS: dict[str, tuple[str, ...]] = {
	'torus-weyl': ('kicks', 'omega', 'h'),
	'torus-meansquare': ('kicks', 'omega', 'h'),
	'torus-burago': ('omega',),
	'psl2-evolve': ('kicks',),
	'psl2-schrodinger': ('kicks', 'threshold'),
	'psl2-trace': (),
	'psl2-escape-scan': ('kicks', 'threshold', 'samples'),
	'psl2-intervals': (),
	'qm-parabolic': ('word', 'n_max', 'pairs', 'c_max'),
	'qm-hyperbolic': ('group', 'word', 'word_length', 'n_max', 'pairs'),
	'top-scan': ('kicks', 'eps', 'samples'),
	'top-timereversal': (),
	'torus-hamiltonian': ('gamma', 'radius', 'samples'),
}

FLAG_HELP: dict[str, tuple[Callable[[str], Any], str]] = {
	'kicks': (str, 'kick schedule name'),
	'omega': (str, 'frequency vector, comma-separated'),
	'h': (str, 'integer frequency of the Weyl sum, comma-separated'),
	'threshold': (float, 'escape threshold on the Euclidean norm'),
	'samples': (int, 'number of sample points or seeds'),
	'eps': (float, 'level of A_eps = {H > (1 - eps) max H}'),
	'word': (str, 'group element as a word in the generators, lowercase for inverses'),
	'word_length': (int, 'word length W of the coset enumeration'),
	'n_max': (int, 'largest power in the homogenization'),
	'pairs': (int, 'sampled pairs for the defect'),
	'c_max': (int, 'largest bottom-left entry of the enumerated cusps'),
	'group': (str, 'schottky, dihedral or modular'),
	'gamma': (str, 'translation of the randomizing schedule, comma-separated'),
	'radius': (float, 'radius of the witness ball'),
}


def _shared_parser() -> argparse.ArgumentParser:
	parent = argparse.ArgumentParser(add_help=False)
	parent.add_argument('--tau', type=float, help='kick period')
	parent.add_argument('--tau-grid', dest='tau_grid', help='period grid a:b:n')
	parent.add_argument('--steps', type=int, help='horizon N or K')
	parent.add_argument('--window', help='horizon window nmin:nmax')
	parent.add_argument('--seed', type=int)
	parent.add_argument('--out', help='output directory')
	parent.add_argument('--format', choices=('csv', 'json'))
	parent.add_argument('--strict', action='store_true', default=None, help='escalate truncation warnings to errors')
	parent.add_argument('--mode', choices=('canonical', 'fast'))
	parent.add_argument('--workers', type=int, help='worker processes in fast mode')
	parent.add_argument('--config', help='key=value configuration file')
	parent.add_argument('--verbose', '-v', action='store_true', default=argparse.SUPPRESS)
	return parent


def build_parser() -> argparse.ArgumentParser:
	parser = argparse.ArgumentParser(prog='kickstab', description='Kick stability experiments.')
	parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
	parser.add_argument('--check-manifest', dest='check_manifest', metavar='PATH', help='re-run a manifest and compare digests')
	parser.add_argument('--verbose', '-v', action='store_true')
	sub = parser.add_subparsers(dest='command', metavar='COMMAND')
	parent = _shared_parser()
	for name, (_, help_text) in COMMANDS.items():
		cmd = sub.add_parser(name, parents=[parent], help=help_text, description=help_text)
		for flag in EXTRA_FLAGS[name]:
			kind, flag_help = FLAG_HELP[flag]
			cmd.add_argument('--' + flag.replace('_', '-'), dest=flag, type=kind, help=flag_help)
	return parser


def write_outputs(config: RunConfig, output: RunOutput) -> dict[str, str]:
	"""
	one writer per file; returns file name -> sha256
	"""
	files = {}
	try:
		os.makedirs(config.out, exist_ok=True)
		for table in output.tables:
			if config.format == 'csv':
				name = table.name + '.csv'
				write_csv(os.path.join(config.out, name), table.header, table.rows)
			else:
				name = table.name + '.json'
				write_json(os.path.join(config.out, name), [dict(zip(table.header, row)) for row in table.rows])
			files[name] = sha256_file(os.path.join(config.out, name))
		for doc_name, data in output.documents.items():
			name = doc_name + '.json'
			write_json(os.path.join(config.out, name), data)
			files[name] = sha256_file(os.path.join(config.out, name))
	except OSError as e:
		raise ConfigurationError(f'cannot write outputs to {config.out!r}: {e}') from e
	return files


def execute(config: RunConfig) -> RunManifest:
	if config.command not in COMMANDS:
		raise ConfigurationError(f'unknown command {config.command!r}')
	handler, _ = COMMANDS[config.command]
	start = time.perf_counter()
	output = handler(config)
	if output.warnings:
		message = f'{output.warnings} truncation warnings'
		if config.strict:
			raise NumericalGuardError(message)
		logger.warning(message)
	files = write_outputs(config, output)
	manifest = RunManifest(
		config=config.to_dict(),
		version=__version__,
		wall_time=time.perf_counter() - start,
		checks={name: 'PASS' if ok else 'FAIL' for name, ok in output.checks.items()},
		files=files,
	)
	try:
		write_json(os.path.join(config.out, MANIFEST_NAME), manifest.to_dict())
	except OSError as e:
		raise ConfigurationError(f'cannot write the manifest to {config.out!r}: {e}') from e
	for name, verdict in manifest.checks.items():
		if verdict == 'FAIL':
			logger.warning('%s: check %s failed', config.command, name)
	return manifest


def check_manifest(path: str) -> RunManifest:
	"""
	Re-runs the recorded configuration in canonical mode into a scratch
	directory; raises NumericalGuardError when any digest differs.
	"""
	try:
		with open(path, encoding='utf-8') as f:
			recorded = json.load(f)
	except (OSError, ValueError) as e:
		raise ConfigurationError(f'cannot read manifest {path!r}: {e}') from e
	fields = recorded.get('config', {})
	unknown = set(fields) - CONFIG_KEYS - {'command'}
	if unknown:
		raise ConfigurationError(f'manifest has unknown config keys {sorted(unknown)}')
	config = RunConfig(**fields)
	with tempfile.TemporaryDirectory() as scratch:
		manifest = execute(dataclasses.replace(config, out=scratch, mode='canonical'))
	expected = recorded.get('files', {})
	mismatched = sorted(name for name in set(expected) | set(manifest.files) if expected.get(name) != manifest.files.get(name))
	if mismatched:
		raise NumericalGuardError(f'digests differ for {", ".join(mismatched)}')
	return manifest


def main(argv: Sequence[str] | None = None) -> int:
	parser = build_parser()
	args = parser.parse_args(argv)
	logging.basicConfig(
		level=logging.DEBUG if args.verbose else logging.WARNING,
		format='%(levelname)s %(name)s: %(message)s',
		stream=sys.stderr,
	)
	try:
		if args.check_manifest:
			manifest = check_manifest(args.check_manifest)
			print(f'{len(manifest.files)} files reproduced')
			return 0
		if not args.command:
			parser.print_usage(sys.stderr)
			return 2
		flags = {k: v for k, v in vars(args).items() if k in CONFIG_KEYS}
		config = resolve_config(args.command, flags, args.config)
		manifest = execute(config)
	except NumericalGuardError as e:
		sys.stderr.write(f'error: {e.reason}: {e}\n')
		return 3
	except KickStabError as e:
		sys.stderr.write(f'error: {e.reason}: {e}\n')
		return 2
	print(os.path.join(config.out, MANIFEST_NAME))
	return 0


if __name__ == '__main__':
	sys.exit(main())
