import math
import unittest

import numpy

from kickstab import (
	InputError,
	KickedSystem,
	OrbitStatistics,
	RecurrenceReport,
	TorusArena,
	birkhoff_profile,
	counting_function,
	cycled_schedule,
	evolve,
	identity_schedule,
	indexed_schedule,
	iter_orbit,
	lemma_c_check,
	quasi_integral_level,
	random_schedule,
	recurrence_ratio,
	super_recurrence_thresholds,
	tau_density,
	translation_schedule,
)
from kickstab.torus import character, interval_indicator
from kickstab.utils import BLOCK_SIZE, compensated_cumsum, indexed_uniforms, parse_grid, parse_window
from kickstab.types import ConfigurationError
from tests.utils import KickStabTestCase


class TestSchedules(KickStabTestCase):
	def test_cycled_order(self):
		kicks = cycled_schedule(['a', 'b', 'c'])
		self.assertEqual(kicks.kicks(1, 8), ['a', 'b', 'c', 'a', 'b', 'c', 'a'])

	def test_indexed(self):
		kicks = indexed_schedule(lambda i: i * i)
		self.assertEqual(kicks.kick(7), 49)

	def test_kicks_start_at_one(self):
		kicks = cycled_schedule([0.0])
		self.check_reason(InputError, 'input', kicks.kick, 0)

	def test_invalid_schedules(self):
		self.check_reason(InputError, 'input', cycled_schedule, [])
		self.check_reason(InputError, 'input', random_schedule, 1)

	def test_random_schedule_is_indexed(self):
		# any index regenerates without replaying the ones before it
		a = translation_schedule(5)
		b = translation_schedule(5)
		late = float(a.kick(BLOCK_SIZE + 17)[0])
		self.assertEqual(float(b.kick(BLOCK_SIZE + 17)[0]), late)
		self.assertEqual(float(a.kick(3)[0]), float(b.kick(3)[0]))
		self.assertNotEqual(float(translation_schedule(6).kick(3)[0]), float(a.kick(3)[0]))

	def test_random_choices(self):
		kicks = random_schedule(3, choices=('x', 'y'))
		seen = set(kicks.kicks(1, 200))
		self.assertEqual(seen, {'x', 'y'})

	def test_uniform_streams(self):
		def draw(seed):
			return indexed_uniforms(seed, 4000, 4200)

		self.check_deterministic(draw)
		rows = indexed_uniforms(1, BLOCK_SIZE - 2, BLOCK_SIZE + 2)
		self.assertEqual(rows.shape, (4, 1))


class TestKickedSystem(KickStabTestCase):
	def setUp(self):
		self.arena = TorusArena(math.sqrt(2.0))

	def test_period_positive(self):
		self.check_reason(InputError, 'input', KickedSystem, self.arena, 0.0, identity_schedule(self.arena))

	def test_replay(self):
		system = KickedSystem(self.arena, 1.3, translation_schedule(2))
		orbit = self.check_replay(system, [0.25], 200)
		self.assertEqual(len(orbit), 201)

	def test_iter_orbit_matches_evolve(self):
		system = KickedSystem(self.arena, 0.7, translation_schedule(4))
		orbit = evolve(system, [0.1], 50)
		blocks = [block for _, block in iter_orbit(system, [0.1], 50, chunk=7)]
		self.assertAllClose(numpy.concatenate(blocks), orbit.points[:50])

	def test_invalid_points(self):
		system = KickedSystem(self.arena, 1.0, identity_schedule(self.arena))
		self.check_reason(InputError, 'input', evolve, system, [0.1, 0.2], 5)
		self.check_reason(InputError, 'input', evolve, system, [math.nan], 5)


class TestCounting(KickStabTestCase):
	def setUp(self):
		# rotation by one half: the orbit of 0 alternates between 0 and 1/2
		self.arena = TorusArena(0.5)
		self.system = KickedSystem(self.arena, 1.0, identity_schedule(self.arena))
		self.A = interval_indicator(0.0, 0.05)

	def test_counting_function(self):
		orbit = evolve(self.system, [0.0], 6)
		stats = counting_function(orbit, self.A, (1, 6))
		self.assertEqual(stats.counts.tolist(), [1, 1, 2, 2, 3, 3])

	def test_window_beyond_orbit(self):
		orbit = evolve(self.system, [0.0], 6)
		self.check_reason(InputError, 'input', counting_function, orbit, self.A, (1, 7))

	def test_recurrence_ratio(self):
		report = recurrence_ratio(self.system, self.A, [[0.0], [0.5]], (1, 10), 0.1)
		self.assertEqual(report.R_hat, 1.0)
		self.assertEqual(report.best_sample, 0)
		self.assertEqual(report.best_horizon, 1)
		self.assertTrue(report.verdict)
		self.assertEqual(report.to_dict()['window'], [1, 10])

	def test_invalid_measure(self):
		self.check_reason(InputError, 'input', recurrence_ratio, self.system, self.A, [0.0], (1, 10), 1.5)

	def test_empty_window(self):
		self.check_reason(InputError, 'input', recurrence_ratio, self.system, self.A, [0.0], (5, 4), 0.1)

	def test_statistics_merge(self):
		a = OrbitStatistics(0.5, 0, 10, 1)
		b = OrbitStatistics(0.7, 1, 12, 1)
		c = OrbitStatistics(0.7, 2, 3, 1)
		self.assertEqual(a.merge(b), b.merge(a))
		self.assertEqual(a.merge(b).merge(c), a.merge(b.merge(c)))
		# ties keep the smaller sample id
		self.assertEqual(a.merge(c).merge(b).sample, 1)
		self.assertEqual(a.merge(b).merge(c).count, 3)


class TestBirkhoff(KickStabTestCase):
	def setUp(self):
		self.arena = TorusArena(math.sqrt(2.0))
		self.system = KickedSystem(self.arena, 1.0, identity_schedule(self.arena))
		self.F = character(1)

	def test_kronecker_average_vanishes(self):
		profile = birkhoff_profile(self.system, self.F, [[0.0], [0.3]], (1000, 1000))
		self.assertLess(float(numpy.max(numpy.abs(profile.averages))), 0.01)

	def test_profile_shape(self):
		profile = birkhoff_profile(self.system, self.F, [[0.0], [0.3], [0.6]], (5, 9))
		self.assertEqual(profile.averages.shape, (3, 5))
		self.assertEqual(profile.maxima.shape, (5,))

	def test_first_average_is_observable(self):
		samples = numpy.array([[0.0], [0.3], [0.6]])
		profile = birkhoff_profile(self.system, self.F, samples, (1, 3))
		self.assertAllClose(profile.averages[:, 0], self.F(samples))
		self.assertEqual(profile.best.horizon, 1)
		self.assertEqual(profile.best.sample, 0)

	def test_quasi_integral_level(self):
		profile = birkhoff_profile(self.system, self.F, [[0.0]], (1, 20))
		level = quasi_integral_level(self.F, profile, self.arena)
		self.assertAlmostEqual(level.alpha_hat, 1.0, places=5)
		self.assertLess(abs(level.mean), 1e-9)

	def test_nonzero_mean_rejected(self):
		def shifted(points):
			return numpy.cos(2 * numpy.pi * points[..., 0]) + 0.5

		profile = birkhoff_profile(self.system, shifted, [[0.0]], (1, 5))
		self.check_reason(InputError, 'input', quasi_integral_level, shifted, profile, self.arena)

	def test_counting_lemma(self):
		system = KickedSystem(self.arena, 0.9, translation_schedule(8, scale=0.1))
		check = lemma_c_check(system, self.F, [[0.0], [0.25], [0.5]], (1, 500), 1.0, 0.5)
		self.assertTrue(check.passed)
		self.assertEqual(check.checked, 3 * 500)

	def test_counting_lemma_level(self):
		self.check_reason(InputError, 'input', lemma_c_check, self.system, self.F, [0.0], (1, 5), 1.0, 1.0)


class TestThresholds(KickStabTestCase):
	def test_values(self):
		t = super_recurrence_thresholds(1.0, 0.5, 2.0)
		self.assertAlmostEqual(t.R_lower, 1.0)
		self.assertAlmostEqual(t.mu_upper, 0.8)
		self.assertAlmostEqual(t.delta, 0.2)
		self.assertTrue(t.window_ok)
		self.assertTrue(t.gamma_ok)

	def test_c_below_alpha(self):
		self.check_reason(InputError, 'input', super_recurrence_thresholds, 0.5, 0.5, 1.0)

	def test_tau_density(self):
		yes = RecurrenceReport(0.6, 0.1, 0.01, (1, 10), 4, 0, 1)
		no = RecurrenceReport(0.105, 0.1, 0.01, (1, 10), 4, 0, 1)
		self.assertEqual(tau_density([yes, no, yes, yes]), 0.75)
		self.check_reason(InputError, 'input', tau_density, [])


class TestUtils(KickStabTestCase):
	def test_compensated_cumsum(self):
		values = numpy.full(3 * BLOCK_SIZE + 5, 0.1)
		sums = compensated_cumsum(values)
		self.assertAlmostEqual(float(sums[-1]), 0.1 * values.shape[0], places=9)

	def test_parse_grid(self):
		self.assertAllClose(parse_grid('1:2:3'), [1.0, 1.5, 2.0])
		self.assertAllClose(parse_grid('0.5:9:1'), [0.5])
		self.check_reason(ConfigurationError, 'configuration', parse_grid, '1:2')
		self.check_reason(ConfigurationError, 'configuration', parse_grid, 'a:b:c')

	def test_parse_window(self):
		self.assertEqual(parse_window('10:20'), (10, 20))
		self.check_reason(ConfigurationError, 'configuration', parse_window, '10')
		self.check_reason(InputError, 'input', parse_window, '0:5')


if __name__ == '__main__':
	unittest.main()
