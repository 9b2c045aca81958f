import cmath
import math
import unittest

import numpy

from kickstab import (
	ConfigurationError,
	FrequencyVector,
	InputError,
	KickedSystem,
	TorusArena,
	UnsupportedError,
	burago_hit_frequency,
	discrepancy_1d,
	evolve,
	identity_schedule,
	mean_square_weyl,
	translation_schedule,
	weyl_sum,
)
from kickstab.torus import (
	burago_evolution,
	burago_kicks,
	equidistribution_verdict,
	mean_square_weyl_analytic,
	one_plus_valuation,
	torus_evolution_point,
	torus_orbit,
)
from kickstab.utils import circle_distance, reduce_mod1
from tests.utils import KickStabTestCase

SQRT2 = math.sqrt(2.0)


class TestFrequencyVector(KickStabTestCase):
	def test_rational_resonance(self):
		omega = FrequencyVector.rational([1, -1], 2)
		self.assertTrue(omega.certified)
		self.assertTrue(omega.resonant([1, 1]))
		self.assertFalse(omega.resonant([1, 0]))

	def test_float_never_resonant(self):
		omega = FrequencyVector.asserted_generic([SQRT2, -SQRT2])
		self.assertFalse(omega.resonant([1, 1]))

	def test_invalid(self):
		self.check_reason(InputError, 'input', FrequencyVector.rational, [1], 0)
		self.check_reason(InputError, 'input', FrequencyVector, ())


class TestTorusArena(KickStabTestCase):
	def test_reduction(self):
		self.assertEqual(float(reduce_mod1(-1e-20)), 0.0)
		self.assertAlmostEqual(float(circle_distance(0.9, 0.1)), 0.2)

	def test_ball_measure(self):
		self.assertAlmostEqual(TorusArena(SQRT2).ball_measure(0.5), 1.0)
		self.assertAlmostEqual(TorusArena([SQRT2, 1.0]).ball_measure(0.1), math.pi * 0.01)
		self.check_reason(InputError, 'input', TorusArena(SQRT2).ball_measure, 0.6)

	def test_translation_kicks(self):
		kicks = translation_schedule(3, dim=2, scale=0.1)
		values = numpy.array(kicks.kicks(1, 100))
		self.assertEqual(values.shape, (99, 2))
		self.assertTrue(numpy.all((values >= 0.0) & (values < 0.1)))


class TestClosedForm(KickStabTestCase):
	def setUp(self):
		self.arena = TorusArena([SQRT2, math.sqrt(3.0)])
		self.system = KickedSystem(self.arena, 0.7, translation_schedule(9, dim=2))

	def test_orbit_matches_stepping(self):
		x0 = [0.2, 0.9]
		closed = torus_orbit(self.system, x0, 300)
		stepped = evolve(self.system, x0, 300).points
		self.assertLess(float(numpy.max(self.arena.distance(closed, stepped))), 1e-9)

	def test_single_point(self):
		x0 = [0.2, 0.9]
		closed = torus_orbit(self.system, x0, 50)
		point = torus_evolution_point(self.arena.omega, 0.7, self.system.kicks, 50, x0)
		self.assertLess(float(self.arena.distance(point, closed[50])), 1e-12)
		self.check_reason(InputError, 'input', torus_evolution_point, self.arena.omega, 0.7, self.system.kicks, -1, x0)


class TestWeylSums(KickStabTestCase):
	def test_geometric_series(self):
		arena = TorusArena(SQRT2)
		system = KickedSystem(arena, 1.0, identity_schedule(arena))
		N = 1000
		result = weyl_sum(1, system, [0.0], N)
		q = cmath.exp(2j * math.pi * SQRT2)
		expected = q * (1 - q**N) / (1 - q) / N
		self.assertAlmostEqual(result.value.real, expected.real, places=9)
		self.assertAlmostEqual(result.value.imag, expected.imag, places=9)
		self.assertLess(result.modulus, 0.01)

	def test_resonant_sum_is_one(self):
		arena = TorusArena(FrequencyVector.rational([1], 2))
		system = KickedSystem(arena, 2.0, identity_schedule(arena))
		self.assertAlmostEqual(weyl_sum(1, system, [0.3], 50).modulus, 1.0)

	def test_zero_h(self):
		arena = TorusArena(SQRT2)
		system = KickedSystem(arena, 1.0, identity_schedule(arena))
		self.check_reason(InputError, 'input', weyl_sum, 0, system, [0.0], 10)

	def test_mean_square_analytic(self):
		arena = TorusArena(SQRT2)
		numeric = mean_square_weyl(1, identity_schedule(arena), SQRT2, (1.0, 2.0), 20)
		analytic = mean_square_weyl_analytic(1, SQRT2, (1.0, 2.0), 20)
		self.assertAlmostEqual(numeric / analytic, 1.0, delta=1e-3)

	def test_mean_square_diagonal(self):
		kicks = translation_schedule(1)
		for N in (5, 40):
			value = mean_square_weyl(1, kicks, SQRT2, (0.0, 3.0), N, grid_size=500, diagonal_only=True)
			self.assertAlmostEqual(value, 3.0 / N, places=12)

	def test_mean_square_decays(self):
		kicks = translation_schedule(1)
		small = mean_square_weyl(1, kicks, SQRT2, (1.0, 2.0), 16, grid_size=4000)
		large = mean_square_weyl(1, kicks, SQRT2, (1.0, 2.0), 256, grid_size=4000)
		self.assertLess(large, small)

	def test_mean_square_resonant(self):
		omega = FrequencyVector.rational([1, -1], 2)
		kicks = translation_schedule(1, dim=2)
		self.check_reason(ConfigurationError, 'configuration', mean_square_weyl, [1, 1], kicks, omega, (1.0, 2.0), 10)

	def test_mean_square_arguments(self):
		kicks = translation_schedule(1)
		self.check_reason(InputError, 'input', mean_square_weyl, 1, kicks, SQRT2, (2.0, 1.0), 10)
		self.check_reason(InputError, 'input', mean_square_weyl, 1, kicks, SQRT2, (1.0, 2.0), 0)


class TestDiscrepancy(KickStabTestCase):
	def test_single_point(self):
		self.assertEqual(discrepancy_1d([0.5]), 0.5)

	def test_evenly_spaced(self):
		n = 100
		points = (numpy.arange(n) + 0.5) / n
		self.assertAlmostEqual(discrepancy_1d(points), 0.5 / n)
		# the first ten points crowd into [0, 0.1)
		self.assertAlmostEqual(discrepancy_1d(points[:, None], N=10), 0.905)

	def test_higher_dimension(self):
		self.check_reason(UnsupportedError, 'unsupported', discrepancy_1d, numpy.zeros((4, 2)))
		self.check_reason(InputError, 'input', discrepancy_1d, [])

	def test_random_kicks_equidistribute(self):
		arena = TorusArena(SQRT2)
		system = KickedSystem(arena, 1.0, translation_schedule(7))
		orbit = torus_orbit(system, [0.0], 20_000)[1:]
		self.assertLess(discrepancy_1d(orbit), 0.05)
		self.assertTrue(equidistribution_verdict(orbit))


class TestValuationSchedule(KickStabTestCase):
	def test_valuation(self):
		self.assertEqual([one_plus_valuation(k) for k in (1, 2, 3, 8, 12)], [1, 2, 1, 4, 3])
		self.check_reason(InputError, 'input', one_plus_valuation, 0)

	def test_hit_frequency(self):
		report = burago_hit_frequency(SQRT2, 1.0, 1000)
		self.assertEqual(report.hits, 500)
		self.assertEqual(report.frequency, 0.5)
		self.assertFalse(report.equidistributed)
		self.assertEqual(burago_hit_frequency(SQRT2, 2.0, 1000).hits, 250)

	def test_closed_form(self):
		arena = TorusArena(SQRT2)
		system = KickedSystem(arena, 0.7, burago_kicks(arena.omega))
		orbit = torus_orbit(system, [0.0], 64)
		ks = numpy.arange(1, 65)
		closed = burago_evolution(SQRT2, 0.7, ks)
		self.assertLess(float(numpy.max(arena.distance(orbit[1:], closed))), 1e-9)


if __name__ == '__main__':
	unittest.main()
