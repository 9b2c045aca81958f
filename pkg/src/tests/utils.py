import unittest

import numpy

from kickstab import KickedSystem, evolve

CHECK_SEEDS_DEFAULT = range(0, 5)


class KickStabTestCase(unittest.TestCase):
	@staticmethod
	def rng(seed=0):
		return numpy.random.default_rng(seed)

	def assertAllClose(self, actual, expected, rtol=1e-12, atol=0.0, msg=None):
		actual = numpy.asarray(actual, dtype=float)
		expected = numpy.asarray(expected, dtype=float)
		worst = float(numpy.max(numpy.abs(actual - expected) - rtol * numpy.abs(expected))) if actual.size else 0.0
		emsg = msg or f'arrays differ beyond rtol={rtol}, atol={atol} (worst excess {worst:g})'
		self.assertTrue(numpy.allclose(actual, expected, rtol=rtol, atol=atol), emsg)

	def check_reason(self, exc_type, reason, func, *args, **kwargs):
		with self.assertRaises(exc_type) as ctx:
			func(*args, **kwargs)
		emsg = f'expected reason {reason!r}, got {ctx.exception.reason!r}'
		self.assertEqual(ctx.exception.reason, reason, emsg)
		return ctx.exception

	def check_replay(self, system: KickedSystem, x0, N, tol=1e-12):
		orbit = evolve(system, x0, N)
		drift = orbit.replay(system)
		emsg = f'replaying the stored orbit drifts by {drift:g}'
		self.assertLessEqual(drift, tol, emsg)
		return orbit

	def check_deterministic(self, func, seeds=CHECK_SEEDS_DEFAULT):
		for seed in seeds:
			first = numpy.asarray(func(seed))
			second = numpy.asarray(func(seed))
			emsg = f'seed {seed} does not reproduce'
			self.assertTrue(numpy.array_equal(first, second), emsg)
