import math
import unittest

import numpy

from kickstab import InputError, IntervalCover, Mat2, UnsupportedError, constant_schedule, cycled_schedule
from kickstab.moebius import (
	INVOLUTION,
	NOT_A_PROOF,
	boundary_solution,
	boundedness_link_check,
	certify_gauge,
	classify_element,
	conjugates_symmetric_to_inverse,
	entries_from_schrodinger,
	entry_recursion,
	escape_detector,
	evolve_matrix,
	evolve_matrix_grid,
	gauge,
	gauge_growth,
	harmonic,
	horocycle,
	hyperbolic_diag,
	lower_unipotent,
	qm_scan,
	random_unipotent_kicks,
	rho_infinity,
	rotation,
	sign_kicks,
	unpair,
	upper_kick,
	upper_triangular_closed_form,
)
from tests.utils import KickStabTestCase

GOLDEN_GROWTH = math.log((3.0 + math.sqrt(5.0)) / 2.0)


class TestMat2(KickStabTestCase):
	def test_sign_normalization(self):
		g = Mat2(-1.0, 0.0, 0.0, -1.0)
		self.assertEqual(g.a, 1.0)
		self.assertTrue(g.close_to(Mat2.identity()))
		self.assertEqual(INVOLUTION.b, 1.0)
		self.assertEqual(INVOLUTION.c, -1.0)

	def test_determinant(self):
		self.check_reason(InputError, 'input', Mat2, 1.0, 0.0, 0.0, -1.0)
		g = Mat2(2.0, 0.0, 0.0, 2.0)
		self.assertAlmostEqual(g.a, 1.0)
		self.assertAlmostEqual(g.det, 1.0)

	def test_determinant_large_entries(self):
		self.check_reason(InputError, 'input', Mat2, -1000.0, 0.0, 0.0, 0.001)
		self.check_reason(InputError, 'input', Mat2, 1e6, 1e6, 1e6, 1e6)
		g = Mat2(1000.0, 0.0, 0.0, 0.002)
		self.assertAlmostEqual(g.det, 1.0, delta=1e-9)
		self.assertAlmostEqual(g.a, 1000.0 / math.sqrt(2.0))
		grown = horocycle(3.0e5) @ lower_unipotent(1.0e-3)
		self.assertAlmostEqual(grown.det, 1.0, delta=1e-9)

	def test_power(self):
		h = horocycle(1.0)
		self.assertTrue(h.power(5).close_to(horocycle(5.0)))
		self.assertTrue(h.power(-3).close_to(horocycle(-3.0)))
		self.assertTrue(h.power(0).close_to(Mat2.identity()))

	def test_norm(self):
		self.assertAlmostEqual(Mat2.identity().norm, math.sqrt(2.0))
		self.assertAlmostEqual(horocycle(3.0).norm ** 2, 11.0)


class TestEvolution(KickStabTestCase):
	def test_free_horocycle(self):
		g = evolve_matrix(constant_schedule(Mat2.identity()), 1.5, 4)
		self.assertTrue(g.close_to(horocycle(6.0)))
		self.assertAlmostEqual(g.norm**2, 38.0)

	def test_elliptic_returns(self):
		# (1, 0; -1, 1)(1, 1; 0, 1) has trace 1 and order six in PSL(2,R)
		kicks = constant_schedule(lower_unipotent(-1.0))
		self.assertTrue(evolve_matrix(kicks, 1.0, 6).close_to(Mat2.identity(), 1e-9))
		verdict = escape_detector(kicks, 1.0, K=1000, threshold=10.0)
		self.assertFalse(verdict.escaped)
		self.assertEqual(verdict.note, NOT_A_PROOF)

	def test_hyperbolic_escapes(self):
		kicks = constant_schedule(lower_unipotent(1.0))
		verdict = escape_detector(kicks, 1.0, K=1000, threshold=1e3)
		self.assertTrue(verdict.escaped)
		self.assertLessEqual(verdict.step, 10)
		self.assertGreater(verdict.max_norm, 1e3)

	def test_linear_growth_stays_below(self):
		verdict = escape_detector(constant_schedule(Mat2.identity()), 1.0, K=500, threshold=1e3)
		self.assertFalse(verdict.escaped)
		self.assertIsNone(verdict.step)
		self.assertEqual(verdict.argmax, 500)
		self.assertAlmostEqual(verdict.max_norm, math.sqrt(2.0 + 500.0**2))

	def test_scan(self):
		# |f_k| = sqrt(2 + (k tau)^2) crosses 60 only for tau = 1
		verdicts = qm_scan(constant_schedule(Mat2.identity()), [0.5, 1.0], K=100, threshold=60.0)
		self.assertEqual([v.escaped for v in verdicts], [False, True])
		self.assertEqual(verdicts[1].step, 60)

	def test_reverse_kicks_bounded_only_at_tau0(self):
		tau0 = 1.5
		kicks = constant_schedule(horocycle(-tau0))
		for tau in (0.75, 1.5, 2.25, 4.0):
			for k in (1, 10, 50):
				g = evolve_matrix(kicks, tau, k)
				shift = (k * (tau - tau0)) ** 2
				self.assertAlmostEqual(g.norm**2 - 2.0, shift, delta=1e-9 * max(1.0, shift), msg=f'tau={tau} k={k}')
		self.assertFalse(escape_detector(kicks, tau0, K=1000, threshold=10.0).escaped)
		for tau in (0.75, 2.25):
			self.assertTrue(escape_detector(kicks, tau, K=1000, threshold=10.0).escaped, f'tau={tau}')

	def test_sign_kicks_escape(self):
		for seed in range(10):
			kicks = sign_kicks(seed)
			verdict = escape_detector(kicks, 10.0, K=10_000, threshold=1e6)
			self.assertTrue(verdict.escaped, f'seed={seed}')
			self.assertGreater(gauge_growth(kicks, 10.0, 200).slope, 0.0, f'seed={seed}')

	def test_escape_arguments(self):
		kicks = constant_schedule(Mat2.identity())
		self.check_reason(InputError, 'input', escape_detector, kicks, 1.0, 0)
		self.check_reason(InputError, 'input', escape_detector, kicks, 1.0, 10, 1.0)

	def test_grid_matches_products(self):
		kicks = random_unipotent_kicks(3)
		sweep = evolve_matrix_grid(kicks, [0.3, 1.1], 30)
		for t, tau in enumerate((0.3, 1.1)):
			for k in (0, 1, 7, 30):
				g = evolve_matrix(kicks, tau, k)
				self.assertAlmostEqual(sweep.norms[t, k] / g.norm, 1.0, places=9)
				self.assertAlmostEqual(abs(sweep.traces[t, k]), abs(g.trace), delta=1e-9 * g.norm)


class TestRecursions(KickStabTestCase):
	def setUp(self):
		self.kicks = random_unipotent_kicks(11)

	def test_entries_are_the_evolution(self):
		seq = entry_recursion(self.kicks, 0.7, 25)
		for k in (0, 1, 2, 10, 25):
			self.assertTrue(seq.matrix(k).close_to(evolve_matrix(self.kicks, 0.7, k), 1e-9))

	def test_schrodinger_reconstruction(self):
		seq = entry_recursion(self.kicks, 0.7, 12)
		rebuilt = entries_from_schrodinger(self.kicks, 0.7, 12)
		for mine, theirs in zip((seq.alpha, seq.beta, seq.gamma, seq.delta), (rebuilt.alpha, rebuilt.beta, rebuilt.gamma, rebuilt.delta)):
			self.assertAllClose(theirs, mine, rtol=1e-8, atol=1e-8)

	def test_plain_potential(self):
		cs = [0.5, -0.25, 1.0]
		seq = entry_recursion(cs, 2.0, 3)
		kicks = cycled_schedule([lower_unipotent(c) for c in cs])
		self.assertTrue(seq.matrix(3).close_to(evolve_matrix(kicks, 2.0, 3)))
		self.check_reason(InputError, 'input', entry_recursion, cs, 2.0, 4)

	def test_boundary_rule(self):
		free = [0.0] * 10
		self.assertAllClose(boundary_solution(free, 1.0, 1.0, 10), numpy.ones(11))
		self.assertAllClose(boundary_solution(free, 1.0, 2.0, 10), numpy.arange(11.0))

	def test_non_unipotent_rejected(self):
		self.check_reason(UnsupportedError, 'unsupported', entry_recursion, constant_schedule(rotation(0.3)), 1.0, 5)

	def test_monotone_for_nonnegative_potential(self):
		seq = entry_recursion(random_unipotent_kicks(2, 0.0, 0.001), 1.0, 200)
		self.assertTrue(seq.nondecreasing())

	def test_boundedness_link(self):
		bounded = boundedness_link_check(constant_schedule(lower_unipotent(-1.0)), 1.0, 300)
		self.assertTrue(bounded.q_bounded)
		self.assertTrue(bounded.agree)
		unbounded = boundedness_link_check(constant_schedule(lower_unipotent(1.0)), 1.0, 60)
		self.assertFalse(unbounded.norm_bounded)
		self.assertTrue(unbounded.agree)


class TestUpperTriangular(KickStabTestCase):
	def test_closed_form(self):
		rng = self.rng(4)
		a = rng.uniform(0.8, 1.25, size=10)
		b = rng.uniform(-1.0, 1.0, size=10)
		kicks = cycled_schedule([upper_kick(x, y) for x, y in zip(a, b)])
		for k in (1, 4, 10):
			closed = upper_triangular_closed_form(a, b, 0.6, k)
			self.assertTrue(closed.close_to(evolve_matrix(kicks, 0.6, k), 1e-9), f'k={k}')

	def test_zero_diagonal(self):
		self.check_reason(InputError, 'input', upper_triangular_closed_form, [1.0, 0.0], [0.0, 0.0], 1.0, 2)
		self.check_reason(InputError, 'input', upper_kick, 0.0, 1.0)


class TestClassification(KickStabTestCase):
	def test_kinds(self):
		self.assertEqual(classify_element(Mat2.identity()).kind, 'identity')
		parabolic = classify_element(horocycle(1.0))
		self.assertEqual(parabolic.kind, 'parabolic')
		self.assertFalse(parabolic.conjugate_to_inverse)
		self.assertEqual(classify_element(hyperbolic_diag(1.0)).kind, 'hyperbolic')
		quarter = classify_element(rotation(math.pi / 2))
		self.assertEqual(quarter.kind, 'elliptic')
		self.assertTrue(quarter.involution)
		self.assertFalse(classify_element(rotation(0.4)).involution)

	def test_symmetric_conjugation(self):
		self.assertTrue(conjugates_symmetric_to_inverse(Mat2(2.0, 1.0, 1.0, 1.0)))
		self.check_reason(InputError, 'input', conjugates_symmetric_to_inverse, horocycle(1.0))


class TestGauge(KickStabTestCase):
	def test_identity(self):
		self.assertAlmostEqual(gauge(Mat2.identity()), math.log(math.sqrt(2.0)))

	def test_certificate(self):
		cert = certify_gauge(samples=500, seed=1)
		self.assertLessEqual(cert.constant, 1e-9)
		self.assertLessEqual(cert.conjugation, 1e-9)
		self.assertEqual(cert.samples, 500)

	def test_rho_infinity(self):
		self.assertAlmostEqual(rho_infinity(hyperbolic_diag(1.0)), 1.0)
		self.assertEqual(rho_infinity(horocycle(5.0)), 0.0)

	def test_growth_slope(self):
		growth = gauge_growth(constant_schedule(lower_unipotent(1.0)), 1.0, 200)
		self.assertLess(abs(growth.slope - GOLDEN_GROWTH), 0.02)
		self.assertEqual(growth.rho.shape, (201,))


class TestIntervalCover(KickStabTestCase):
	def test_harmonic(self):
		self.assertAlmostEqual(float(harmonic(4)), 25.0 / 12.0)
		self.assertAlmostEqual(float(harmonic(0)), 0.0)

	def test_unpair(self):
		for m in range(6):
			for n in range(6):
				j = (m + n) * (m + n + 1) // 2 + n
				self.assertEqual(unpair(j), (m, n))

	def test_covering(self):
		cover = IntervalCover()
		ks = cover.covering(0.5, 3)
		self.assertEqual(len(ks), 3)
		for k in ks:
			lo, hi = cover.interval(k)
			self.assertLessEqual(lo - 1e-12, 0.5)
			self.assertLessEqual(0.5, hi + 1e-12)
		self.check_reason(InputError, 'input', cover.covering, -1.0)

	def test_evolution_is_horocycle(self):
		cover = IntervalCover()
		kicks = cover.kicks()
		tau = 0.7
		for k in (1, 2, 5, 30):
			expected = horocycle(k * (tau - cover.r(k)))
			self.assertTrue(evolve_matrix(kicks, tau, k).close_to(expected, 1e-9), f'k={k}')

	def test_cover_counts(self):
		counts = IntervalCover().cover_counts([0.2, 0.9], 5000)
		self.assertTrue(numpy.all(counts >= 1))


if __name__ == '__main__':
	unittest.main()
