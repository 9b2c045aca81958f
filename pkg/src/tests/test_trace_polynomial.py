import unittest
from fractions import Fraction

from kickstab import InputError, Mat2, NumericalGuardError, TauPolynomial, cycled_schedule, trace_polynomial
from kickstab.moebius import EXACT_DEGREE_LIMIT, evolve_matrix, random_rational_kicks, trace_growth_radius
from tests.utils import KickStabTestCase


def as_matrices(kicks):
	return [Mat2(*(float(x) for x in kick)) for kick in kicks]


class TestTracePolynomial(KickStabTestCase):
	def test_two_lower_kicks(self):
		p = trace_polynomial([(1, 0, 1, 1), (1, 0, 1, 1)], 2)
		self.assertEqual(str(p), '2*tau^0 + 4*tau^1 + 1*tau^2')
		self.assertEqual(p.coeffs, (Fraction(2), Fraction(4), Fraction(1)))

	def test_no_kicks(self):
		p = trace_polynomial([], 0)
		self.assertEqual(p.coeffs, (Fraction(2),))
		self.assertEqual(p.degree, 0)

	def test_leading_coefficient(self):
		for seed in range(4):
			kicks = random_rational_kicks(seed, 6)
			p = trace_polynomial(kicks, 6)
			self.assertEqual(p.degree, 6)
			self.assertEqual(p.leading, p.prod_c)
			expected = Fraction(1)
			for kick in kicks:
				expected *= kick[2]
			self.assertEqual(p.prod_c, expected)

	def test_matches_numeric_trace(self):
		kicks = random_rational_kicks(9, 5)
		p = trace_polynomial(kicks, 5)
		schedule = cycled_schedule(as_matrices(kicks))
		for tau in (0.37, -1.2, 2.0):
			g = evolve_matrix(schedule, tau, 5)
			self.assertAlmostEqual(abs(p(tau)), abs(g.trace), delta=1e-9 * max(1.0, g.norm))

	def test_float_mode(self):
		kicks = random_rational_kicks(2, 4)
		exact = trace_polynomial(kicks, 4)
		approx = trace_polynomial(as_matrices(kicks), 4, exact=False)
		self.assertFalse(approx.exact)
		for mine, theirs in zip(exact.coeffs, approx.coeffs):
			self.assertAlmostEqual(float(mine), float(theirs), places=9)

	def test_exact_rejects_floats(self):
		self.check_reason(InputError, 'input', trace_polynomial, [(1.0, 0, 1, 1)], 1)
		self.check_reason(InputError, 'input', trace_polynomial, as_matrices([(1, 0, 1, 1)]), 1)

	def test_determinant_checked(self):
		self.check_reason(InputError, 'input', trace_polynomial, [(1, 1, 1, 1)], 1)

	def test_too_few_kicks(self):
		self.check_reason(InputError, 'input', trace_polynomial, [(1, 0, 1, 1)], 2)

	def test_degree_guard(self):
		kicks = random_rational_kicks(0, EXACT_DEGREE_LIMIT + 1)
		self.check_reason(NumericalGuardError, 'numerical-guard', trace_polynomial, kicks, EXACT_DEGREE_LIMIT + 1)

	def test_growth_radius(self):
		p = trace_polynomial(random_rational_kicks(5, 4), 4)
		R = trace_growth_radius(p)
		lead = abs(float(p.leading))
		for tau in (R, -R, 2 * R, -3.5 * R):
			self.assertGreaterEqual(abs(p(tau)), lead * abs(tau) ** p.degree / 2)
		self.check_reason(InputError, 'input', trace_growth_radius, TauPolynomial((Fraction(2),)))


class TestTauPolynomialArithmetic(KickStabTestCase):
	def test_product(self):
		p = TauPolynomial((1, 1)) * TauPolynomial((1, -1))
		self.assertEqual(p.coeffs, (1, 0, -1))
		self.assertEqual(p.degree, 2)

	def test_sum_cancels(self):
		p = TauPolynomial((1, 0, -1)) + TauPolynomial((0, 0, 1))
		self.assertEqual(p.coeffs, (1,))
		self.assertEqual(p.degree, 0)

	def test_zero(self):
		zero = TauPolynomial((0, 0))
		self.assertEqual(zero.degree, -1)
		self.assertEqual(str(zero), '0')
		self.assertEqual(zero(3), 0.0)

	def test_exact_evaluation(self):
		p = TauPolynomial((Fraction(1, 3), Fraction(2, 3)))
		self.assertEqual(p(Fraction(1, 2)), float(Fraction(2, 3)))

	def test_json(self):
		p = trace_polynomial([(1, 0, Fraction(1, 2), 1)], 1)
		data = p.to_json()
		self.assertEqual(data['k'], 1)
		self.assertEqual(data['prod_c'], '1/2')
		self.assertEqual(data['leading'], '1/2')
		self.assertEqual(data['coeffs'], ['2', '1/2'])


if __name__ == '__main__':
	unittest.main()
