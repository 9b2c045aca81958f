import math
import unittest

from kickstab import InputError, Mat2, TimeReversingSymmetryError, UHPoint, geodesic_between, parabolic_form
from kickstab.hyperbolic import (
	axis_normalizer,
	basepoint_shift,
	boundary_image,
	cusp_enumeration,
	defect_bound,
	defect_samples,
	dihedral_group,
	enumerate_words,
	estimate_quasi_morphism,
	fermi_coordinates,
	homogenization,
	hyperbolic_distance,
	hyperbolic_form,
	integrate_form,
	mobius_apply,
	modular_cusp_enumeration,
	modular_group,
	r_infinity,
	r_value,
	schottky_group,
	word_matrix,
	zero_form,
)
from kickstab.moebius import horocycle, hyperbolic_diag
from tests.utils import KickStabTestCase


def small_parabolic_form():
	return parabolic_form(enumeration=modular_cusp_enumeration(c_max=2, x_window=(-5.0, 15.0)))


class TestGeometry(KickStabTestCase):
	def test_semicircle(self):
		geod = geodesic_between(UHPoint(0.0, 3.0), UHPoint(1.0, 3.0))
		self.assertEqual(geod.kind, 'semicircle')
		self.assertAlmostEqual(geod.center, 0.5)
		self.assertAlmostEqual(geod.radius, math.sqrt(37.0) / 2.0)
		self.assertAlmostEqual(geod.length, math.acosh(1.0 + 1.0 / 18.0))
		p, q = geod.endpoints
		self.assertAlmostEqual(p.x, 0.0)
		self.assertAlmostEqual(q.y, 3.0)

	def test_vertical(self):
		geod = geodesic_between(UHPoint(0.5, 1.0), UHPoint(0.5, math.e))
		self.assertEqual(geod.kind, 'vertical')
		self.assertAlmostEqual(geod.length, 1.0)
		self.assertAlmostEqual(geod.reversed().sigma_range[0], 1.0)

	def test_degenerate(self):
		self.check_reason(InputError, 'input', geodesic_between, UHPoint(0.0, 1.0), UHPoint(0.0, 1.0))
		self.check_reason(InputError, 'input', UHPoint, 0.0, -1.0)

	def test_distance_matches_length(self):
		p, q = UHPoint(-0.3, 0.7), UHPoint(1.2, 2.1)
		self.assertAlmostEqual(geodesic_between(p, q).length, hyperbolic_distance(p, q))

	def test_mobius(self):
		i = UHPoint(0.0, 1.0)
		fixed = mobius_apply(modular_group()['S'], i)
		self.assertAlmostEqual(fixed.x, 0.0)
		self.assertAlmostEqual(fixed.y, 1.0)
		moved = mobius_apply(horocycle(2.0), i)
		self.assertAlmostEqual(moved.x, 2.0)

	def test_isometry(self):
		g = Mat2(2.0, 1.0, 1.0, 1.0)
		p, q = UHPoint(0.1, 0.4), UHPoint(-2.0, 3.0)
		self.assertAlmostEqual(hyperbolic_distance(mobius_apply(g, p), mobius_apply(g, q)), hyperbolic_distance(p, q))

	def test_axis_normalizer(self):
		n, length = axis_normalizer(hyperbolic_diag(1.0))
		self.assertTrue(n.close_to(Mat2.identity()))
		self.assertAlmostEqual(length, 2.0)
		A = schottky_group()['A']
		n, _ = axis_normalizer(A)
		conj = n @ A @ n.inverse()
		self.assertLess(abs(conj.b), 1e-9)
		self.assertLess(abs(conj.c), 1e-9)
		self.assertGreater(conj.a, 1.0)
		self.check_reason(InputError, 'input', axis_normalizer, horocycle(1.0))

	def test_fermi(self):
		s, d = fermi_coordinates(UHPoint(0.0, 1.0), Mat2.identity())
		self.assertAlmostEqual(s, 0.0)
		self.assertAlmostEqual(d, 0.0)


class TestWords(KickStabTestCase):
	def test_word_matrix(self):
		gens = modular_group()
		self.assertTrue(word_matrix('Tt', gens).close_to(Mat2.identity()))
		self.assertTrue(word_matrix('TTT', gens).close_to(horocycle(3.0)))
		self.check_reason(InputError, 'input', word_matrix, 'X', gens)

	def test_free_group_layers(self):
		layers = enumerate_words(schottky_group(), 3)
		self.assertEqual([len(layer) for layer in layers], [1, 4, 12, 36])

	def test_relations_found(self):
		layers = enumerate_words(modular_group(), 1)
		# S and its inverse are the same element
		self.assertEqual(len(layers[1]), 3)

	def test_generator_names(self):
		self.check_reason(InputError, 'input', enumerate_words, {'ab': Mat2.identity()}, 1)

	def test_cusp_enumeration(self):
		cosets = cusp_enumeration(modular_group(), W=2)
		cusps = [boundary_image(m.inverse(), math.inf) for m in cosets.reps]
		self.assertTrue(math.isinf(cusps[0]))
		finite = [round(c, 9) for c in cusps[1:]]
		self.assertIn(0.0, finite)
		self.assertEqual(len(set(finite)), len(finite))
		self.assertTrue(cosets.frontier)

	def test_modular_enumeration(self):
		cosets = modular_cusp_enumeration(c_max=2, x_window=(-5.0, 15.0))
		self.assertEqual(cosets.words[0], '1')
		self.assertTrue(all(abs(m.c) in (0.0, 1.0, 2.0) for m in cosets.reps))
		# bottom rows are coprime and the cusp -d/c lies in the window
		for m in cosets.reps[1:]:
			self.assertEqual(math.gcd(int(m.c), int(m.d)), 1)
			self.assertTrue(-5.0 - 1.0 <= -m.d / m.c <= 15.0 + 1.0)
		self.check_reason(InputError, 'input', modular_cusp_enumeration, 0)


class TestParabolicForm(KickStabTestCase):
	@classmethod
	def setUpClass(cls):
		cls.form = small_parabolic_form()

	def test_translation_counts(self):
		for n in (1, 4, 10):
			result = r_value(self.form, horocycle(float(n)))
			self.assertAlmostEqual(result.value, float(n), delta=1e-6)
			self.assertFalse(result.truncated)

	def test_homogenization(self):
		hom = homogenization(self.form, 'T', n_max=10)
		self.assertAlmostEqual(hom.estimate.estimate, 1.0, delta=1e-6)
		self.assertAlmostEqual(hom.estimate.error, 2.0 * defect_bound(self.form) / 10)
		self.assertEqual(hom.truncation_warnings, 0)

	def test_basepoint_shift(self):
		shift = basepoint_shift(self.form, horocycle(1.0), pairs=5, seed=2)
		self.assertTrue(shift.within_bound)
		self.assertLessEqual(shift.maximum, 1.0 + 1e-6)

	def test_estimate(self):
		est = estimate_quasi_morphism(self.form, 'T', n_max=8, pairs=0)
		data = est.to_json()
		self.assertAlmostEqual(data['r_infinity']['estimate'], 1.0, delta=1e-6)
		self.assertEqual(len(data['r_values']), 8)
		self.assertEqual(data['W'], 2)
		self.assertTrue(data['usable'])

	def test_heights(self):
		self.check_reason(InputError, 'input', parabolic_form, 3.0, 2.5)


class TestHyperbolicForm(KickStabTestCase):
	@classmethod
	def setUpClass(cls):
		cls.gens = schottky_group()
		cls.form = hyperbolic_form(cls.gens['B'], cls.gens, W=4)

	def test_axis_segments(self):
		self.assertAlmostEqual(self.form.base.y, 1.0)
		hom = homogenization(self.form, 'B', n_max=6)
		for n, value in enumerate(hom.values, 1):
			self.assertAlmostEqual(value.value, float(n), delta=1e-6)
		self.assertAlmostEqual(hom.estimate.estimate, 1.0, delta=1e-6)

	def test_inverse_is_negative(self):
		forward = r_value(self.form, word_matrix('BB', self.gens))
		backward = r_value(self.form, word_matrix('bb', self.gens))
		self.assertAlmostEqual(forward.value, -backward.value, delta=1e-6)

	def test_defect(self):
		samples = defect_samples(self.form, pairs=20, max_length=2, seed=3)
		self.assertEqual(len(samples.words), 20)
		self.assertTrue(samples.within_bound)

	def test_needs_hyperbolic(self):
		self.check_reason(InputError, 'input', hyperbolic_form, horocycle(1.0), self.gens, 2)
		self.check_reason(InputError, 'input', hyperbolic_form, self.gens['B'], self.gens, 0)


class TestTimeReversal(KickStabTestCase):
	def test_dihedral_strict(self):
		gens = dihedral_group()
		err = self.check_reason(TimeReversingSymmetryError, 'time-reversing-symmetry', hyperbolic_form, gens['B'], gens, 4)
		self.assertIsNotNone(err.conjugator)

	def test_dihedral_cancels(self):
		gens = dihedral_group()
		form = hyperbolic_form(gens['B'], gens, W=4, strict=False)
		self.assertFalse(form.usable)
		for n in (1, 3):
			self.assertAlmostEqual(r_value(form, gens['B'].power(n)).value, 0.0, delta=1e-6)

	def test_modular_symmetric(self):
		gens = modular_group()
		g = Mat2(2.0, 1.0, 1.0, 1.0)
		self.check_reason(TimeReversingSymmetryError, 'time-reversing-symmetry', hyperbolic_form, g, gens, 3)


class TestEstimates(KickStabTestCase):
	def test_r_infinity(self):
		rng = self.rng(1)
		values = [n + 0.01 * rng.standard_normal() for n in range(1, 41)]
		est = r_infinity(values, defect=1.0)
		self.assertAlmostEqual(est.estimate, 1.0, delta=0.01)
		self.assertAlmostEqual(est.error, 2.0 / 40)
		self.assertEqual(est.n_max, 40)
		self.check_reason(InputError, 'input', r_infinity, [1.0, 2.0, 3.0])

	def test_residual_error(self):
		est = r_infinity([2.0 * n for n in range(1, 11)])
		self.assertAlmostEqual(est.estimate, 2.0)
		self.assertLess(est.error, 1e-9)

	def test_zero_form(self):
		form = zero_form()
		geod = geodesic_between(UHPoint(0.0, 1.0), UHPoint(3.0, 2.0))
		result = integrate_form(form, geod)
		self.assertEqual(result.value, 0.0)
		self.assertEqual(result.tiles, 0)
		self.check_reason(InputError, 'input', integrate_form, form, geod, 0.0)


if __name__ == '__main__':
	unittest.main()
