"""
Kick stability toolkit

Numerical experiments on kicked systems f_i = phi_i h^tau: a flow h^t run for
a period tau, followed by the i-th kick phi_i.

Example:

>>> from kickstab import Mat2, constant_schedule, evolve_matrix, trace_polynomial
>>> g = evolve_matrix(constant_schedule(Mat2.identity()), 1.5, 4)
>>> print(round(g.norm ** 2, 9))
38.0
>>> print(trace_polynomial([(1, 0, 1, 1), (1, 0, 1, 1)], 2))
2*tau^0 + 4*tau^1 + 1*tau^2
"""

# Import the sequential-system layer
from kickstab.core import (
	Arena,
	BirkhoffProfile,
	KickedSystem,
	KickSchedule,
	Orbit,
	OrbitStatistics,
	RecurrenceReport,
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
	time_reversal_schedule,
)

# Import the arenas
from kickstab.hamiltonian import (
	FlatTorusArena,
	SphereArena,
	find_top_fixed_points,
	kicked_top_scan,
	nonmixing_witness,
	pushforward_measure_check,
	randomizing_schedule,
	time_reversal_check,
)
from kickstab.hyperbolic import (
	BoundedOneForm,
	Geodesic,
	UHPoint,
	estimate_quasi_morphism,
	geodesic_between,
	hyperbolic_form,
	integrate_form,
	parabolic_form,
	r_infinity,
	r_value,
)
from kickstab.moebius import (
	IntervalCover,
	Mat2,
	TauPolynomial,
	boundedness_link_check,
	classify_element,
	constant_schedule,
	entry_recursion,
	escape_detector,
	evolve_matrix,
	gauge,
	gauge_growth,
	horocycle,
	schrodinger_solve,
	trace_polynomial,
	upper_triangular_closed_form,
)
from kickstab.torus import (
	FrequencyVector,
	TorusArena,
	burago_hit_frequency,
	discrepancy_1d,
	mean_square_weyl,
	translation_schedule,
	weyl_sum,
)

# Import type definitions
from kickstab.types import (
	ConfigurationError,
	InputError,
	KickStabError,
	NumericalGuardError,
	TimeReversingSymmetryError,
	UnsupportedError,
)

__version__ = '1.0.0'
