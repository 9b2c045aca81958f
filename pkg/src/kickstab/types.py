"""
Type definitions and exceptions for kickstab
"""

from collections.abc import Callable
from typing import Any, Literal

import numpy
import numpy.typing

# specify allowed values
ScheduleRule = Literal['cycled', 'indexed', 'random']
ElementKind = Literal['identity', 'elliptic', 'parabolic', 'hyperbolic']
GeodesicKind = Literal['vertical', 'semicircle']
RunMode = Literal['canonical', 'fast']
OutputFormat = Literal['csv', 'json']

FloatArray = numpy.typing.NDArray[numpy.float64]
BoolArray = numpy.typing.NDArray[numpy.bool_]
ComplexArray = numpy.typing.NDArray[numpy.complex128]

# a kick is whatever group element the arena acts with:
# translation vectors on tori, orthogonal matrices on the sphere, Mat2 in PSL(2,R)
Kick = Any

Predicate = Callable[[FloatArray], BoolArray]
Observable = Callable[[FloatArray], FloatArray]
KickSampler = Callable[[FloatArray], Kick]


class KickStabError(Exception):
	"""
	Base class; ``reason`` is the machine-readable tag printed by the command line.
	"""

	reason = 'error'


class InputError(KickStabError, ValueError):
	reason = 'input'


class UnsupportedError(KickStabError, ValueError):
	reason = 'unsupported'


class ConfigurationError(KickStabError, ValueError):
	reason = 'configuration'


class NumericalGuardError(KickStabError, ArithmeticError):
	reason = 'numerical-guard'


class TimeReversingSymmetryError(ConfigurationError):
	"""
	The axis of a hyperbolic element is flipped by some element of the group,
	so the element is conjugate to its inverse and no quasi-morphism separates them.
	"""

	reason = 'time-reversing-symmetry'

	def __init__(self, message: str, conjugator: Any = None) -> None:
		super().__init__(message)
		self.conjugator = conjugator
