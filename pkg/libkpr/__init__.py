from .model import (KprError, DimensionError, DomainError, DegenerateError,
		    KprUsageError, SensingPool, MeasurementSet, generatePool,
		    measure, phaseDist)
from .spectral import InitConfig, spectralInit
from .kaczmarz import FiniteMode, OnlineMode, sikmStep, run
from .theory import computeBounds, expectedStepSqError, mismatchSet, solveBeta0
from .parameters import VERIFY_PARAMETERS
