# vim: ts=8 sw=8 noexpandtab
#
#   Randomized Kaczmarz phase retrieval
#
#   Copyright (c) 2024 The kpr authors
#
#   This program is free software; you can redistribute it and/or modify
#   it under the terms of the GNU General Public License as published by
#   the Free Software Foundation; either version 2 of the License, or
#   (at your option) any later version.
#
#   This program is distributed in the hope that it will be useful,
#   but WITHOUT ANY WARRANTY; without even the implied warranty of
#   MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the
#   GNU General Public License for more details.
#
#   You should have received a copy of the GNU General Public License along
#   with this program; if not, write to the Free Software Foundation, Inc.,
#   51 Franklin Street, Fifth Floor, Boston, MA 02110-1301 USA.
#

from dataclasses import dataclass
from libkpr.util import makeRng

import numpy as np

__all__ = [
	"KprError",
	"DimensionError",
	"DomainError",
	"DegenerateError",
	"KprUsageError",
	"Signal",
	"asSignal",
	"SensingPool",
	"MeasurementSet",
	"generatePool",
	"measure",
	"phaseDist",
	"closerBranch",
	"randomSignal",
	"loadSignal",
	"saveSignal",
]

class KprError(Exception):
	pass

class DimensionError(KprError):
	pass

class DomainError(KprError):
	pass

class DegenerateError(KprError):
	pass

class KprUsageError(KprError):
	pass

# A signal is a read-only 1-D float64 numpy array.
Signal = np.ndarray

def _frozen(array):
	array.flags.writeable = False
	return array

def asSignal(values):
	"""Validate and convert a vector to a read-only Signal.
	"""
	x = np.array(values, dtype=np.float64)
	if x.ndim != 1 or x.size < 1:
		raise DimensionError("A signal must be a non-empty vector.")
	if not np.all(np.isfinite(x)):
		raise DomainError("Signal entries must be finite.")
	return _frozen(x)

@dataclass(frozen=True, eq=False)
class SensingPool:
	"""The m Gaussian sensing vectors (row-major) and their cached
	squared norms.
	"""
	rows: np.ndarray
	sqNorms: np.ndarray
	seed: int = None

	@property
	def m(self):
		return self.rows.shape[0]

	@property
	def n(self):
		return self.rows.shape[1]

	@property
	def alpha(self):
		return self.m / self.n

	@classmethod
	def fromRows(cls, rows, seed=None):
		rows = np.array(rows, dtype=np.float64)
		if rows.ndim != 2 or rows.shape[0] < 1 or rows.shape[1] < 1:
			raise DimensionError("Sensing rows must form a non-empty m x n matrix.")
		if not np.all(np.isfinite(rows)):
			raise DomainError("Sensing vector entries must be finite.")
		sqNorms = np.einsum("ij,ij->i", rows, rows)
		if not np.all(sqNorms > 0.0):
			raise DegenerateError("Sensing vector with zero norm.")
		return cls(rows=_frozen(rows),
			   sqNorms=_frozen(sqNorms),
			   seed=seed)

	def permuted(self, order):
		return SensingPool.fromRows(self.rows[np.asarray(order)], seed=self.seed)

@dataclass(frozen=True, eq=False)
class MeasurementSet:
	"""Magnitude-only measurements y_r.
	"""
	values: np.ndarray

	def __post_init__(self):
		values = np.array(self.values, dtype=np.float64)
		if values.ndim != 1:
			raise DimensionError("Measurements must be a vector.")
		if not np.all(values >= 0.0):
			raise DomainError("Measurements must be non-negative.")
		object.__setattr__(self, "values", _frozen(values))

	@property
	def m(self):
		return self.values.size

	def scaled(self, c):
		return MeasurementSet(self.values * c)

	def permuted(self, order):
		return MeasurementSet(self.values[np.asarray(order)])

def generatePool(n, m, seed):
	"""Draw m i.i.d. N(0, I_n) sensing vectors from the Philox stream of 'seed'.
	"""
	if n < 1 or m < 1:
		raise DimensionError(f"Invalid pool dimensions n={n}, m={m}.")
	rows = makeRng(seed).standard_normal((m, n))
	return SensingPool.fromRows(rows, seed=seed)

def _checkLength(pool, x, what):
	if x.shape != (pool.n, ):
		raise DimensionError(f"{what} has length {x.size}, "
				     f"but the pool dimension is {pool.n}.")

def measure(pool, xStar):
	xStar = asSignal(xStar)
	_checkLength(pool, xStar, "Signal")
	# einsum keeps the per-row arithmetic independent of the row count.
	return MeasurementSet(np.abs(np.einsum("ij,j->i", pool.rows, xStar)))

def phaseDist(x, xStar):
	"""Error up to the global sign: min(|x - x*|, |x + x*|).
	"""
	x = np.asarray(x, dtype=np.float64)
	xStar = np.asarray(xStar, dtype=np.float64)
	if x.shape != xStar.shape or x.ndim != 1:
		raise DimensionError("phaseDist: length mismatch.")
	return float(min(np.linalg.norm(x - xStar),
			 np.linalg.norm(x + xStar)))

def closerBranch(x, xStar):
	"""Return +x* or -x*, whichever is closer to x. Ties pick +x*.
	"""
	x = np.asarray(x, dtype=np.float64)
	xStar = np.asarray(xStar, dtype=np.float64)
	if x.shape != xStar.shape:
		raise DimensionError("closerBranch: length mismatch.")
	if np.linalg.norm(x - xStar) <= np.linalg.norm(x + xStar):
		return xStar
	return -xStar

def randomSignal(n, seed):
	"""Unit norm Gaussian direction.
	"""
	if n < 1:
		raise DimensionError(f"Invalid signal dimension n={n}.")
	x = makeRng(seed).standard_normal(n)
	return asSignal(x / np.linalg.norm(x))

def loadSignal(path, n=None):
	"""Read a signal from a .npy file or a raw little endian float64 file.
	"""
	path = str(path)
	if path.endswith(".npy"):
		x = np.load(path)
	else:
		x = np.fromfile(path, dtype="<f8")
	x = asSignal(np.ravel(x))
	if n is not None and x.size != n:
		raise DimensionError(f"Signal file '{path}' holds {x.size} values, "
				     f"expected {n}.")
	return x

def saveSignal(path, x):
	path = str(path)
	x = np.asarray(x, dtype="<f8")
	if path.endswith(".npy"):
		np.save(path, x)
	else:
		x.tofile(path)
