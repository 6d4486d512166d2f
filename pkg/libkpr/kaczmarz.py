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
from libkpr.model import (DimensionError, DomainError, DegenerateError,
			  SensingPool, asSignal, closerBranch, measure)
from libkpr.util import makeRng, sgn

import numpy as np

__all__ = [
	"AUDIT_TOLERANCE",
	"Sample",
	"FiniteMode",
	"OnlineMode",
	"RunTrace",
	"sikmStep",
	"sikmStepBatch",
	"nextSample",
	"phaseDistSq",
	"run",
]

AUDIT_TOLERANCE = 1e-9

@dataclass(frozen=True, eq=False)
class Sample:
	a: np.ndarray
	sqNorm: float
	y: float
	index: int = None	# Pool index (finite mode only)

class _SamplerState:
	__slots__ = (
		"rng",
		"buf",
		"pos",
		"count",
		"yBlock",
	)

	def __init__(self, rng):
		self.rng = rng
		self.buf = None
		self.pos = 0
		self.count = 0
		self.yBlock = None

class FiniteMode:
	"""Finite measurement pool with data reuse.
	Each iteration picks r uniformly from the pool, or follows
	'order' (cycled) if an explicit index order is given.
	"""

	tag = "finite"
	BLOCK = 4096

	def __init__(self, pool, meas, order=None):
		if meas.m != pool.m:
			raise DimensionError(f"{meas.m} measurements for a pool of {pool.m} vectors.")
		self.pool = pool
		self.meas = meas
		self.order = None
		if order is not None:
			order = np.array(order, dtype=np.int64)
			if order.ndim != 1 or order.size < 1:
				raise DimensionError("Index order must be a non-empty sequence.")
			if np.any(order < 0) or np.any(order >= pool.m):
				raise DomainError("Index order contains out-of-range indices.")
			self.order = order

	@property
	def n(self):
		return self.pool.n

	def newState(self, seed):
		return _SamplerState(makeRng(seed))

	def nextSample(self, state):
		if self.order is not None:
			r = int(self.order[state.count % self.order.size])
		else:
			if state.buf is None or state.pos >= state.buf.size:
				state.buf = state.rng.integers(0, self.pool.m, size=self.BLOCK)
				state.pos = 0
			r = int(state.buf[state.pos])
			state.pos += 1
		state.count += 1
		return Sample(a=self.pool.rows[r],
			      sqNorm=float(self.pool.sqNorms[r]),
			      y=float(self.meas.values[r]),
			      index=r)

class OnlineMode:
	"""Online processing: a fresh N(0, I) sensing vector per iteration.
	The vector stream is the Philox stream of 'seed' (or of the run seed,
	if seed is None), read in the same order generatePool() reads it.
	"""

	tag = "online"
	BLOCK = 256

	def __init__(self, xStar, seed=None):
		self.xStar = asSignal(xStar)
		self.seed = seed

	@property
	def n(self):
		return self.xStar.size

	def newState(self, seed):
		return _SamplerState(makeRng(seed if self.seed is None else self.seed))

	def nextSample(self, state):
		if state.buf is None or state.pos >= state.buf.m:
			# Same arithmetic as a finite pool built from this stream.
			block = SensingPool.fromRows(
				state.rng.standard_normal((self.BLOCK, self.n)))
			state.buf = block
			state.yBlock = measure(block, self.xStar).values
			state.pos = 0
		block, r = state.buf, state.pos
		state.pos += 1
		state.count += 1
		return Sample(a=block.rows[r],
			      sqNorm=float(block.sqNorms[r]),
			      y=float(state.yBlock[r]))

@dataclass(frozen=True, eq=False)
class RunTrace:
	sqDist: np.ndarray		# dist^2(x_t, x*) at the recorded iterations
	iters: np.ndarray		# recorded iteration numbers
	iterations: int
	seed: int
	mode: str
	x: np.ndarray			# final iterate
	chosenIndices: np.ndarray = None
	auditFailures: int = 0
	auditMaxRelErr: float = 0.0

def _sikm(x, a, sqNorm, y):
	ax = float(a @ x)
	target = y if ax >= 0.0 else -y
	return x + ((target - ax) / sqNorm) * a

def sikmStep(xPrev, a, sqNormA, y):
	"""Single iteration of the Kaczmarz method (SIKM).
	Projects xPrev onto the hyperplane a^T x = y * sgn(a^T xPrev).
	"""
	xPrev = np.asarray(xPrev, dtype=np.float64)
	a = np.asarray(a, dtype=np.float64)
	if a.shape != xPrev.shape or a.ndim != 1:
		raise DimensionError("sikmStep: length mismatch.")
	if not sqNormA > 0.0:
		raise DegenerateError("sikmStep: sensing vector with zero norm.")
	if y < 0.0:
		raise DomainError("sikmStep: negative measurement.")
	return _sikm(xPrev, a, float(sqNormA), float(y))

def sikmStepBatch(pool, meas, x):
	"""Apply the SIKM step from x for every pool index at once.
	Row k of the result is the iterate obtained by choosing index k.
	"""
	x = np.asarray(x, dtype=np.float64)
	if x.shape != (pool.n, ):
		raise DimensionError("sikmStepBatch: length mismatch.")
	if meas.m != pool.m:
		raise DimensionError("sikmStepBatch: measurement count mismatch.")
	ax = pool.rows @ x
	target = np.where(ax >= 0.0, meas.values, -meas.values)
	coef = (target - ax) / pool.sqNorms
	return x[None, :] + coef[:, None] * pool.rows

def nextSample(mode, state):
	return mode.nextSample(state)

def phaseDistSq(x, xStar):
	d = x - xStar
	s = x + xStar
	return float(min(d @ d, s @ s))

def _auditStep(xPrev, xNext, xStar, sample):
	"""Check the squared error recursion of one step.

	|e_t|^2 = |e|^2 - (a^T e)^2/|a|^2 + (a^T x*)^2 b^2/|a|^2
	with b = sgn(a^T x*) sgn(a^T xPrev) - 1 and e taken in the branch of
	x* closer to xPrev. Returns the relative deviation.
	"""
	xs = closerBranch(xPrev, xStar)
	a, sq = sample.a, sample.sqNorm
	e = xPrev - xs
	ax = float(a @ xs)
	b = sgn(ax) * sgn(float(a @ xPrev)) - 1.0
	gain = ax * ax * b * b / sq
	errSq = float(e @ e)
	ae = float(a @ e)
	predicted = errSq - ae * ae / sq + gain
	eNext = xNext - xs
	actual = float(eNext @ eNext)
	# Absolute floor for iterates that sit on x* up to rounding.
	scale = errSq + gain + 1e-10 * float(xs @ xs)
	if scale == 0.0:
		return 0.0 if actual == predicted else np.inf
	return abs(actual - predicted) / scale

def run(x0, xStar, mode, T, seed, traceStride=1, audit=False):
	"""Run T Kaczmarz iterations and record dist^2(x_t, x*).

	Iteration t is recorded if t % traceStride == 0 or t == T.
	With audit=True every step is checked against the squared error
	recursion (doubles the per-step cost).
	"""
	x = np.array(x0, dtype=np.float64)
	xStar = asSignal(xStar)
	if x.shape != xStar.shape or x.shape != (mode.n, ):
		raise DimensionError("run: x0, x* and the sampling mode disagree in dimension.")
	if T < 1:
		raise DomainError(f"run: invalid iteration count T={T}.")
	if traceStride < 1:
		raise DomainError(f"run: invalid trace stride {traceStride}.")

	state = mode.newState(seed)
	nrRecords = -(-T // traceStride) + 1
	sqDist = np.empty(nrRecords)
	iters = np.empty(nrRecords, dtype=np.int64)
	sqDist[0], iters[0] = phaseDistSq(x, xStar), 0
	rec = 1
	chosen = np.empty(T, dtype=np.int64) if mode.tag == FiniteMode.tag else None
	auditFailures = 0
	auditMaxRelErr = 0.0
	for t in range(1, T + 1):
		sample = nextSample(mode, state)
		if not sample.sqNorm > 0.0:
			raise DegenerateError("run: sensing vector with zero norm.")
		xNext = _sikm(x, sample.a, sample.sqNorm, sample.y)
		if audit:
			relErr = _auditStep(x, xNext, xStar, sample)
			auditMaxRelErr = max(auditMaxRelErr, relErr)
			if relErr > AUDIT_TOLERANCE:
				auditFailures += 1
		x = xNext
		if chosen is not None:
			chosen[t - 1] = sample.index
		if t % traceStride == 0 or t == T:
			sqDist[rec], iters[rec] = phaseDistSq(x, xStar), t
			rec += 1
	assert rec == nrRecords
	return RunTrace(sqDist=sqDist,
			iters=iters,
			iterations=T,
			seed=seed,
			mode=mode.tag,
			x=x,
			chosenIndices=chosen,
			auditFailures=auditFailures,
			auditMaxRelErr=auditMaxRelErr)
