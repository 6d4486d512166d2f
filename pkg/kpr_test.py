#!/usr/bin/env python3
# vim: ts=8 sw=8 noexpandtab
#
#  Test of the Kaczmarz phase retrieval library.
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

from libkpr.checks import *
from libkpr.harness import *
from libkpr.kaczmarz import *
from libkpr.main import EXIT_IO, EXIT_USAGE, main
from libkpr.model import *
from libkpr.parameters import *
from libkpr.spectral import *
from libkpr.theory import *
from libkpr.util import *

from scipy import integrate, stats
import contextlib
import io
import json
import math
import multiprocessing
import numpy as np
import os
import tempfile

def expectClose(name, value, expected, tol):
	if value is None or not abs(value - expected) <= tol:
		raise Exception(f"{name} test FAILED! ({value} != {expected} +- {tol})")

def expectRaises(name, excType, func, *args, **kwargs):
	try:
		func(*args, **kwargs)
	except excType:
		return
	raise Exception(f"{name} test FAILED! ({excType.__name__} not raised)")

def handPool():
	return SensingPool.fromRows([[1.0, 0.0], [0.0, 1.0]])

def randomInstance(n, m, seed, errScale=0.5):
	pool = generatePool(n, m, deriveSeed(seed, 1))
	xStar = randomSignal(n, deriveSeed(seed, 0))
	xPrev = xStar + errScale * randomSignal(n, deriveSeed(seed, 2))
	return pool, measure(pool, xStar), xStar, xPrev

def testSign():
	print("Testing sign convention...")
	if sgn(0.0) != 1.0 or sgn(-0.0) != 1.0 or sgn(-1e-300) != -1.0 or sgn(3) != 1.0:
		raise Exception("sgn scalar test FAILED!")
	if not np.array_equal(sgn(np.array([-2.0, 0.0, 5.0])), [-1.0, 1.0, 1.0]):
		raise Exception("sgn array test FAILED!")

def testSeeds():
	print("Testing seed derivation...")
	a = deriveSeed(1, 0)
	if a != deriveSeed(1, 0):
		raise Exception("deriveSeed determinism test FAILED!")
	seeds = { deriveSeed(1, k) for k in range(100) } | { deriveSeed(2, 0), deriveSeed(1, 0, 0) }
	if len(seeds) != 102:
		raise Exception("deriveSeed collision test FAILED!")
	if not all(0 <= s <= SEED_MASK for s in seeds):
		raise Exception("deriveSeed range test FAILED!")
	if not np.array_equal(makeRng(7).standard_normal(5), makeRng(7).standard_normal(5)):
		raise Exception("makeRng determinism test FAILED!")

def testTextHelpers():
	print("Testing float list parsing and formatting...")
	if parseFloatList("6, 8,12") != [6.0, 8.0, 12.0]:
		raise Exception("parseFloatList test FAILED!")
	expectRaises("parseFloatList", ValueError, parseFloatList, "6,x")
	expectRaises("parseFloatList", ValueError, parseFloatList, ",")
	if float(fmtFloat(0.1 + 0.2)) != 0.1 + 0.2:
		raise Exception("fmtFloat test FAILED!")
	if jsonFloat(math.inf) is not None or jsonFloat(math.nan) is not None or jsonFloat(1.5) != 1.5:
		raise Exception("jsonFloat test FAILED!")

def testPool():
	print("Testing sensing pools and measurements...")
	pool = handPool()
	if (pool.m, pool.n, pool.alpha) != (2, 2, 1.0):
		raise Exception("SensingPool shape test FAILED!")
	if not np.array_equal(pool.sqNorms, [1.0, 1.0]):
		raise Exception("SensingPool norms test FAILED!")
	expectRaises("zero row", DegenerateError, SensingPool.fromRows, [[1.0, 0.0], [0.0, 0.0]])
	expectRaises("pool shape", DimensionError, SensingPool.fromRows, [1.0, 2.0])
	meas = measure(pool, [1.0, -3.0])
	if not np.array_equal(meas.values, [1.0, 3.0]):
		raise Exception("measure test FAILED!")
	expectRaises("measure length", DimensionError, measure, pool, [1.0, 2.0, 3.0])
	expectRaises("negative measurement", DomainError, MeasurementSet, [1.0, -1.0])
	a, b = generatePool(5, 30, 11), generatePool(5, 30, 11)
	if not np.array_equal(a.rows, b.rows) or np.array_equal(a.rows, generatePool(5, 30, 12).rows):
		raise Exception("generatePool determinism test FAILED!")
	if not np.array_equal(measure(a, [1, 2, 3, 4, 5]).values,
			      measure(a, [-1, -2, -3, -4, -5]).values):
		raise Exception("measure sign invariance test FAILED!")

def testPhaseDistance():
	print("Testing the phase distance...")
	xStar = np.array([1.0, 2.0])
	expectClose("phaseDist", phaseDist([-1.0, -2.0], xStar), 0.0, 0.0)
	expectClose("phaseDist", phaseDist([1.0, 3.0], xStar), 1.0, 1e-15)
	if not np.array_equal(closerBranch([-1.0, -1.5], xStar), -xStar):
		raise Exception("closerBranch test FAILED!")
	if not np.array_equal(closerBranch([0.0, 0.0], xStar), xStar):
		raise Exception("closerBranch tie test FAILED!")
	x = randomSignal(20, 3)
	expectClose("randomSignal norm", float(np.linalg.norm(x)), 1.0, 1e-12)

def testSignalFiles():
	print("Testing signal files...")
	x = randomSignal(9, 4)
	with tempfile.TemporaryDirectory() as d:
		for name in ("x.bin", "x.npy"):
			path = os.path.join(d, name)
			saveSignal(path, x)
			if not np.array_equal(loadSignal(path, 9), x):
				raise Exception(f"signal file {name} test FAILED!")
			expectRaises("signal file length", DimensionError, loadSignal, path, 10)
		if os.path.getsize(os.path.join(d, "x.bin")) != 9 * 8:
			raise Exception("raw signal file size test FAILED!")

def testSpectralInit():
	print("Testing the spectral initializer...")
	n, m = 20, 400
	xStar = randomSignal(n, 5)
	pool = generatePool(n, m, 6)
	meas = measure(pool, xStar)
	cfg = InitConfig(seed=7)
	init = spectralInit(pool, meas, cfg)
	corr = abs(float(init.x0 @ xStar)) / float(np.linalg.norm(init.x0))
	if corr < 0.7:
		raise Exception(f"spectralInit correlation test FAILED! ({corr})")
	expectClose("spectralInit norm", float(np.linalg.norm(init.x0)), 1.0, 0.2)
	if not init.converged or init.sweeps < 1:
		raise Exception("spectralInit convergence test FAILED!")
	raw = init.sweepResiduals
	if len(raw) != init.sweeps + 1:
		raise Exception("spectralInit sweep residual count test FAILED!")
	accepted = [ raw[0] ]
	for r in raw[1:]:
		if r <= accepted[-1]:
			accepted.append(r)
	if init.residuals != accepted:
		raise Exception("spectralInit accepted residual test FAILED!")
	scale = cfg.tol * init.eigenvalue
	if not raw[-1] <= raw[0] or not raw[-1] <= 10.0 * scale:
		raise Exception(f"spectralInit final residual test FAILED! ({raw[0]} -> {raw[-1]})")
	tail = next(i for i, r in enumerate(raw) if r < 1e-3 * init.eigenvalue)
	if any(b > a + scale for a, b in zip(raw[tail:], raw[tail + 1:])):
		raise Exception("spectralInit residual monotonicity test FAILED!")
	again = spectralInit(pool, meas, cfg)
	if not np.array_equal(again.x0, init.x0):
		raise Exception("spectralInit determinism test FAILED!")
	expectRaises("zero measurements", DegenerateError, spectralInit,
		     pool, MeasurementSet(np.zeros(m)))
	expectRaises("InitConfig", DomainError, InitConfig, maxPowerIters=0)

def testSpectralInvariance():
	print("Testing spectral initializer invariances...")
	n, m = 24, 300
	xStar = randomSignal(n, 11)
	pool = generatePool(n, m, 12)
	meas = measure(pool, xStar)
	cfg = InitConfig(seed=13)
	x0 = spectralInit(pool, meas, cfg).x0
	norm = float(np.linalg.norm(x0))
	for c in (0.25, 3.0, 1e3):
		xc = spectralInit(pool, meas.scaled(c), cfg).x0
		if not float(np.max(np.abs(xc - c * x0))) <= 1e-12 * c * norm:
			raise Exception(f"spectralInit scaling test FAILED! (c={c})")
	order = makeRng(14).permutation(m)
	xp = spectralInit(pool.permuted(order), meas.permuted(order), cfg).x0
	if not phaseDist(xp, x0) <= 1e-10 * norm:
		raise Exception(f"spectralInit permutation test FAILED! ({phaseDist(xp, x0)})")

def testSpectralEigh():
	print("Testing the spectral initializer against a dense eigensolver...")
	n, m = 10, 200
	xStar = randomSignal(n, 21)
	pool = generatePool(n, m, 22)
	meas = measure(pool, xStar)
	init = spectralInit(pool, meas, InitConfig(seed=23))
	w = meas.values ** 2
	d = pool.rows.T @ (w[:, None] * pool.rows) / m
	vals, vecs = np.linalg.eigh(d)
	top = vecs[:, -1]
	cos = abs(float(top @ init.x0)) / float(np.linalg.norm(init.x0))
	expectClose("spectralInit eigenvector", cos, 1.0, 1e-6)
	expectClose("spectralInit eigenvalue", init.eigenvalue, float(vals[-1]), 1e-6 * float(vals[-1]))
	expectClose("spectralInit scale", float(np.linalg.norm(init.x0)),
		    math.sqrt(float(np.mean(w))), 1e-12)

def testSpectralCorrelation():
	print("Testing spectral initializer alignment at alpha=12...")
	n, m, trials = 64, 768, 200
	corrs = []
	for trial in range(trials):
		xStar = randomSignal(n, deriveSeed(31, trial, 0))
		pool = generatePool(n, m, deriveSeed(31, trial, 1))
		init = spectralInit(pool, measure(pool, xStar),
				    InitConfig(seed=deriveSeed(31, trial, 2)))
		if not init.converged:
			raise Exception(f"spectralInit trial {trial} convergence test FAILED!")
		corrs.append(abs(float(init.x0 @ xStar)) / float(np.linalg.norm(init.x0)))
	med = float(np.median(corrs))
	if not med >= 0.85:
		raise Exception(f"spectralInit median correlation test FAILED! ({med})")

def testSikmStep():
	print("Testing single Kaczmarz steps...")
	a = np.array([1.0, 0.0])
	for xPrev, expected in (([0.5, 3.0], [2.0, 3.0]),
				([-0.5, 3.0], [-2.0, 3.0]),
				([0.0, 1.0], [2.0, 1.0])):
		x = sikmStep(np.array(xPrev), a, 1.0, 2.0)
		if not np.array_equal(x, expected):
			raise Exception(f"sikmStep test FAILED! ({xPrev} -> {x})")
	expectRaises("sikmStep zero norm", DegenerateError, sikmStep, [1.0, 1.0], [0.0, 0.0], 0.0, 1.0)
	expectRaises("sikmStep length", DimensionError, sikmStep, [1.0, 1.0], [1.0], 1.0, 1.0)
	expectRaises("sikmStep measurement", DomainError, sikmStep, [1.0, 1.0], a, 1.0, -1.0)
	pool, meas, xStar, xPrev = randomInstance(6, 30, 8)
	batch = sikmStepBatch(pool, meas, xPrev)
	for k in (0, 7, 29):
		single = sikmStep(xPrev, pool.rows[k], pool.sqNorms[k], meas.values[k])
		if not np.allclose(batch[k], single, rtol=1e-14, atol=1e-14):
			raise Exception("sikmStepBatch test FAILED!")

def testRunRecording():
	print("Testing trace recording...")
	pool, meas, xStar, xPrev = randomInstance(4, 20, 9)
	trace = run(xPrev, xStar, FiniteMode(pool, meas), 10, seed=1, traceStride=3)
	if list(trace.iters) != [0, 3, 6, 9, 10] or trace.sqDist.size != 5:
		raise Exception("trace stride test FAILED!")
	expectClose("initial distance", trace.sqDist[0], phaseDist(xPrev, xStar) ** 2, 1e-14)
	if trace.chosenIndices.size != 10 or trace.mode != "finite":
		raise Exception("trace chosen indices test FAILED!")
	again = run(xPrev, xStar, FiniteMode(pool, meas), 10, seed=1, traceStride=3)
	if not np.array_equal(again.sqDist, trace.sqDist):
		raise Exception("run determinism test FAILED!")
	expectRaises("run T", DomainError, run, xPrev, xStar, FiniteMode(pool, meas), 0, 1)
	expectRaises("run stride", DomainError, run, xPrev, xStar, FiniteMode(pool, meas), 5, 1, traceStride=0)
	expectRaises("run length", DimensionError, run, xPrev[:3], xStar, FiniteMode(pool, meas), 5, 1)

def testRunSignInvariance():
	print("Testing global sign invariance of runs...")
	pool, meas, xStar, xPrev = randomInstance(8, 48, 10)
	a = run(xPrev, xStar, FiniteMode(pool, meas), 500, seed=3)
	b = run(xPrev, -xStar, FiniteMode(pool, measure(pool, -xStar)), 500, seed=3)
	if not np.array_equal(a.sqDist, b.sqDist):
		raise Exception("sign invariance test FAILED!")

def testRunAudit():
	print("Testing the squared error recursion along runs...")
	for mode in ("finite", "online"):
		pool, meas, xStar, xPrev = randomInstance(16, 128, 11, errScale=0.3)
		sampler = FiniteMode(pool, meas) if mode == "finite" else OnlineMode(xStar)
		trace = run(xPrev, xStar, sampler, 2000, seed=4, traceStride=50, audit=True)
		if trace.auditFailures:
			raise Exception(f"{mode} audit test FAILED! "
					f"({trace.auditFailures} failures, max {trace.auditMaxRelErr})")

def testFiniteUniform():
	print("Testing uniform index sampling...")
	pool = generatePool(3, 10, 12)
	mode = FiniteMode(pool, measure(pool, [1.0, 0.0, 0.0]))
	state = mode.newState(13)
	idx = np.array([ mode.nextSample(state).index for _ in range(100000) ])
	counts = np.bincount(idx, minlength=10)
	p = stats.chisquare(counts).pvalue
	if p < 1e-4:
		raise Exception(f"uniform sampling test FAILED! (p={p})")

def testForcedOrder():
	print("Testing forced index order...")
	pool, meas, xStar, xPrev = randomInstance(4, 6, 14)
	trace = run(xPrev, xStar, FiniteMode(pool, meas, order=[2, 0, 5]), 7, seed=1)
	if list(trace.chosenIndices) != [2, 0, 5, 2, 0, 5, 2]:
		raise Exception("forced order test FAILED!")
	expectRaises("order range", DomainError, FiniteMode, pool, meas, order=[6])

def testOnlineStream():
	print("Testing the online vector stream...")
	n, seed = 5, 15
	xStar = randomSignal(n, 16)
	x0 = np.zeros(n)
	online = run(x0, xStar, OnlineMode(xStar, seed=seed), 200, seed=99)
	pool = generatePool(n, 256, seed)
	finite = run(x0, xStar, FiniteMode(pool, measure(pool, xStar), order=range(256)), 200, seed=1)
	if online.chosenIndices is not None:
		raise Exception("online chosen indices test FAILED!")
	if not np.array_equal(online.sqDist, finite.sqDist):
		raise Exception("online stream test FAILED!")

def testMismatchSet():
	print("Testing mismatch sets...")
	pool = handPool()
	xStar = np.array([1.0, 1.0])
	r = mismatchSet(pool, xStar, [1.0, -1.0])
	if list(r.indices) != [1] or r.beta != 0.5 or not r.subsetOk:
		raise Exception("mismatchSet hand test FAILED!")
	r = mismatchSet(pool, xStar, xStar)
	if r.indices.size != 0 or r.beta != 0.0:
		raise Exception("mismatchSet empty test FAILED!")
	r = mismatchSet(pool, xStar, -xStar)
	if r.indices.size != 2 or r.beta != pool.alpha or not r.subsetOk:
		raise Exception("mismatchSet flip test FAILED!")
	pool, meas, xStar, xPrev = randomInstance(10, 60, 17, errScale=1.5)
	r = mismatchSet(pool, xStar, xPrev)
	if not r.subsetOk or r.beta != r.indices.size / pool.n:
		raise Exception("mismatchSet subset test FAILED!")
	expectRaises("mismatchSet length", DimensionError, mismatchSet, pool, xStar, xStar[:3])

def testExpectedStepHand():
	print("Testing the exact step expectation on hand instances...")
	pool = handPool()
	xStar = np.array([1.0, 1.0])
	meas = measure(pool, xStar)
	expectClose("expectation hand", expectedStepSqError(pool, meas, xStar, [0.0, 0.0]), 1.0, 1e-15)
	expectClose("expectation at x*", expectedStepSqError(pool, meas, xStar, xStar), 0.0, 0.0)
	pool, meas, xStar, xPrev = randomInstance(7, 50, 18)
	errSq, correct, wrong = expectedStepTerms(pool, xStar, xPrev)
	split = errSq - correct / pool.m + wrong / pool.m
	exact = expectedStepSqError(pool, meas, xStar, xPrev)
	expectClose("expectation split", split, exact, 1e-10 * errSq)

def testExpectationMonteCarlo():
	print("Testing the exact step expectation against single steps...")
	n, m, draws = 8, 40, 100000
	pool = generatePool(n, m, 3)
	xStar = randomSignal(n, 4)
	xPrev = xStar + 0.5 * randomSignal(n, 5)
	meas = measure(pool, xStar)
	xs = closerBranch(xPrev, xStar)
	idx = makeRng(6).integers(0, m, size=draws)
	sample = np.empty(draws)
	for i, k in enumerate(idx):
		e = sikmStep(xPrev, pool.rows[k], pool.sqNorms[k], meas.values[k]) - xs
		sample[i] = e @ e
	se = np.std(sample, ddof=1) / math.sqrt(draws)
	expectClose("expectation oracle", float(np.mean(sample)),
		    expectedStepSqError(pool, meas, xStar, xPrev), 4.0 * se)

def testInstanceBounds():
	print("Testing deterministic per-instance bounds...")
	for seed in range(5):
		pool, meas, xStar, xPrev = randomInstance(10, 80, 100 + seed, errScale=0.2 + 0.3 * seed)
		e = xPrev - closerBranch(xPrev, xStar)
		ratio = expectedStepSqError(pool, meas, xStar, xPrev) / float(e @ e)
		lo, hi = instanceBounds(pool, xStar, xPrev)
		if not (lo - 1e-12 <= ratio <= hi + 1e-12):
			raise Exception(f"instanceBounds test FAILED! ({lo} {ratio} {hi})")

def testGaussianTail():
	print("Testing Gaussian tail helpers...")
	expectClose("Q(0)", qFunction(0.0), 0.5, 0.0)
	expectClose("tauFromMass(0.5)", tauFromMass(0.5), 0.6744897501960817, 1e-10)
	if not tauFromMass(1e-12) < 1e-10:
		raise Exception("tauFromMass small mass test FAILED!")
	for t in np.linspace(0.05, 0.95, 19):
		expectClose("tau identity", 1.0 - 2.0 * qFunction(tauFromMass(t)), t, 1e-12)
	expectRaises("tauFromMass domain", DomainError, tauFromMass, 1.0)
	expectRaises("tauFromMass domain", DomainError, tauFromMass, 0.0)

def testTruncatedSquareMean():
	print("Testing the truncated second moment limit...")
	expectClose("limit t=1", truncatedSquareMeanLimit(1.0), 1.0, 0.0)
	expectClose("limit t=0.5", truncatedSquareMeanLimit(0.5), 0.14266, 1e-4)
	phi = lambda x: x * x * math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
	values = []
	for t in (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0):
		v = truncatedSquareMeanLimit(t)
		if t < 1.0:
			tau = tauFromMass(t)
			closed = 1.0 - 2.0 * tau * math.exp(-0.5 * tau * tau) / (math.sqrt(2.0 * math.pi) * t)
			expectClose("limit closed form", v, closed, 1e-12)
			expectClose("limit quadrature", v, integrate.quad(phi, -tau, tau)[0] / t, 1e-8)
		values.append(v)
	if any(b <= a for a, b in zip(values, values[1:])):
		raise Exception("limit monotonicity test FAILED!")
	expectRaises("limit domain", DomainError, truncatedSquareMeanLimit, 0.0)

def testSolveBeta0():
	print("Testing beta0...")
	sol = solveBeta0(10.0, 0.0)
	if sol.beta0 != 0.0 or sol.status != "zero":
		raise Exception("beta0 zero error test FAILED!")
	sol = solveBeta0(10.0, 0.1)
	if sol.status != "root" or not (0.0 < sol.beta0 < 10.0) or not abs(sol.residual) < 1e-8:
		raise Exception(f"beta0 root test FAILED! ({sol})")
	prev = -1.0
	for rho in np.linspace(0.0, 0.5, 11):
		beta0 = solveBeta0(10.0, rho).beta0
		if beta0 < prev or not (0.0 <= beta0 <= 10.0):
			raise Exception("beta0 monotonicity test FAILED!")
		prev = beta0
	if solveBeta0(10.0, 0.5).status != "saturated":
		raise Exception("beta0 saturation test FAILED!")
	expectClose("beta0 slack", solveBeta0(10.0, 0.1, deltaBeta=0.01).beta0,
		    solveBeta0(10.0, 0.1).beta0 + 0.01, 1e-15)
	expectRaises("beta0 alpha", DomainError, solveBeta0, 0.0, 0.1)

def testContractionConstants():
	print("Testing contraction constants...")
	expectClose("alpha0", alpha0(), 7.464101615137754, 1e-12)
	expectClose("c2 at alpha0", c2SmallError(alpha0()), 0.0, 1e-12)
	expectClose("c2 alpha=12", c2SmallError(12.0), 0.2559830641, 1e-9)
	expectClose("c2 alpha=4", c2SmallError(4.0), -0.5, 1e-15)
	expectClose("c2 asymptotic at 0", c2Asymptotic(12.0, 0.0), c2SmallError(12.0), 0.0)
	expectClose("c2 asymptotic continuity", c2Asymptotic(12.0, 1e-12), c2SmallError(12.0), 1e-4)
	values = [ c2Asymptotic(12.0, b) for b in np.linspace(0.0, 0.2, 21) ]
	if any(b >= a for a, b in zip(values, values[1:])):
		raise Exception("c2 asymptotic monotonicity test FAILED!")
	expectRaises("c2 asymptotic domain", DomainError, c2Asymptotic, 12.0, 12.0)
	expectClose("c2 finite limit", c2Finite(12.0, 0.0, 1e-12, 0.0, 0.0), c2SmallError(12.0), 1e-9)
	if not c2Finite(12.0, 0.1, 0.1, 0.1, 0.1) < c2Finite(12.0, 0.1, 0.01, 0.01, 0.01):
		raise Exception("c2 finite monotonicity test FAILED!")
	expectClose("lower rate", lowerBoundRate(12.0, 256), 0.993513, 1e-6)
	expectClose("lower rate large alpha", lowerBoundRate(1e16, 100), 0.99, 1e-9)
	if not lowerBoundRate(12.0, 256) < 1.0 - c2SmallError(12.0) / 256:
		raise Exception("rate ordering test FAILED!")

def testFailureTerms():
	print("Testing failure probability terms...")
	expectClose("logBinomial", logBinomial(10, 3), math.log(120.0), 1e-12)
	n, alpha = 256, 12.0
	terms = failureProbabilityTerms(alpha, n, 0.1, 1.0, 1.0, 1.0)
	expectClose("first term", terms.exact[0], math.log(2.0 * alpha * n) - n / 12.0, 1e-9)
	for alpha in (6.0, 12.0, 30.0):
		for beta0 in (0.01, 0.5, 2.0):
			for n in (16, 256, 1000000):
				t = failureProbabilityTerms(alpha, n, beta0, 0.5, 1.0, 1.0)
				if not all(math.isfinite(v) for v in t.exact + t.relaxed):
					raise Exception("failure terms overflow test FAILED!")
				if logBinomial(alpha * n, beta0 * n) > beta0 * n * math.log(math.e * alpha / beta0) + 1e-9:
					raise Exception("binomial relaxation test FAILED!")
				if t.exact[1] > t.relaxed[1] + 1e-9:
					raise Exception("relaxed term test FAILED!")
	t = failureProbabilityTerms(12.0, 256, 0.0, 0.5, 1.0, 1.0)
	if t.exact[1] != -math.inf or not math.isfinite(t.logTotal):
		raise Exception("empty mismatch set test FAILED!")
	t = failureProbabilityTerms(12.0, 100000, 0.01, 0.5, 5.0, 5.0)
	if t.successProbability is None or not 0.0 < t.successProbability <= 1.0:
		raise Exception("success probability test FAILED!")
	expectRaises("failure eps1", DomainError, failureProbabilityTerms, 12.0, 256, 0.1, 0.0, 1.0, 1.0)

def testComputeBounds():
	print("Testing bound assembly...")
	b = computeBounds(12.0, 256, 0.0)
	if b.beta0 != 0.0 or b.beta0Status != "zero" or b.warnings:
		raise Exception("computeBounds zero error test FAILED!")
	expectClose("upper rate", b.upperRate, 1.0 - c2SmallError(12.0) / 256, 1e-15)
	if not b.lowerRate < 1.0 or not b.alpha0 < 12.0:
		raise Exception("computeBounds invariant test FAILED!")
	if not computeBounds(4.0, 256, 0.0).warnings:
		raise Exception("computeBounds regime warning test FAILED!")
	b = computeBounds(10.0, 256, 0.5)
	if b.c2Asym is not None or b.beta0 != 10.0 or not b.warnings:
		raise Exception("computeBounds saturation test FAILED!")

def testNormConcentration():
	print("Testing norm concentration check...")
	r = checkNormConcentration(1000, 2000, 0.5, 1)
	if r.violations != 0 or not r.verdict or r.vacuous:
		raise Exception("norm concentration test FAILED!")
	expectClose("mean norm ratio", r.statistic, 1.0, 0.01)
	r = checkNormConcentration(1, 100, 0.99, 2)
	if not r.vacuous or not r.verdict:
		raise Exception("vacuous norm concentration test FAILED!")
	expectRaises("norm eps", DomainError, checkNormConcentration, 10, 10, 1.0, 1)

def testExtremalEigs():
	print("Testing extreme eigenvalue check...")
	hi, lo = checkExtremalEigs(16, 128, 200, 0.5, 3)
	if not hi.verdict or not lo.verdict or hi.violations or lo.violations:
		raise Exception("extreme eigenvalue test FAILED!")
	if not hi.statistic > lo.statistic or not hi.statistic > 1.0:
		raise Exception("eigenvalue ordering test FAILED!")
	hi, lo = checkExtremalEigs(8, 8, 50, 0.5, 4)
	if not lo.vacuous or not lo.verdict:
		raise Exception("square eigenvalue test FAILED!")
	hi, lo = checkExtremalEigs(16, 8, 20, 0.5, 5, wantMin=False)
	if lo is not None or not hi.verdict:
		raise Exception("wide eigenvalue test FAILED!")
	expectRaises("eigenvalue domain", DomainError, checkExtremalEigs, 16, 8, 20, 0.5, 5)

def testOrderStats():
	print("Testing order statistics check...")
	stat = {}
	for t in (0.1, 0.5, 1.0):
		r = checkOrderStats(20000, t, 20, 6)
		if not r.verdict:
			raise Exception(f"order statistics test FAILED! (t={t}, {r.statistic} vs {r.target})")
		stat[t] = r.statistic
	if not stat[0.1] < stat[0.5] < stat[1.0]:
		raise Exception("order statistics monotonicity test FAILED!")
	expectClose("order statistics t=0.5", stat[0.5], 0.1427, 0.01)
	expectRaises("order statistics m", DimensionError, checkOrderStats, 5, 0.5, 10, 1)

def testStepIdentities():
	print("Testing step identity check...")
	r = checkStepIdentities(16, 6.0, 500, 5)
	if r.violations or not r.verdict or not r.halvesConsistent:
		raise Exception("step identity test FAILED!")

def testExpectationOracleCheck():
	print("Testing expectation oracle check...")
	r = checkExpectationOracle(8, 40, 20, 20000, 7)
	if not r.verdict:
		raise Exception(f"expectation oracle test FAILED! ({r.violations} violations)")

def testRateSandwich():
	print("Testing rate sandwich check...")
	r = checkRateSandwich(64, 12.0, 20, 1e-3, 8)
	if not r.verdict:
		raise Exception(f"rate sandwich test FAILED! ({r.violations} violations)")
	if not r.params["lower"] < r.statistic < r.params["upper"]:
		raise Exception("rate sandwich window test FAILED!")

def testExperimentConfig():
	print("Testing experiment configuration...")
	cfg = makeConfig(256, alpha=6.0)
	if cfg.m != 1536 or cfg.T != 40 * 256 or cfg.alpha != 6.0:
		raise Exception("makeConfig test FAILED!")
	cfg = makeConfig(10, alpha=6.0, T=100, traceStride=7)
	if cfg.nrRecords != 16:
		raise Exception("record count test FAILED!")
	expectRaises("config mode", KprUsageError, makeConfig, 10, alpha=6.0, mode="batch")
	expectRaises("config trials", KprUsageError, makeConfig, 10, alpha=6.0, trials=0)
	expectRaises("config init", KprUsageError, makeConfig, 10, alpha=6.0, init="given")
	expectRaises("config alpha", KprUsageError, makeConfig, 10)
	expectRaises("config alpha and m", KprUsageError, makeConfig, 10, alpha=2.0, m=20)

def testFitDecay():
	print("Testing decay fit...")
	iters = np.arange(0, 1001, 10)
	expectClose("fitDecay", fitDecay(iters, np.exp(-0.7 * iters / 50.0), 50), 0.7, 1e-9)
	if fitDecay([0, 1, 2], [1.0, 0.0, 0.0], 10) is not None:
		raise Exception("fitDecay degenerate test FAILED!")

def testAggregate():
	print("Testing trial aggregation...")
	cfg = makeConfig(8, alpha=6.0, T=100, trials=5, init="zero", traceStride=7)
	s = simulate(cfg)
	if s.iters.size != cfg.nrRecords or s.median.size != cfg.nrRecords or s.finalSqDist.size != 5:
		raise Exception("aggregation length test FAILED!")
	if not (np.all(s.p10 <= s.median) and np.all(s.median <= s.p90)):
		raise Exception("aggregation percentile test FAILED!")
	lines = formatCsv(s).splitlines()
	if lines[0] != CSV_HEADER or len(lines) != cfg.nrRecords + 1 or not lines[-1].startswith("100,12.5,"):
		raise Exception("CSV format test FAILED!")

def testLinearConvergence():
	print("Testing linear convergence with data reuse...")
	cfg = makeConfig(128, alpha=8.0, trials=50, masterSeed=1)
	if cfg.T != 40 * 128 or cfg.mode != "finite" or cfg.init != "spectral":
		raise Exception("linear convergence config test FAILED!")
	s = simulate(cfg)
	if not s.finalMedian <= 1e-6 * s.initialMedian:
		raise Exception(f"linear convergence test FAILED! ({s.initialMedian} -> {s.finalMedian})")
	if s.fittedC is None or not s.fittedC > 0.0:
		raise Exception(f"decay constant test FAILED! ({s.fittedC})")

def testGivenInit():
	print("Testing given initial estimates...")
	x = randomSignal(16, 9)
	with tempfile.TemporaryDirectory() as d:
		path = os.path.join(d, "x.bin")
		saveSignal(path, x)
		for mode in MODES:
			s = simulate(makeConfig(16, alpha=6.0, T=300, trials=3, mode=mode,
						init="given", initFile=path, signalFile=path))
			if not np.max(s.p90) <= 1e-25:
				raise Exception(f"{mode} given init test FAILED!")

def testFiniteSlowerThanOnline():
	print("Testing finite versus online convergence...")
	ordered = 0
	for seed in (1, 2, 3):
		results = sweep(makeConfig(256, alpha=6.0, trials=20, masterSeed=seed), [6.0])
		final = { mode: s.finalMedian for alpha, mode, s in results }
		if final["finite"] >= final["online"]:
			ordered += 1
	if ordered < 2:
		raise Exception(f"finite/online ordering test FAILED! ({ordered}/3)")

def testSweepOrdering():
	print("Testing alpha sweep ordering...")
	results = sweep(makeConfig(64, alpha=6.0, trials=16, masterSeed=2), SWEEP_ALPHAS,
			modes=("finite", ))
	pairs, decreasing = sweepOrdering(results)
	if [ a for a, v in pairs ] != list(SWEEP_ALPHAS) or not decreasing:
		raise Exception(f"sweep ordering test FAILED! ({pairs})")
	lines = formatSweepCsv(results).splitlines()
	if lines[0] != "alpha,mode," + CSV_HEADER or not lines[1].startswith("6.0,finite,0,0.0,"):
		raise Exception("sweep CSV format test FAILED!")

def testJobsDeterminism():
	print("Testing parallel trial determinism...")
	cfg = makeConfig(12, alpha=6.0, T=240, trials=6, masterSeed=3)
	a = formatCsv(simulate(cfg))
	b = formatCsv(simulate(makeConfig(12, alpha=6.0, T=240, trials=6, masterSeed=3, jobs=3)))
	if a != b:
		raise Exception("jobs determinism test FAILED!")

def runCli(*argv):
	out, err = io.StringIO(), io.StringIO()
	with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
		rc = main(list(argv))
	return rc, out.getvalue(), err.getvalue()

def testCliBounds():
	print("Testing the bounds command...")
	rc, out, err = runCli("bounds", "--alpha", "12", "--n", "256", "--err-ratio", "0")
	obj = json.loads(out)
	if rc != 0 or list(obj.keys()) != ["alpha", "n", "err_ratio", "beta0", "c2_asym",
					    "c2_small_err", "alpha0", "upper_rate",
					    "lower_rate", "log_failure_terms"]:
		raise Exception("bounds JSON schema test FAILED!")
	expectClose("bounds c2_small_err", obj["c2_small_err"], 0.2560, 1e-3)
	expectClose("bounds alpha0", obj["alpha0"], 7.4641, 1e-3)
	expectClose("bounds lower_rate", obj["lower_rate"], 0.993513, 1e-5)
	if obj["beta0"] != 0.0 or obj["log_failure_terms"][1] is not None or "WARNING" in err:
		raise Exception("bounds zero error test FAILED!")
	rc, out, err = runCli("bounds", "--alpha", "4")
	if rc != 0 or not json.loads(out)["c2_small_err"] < 0.0 or "WARNING" not in err:
		raise Exception("bounds regime warning test FAILED!")

def testCliUsageErrors():
	print("Testing command line usage errors...")
	for argv in ((),
		     ("verify", "--suite", "nope"),
		     ("bounds", ),
		     ("bounds", "--alpha", "-1"),
		     ("bounds", "--alpha", "12", "--n", "x"),
		     ("simulate", "--n", "0", "--out", "x.csv")):
		rc, out, err = runCli(*argv)
		if rc != EXIT_USAGE or "ERROR" not in err:
			raise Exception(f"usage error test FAILED! ({argv} -> {rc})")

def testCliSimulate():
	print("Testing the simulate command...")
	with tempfile.TemporaryDirectory() as d:
		paths = [ os.path.join(d, f"{i}.csv") for i in range(5) ]
		common = ("simulate", "--n", "16", "--alpha", "6", "--trials", "4", "-T", "320")
		for path, extra in zip(paths[:3], ((), (), ("--jobs", "2"))):
			rc, out, err = runCli("--seed", "1", "--quiet", *common, "--out", path, *extra)
			if rc != 0:
				raise Exception(f"simulate test FAILED! ({err})")
		old = os.environ.get("KPR_SEED")
		os.environ["KPR_SEED"] = "1"
		try:
			rc, out, err = runCli("--quiet", *common, "--out", paths[3])
		finally:
			if old is None:
				del os.environ["KPR_SEED"]
			else:
				os.environ["KPR_SEED"] = old
		rc, out, err = runCli(*common, "--seed", "1", "--quiet", "--out", paths[4])
		if rc != 0:
			raise Exception(f"simulate trailing seed test FAILED! ({err})")
		data = []
		for path in paths:
			with open(path, "rb") as f:
				data.append(f.read())
		if any(x != data[0] for x in data):
			raise Exception("simulate determinism test FAILED!")
		if not data[0].startswith(CSV_HEADER.encode("ascii") + b"\n"):
			raise Exception("simulate CSV header test FAILED!")
		with open(paths[0] + ".meta.json", "r") as f:
			meta = json.load(f)
		if meta["config"]["m"] != 96 or meta["config"]["masterSeed"] != 1:
			raise Exception("simulate meta test FAILED!")
		rc, out, err = runCli(*common, "--out", os.path.join(d, "missing", "x.csv"))
		if rc != EXIT_IO:
			raise Exception("simulate I/O error test FAILED!")

def testCliVerify():
	print("Testing the verify command...")
	rc, out, err = runCli("--seed", "5", "verify", "--suite", "step", "--trials", "200")
	if rc != 0 or "PASS" not in out or "FAIL" in out:
		raise Exception("verify step test FAILED!")
	trailing = runCli("verify", "--suite", "step", "--trials", "200", "--seed", "5")
	if trailing != (rc, out, err):
		raise Exception("verify trailing seed test FAILED!")
	rc, out, err = runCli("verify", "--suite", "lemma4", "--m", "20000", "--t", "0.5", "--trials", "20")
	if rc != 0 or len(out.splitlines()) != 1:
		raise Exception("verify lemma4 test FAILED!")

NUMERIC_TESTS = (
	testSign,
	testSeeds,
	testTextHelpers,
	testPool,
	testPhaseDistance,
	testSignalFiles,
	testSpectralInit,
	testSpectralInvariance,
	testSpectralEigh,
	testSpectralCorrelation,
	testSikmStep,
	testRunRecording,
	testRunSignInvariance,
	testRunAudit,
	testFiniteUniform,
	testForcedOrder,
	testOnlineStream,
	testMismatchSet,
	testExpectedStepHand,
	testExpectationMonteCarlo,
	testInstanceBounds,
	testGaussianTail,
	testTruncatedSquareMean,
	testSolveBeta0,
	testContractionConstants,
	testFailureTerms,
	testComputeBounds,
	testNormConcentration,
	testExtremalEigs,
	testOrderStats,
	testStepIdentities,
	testExpectationOracleCheck,
	testRateSandwich,
	testExperimentConfig,
	testFitDecay,
	testAggregate,
	testLinearConvergence,
	testGivenInit,
	testFiniteSlowerThanOnline,
	testSweepOrdering,
)

# These start worker pools themselves.
MAIN_PROCESS_TESTS = (
	testJobsDeterminism,
	testCliBounds,
	testCliUsageErrors,
	testCliSimulate,
	testCliVerify,
)

def callTest(test):
	test()

if __name__ == "__main__":
	print("*** Running numeric tests ***")
	with multiprocessing.Pool() as p:
		p.map(callTest, NUMERIC_TESTS, chunksize=1)
	print("*** Running command line tests ***")
	for test in MAIN_PROCESS_TESTS:
		test()
	print("*** All tests passed ***")
