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

from dataclasses import dataclass, field
from libkpr.kaczmarz import AUDIT_TOLERANCE, sikmStepBatch
from libkpr.model import (DomainError, DimensionError, SensingPool,
			  closerBranch, measure, randomSignal)
from libkpr.theory import (c2Asymptotic, expectedStepSqError,
			   expectedStepTerms, instanceBounds,
			   lowerBoundRate, mismatchSet, solveBeta0,
			   stepSqErrors, truncatedSquareMeanLimit)
from libkpr.util import deriveSeed, makeRng

import math
import numpy as np

__all__ = [
	"LemmaReport",
	"checkNormConcentration",
	"checkExtremalEigs",
	"checkOrderStats",
	"checkStepIdentities",
	"checkExpectationOracle",
	"checkRateSandwich",
]

@dataclass(frozen=True)
class LemmaReport:
	name: str
	trials: int
	violations: int
	logBound: float		# ln of the theoretical failure probability, or None
	verdict: bool
	params: dict = field(default_factory=dict)
	statistic: float = None
	target: float = None
	tolerance: float = None
	halvesConsistent: bool = True

	@property
	def empiricalRate(self):
		return self.violations / self.trials if self.trials else 0.0

	@property
	def passed(self):
		return self.verdict

	@property
	def vacuous(self):
		return self.logBound is not None and self.logBound >= 0.0

def _mcSlack(rate, trials):
	return 3.0 * math.sqrt(rate * (1.0 - rate) / trials)

def _boundVerdict(violations, trials, logBound):
	if logBound >= 0.0:
		return True
	rate = violations / trials
	return rate <= math.exp(logBound) + _mcSlack(rate, trials)

def _halvesConsistent(flags):
	"""The violation rates of the two halves of a trial sequence agree
	within three standard deviations.
	"""
	flags = np.asarray(flags, dtype=bool)
	h = flags.size // 2
	if h == 0:
		return True
	a, b = flags[:h], flags[h:]
	ra, rb = float(np.mean(a)), float(np.mean(b))
	r = float(np.mean(flags))
	sigma = math.sqrt(r * (1.0 - r) * (1.0 / a.size + 1.0 / b.size))
	return abs(ra - rb) <= 3.0 * sigma

def _boundReport(name, flags, logBound, params, statistic=None):
	flags = np.asarray(flags, dtype=bool)
	trials = flags.size
	violations = int(np.count_nonzero(flags))
	return LemmaReport(name=name,
			   trials=trials,
			   violations=violations,
			   logBound=logBound,
			   verdict=_boundVerdict(violations, trials, logBound),
			   params=params,
			   statistic=statistic,
			   halvesConsistent=_halvesConsistent(flags))

def _checkTrials(trials):
	if trials < 1:
		raise DomainError(f"Invalid trial count {trials}.")

NORM_CHUNK = 1 << 22

def checkNormConcentration(n, trials, eps, seed):
	"""|a|^2/n concentrates around 1 for a ~ N(0, I_n):
	P(| |a|^2/n - 1 | >= eps) <= 2 exp(-n (eps^2/4 - eps^3/6)).
	"""
	if n < 1:
		raise DimensionError(f"checkNormConcentration: invalid n={n}.")
	_checkTrials(trials)
	if not (0.0 < eps < 1.0):
		raise DomainError(f"checkNormConcentration: eps={eps} is outside (0, 1).")
	chunk = max(1, NORM_CHUNK // n)
	flags = []
	means = []
	for i, start in enumerate(range(0, trials, chunk)):
		rows = makeRng(deriveSeed(seed, i)).standard_normal((min(chunk, trials - start), n))
		ratio = np.einsum("ij,ij->i", rows, rows) / n
		flags.append(np.abs(ratio - 1.0) >= eps)
		means.append(ratio)
	logBound = math.log(2.0) - n * (eps ** 2 / 4.0 - eps ** 3 / 6.0)
	return _boundReport("lemma2-norm", np.concatenate(flags), logBound,
			    params={"n": n, "eps": eps},
			    statistic=float(np.mean(np.concatenate(means))))

def checkExtremalEigs(n, p, trials, eps, seed, wantMin=True):
	"""Extreme eigenvalues of Sigma = (1/p) sum a a^T over p Gaussian
	vectors, for one fixed index set per trial:
	P(lmax > (1 + sqrt(n/p) + eps)^2) <= exp(-p eps^2/2)
	P(lmin < (1 - sqrt(n/p) - eps)^2) <= exp(-p eps^2/2)
	Returns the (max, min) report pair. The min report is None if
	wantMin is false.
	"""
	if n < 1 or p < 1:
		raise DimensionError(f"checkExtremalEigs: invalid n={n}, p={p}.")
	_checkTrials(trials)
	if not eps > 0.0:
		raise DomainError(f"checkExtremalEigs: eps={eps} must be positive.")
	if wantMin and p < n:
		raise DomainError(f"checkExtremalEigs: the minimum eigenvalue check "
				  f"needs p >= n (p={p}, n={n}).")
	r = math.sqrt(n / p)
	hiEdge = (1.0 + r + eps) ** 2
	loBase = 1.0 - r - eps
	loEdge = loBase ** 2 if loBase > 0.0 else 0.0
	lamMax = np.empty(trials)
	lamMin = np.empty(trials)
	for trial in range(trials):
		rows = makeRng(deriveSeed(seed, trial)).standard_normal((p, n))
		s = np.linalg.svd(rows, compute_uv=False)
		lamMax[trial] = s[0] ** 2 / p
		lamMin[trial] = s[-1] ** 2 / p if p >= n else 0.0
	logBound = -p * eps ** 2 / 2.0
	params = {"n": n, "p": p, "eps": eps}
	maxReport = _boundReport("lemma3-lmax", lamMax > hiEdge, logBound,
				 params=params,
				 statistic=float(np.mean(lamMax)))
	if not wantMin:
		return maxReport, None
	minReport = _boundReport("lemma3-lmin", lamMin < loEdge,
				 logBound if loBase > 0.0 else 0.0,
				 params=params,
				 statistic=float(np.mean(lamMin)))
	return maxReport, minReport

ORDER_BAND = 3.0

def checkOrderStats(m, t, trials, seed):
	"""Mean of the smallest floor(t m) of m squared standard Gaussians
	against its large-m limit.
	Passes if |empirical - limit| <= 3/sqrt(m) + 3/sqrt(trials).
	"""
	if m < 10:
		raise DimensionError(f"checkOrderStats: m={m} must be at least 10.")
	_checkTrials(trials)
	if not (0.0 < t <= 1.0):
		raise DomainError(f"checkOrderStats: t={t} is outside (0, 1].")
	k = int(math.floor(t * m))
	if k < 1:
		raise DomainError(f"checkOrderStats: t={t} selects no samples of m={m}.")
	values = np.empty(trials)
	for trial in range(trials):
		sq = makeRng(deriveSeed(seed, trial)).standard_normal(m) ** 2
		if k < m:
			sq = np.partition(sq, k - 1)[:k]
		values[trial] = np.mean(sq)
	empirical = float(np.mean(values))
	target = truncatedSquareMeanLimit(t)
	tolerance = ORDER_BAND / math.sqrt(m) + ORDER_BAND / math.sqrt(trials)
	ok = abs(empirical - target) <= tolerance
	return LemmaReport(name="lemma4-order",
			   trials=trials,
			   violations=0 if ok else 1,
			   logBound=None,
			   verdict=ok,
			   params={"m": m, "t": t},
			   statistic=empirical,
			   target=target,
			   tolerance=tolerance)

def _randomInstance(n, m, seed, xPrev=None):
	rng = makeRng(seed)
	pool = SensingPool.fromRows(rng.standard_normal((m, n)))
	xStar = randomSignal(n, deriveSeed(seed, 0))
	if xPrev is None:
		xPrev = xStar + rng.uniform(0.01, 2.0) * randomSignal(n, deriveSeed(seed, 1))
	return pool, measure(pool, xStar), xStar, np.asarray(xPrev, dtype=np.float64)

def _stepIdentityFailures(pool, meas, xStar, xPrev):
	"""Number of failed identities for one instance (0 to 4)."""
	xs = closerBranch(xPrev, xStar)
	outcomes = sikmStepBatch(pool, meas, xPrev) - xs
	actual = np.einsum("ij,ij->i", outcomes, outcomes)
	predicted = stepSqErrors(pool, meas, xStar, xPrev)
	e = xPrev - xs
	errSq = float(e @ e)
	floor = 1e-10 * float(xs @ xs)
	scale = np.maximum(predicted, errSq) + floor
	failures = 0
	# Squared error recursion, per index.
	if np.any(np.abs(actual - predicted) > AUDIT_TOLERANCE * scale):
		failures += 1
	# Sign flips need a perturbation at least as large as the signal.
	if not mismatchSet(pool, xs, xPrev).subsetOk:
		failures += 1
	expected = expectedStepSqError(pool, meas, xStar, xPrev)
	if abs(expected - float(np.mean(actual))) > AUDIT_TOLERANCE * (float(np.max(scale))):
		failures += 1
	errSqT, correct, wrong = expectedStepTerms(pool, xStar, xPrev)
	split = errSqT - correct / pool.m + wrong / pool.m
	if abs(split - expected) > 1e-10 * (errSq + abs(expected)) + floor:
		failures += 1
	return failures

def checkStepIdentities(n, alpha, trials, seed):
	"""Exact per-step identities on random instances: the squared
	error recursion for every index, the mismatch subset condition,
	the exact expectation against the mean of the per-index outcomes
	and the correct/mismatch split of that expectation.
	Trial 0 starts at x*, trial 1 at -x*.
	"""
	if n < 2:
		raise DimensionError(f"checkStepIdentities: n={n} must be at least 2.")
	_checkTrials(trials)
	if not alpha > 0.0:
		raise DomainError(f"checkStepIdentities: alpha={alpha} must be positive.")
	m = max(1, int(round(alpha * n)))
	flags = np.zeros(trials, dtype=bool)
	for trial in range(trials):
		trialSeed = deriveSeed(seed, trial)
		pool, meas, xStar, xPrev = _randomInstance(n, m, trialSeed)
		if trial == 0:
			xPrev = np.array(xStar)
		elif trial == 1:
			xPrev = -np.array(xStar)
		flags[trial] = _stepIdentityFailures(pool, meas, xStar, xPrev) > 0
	violations = int(np.count_nonzero(flags))
	return LemmaReport(name="step-identities",
			   trials=trials,
			   violations=violations,
			   logBound=None,
			   verdict=violations == 0,
			   params={"n": n, "m": m, "alpha": alpha},
			   tolerance=AUDIT_TOLERANCE,
			   halvesConsistent=_halvesConsistent(flags))

ORACLE_SIGMAS = 4.0

def checkExpectationOracle(n, m, instances, draws, seed):
	"""The exact index expectation against the empirical mean of
	'draws' uniformly drawn single steps, per random instance.
	A deviation above 4 standard errors is a violation; at most one
	in twenty instances may violate.
	"""
	if n < 1 or m < 1:
		raise DimensionError(f"checkExpectationOracle: invalid n={n}, m={m}.")
	_checkTrials(instances)
	if draws < 2:
		raise DomainError(f"checkExpectationOracle: need at least 2 draws, got {draws}.")
	flags = np.zeros(instances, dtype=bool)
	worst = 0.0
	for inst in range(instances):
		instSeed = deriveSeed(seed, inst)
		pool, meas, xStar, xPrev = _randomInstance(n, m, instSeed)
		xs = closerBranch(xPrev, xStar)
		outcomes = sikmStepBatch(pool, meas, xPrev) - xs
		perIndex = np.einsum("ij,ij->i", outcomes, outcomes)
		idx = makeRng(deriveSeed(instSeed, 2)).integers(0, pool.m, size=draws)
		sample = perIndex[idx]
		mean = float(np.mean(sample))
		se = float(np.std(sample, ddof=1)) / math.sqrt(draws)
		expected = expectedStepSqError(pool, meas, xStar, xPrev)
		dev = abs(mean - expected)
		if se > 0.0:
			worst = max(worst, dev / se)
			flags[inst] = dev > ORACLE_SIGMAS * se
		else:
			flags[inst] = dev > AUDIT_TOLERANCE * (abs(expected) + 1e-10)
	violations = int(np.count_nonzero(flags))
	return LemmaReport(name="expectation-oracle",
			   trials=instances,
			   violations=violations,
			   logBound=None,
			   verdict=violations <= instances // 20,
			   params={"n": n, "m": m, "draws": draws},
			   statistic=worst,
			   tolerance=ORACLE_SIGMAS,
			   halvesConsistent=_halvesConsistent(flags))

def checkRateSandwich(n, alpha, pools, relErr, seed):
	"""The exact one-step ratio E|e_t|^2/|e|^2 at x = x* + relErr |x*| u
	against the asymptotic window
	[lowerBoundRate - 2/n, 1 - c2Asymptotic(alpha, beta0)/(2n)]
	and against the deterministic per-instance bounds.
	At most one in twenty pools may leave the window.
	"""
	if n < 1:
		raise DimensionError(f"checkRateSandwich: invalid n={n}.")
	_checkTrials(pools)
	if not relErr > 0.0:
		raise DomainError(f"checkRateSandwich: relErr={relErr} must be positive.")
	m = int(round(alpha * n))
	if m < 1:
		raise DimensionError(f"checkRateSandwich: alpha={alpha} gives no measurements.")
	sol = solveBeta0(m / n, relErr)
	if sol.beta0 >= m / n:
		raise DomainError(f"checkRateSandwich: relErr={relErr} admits no contraction bound.")
	upper = 1.0 - c2Asymptotic(m / n, sol.beta0) / (2.0 * n)
	lower = lowerBoundRate(m / n, n) - 2.0 / n
	flags = np.zeros(pools, dtype=bool)
	ratios = np.empty(pools)
	for i in range(pools):
		poolSeed = deriveSeed(seed, i)
		xStar = randomSignal(n, deriveSeed(poolSeed, 0))
		u = randomSignal(n, deriveSeed(poolSeed, 1))
		xPrev = xStar + relErr * np.linalg.norm(xStar) * u
		pool, meas, xStar, xPrev = _randomInstance(n, m, poolSeed, xPrev=xPrev)
		e = xPrev - closerBranch(xPrev, xStar)
		ratio = expectedStepSqError(pool, meas, xStar, xPrev) / float(e @ e)
		instLo, instHi = instanceBounds(pool, xStar, xPrev)
		ratios[i] = ratio
		flags[i] = (not (lower <= ratio <= upper) or
			    ratio < instLo - AUDIT_TOLERANCE or
			    ratio > instHi + AUDIT_TOLERANCE)
	violations = int(np.count_nonzero(flags))
	return LemmaReport(name="rate-sandwich",
			   trials=pools,
			   violations=violations,
			   logBound=None,
			   verdict=violations <= pools // 20,
			   params={"n": n, "m": m, "alpha": m / n,
				   "relErr": relErr, "beta0": sol.beta0,
				   "lower": lower, "upper": upper},
			   statistic=float(np.median(ratios)),
			   halvesConsistent=_halvesConsistent(flags))
