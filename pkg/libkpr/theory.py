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
from libkpr.model import DimensionError, DomainError, asSignal, closerBranch
from libkpr.util import sgn

import math
import numpy as np
from scipy import optimize, special

__all__ = [
	"MismatchReport",
	"Beta0Solution",
	"FailureTerms",
	"TheoryBounds",
	"mismatchSet",
	"stepSqErrors",
	"expectedStepSqError",
	"expectedStepTerms",
	"instanceBounds",
	"qFunction",
	"tauFromMass",
	"truncatedSquareMeanLimit",
	"solveBeta0",
	"c2Asymptotic",
	"c2SmallError",
	"c2Finite",
	"alpha0",
	"lowerBoundRate",
	"logBinomial",
	"failureProbabilityTerms",
	"computeBounds",
]

SQRT2 = math.sqrt(2.0)

@dataclass(frozen=True, eq=False)
class MismatchReport:
	indices: np.ndarray	# the mismatch set S (0-based pool indices)
	beta: float		# |S| / n
	subsetOk: bool		# S is inside {k : |a_k^T x*| <= |a_k^T e|}
	ties: int		# indices with |a_k^T x*| == |a_k^T e| exactly

def _checkInstance(pool, xStar, x):
	xStar = asSignal(xStar)
	x = asSignal(x)
	if xStar.shape != (pool.n, ) or x.shape != (pool.n, ):
		raise DimensionError(f"Signal length does not match the pool dimension {pool.n}.")
	return xStar, x

def mismatchSet(pool, xStar, x):
	"""Indices whose sign estimate sgn(a_k^T x) is wrong, with sgn(0) = +1.

	The reference sign is taken from xStar as given. Pass
	closerBranch(x, xStar) to measure against the nearer branch.
	"""
	xStar, x = _checkInstance(pool, xStar, x)
	ax = pool.rows @ xStar
	wrong = sgn(ax) != sgn(pool.rows @ x)
	indices = np.flatnonzero(wrong)
	ae = np.abs(pool.rows[indices] @ (x - xStar))
	axS = np.abs(ax[indices])
	return MismatchReport(indices=indices,
			      beta=indices.size / pool.n,
			      subsetOk=bool(np.all(axS <= ae)),
			      ties=int(np.count_nonzero(axS == ae)))

def _stepParts(pool, xStar, xPrev):
	xs = xStar
	e = xPrev - xs
	ax = pool.rows @ xs
	b = sgn(ax) * sgn(pool.rows @ xPrev) - 1.0
	loss = (pool.rows @ e) ** 2 / pool.sqNorms
	gain = ax ** 2 * b ** 2 / pool.sqNorms
	return float(e @ e), loss, gain, b != 0.0

def stepSqErrors(pool, meas, xStar, xPrev):
	"""Per-index |e_t|^2 predicted by the squared error recursion
	|e|^2 - (a_k^T e)^2/|a_k|^2 + (a_k^T x*)^2 b_k^2/|a_k|^2.
	"""
	xStar, xPrev = _checkInstance(pool, xStar, xPrev)
	if meas.m != pool.m:
		raise DimensionError("Measurement count does not match the pool.")
	errSq, loss, gain, _ = _stepParts(pool, closerBranch(xPrev, xStar), xPrev)
	return errSq - loss + gain

def expectedStepSqError(pool, meas, xStar, xPrev):
	"""Exact expectation of |e_t|^2 over the uniformly drawn index,
	with the pool and xPrev held fixed. e is measured against the
	branch of x* closer to xPrev.

	Enumerates all m indices; no sampling and no independence
	assumption between xPrev and the pool.
	"""
	return float(np.mean(stepSqErrors(pool, meas, xStar, xPrev)))

def expectedStepTerms(pool, xStar, xPrev):
	"""Split of the exact expectation into
	(|e|^2, sum over correct signs, sum over the mismatch set), such that
	E|e_t|^2 = |e|^2 - correct/m + wrong/m with
	correct = sum_{k not in S} (a_k^T e)^2/|a_k|^2 and
	wrong = sum_{k in S} (4 (a_k^T x*)^2 - (a_k^T e)^2)/|a_k|^2.
	"""
	xStar, xPrev = _checkInstance(pool, xStar, xPrev)
	xs = closerBranch(xPrev, xStar)
	errSq, loss, _, inS = _stepParts(pool, xs, xPrev)
	ax2 = (pool.rows[inS] @ xs) ** 2 / pool.sqNorms[inS]
	correct = float(np.sum(loss[~inS]))
	wrong = float(np.sum(4.0 * ax2 - loss[inS]))
	return errSq, correct, wrong

def _lamMax(rows):
	if rows.shape[0] == 0:
		return 0.0
	s = np.linalg.svd(rows, compute_uv=False)
	return float(s[0] ** 2 / rows.shape[0])

def _lamMin(rows):
	p, n = rows.shape
	if p < n:
		return 0.0
	s = np.linalg.svd(rows, compute_uv=False)
	return float(s[-1] ** 2 / p)

def instanceBounds(pool, xStar, xPrev):
	"""Deterministic bounds on E|e_t|^2 / |e_{t-1}|^2 for one instance.

	upper = 1 - ((alpha-beta)/(zmax^2 alpha)) lmin(Sigma_Sbar)
		  + (3 beta/(zmin^2 alpha)) lmax(Sigma_S)
	lower = 1 - lmax(Sigma)/zmin^2
	"""
	xStar, xPrev = _checkInstance(pool, xStar, xPrev)
	xs = closerBranch(xPrev, xStar)
	inS = sgn(pool.rows @ xs) != sgn(pool.rows @ xPrev)
	zMaxSq = float(np.max(pool.sqNorms))
	zMinSq = float(np.min(pool.sqNorms))
	m = pool.m
	nrS = int(np.count_nonzero(inS))
	upper = (1.0
		 - ((m - nrS) / m) * _lamMin(pool.rows[~inS]) / zMaxSq
		 + (3.0 * nrS / m) * _lamMax(pool.rows[inS]) / zMinSq)
	lower = 1.0 - _lamMax(pool.rows) / zMinSq
	return lower, upper

def qFunction(tau):
	"""Standard Gaussian tail probability Q(tau) = P(N(0,1) > tau).
	"""
	return float(0.5 * special.erfc(tau / SQRT2))

def tauFromMass(t):
	"""The tau >= 0 with 1 - 2 Q(tau) = t, for 0 < t < 1.
	"""
	if not (0.0 < t < 1.0):
		raise DomainError(f"tauFromMass: t={t} is outside (0, 1).")
	tau = SQRT2 * float(special.erfinv(t))
	# Newton polish on 1 - 2Q(tau) - t = erf(tau/sqrt2) - t.
	for _ in range(3):
		r = float(special.erf(tau / SQRT2)) - t
		if abs(r) < 1e-15:
			break
		tau -= r / (2.0 * math.exp(-0.5 * tau * tau) / math.sqrt(2.0 * math.pi))
	return tau

def truncatedSquareMeanLimit(t):
	"""Limit of the mean of the smallest fraction t of m squared standard
	Gaussians as m grows:
	1 - (1/t) (2 tau/sqrt(2 pi)) exp(-tau^2/2) = (1/t) int_{-tau}^{tau} x^2 phi(x) dx
	"""
	if not (0.0 < t <= 1.0):
		raise DomainError(f"truncatedSquareMeanLimit: t={t} is outside (0, 1].")
	if t == 1.0:
		return 1.0
	tau = tauFromMass(t)
	# int_{-tau}^{tau} x^2 phi = P(chi2_3 <= tau^2), free of cancellation.
	return float(special.gammainc(1.5, 0.5 * tau * tau)) / t

@dataclass(frozen=True)
class Beta0Solution:
	beta0: float
	residual: float
	status: str	# "root", "zero", "floor" or "saturated"

	def __float__(self):
		return self.beta0

BETA0_MAXITER = 200
BETA0_EDGE = 1e-12

def _beta0Gap(beta, alpha, errRatio):
	lhs = truncatedSquareMeanLimit(beta / alpha)
	rhs = (1.0 + 1.0 / math.sqrt(beta)
	       + math.sqrt(2.0 * math.log(math.e * alpha / beta))) ** 2 * errRatio ** 2
	return lhs - rhs

def solveBeta0(alpha, errRatio, deltaBeta=0.0):
	"""Asymptotic upper bound beta0 on the mismatch ratio beta.

	Root of LHS(beta) = RHS(beta) on (0, alpha), where
	LHS = 1 - (alpha/beta) (2 tau/sqrt(2 pi)) exp(-tau^2/2), 1 - 2Q(tau) = beta/alpha
	RHS = (1 + 1/sqrt(beta) + sqrt(2 ln(e alpha/beta)))^2 rho^2.
	LHS increases and RHS decreases in beta, so bisection applies.
	deltaBeta is an optional finite-n slack added to the root.
	"""
	if not alpha > 0.0:
		raise DomainError(f"solveBeta0: alpha={alpha} must be positive.")
	if not errRatio >= 0.0:
		raise DomainError(f"solveBeta0: error ratio {errRatio} must be non-negative.")
	if deltaBeta < 0.0:
		raise DomainError("solveBeta0: deltaBeta must be non-negative.")

	def result(beta0, residual, status):
		return Beta0Solution(beta0=min(beta0 + deltaBeta, alpha),
				     residual=residual,
				     status=status)

	if errRatio == 0.0:
		return result(0.0, 0.0, "zero")
	lo = BETA0_EDGE * alpha
	hi = alpha * (1.0 - BETA0_EDGE)
	gapLo = _beta0Gap(lo, alpha, errRatio)
	gapHi = _beta0Gap(hi, alpha, errRatio)
	if gapLo >= 0.0:
		return result(0.0, gapLo, "floor")
	if gapHi <= 0.0:
		return result(alpha, gapHi, "saturated")
	beta0, info = optimize.bisect(_beta0Gap, lo, hi,
				      args=(alpha, errRatio),
				      xtol=1e-300, rtol=4.0 * np.finfo(float).eps,
				      maxiter=BETA0_MAXITER,
				      full_output=True, disp=False)
	return result(beta0, _beta0Gap(beta0, alpha, errRatio), "root")

def _logRatio(alpha, beta0):
	return math.log(math.e * alpha / beta0)

def c2SmallError(alpha):
	"""Contraction constant for a vanishing mismatch ratio:
	-3/alpha + (1 - 1/sqrt(alpha))^2
	"""
	if not alpha > 0.0:
		raise DomainError(f"c2SmallError: alpha={alpha} must be positive.")
	return -3.0 / alpha + (1.0 - 1.0 / math.sqrt(alpha)) ** 2

def alpha0():
	"""Positive root of c2SmallError: (1 + sqrt(3))^2 = 4 + 2 sqrt(3).
	"""
	return 4.0 + 2.0 * math.sqrt(3.0)

def _checkBeta0(alpha, beta0):
	if not alpha > 0.0:
		raise DomainError(f"alpha={alpha} must be positive.")
	if not (0.0 <= beta0 < alpha):
		raise DomainError(f"beta0={beta0} must lie in [0, alpha={alpha}).")

def c2Asymptotic(alpha, beta0):
	"""n -> infinity contraction constant for mismatch ratio bound beta0.
	"""
	_checkBeta0(alpha, beta0)
	if beta0 == 0.0:
		return c2SmallError(alpha)
	rest = alpha - beta0
	lr = _logRatio(alpha, beta0)
	good = (rest / alpha) * (1.0 - 1.0 / math.sqrt(rest)
				 - math.sqrt(2.0 * beta0 / rest * lr)) ** 2
	# (3 beta0/alpha)(1 + 1/sqrt(beta0) + sqrt(2 lr))^2 without the 1/sqrt(beta0) blowup.
	bad = (3.0 / alpha) * (math.sqrt(beta0) + 1.0 + math.sqrt(2.0 * beta0 * lr)) ** 2
	return good - bad

def c2Finite(alpha, beta0, eps1, eps2, eps3):
	"""Finite-n contraction constant (before letting the epsilons vanish):
	(1 - b/a) (1/(1+e1)) (1 - 1/sqrt(a-b) - e3)^2
	  - (3 b/a) (1/(1-e1)) (1 + 1/sqrt(b) + e2)^2
	"""
	_checkBeta0(alpha, beta0)
	if not (0.0 < eps1 < 1.0):
		raise DomainError(f"c2Finite: eps1={eps1} must be in (0, 1).")
	if eps2 < 0.0 or eps3 < 0.0:
		raise DomainError("c2Finite: eps2 and eps3 must be non-negative.")
	rest = alpha - beta0
	good = (rest / alpha) / (1.0 + eps1) * (1.0 - 1.0 / math.sqrt(rest) - eps3) ** 2
	bad = (3.0 / alpha) / (1.0 - eps1) * (1.0 + math.sqrt(beta0) * (1.0 + eps2)) ** 2
	return good - bad

def lowerBoundRate(alpha, n):
	"""Asymptotic floor of E|e_t|^2 / |e_{t-1}|^2: 1 - (1 + 1/sqrt(alpha))^2 / n
	"""
	if not alpha > 0.0:
		raise DomainError(f"lowerBoundRate: alpha={alpha} must be positive.")
	if n < 1:
		raise DomainError(f"lowerBoundRate: n={n} must be positive.")
	return 1.0 - (1.0 + 1.0 / math.sqrt(alpha)) ** 2 / n

def logBinomial(m, k):
	"""ln C(m, k) for real 0 <= k <= m via log-gamma.
	"""
	return float(special.gammaln(m + 1.0) - special.gammaln(k + 1.0)
		     - special.gammaln(m - k + 1.0))

@dataclass(frozen=True)
class FailureTerms:
	exact: tuple		# ln of the three failure terms, log-gamma binomials
	relaxed: tuple		# same, binomials bounded by (e alpha/beta0)^(beta0 n)
	logTotal: float		# ln of the sum of the exact terms
	logTotalRelaxed: float

	@property
	def successProbability(self):
		"""Lower bound on the success probability, or None if vacuous.
		"""
		if not self.logTotal < 0.0:
			return None
		return -math.expm1(self.logTotal)

def failureProbabilityTerms(alpha, n, beta0, eps1, eps2, eps3):
	"""The three log-domain failure terms of the high-probability bound:

	ln(2m) - n (e1^2/4 - e1^3/6)
	ln C(m, beta0 n) - beta0 n e2^2/2
	ln C(m, (alpha-beta0) n) - (alpha-beta0) n e3^2/2

	beta0 = 0 means an empty mismatch set: the second term is -inf.
	"""
	_checkBeta0(alpha, beta0)
	if n < 1:
		raise DomainError(f"failureProbabilityTerms: n={n} must be positive.")
	if not (0.0 < eps1 <= 1.0):
		raise DomainError(f"failureProbabilityTerms: eps1={eps1} must be in (0, 1].")
	if not (eps2 > 0.0 and eps3 > 0.0):
		raise DomainError("failureProbabilityTerms: eps2 and eps3 must be positive.")
	m = alpha * n
	pS = beta0 * n
	pSbar = (alpha - beta0) * n
	t1 = math.log(2.0 * m) - n * (eps1 ** 2 / 4.0 - eps1 ** 3 / 6.0)
	if beta0 > 0.0:
		lr = pS * _logRatio(alpha, beta0)
		t2 = logBinomial(m, pS) - pS * eps2 ** 2 / 2.0
		r2 = lr - pS * eps2 ** 2 / 2.0
		t3 = logBinomial(m, pSbar) - pSbar * eps3 ** 2 / 2.0
		r3 = lr - pSbar * eps3 ** 2 / 2.0
	else:
		t2 = r2 = -math.inf
		t3 = r3 = -pSbar * eps3 ** 2 / 2.0
	exact = (t1, t2, t3)
	relaxed = (t1, r2, r3)
	return FailureTerms(exact=exact,
			    relaxed=relaxed,
			    logTotal=float(special.logsumexp(exact)),
			    logTotalRelaxed=float(special.logsumexp(relaxed)))

@dataclass(frozen=True)
class TheoryBounds:
	alpha: float
	n: int
	errRatio: float
	beta0: float
	beta0Status: str
	c2Asym: float		# None if beta0 saturated
	c2SmallErr: float
	alpha0: float
	upperRate: float	# 1 - c2Asym/n, None if c2Asym is None
	lowerRate: float
	failure: FailureTerms
	warnings: list = field(default_factory=list)

def computeBounds(alpha, n, errRatio, eps1=0.5, eps2=1.0, eps3=1.0, deltaBeta=0.0):
	"""Evaluate every theoretical quantity for one (alpha, n, rho) point.
	"""
	if n < 1:
		raise DomainError(f"computeBounds: n={n} must be positive.")
	warnings = []
	sol = solveBeta0(alpha, errRatio, deltaBeta)
	c2Small = c2SmallError(alpha)
	if c2Small <= 0.0:
		warnings.append(f"alpha={alpha} is not above alpha0={alpha0():.6f}: "
				f"the small-error contraction constant is not positive, "
				f"the linear convergence regime is not met.")
	if sol.beta0 < alpha:
		c2Asym = c2Asymptotic(alpha, sol.beta0)
		upperRate = 1.0 - c2Asym / n
		failure = failureProbabilityTerms(alpha, n, sol.beta0, eps1, eps2, eps3)
		if c2Asym <= 0.0 and c2Small > 0.0:
			warnings.append(f"The error ratio {errRatio} is too large: "
					f"the asymptotic contraction constant is not positive.")
	else:
		c2Asym = upperRate = None
		failure = FailureTerms(exact=(math.nan, ) * 3,
				       relaxed=(math.nan, ) * 3,
				       logTotal=math.nan,
				       logTotalRelaxed=math.nan)
		warnings.append(f"No beta0 root for error ratio {errRatio}: "
				f"every sign may be wrong, no contraction bound.")
	return TheoryBounds(alpha=alpha,
			    n=n,
			    errRatio=errRatio,
			    beta0=sol.beta0,
			    beta0Status=sol.status,
			    c2Asym=c2Asym,
			    c2SmallErr=c2Small,
			    alpha0=alpha0(),
			    upperRate=upperRate,
			    lowerRate=lowerBoundRate(alpha, n),
			    failure=failure,
			    warnings=warnings)
