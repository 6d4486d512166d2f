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
from libkpr.model import DomainError, DegenerateError, DimensionError, asSignal
from libkpr.util import makeRng

import numpy as np

__all__ = [
	"InitConfig",
	"SpectralInit",
	"spectralInit",
]

@dataclass(frozen=True)
class InitConfig:
	maxPowerIters: int = 200
	tol: float = 1e-8
	seed: int = 0

	def __post_init__(self):
		if self.maxPowerIters < 1:
			raise DomainError("InitConfig: maxPowerIters must be at least 1.")
		if not (0.0 < self.tol < 1.0):
			raise DomainError("InitConfig: tol must be in (0, 1).")

@dataclass(frozen=True, eq=False)
class SpectralInit:
	x0: np.ndarray
	converged: bool
	sweeps: int
	eigenvalue: float
	residuals: list = field(default_factory=list)
	sweepResiduals: list = field(default_factory=list)

def spectralInit(pool, meas, cfg=InitConfig()):
	"""Spectral initializer.

	x0 = s * v, where v is the top eigenvector of
	D = (1/m) * sum_r y_r^2 a_r a_r^T found by power iteration and
	s = sqrt(mean(y^2)) estimates |x*|.

	D is never formed. Each sweep costs two passes over the pool.
	The returned vector is the iterate with the smallest Rayleigh residual
	|Dv - (v^T D v) v| seen so far. 'residuals' lists the residual of every
	accepted (non-worsening) sweep, 'sweepResiduals' the raw residual of
	the start vector and of every sweep.
	"""
	if meas.m != pool.m:
		raise DimensionError(f"{meas.m} measurements for a pool of {pool.m} vectors.")
	weights = meas.values ** 2
	meanSq = float(np.mean(weights))
	if not meanSq > 0.0:
		raise DegenerateError("All measurements are zero.")
	rows = pool.rows

	def applyD(v):
		return rows.T @ (weights * (rows @ v)) / pool.m

	def residual(v, u):
		lam = float(v @ u)
		return float(np.linalg.norm(u - lam * v)), lam

	v = makeRng(cfg.seed).standard_normal(pool.n)
	v /= np.linalg.norm(v)
	u = applyD(v)
	res, lam = residual(v, u)
	best, bestRes, bestLam = v, res, lam
	residuals = [res]
	sweepResiduals = [res]
	converged = False
	sweeps = 0
	while sweeps < cfg.maxPowerIters:
		sweeps += 1
		norm = np.linalg.norm(u)
		if not norm > 0.0:
			raise DegenerateError("Power iteration collapsed to zero.")
		vNew = u / norm
		change = min(np.linalg.norm(vNew - v), np.linalg.norm(vNew + v))
		v = vNew
		u = applyD(v)
		res, lam = residual(v, u)
		sweepResiduals.append(res)
		if res <= bestRes:
			best, bestRes, bestLam = v, res, lam
			residuals.append(res)
		if change < cfg.tol:
			converged = True
			break
	return SpectralInit(x0=asSignal(np.sqrt(meanSq) * best),
			    converged=converged,
			    sweeps=sweeps,
			    eigenvalue=bestLam,
			    residuals=residuals,
			    sweepResiduals=sweepResiduals)
