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

from dataclasses import asdict, dataclass, field, replace
from libkpr.checks import (checkExpectationOracle, checkExtremalEigs,
			   checkNormConcentration, checkOrderStats,
			   checkRateSandwich, checkStepIdentities)
from libkpr.kaczmarz import FiniteMode, OnlineMode, run
from libkpr.model import (DimensionError, KprUsageError, generatePool,
			  loadSignal, measure, randomSignal)
from libkpr.parameters import VERIFY_PARAMETERS, VERIFY_SUITES
from libkpr.spectral import InitConfig, spectralInit
from libkpr.util import deriveSeed, fmtFloat, jsonFloat
from libkpr.version import VERSION_STRING

import json
import multiprocessing
import numpy as np
import time

__all__ = [
	"MODES",
	"INITS",
	"CSV_HEADER",
	"ExperimentConfig",
	"RunSummary",
	"makeConfig",
	"trialSeed",
	"runTrial",
	"aggregate",
	"fitDecay",
	"simulate",
	"sweep",
	"sweepOrdering",
	"formatCsv",
	"formatSweepCsv",
	"writeCsv",
	"writeSweepCsv",
	"writeMeta",
	"verifyParameters",
	"runVerifySuite",
]

MODES = ("finite", "online")
INITS = ("spectral", "zero", "given")

CSV_HEADER = "iter,t_norm,mean_sq_dist,median_sq_dist,p10_sq_dist,p90_sq_dist"

# Sub-stream keys below a trial seed.
SIGNAL_KEY = 0
POOL_KEY = 1
INIT_KEY = 2
RUN_KEY = 3
ONLINE_KEY = 4

@dataclass(frozen=True)
class ExperimentConfig:
	n: int
	m: int
	mode: str = "finite"
	T: int = None			# None: 40 n
	trials: int = 1
	masterSeed: int = 0
	init: str = "spectral"
	initFile: str = None
	signalFile: str = None
	traceStride: int = 1
	out: str = None
	jobs: int = 1
	audit: bool = False

	def __post_init__(self):
		if self.n < 1:
			raise KprUsageError(f"Invalid dimension n={self.n}.")
		if self.m < 1:
			raise KprUsageError(f"Invalid measurement count m={self.m}.")
		if self.mode not in MODES:
			raise KprUsageError(f"Invalid mode '{self.mode}'. "
					    f"Expected one of: {', '.join(MODES)}.")
		if self.T is None:
			object.__setattr__(self, "T", 40 * self.n)
		if self.T < 1:
			raise KprUsageError(f"Invalid iteration count T={self.T}.")
		if self.trials < 1:
			raise KprUsageError(f"Invalid trial count {self.trials}.")
		if self.init not in INITS:
			raise KprUsageError(f"Invalid init '{self.init}'. "
					    f"Expected one of: {', '.join(INITS)}.")
		if self.init == "given" and not self.initFile:
			raise KprUsageError("init 'given' requires an init file.")
		if self.traceStride < 1:
			raise KprUsageError(f"Invalid trace stride {self.traceStride}.")
		if self.jobs < 1:
			raise KprUsageError(f"Invalid job count {self.jobs}.")

	@property
	def alpha(self):
		return self.m / self.n

	@property
	def nrRecords(self):
		return -(-self.T // self.traceStride) + 1

	def toDict(self):
		d = asdict(self)
		d["alpha"] = self.alpha
		return d

def makeConfig(n, alpha=None, m=None, **kwargs):
	"""Build an ExperimentConfig from either alpha (m = round(alpha n)) or m.
	"""
	if (alpha is None) == (m is None):
		raise KprUsageError("Exactly one of alpha and m must be given.")
	if m is None:
		if not alpha > 0.0:
			raise KprUsageError(f"Invalid oversampling ratio alpha={alpha}.")
		m = int(round(alpha * n))
	return ExperimentConfig(n=n, m=m, **kwargs)

def trialSeed(masterSeed, trialIndex):
	return deriveSeed(masterSeed, trialIndex)

def runTrial(cfg, trialIndex, xStar=None, x0=None):
	"""One seeded trial. The signal, the pool and x0 depend on the
	trial seed only, so both modes see the same instance.
	"""
	seed = trialSeed(cfg.masterSeed, trialIndex)
	if xStar is None:
		xStar = randomSignal(cfg.n, deriveSeed(seed, SIGNAL_KEY))
	pool = generatePool(cfg.n, cfg.m, deriveSeed(seed, POOL_KEY))
	meas = measure(pool, xStar)
	if cfg.init == "spectral":
		x0 = spectralInit(pool, meas,
				  InitConfig(seed=deriveSeed(seed, INIT_KEY))).x0
	elif cfg.init == "zero":
		x0 = np.zeros(cfg.n)
	elif x0 is None:
		raise KprUsageError("init 'given' without an initial estimate.")
	if cfg.mode == "finite":
		mode = FiniteMode(pool, meas)
	else:
		mode = OnlineMode(xStar, seed=deriveSeed(seed, ONLINE_KEY))
	return run(x0, xStar, mode, cfg.T,
		   seed=deriveSeed(seed, RUN_KEY),
		   traceStride=cfg.traceStride,
		   audit=cfg.audit)

@dataclass(frozen=True, eq=False)
class RunSummary:
	config: ExperimentConfig
	iters: np.ndarray
	mean: np.ndarray
	median: np.ndarray
	p10: np.ndarray
	p90: np.ndarray
	finalSqDist: np.ndarray		# per trial, ordered by trial index
	wallTime: float = 0.0
	fittedC: float = None
	auditFailures: int = 0
	version: str = VERSION_STRING
	meta: dict = field(default_factory=dict)

	@property
	def tNorm(self):
		return self.iters / self.config.n

	@property
	def initialMedian(self):
		return float(self.median[0])

	@property
	def finalMedian(self):
		return float(self.median[-1])

def aggregate(traces):
	"""Per recorded iteration statistics across trials.
	Returns (iters, mean, median, p10, p90).
	"""
	if not traces:
		raise DimensionError("No traces to aggregate.")
	iters = traces[0].iters
	for trace in traces:
		if not np.array_equal(trace.iters, iters):
			raise DimensionError("Traces were recorded at different iterations.")
	data = np.vstack([trace.sqDist for trace in traces])
	p10, median, p90 = np.percentile(data, (10.0, 50.0, 90.0), axis=0)
	return iters, np.mean(data, axis=0), median, p10, p90

def fitDecay(iters, values, n):
	"""Least squares fit of log(values) over the last half of the
	recorded iterations. Returns c with slope = -c/n, or None if fewer
	than two positive points remain.
	"""
	iters = np.asarray(iters, dtype=np.float64)
	values = np.asarray(values, dtype=np.float64)
	half = iters.size // 2
	it, v = iters[half:], values[half:]
	keep = v > 0.0
	if np.count_nonzero(keep) < 2:
		return None
	slope = np.polyfit(it[keep], np.log(v[keep]), 1)[0]
	return float(-slope * n)

def _loadInputs(cfg):
	xStar = x0 = None
	if cfg.signalFile:
		xStar = loadSignal(cfg.signalFile, cfg.n)
	if cfg.init == "given":
		x0 = loadSignal(cfg.initFile, cfg.n)
	return xStar, x0

def simulate(cfg, progress=None):
	"""Run cfg.trials independent trials and aggregate them.
	The result depends on (cfg, cfg.masterSeed) only, not on cfg.jobs.
	'progress' is an optional callable receiving status strings.
	"""
	xStar, x0 = _loadInputs(cfg)
	start = time.monotonic()
	params = [ (cfg, i, xStar, x0) for i in range(cfg.trials) ]
	if progress:
		progress(f"Running {cfg.trials} {cfg.mode} trial(s): "
			 f"n={cfg.n} m={cfg.m} alpha={cfg.alpha:g} T={cfg.T}")
	if cfg.jobs > 1 and cfg.trials > 1:
		with multiprocessing.Pool(min(cfg.jobs, cfg.trials)) as p:
			traces = p.starmap(runTrial, params)
	else:
		traces = [ runTrial(*param) for param in params ]
	wallTime = time.monotonic() - start
	iters, mean, median, p10, p90 = aggregate(traces)
	return RunSummary(config=cfg,
			  iters=iters,
			  mean=mean,
			  median=median,
			  p10=p10,
			  p90=p90,
			  finalSqDist=np.array([ t.sqDist[-1] for t in traces ]),
			  wallTime=wallTime,
			  fittedC=fitDecay(iters, median, cfg.n),
			  auditFailures=sum(t.auditFailures for t in traces))

def sweep(cfg, alphas, modes=MODES, progress=None):
	"""simulate() for every alpha and mode. Returns a list of
	(alpha, mode, RunSummary) in the order of 'alphas' and 'modes'.
	"""
	alphas = list(alphas)
	if not alphas:
		raise KprUsageError("Empty alpha list.")
	results = []
	for alpha in alphas:
		for mode in modes:
			sub = makeConfig(cfg.n, alpha=alpha,
					 **{ k: v for k, v in asdict(cfg).items()
					     if k not in ("n", "m") })
			sub = replace(sub, mode=mode)
			results.append((alpha, mode, simulate(sub, progress=progress)))
	return results

def sweepOrdering(results, mode="finite"):
	"""(alpha, final median) pairs for one mode, and whether the final
	median strictly decreases with alpha.
	"""
	pairs = sorted((alpha, s.finalMedian) for alpha, m, s in results if m == mode)
	decreasing = all(b[1] < a[1] for a, b in zip(pairs, pairs[1:]))
	return pairs, decreasing

def _csvRows(summary):
	n = summary.config.n
	for i in range(summary.iters.size):
		it = int(summary.iters[i])
		yield ",".join((str(it),
				fmtFloat(it / n),
				fmtFloat(summary.mean[i]),
				fmtFloat(summary.median[i]),
				fmtFloat(summary.p10[i]),
				fmtFloat(summary.p90[i])))

def formatCsv(summary):
	return "\n".join([CSV_HEADER] + list(_csvRows(summary))) + "\n"

def formatSweepCsv(results):
	lines = ["alpha,mode," + CSV_HEADER]
	for alpha, mode, summary in results:
		prefix = f"{fmtFloat(alpha)},{mode},"
		lines.extend(prefix + row for row in _csvRows(summary))
	return "\n".join(lines) + "\n"

def _writeText(path, text):
	with open(path, "w", encoding="ascii", newline="\n") as f:
		f.write(text)

def writeCsv(path, summary):
	_writeText(path, formatCsv(summary))

def writeSweepCsv(path, results):
	_writeText(path, formatSweepCsv(results))

def writeMeta(path, summary):
	"""Write the metadata sidecar (config echo, version, timing, fit).
	"""
	cfg = summary.config
	meta = {
		"version"		: summary.version,
		"config"		: cfg.toDict(),
		"wall_time"		: jsonFloat(summary.wallTime),
		"fitted_c"		: jsonFloat(summary.fittedC),
		"initial_median"	: jsonFloat(summary.initialMedian),
		"final_median"		: jsonFloat(summary.finalMedian),
		"audit_failures"	: summary.auditFailures,
	}
	meta.update(summary.meta)
	_writeText(path, json.dumps(meta, indent=1, allow_nan=False) + "\n")

def verifyParameters(suite, overrides=None):
	"""The preset parameters of a suite, with the given non-None
	overrides applied to the keys the suite knows.
	"""
	if suite not in VERIFY_PARAMETERS:
		raise KprUsageError(f"Unknown verification suite '{suite}'. "
				    f"Expected one of: {', '.join(VERIFY_SUITES)}, all.")
	params = dict(VERIFY_PARAMETERS[suite])
	for key, value in (overrides or {}).items():
		if value is not None and key in params:
			params[key] = value
	return params

def runVerifySuite(suite, seed, overrides=None):
	"""Run one verification suite, or all of them for suite 'all'.
	Returns the list of reports. Every suite draws from its own
	sub-seed, so 'all' reproduces the individual suites.
	"""
	if suite == "all":
		reports = []
		for name in VERIFY_SUITES:
			reports.extend(runVerifySuite(name, seed, overrides))
		return reports
	p = verifyParameters(suite, overrides)
	suiteSeed = deriveSeed(seed, VERIFY_SUITES.index(suite))
	if suite == "lemma2":
		return [ checkNormConcentration(p["n"], p["trials"], p["eps"], suiteSeed) ]
	if suite == "lemma3":
		maxReport, minReport = checkExtremalEigs(p["n"], p["p"], p["trials"], p["eps"],
							 suiteSeed, wantMin=p["p"] >= p["n"])
		return [ r for r in (maxReport, minReport) if r is not None ]
	if suite == "lemma4":
		ts = p["t"]
		if not isinstance(ts, (list, tuple)):
			ts = (ts, )
		return [ checkOrderStats(p["m"], t, p["trials"], deriveSeed(suiteSeed, i))
			 for i, t in enumerate(ts) ]
	if suite == "step":
		return [ checkStepIdentities(p["n"], p["alpha"], p["trials"], suiteSeed) ]
	if suite == "expectation":
		return [ checkExpectationOracle(p["n"], p["m"], p["trials"], p["draws"], suiteSeed) ]
	if suite == "sandwich":
		return [ checkRateSandwich(p["n"], p["alpha"], p["trials"], p["relErr"], suiteSeed) ]
	assert False
