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

from libkpr.harness import (INITS, MODES, makeConfig, runVerifySuite,
			    simulate, sweep, sweepOrdering, writeCsv,
			    writeMeta, writeSweepCsv)
from libkpr.model import KprError, KprUsageError
from libkpr.parameters import (BOUNDS_EPSILONS, SIMULATE_DEFAULTS,
			       SWEEP_ALPHAS, VERIFY_SUITES)
from libkpr.theory import computeBounds
from libkpr.util import jsonFloat, parseFloatList
from libkpr.version import VERSION_STRING

import argparse
import json
import os
import sys

__all__ = [
	"EXIT_OK",
	"EXIT_VERIFY_FAILED",
	"EXIT_IO",
	"EXIT_USAGE",
	"boundsJson",
	"main",
]

EXIT_OK			= 0
EXIT_VERIFY_FAILED	= 1
EXIT_IO			= 2
EXIT_USAGE		= 64

class _ArgumentParser(argparse.ArgumentParser):
	def error(self, message):
		self.print_usage(sys.stderr)
		raise KprUsageError(message)

def argInt(string):
	string = string.strip()
	try:
		if string.startswith("0x"):
			return int(string[2:], 16)
		return int(string)
	except ValueError:
		raise argparse.ArgumentTypeError(f"invalid integer '{string}'")

def argFloatList(string):
	try:
		return parseFloatList(string)
	except ValueError as e:
		raise argparse.ArgumentTypeError(str(e))

def resolveSeed(seed):
	if seed is not None:
		return seed
	env = os.environ.get("KPR_SEED", "").strip()
	if env:
		try:
			return argInt(env)
		except argparse.ArgumentTypeError:
			raise KprUsageError(f"Invalid KPR_SEED value '{env}'.")
	return 0

def warn(message):
	print("WARNING: " + message, file=sys.stderr)

def boundsJson(bounds):
	"""Schema-stable JSON text of a TheoryBounds.
	"""
	obj = {
		"alpha"			: jsonFloat(bounds.alpha),
		"n"			: bounds.n,
		"err_ratio"		: jsonFloat(bounds.errRatio),
		"beta0"			: jsonFloat(bounds.beta0),
		"c2_asym"		: jsonFloat(bounds.c2Asym),
		"c2_small_err"		: jsonFloat(bounds.c2SmallErr),
		"alpha0"		: jsonFloat(bounds.alpha0),
		"upper_rate"		: jsonFloat(bounds.upperRate),
		"lower_rate"		: jsonFloat(bounds.lowerRate),
		"log_failure_terms"	: [ jsonFloat(t) for t in bounds.failure.exact ],
	}
	return json.dumps(obj, allow_nan=False)

def _experimentConfig(args, alpha=None, m=None, **kwargs):
	return makeConfig(args.n,
			  alpha=alpha,
			  m=m,
			  T=args.iterations,
			  trials=args.trials,
			  masterSeed=resolveSeed(args.seed),
			  init=args.init,
			  initFile=args.init_file,
			  signalFile=args.signal_file,
			  traceStride=args.trace_stride,
			  out=args.out,
			  jobs=args.jobs,
			  audit=args.audit,
			  **kwargs)

def _progress(args):
	if args.quiet:
		return None
	return lambda msg: print(msg, flush=True)

def cmdSimulate(args):
	if args.alpha is None and args.m is None:
		args.alpha = SIMULATE_DEFAULTS["alpha"]
	cfg = _experimentConfig(args, alpha=args.alpha, m=args.m, mode=args.mode)
	summary = simulate(cfg, progress=_progress(args))
	writeCsv(args.out, summary)
	writeMeta(args.out + ".meta.json", summary)
	if summary.auditFailures:
		warn(f"{summary.auditFailures} step(s) violated the squared error recursion.")
	if not args.quiet:
		c = "n/a" if summary.fittedC is None else f"{summary.fittedC:.6g}"
		print(f"median sq_dist: initial {summary.initialMedian:.6g}, "
		      f"final {summary.finalMedian:.6g}, fitted c = {c}")
		print(f"Wrote {args.out}")
	return EXIT_OK

def cmdSweep(args):
	cfg = _experimentConfig(args, alpha=args.alphas[0], mode="finite")
	results = sweep(cfg, args.alphas, progress=_progress(args))
	writeSweepCsv(args.out, results)
	for mode in MODES:
		pairs, decreasing = sweepOrdering(results, mode)
		order = ", ".join(f"alpha={a:g}: {v:.6g}" for a, v in pairs)
		print(f"{mode} final median sq_dist: {order}")
		if len(pairs) > 1 and not decreasing:
			warn(f"{mode}: the final error does not decrease with alpha.")
	if not args.quiet:
		print(f"Wrote {args.out}")
	return EXIT_OK

def cmdBounds(args):
	bounds = computeBounds(args.alpha, args.n, args.err_ratio,
			       eps1=args.eps1, eps2=args.eps2, eps3=args.eps3,
			       deltaBeta=args.delta_beta)
	for w in bounds.warnings:
		warn(w)
	text = boundsJson(bounds)
	if args.out:
		with open(args.out, "w", encoding="ascii", newline="\n") as f:
			f.write(text + "\n")
	else:
		print(text)
	return EXIT_OK

def _fmtReport(r):
	line = f"{r.name:<20} trials={r.trials:<7d} violations={r.violations:<6d} rate={r.empiricalRate:.4g}"
	if r.logBound is not None:
		line += f" log_bound={r.logBound:.4g}"
	if r.statistic is not None:
		line += f" stat={r.statistic:.6g}"
	if r.target is not None:
		line += f" target={r.target:.6g} tol={r.tolerance:.3g}"
	line += " PASS" if r.passed else " FAIL"
	if not r.halvesConsistent:
		line += " (halves inconsistent)"
	return line

def cmdVerify(args):
	overrides = {
		"n"		: args.n,
		"m"		: args.m,
		"p"		: args.p,
		"t"		: args.t,
		"eps"		: args.eps,
		"trials"	: args.trials,
		"alpha"		: args.alpha,
		"draws"		: args.draws,
		"relErr"	: args.rel_err,
	}
	reports = runVerifySuite(args.suite, resolveSeed(args.seed), overrides)
	for r in reports:
		print(_fmtReport(r))
	if all(r.passed for r in reports):
		return EXIT_OK
	return EXIT_VERIFY_FAILED

def _addExperimentArgs(p):
	p.add_argument("-n", "--n", type=argInt, default=SIMULATE_DEFAULTS["n"],
		       help="Signal dimension.")
	p.add_argument("-T", "--iterations", type=argInt, default=None,
		       help=f"Number of iterations. Default: {SIMULATE_DEFAULTS['iterationsPerDim']} * n")
	p.add_argument("-t", "--trials", type=argInt, default=SIMULATE_DEFAULTS["trials"],
		       help="Number of independent trials.")
	p.add_argument("-i", "--init", type=str, choices=INITS, default="spectral",
		       help="Initial estimate: spectral initializer, zero vector "
			    "or read from --init-file.")
	p.add_argument("--init-file", type=str,
		       help="Initial estimate file (raw little endian float64 or .npy).")
	p.add_argument("--signal-file", type=str,
		       help="Fixed ground truth signal file for all trials "
			    "(raw little endian float64 or .npy). "
			    "Default: a random unit norm signal per trial.")
	p.add_argument("--trace-stride", type=argInt, default=SIMULATE_DEFAULTS["traceStride"],
		       help="Record every k-th iteration (and the last one).")
	p.add_argument("-j", "--jobs", type=argInt, default=1,
		       help="Number of worker processes. Does not change the output.")
	p.add_argument("--audit", action="store_true",
		       help="Check every step against the squared error recursion.")
	p.add_argument("-o", "--out", type=str, required=True,
		       help="Output CSV file.")

def main(argv=None):
	try:
		p = _ArgumentParser(
			prog="kpr",
			description="Randomized Kaczmarz phase retrieval: "
				    "simulation, theoretical bounds and verification suites"
		)
		p.add_argument("--version", action="version", version=f"kpr {VERSION_STRING}")
		p.add_argument("-s", "--seed", type=argInt, default=None,
			       help="Master seed. Default: $KPR_SEED or 0.")
		p.add_argument("-q", "--quiet", action="store_true",
			       help="Suppress progress output.")
		# Also accepted after the command name.
		common = _ArgumentParser(add_help=False)
		common.add_argument("-s", "--seed", type=argInt, default=argparse.SUPPRESS,
				    help="Master seed. Default: $KPR_SEED or 0.")
		common.add_argument("-q", "--quiet", action="store_true", default=argparse.SUPPRESS,
				    help="Suppress progress output.")
		sub = p.add_subparsers(dest="command", metavar="COMMAND")
		sub.required = True

		s = sub.add_parser("simulate", parents=[common], help="Run seeded learning curve experiments.")
		g = s.add_mutually_exclusive_group()
		g.add_argument("-a", "--alpha", type=float,
			       help=f"Oversampling ratio m/n. Default: {SIMULATE_DEFAULTS['alpha']:g}")
		g.add_argument("-m", "--m", type=argInt,
			       help="Number of measurements.")
		s.add_argument("-M", "--mode", type=str, choices=MODES, default="finite",
			       help="Finite pool with data reuse, or a fresh vector per iteration.")
		_addExperimentArgs(s)
		s.set_defaults(func=cmdSimulate)

		s = sub.add_parser("sweep", parents=[common], help="Simulate both modes for a list of alphas.")
		s.add_argument("-A", "--alphas", type=argFloatList,
			       default=list(SWEEP_ALPHAS),
			       help=f"Comma separated oversampling ratios. "
				    f"Default: {','.join(f'{a:g}' for a in SWEEP_ALPHAS)}")
		_addExperimentArgs(s)
		s.set_defaults(func=cmdSweep)

		s = sub.add_parser("bounds", parents=[common], help="Evaluate the theoretical bounds as JSON.")
		s.add_argument("-a", "--alpha", type=float, required=True,
			       help="Oversampling ratio m/n.")
		s.add_argument("-n", "--n", type=argInt, default=SIMULATE_DEFAULTS["n"],
			       help="Signal dimension.")
		s.add_argument("-r", "--err-ratio", type=float, default=0.0,
			       help="Relative error |e|/|x*|.")
		for name in ("eps1", "eps2", "eps3"):
			s.add_argument(f"--{name}", type=float, default=BOUNDS_EPSILONS[name],
				       help=f"Deviation parameter of the failure terms. "
					    f"Default: {BOUNDS_EPSILONS[name]:g}")
		s.add_argument("--delta-beta", type=float, default=BOUNDS_EPSILONS["deltaBeta"],
			       help="Finite n slack added to beta0.")
		s.add_argument("-o", "--out", type=str,
			       help="Write the JSON to this file instead of stdout.")
		s.set_defaults(func=cmdBounds)

		s = sub.add_parser("verify", parents=[common], help="Run Monte Carlo verification suites.")
		s.add_argument("-S", "--suite", type=str,
			       choices=VERIFY_SUITES + ("all", ), default="all",
			       help="Verification suite.")
		s.add_argument("-n", "--n", type=argInt, help="Dimension override.")
		s.add_argument("-m", "--m", type=argInt, help="Sample count override.")
		s.add_argument("-p", "--p", type=argInt, help="Vector count override (lemma3).")
		s.add_argument("-t", "--t", type=argFloatList,
			       help="Comma separated fractions override (lemma4).")
		s.add_argument("-e", "--eps", type=float, help="Deviation override.")
		s.add_argument("-T", "--trials", type=argInt, help="Trial count override.")
		s.add_argument("-a", "--alpha", type=float, help="Oversampling ratio override.")
		s.add_argument("--draws", type=argInt, help="Draw count override (expectation).")
		s.add_argument("--rel-err", type=float, help="Relative error override (sandwich).")
		s.set_defaults(func=cmdVerify)

		args = p.parse_args(argv)
		return args.func(args)
	except KprError as e:
		print("ERROR: " + str(e), file=sys.stderr)
		return EXIT_USAGE
	except OSError as e:
		print("ERROR: " + str(e), file=sys.stderr)
		return EXIT_IO
