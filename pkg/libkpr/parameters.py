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

__all__ = [
	"VERIFY_PARAMETERS",
	"VERIFY_SUITES",
	"SWEEP_ALPHAS",
	"BOUNDS_EPSILONS",
	"SIMULATE_DEFAULTS",
]

VERIFY_PARAMETERS = {
	"lemma2" : {
		"n"		: 10000,
		"trials"	: 10000,
		"eps"		: 0.5,
	},
	"lemma3" : {
		"n"		: 64,
		"p"		: 512,
		"trials"	: 2000,
		"eps"		: 0.5,
	},
	"lemma4" : {
		"m"		: 100000,
		"t"		: (0.1, 0.5, 1.0),
		"trials"	: 50,
	},
	"step" : {
		"n"		: 16,
		"alpha"		: 6.0,
		"trials"	: 10000,
	},
	"expectation" : {
		"n"		: 8,
		"m"		: 40,
		"trials"	: 20,
		"draws"		: 100000,
	},
	"sandwich" : {
		"n"		: 256,
		"alpha"		: 12.0,
		"trials"	: 200,
		"relErr"	: 1e-3,
	},
}

VERIFY_SUITES = tuple(VERIFY_PARAMETERS.keys())

SWEEP_ALPHAS = (6.0, 8.0, 12.0)

BOUNDS_EPSILONS = {
	"eps1"		: 0.5,
	"eps2"		: 1.0,
	"eps3"		: 1.0,
	"deltaBeta"	: 0.0,
}

SIMULATE_DEFAULTS = {
	"n"		: 256,
	"alpha"		: 6.0,
	"trials"	: 20,
	"traceStride"	: 1,
	"iterationsPerDim" : 40,
}
