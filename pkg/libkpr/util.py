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

import math
import numpy as np

__all__ = [
	"SEED_MASK",
	"sgn",
	"deriveSeed",
	"makeRng",
	"parseFloatList",
	"fmtFloat",
	"jsonFloat",
]

SEED_MASK = (1 << 64) - 1

def sgn(value):
	"""Sign with the convention sgn(0) = +1.
	Works on scalars and on numpy arrays.
	"""
	if np.ndim(value) == 0:
		return 1.0 if value >= 0 else -1.0
	return np.where(np.asarray(value) >= 0, 1.0, -1.0)

def deriveSeed(seed, *keys):
	"""Derive a 64 bit sub-seed from a seed and a path of integer keys.
	The derivation is SeedSequence(seed, spawn_key=keys), which is
	stable across platforms and numpy versions.
	"""
	ss = np.random.SeedSequence(int(seed) & SEED_MASK,
				    spawn_key=tuple(int(k) for k in keys))
	return int(ss.generate_state(1, np.uint64)[0])

def makeRng(seed):
	"""Counter based Philox stream for a seed.
	"""
	return np.random.Generator(np.random.Philox(int(seed) & SEED_MASK))

def parseFloatList(string):
	"""Convert a comma separated list of numbers to a list of floats.
	"""
	values = []
	for item in string.split(","):
		item = item.strip()
		if not item:
			continue
		try:
			values.append(float(item))
		except ValueError:
			raise ValueError(f"Invalid number '{item}' in list.")
	if not values:
		raise ValueError("Empty list.")
	return values

def fmtFloat(value):
	"""Shortest round-trip decimal representation of a float.
	"""
	return repr(float(value))

def jsonFloat(value):
	"""Float for JSON output. Non-finite values become None (null).
	"""
	if value is None:
		return None
	value = float(value)
	return value if math.isfinite(value) else None
