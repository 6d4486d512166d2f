#!/usr/bin/env python3

import os
basedir = os.path.abspath(os.path.dirname(__file__))

from libkpr.version import VERSION_STRING
from setuptools import setup

with open(os.path.join(basedir, "README.rst"), "rb") as fd:
	readmeText = fd.read().decode("UTF-8")

setup(
	name		= "kpr",
	version		= VERSION_STRING,
	description	= "Randomized Kaczmarz phase retrieval: simulation, bounds and verification",
	license		= "GNU General Public License v2 or later",
	author		= "The kpr authors",
	python_requires = ">=3.8",
	install_requires = [
		"numpy>=1.17",
		"scipy>=1.4",
	],
	scripts		= [
		"kpr",
	],
	packages	= [
		"libkpr",
	],
	keywords	= "phase retrieval Kaczmarz random matrix Monte Carlo",
	classifiers	= [
		"Development Status :: 4 - Beta",
		"Environment :: Console",
		"Intended Audience :: Education",
		"Intended Audience :: Science/Research",
		"License :: OSI Approved :: GNU General Public License v2 or later (GPLv2+)",
		"Operating System :: OS Independent",
		"Programming Language :: Python",
		"Programming Language :: Python :: 3",
		"Topic :: Education",
		"Topic :: Scientific/Engineering :: Mathematics",
	],
	long_description=readmeText,
	long_description_content_type="text/x-rst",
)

# vim: ts=8 sw=8 noexpandtab
