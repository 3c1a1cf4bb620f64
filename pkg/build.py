#   -*- coding: utf-8 -*-
from pybuilder.core import use_plugin, init

use_plugin("python.core")
use_plugin("python.unittest")
use_plugin("python.coverage")
use_plugin("python.distutils")


name = "jrm-lab"
version = "0.1.0"
summary = "Joint reconstruction of repeated objects with coupled flow matching"
default_task = "publish"


@init
def set_properties(project):
    project.depends_on("numpy", ">=1.24")
    project.depends_on("scipy", ">=1.10")
    project.depends_on("torch", ">=2.1")
    project.depends_on("matplotlib", ">=3.7")
    project.build_depends_on("freezegun", ">=1.5")
    project.set_property("coverage_break_build", False)
    project.set_property("distutils_console_scripts", ["jrm-lab = jrm_lab.cli:main"])
