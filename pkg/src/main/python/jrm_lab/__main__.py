"""python -m jrm_lab"""
import sys

from jrm_lab.cli import main

sys.exit(main())
