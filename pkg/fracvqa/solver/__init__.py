# This file makes the solver directory a Python package
