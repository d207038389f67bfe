# This file makes the fracvqa directory a Python package
