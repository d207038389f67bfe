# This file makes the storage directory a Python package
