"""coopsense: carrier-sense ad hoc network simulator and analytical toolkit
for reactive coded cooperation."""

__version__ = "0.1.0"
