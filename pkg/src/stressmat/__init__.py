"""stressmat: timed mental-arithmetic stress protocol with ECG heart-rate analysis.

The package splits into:

- ``quiz``: four-level arithmetic question engine (deterministic per seed)
- ``session``: the phased study state machine and its event log
- ``ecg``: filtering, R-peak detection, heart rate, synthetic oracle
- ``storage`` / ``service``: on-disk session store and the HTTP/WS service
- ``analysis`` / ``synthsession`` / ``cli``: offline reporting tools
"""

__version__ = "0.1.0"
