"""Near-field localization and sensing toolkit for large apertures.

Modules: :mod:`geometry` (arrays, regions, Fraunhofer diagnostics),
:mod:`channel` (spherical-wave steering, masks, RIS cascades),
:mod:`beamforming` (focusing and beam squint), :mod:`fisher` (PEB),
:mod:`estimators` (MUSIC, ML, TDOA, RIS), :mod:`sensing` (bistatic imaging)
and :mod:`config` / :mod:`runners` / :mod:`cli` (scenario files and CLI).
"""

__version__ = "0.1.0"
