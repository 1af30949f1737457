"""Geometric nonlinear dynamic inversion for rigid-body attitude control on SO(3).

Modules: ``so3`` (rotation kernel), ``lti`` (state-space blocks), ``lmi``
(certificates and a small barrier solver), ``plant``, ``controllers``,
``actuation``, ``reference``, ``config``, ``sim`` and ``cli``.
"""

__version__ = "0.1.0"
