"""scikit-learn style wrapper around the change of unknown."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .catalog import lookup
from .transform import GridSpec, build_transform, g_to_beta


class ChangeOfUnknown(BaseEstimator, TransformerMixin):
    """Map values of ``u`` to ``v = Psi(u)`` and back with ``H``.

    ``nonlinearity`` is a catalog name (``"6"``, ``"linear"``, ``"bounded"``
    ...) or a :class:`~plaplab.nonlinearity.Nonlinearity` in either form.
    ``fit`` ignores its data and builds the tables; ``transform`` applies
    ``Psi`` elementwise and ``inverse_transform`` applies ``H``.
    """

    def __init__(self, nonlinearity="linear", p=2.0, grid_size=10_000):
        self.nonlinearity = nonlinearity
        self.p = p
        self.grid_size = grid_size

    def fit(self, X=None, y=None):
        """Build the tables.

        Args:
            X: ignored
            y: ignored

        Returns:
            self
        """
        nl = self.nonlinearity
        if isinstance(nl, (str, int)):
            nl = lookup(nl, self.p).beta
        grid = GridSpec(n=int(self.grid_size))
        self.tables_ = build_transform(nl, self.p, grid) if nl.is_beta else g_to_beta(nl, self.p, grid)
        self.L_ = self.tables_.L
        self.Lambda_ = self.tables_.Lambda
        return self

    def transform(self, X):
        """``Psi`` applied to every entry of ``X``."""
        check_is_fitted(self, "tables_")
        X = np.asarray(X, dtype=float)
        return self.tables_.psi_at(X)

    def inverse_transform(self, X):
        """``H`` applied to every entry of ``X``."""
        check_is_fitted(self, "tables_")
        X = np.asarray(X, dtype=float)
        return self.tables_.H(X)
