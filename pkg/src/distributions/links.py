import warnings

import numpy as np

from src.errors import DomainError


class Link:
    """Maps a natural-scale parameter ``theta`` to its linear predictor ``eta``.

    Subclasses implement the link ``g`` (``link``), its inverse (``inverse``)
    and ``dtheta_deta``, the derivative of the inverse link that the scoring
    updates need for the chain rule.
    """

    name: str = ""

    def link(self, theta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def inverse(self, eta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def dtheta_deta(self, eta: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


class Identity(Link):
    name = "identity"

    def link(self, theta):
        return np.asarray(theta, dtype=float)

    def inverse(self, eta):
        return np.asarray(eta, dtype=float)

    def dtheta_deta(self, eta):
        return np.ones_like(np.asarray(eta, dtype=float))


class Log(Link):
    name = "log"

    def link(self, theta):
        theta = np.asarray(theta, dtype=float)
        if np.any(~(theta > 0)):
            raise DomainError("log link requires theta > 0")
        return np.log(theta)

    def inverse(self, eta):
        with warnings.catch_warnings():  # overflow
            warnings.simplefilter("ignore")
            return np.exp(np.asarray(eta, dtype=float))

    def dtheta_deta(self, eta):
        return self.inverse(eta)


LINKS = {"identity": Identity(), "log": Log()}


def get_link(name: str) -> Link:
    try:
        return LINKS[name]
    except KeyError:
        raise DomainError(f"unknown link {name!r}") from None
